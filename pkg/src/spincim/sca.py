"""Side-channel attacker model over (duration, energy) observations.

The attacker is a Gaussian nearest-centroid classifier with a shared diagonal
covariance: the weakest standard attacker, enough to quantify how much the
enlarged operation set and composite op+write windows degrade classification,
and to run the Hamming-weight write attack.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import analytic
from .cost import (
    CostTable,
    ExecutionTrace,
    OpClass,
    PowerTrace,
    cost_of,
    single_word_write_event,
)
from .errors import MalformedTrace, MissingClass

STANDARD_CLASSES = ("Read1", "Read0", "Write1", "Write0")
ENHANCED_CLASSES = tuple(op.value for op in OpClass)

# relative floor keeps zero-variance training sets classifiable and preserves
# scale consistency (the floor tracks the data scale)
_SIGMA_FLOOR_REL = 1e-9


@dataclass(frozen=True)
class LabeledObservation:
    duration_ns: float
    energy_fj: float
    label: str


class Dataset:
    """Immutable feature matrix (duration, energy) with string labels."""

    def __init__(self, features: np.ndarray, labels: Sequence[str]):
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[1] != 2:
            raise ValueError("features must be an (N, 2) array")
        if len(labels) != len(features):
            raise ValueError("labels and features must have equal length")
        if not np.isfinite(features).all():
            raise ValueError("features must be finite")
        self.features = features
        self.features.setflags(write=False)
        self.labels = tuple(labels)

    @classmethod
    def from_observations(cls, observations: Iterable[LabeledObservation]) -> "Dataset":
        obs = list(observations)
        feats = np.array([[o.duration_ns, o.energy_fj] for o in obs], dtype=float)
        return cls(feats.reshape(-1, 2), [o.label for o in obs])

    def __len__(self) -> int:
        return len(self.labels)

    def to_csv(self, target) -> None:
        import csv

        own = isinstance(target, (str, bytes))
        handle = open(target, "w", newline="") if own else target
        try:
            writer = csv.writer(handle)
            writer.writerow(["duration_ns", "energy_fJ", "label"])
            for (d, e), label in zip(self.features, self.labels):
                writer.writerow([repr(float(d)), repr(float(e)), label])
        finally:
            if own:
                handle.close()


def class_centroid(name: str, table: CostTable, enhanced: bool) -> tuple[float, float]:
    cost = cost_of(OpClass(name), table, enhanced)
    return (cost.delay_ns, cost.energy_fj)


def synthesize_dataset(
    classes: Sequence[str],
    table: CostTable,
    enhanced: bool,
    samples_per_class: int,
    sigma_duration: float,
    sigma_energy: float,
    rng: np.random.Generator,
) -> Dataset:
    """Noisy observations around the cost-table centroids, class by class."""
    feats = []
    labels = []
    for name in classes:
        centre = class_centroid(name, table, enhanced)
        noise = rng.normal(
            0.0, [sigma_duration, sigma_energy], (samples_per_class, 2)
        )
        feats.append(np.asarray(centre) + noise)
        labels.extend([name] * samples_per_class)
    return Dataset(np.vstack(feats), labels)


@dataclass
class CentroidClassifier:
    classes: tuple[str, ...]
    centroids: np.ndarray          # (C, 2) per-class feature means
    sigma: np.ndarray              # (2,) shared diagonal deviations

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Index of the nearest centroid under the shared diagonal metric."""
        features = np.atleast_2d(np.asarray(features, dtype=float))
        diff = (features[:, None, :] - self.centroids[None, :, :]) / self.sigma
        return np.argmin((diff**2).sum(axis=2), axis=1)

    def predict_labels(self, features: np.ndarray) -> list[str]:
        return [self.classes[i] for i in self.predict(features)]

    def min_centroid_distance(self) -> tuple[float, tuple[str, str]]:
        """Smallest pairwise Euclidean distance between class centroids."""
        best = (math.inf, (self.classes[0], self.classes[0]))
        for i in range(len(self.classes)):
            for j in range(i + 1, len(self.classes)):
                d = float(np.linalg.norm(self.centroids[i] - self.centroids[j]))
                if d < best[0]:
                    best = (d, (self.classes[i], self.classes[j]))
        return best

    def ill_separated_pairs(self, min_distance: float) -> list[tuple[str, str, float]]:
        """Class pairs whose centroids sit closer than ``min_distance``."""
        out = []
        for i in range(len(self.classes)):
            for j in range(i + 1, len(self.classes)):
                d = float(np.linalg.norm(self.centroids[i] - self.centroids[j]))
                if d < min_distance:
                    out.append((self.classes[i], self.classes[j], d))
        return out


def train(
    dataset: Dataset, classes: Sequence[str] | None = None
) -> CentroidClassifier:
    """Fit per-class means and the pooled diagonal deviation.

    Raises MissingClass if an expected class has no observation.
    """
    present = sorted(set(dataset.labels))
    expected = sorted(classes) if classes is not None else present
    missing = [c for c in expected if c not in present]
    if missing or not expected:
        raise MissingClass(f"no observations for classes: {missing or expected}")
    labels = np.asarray(dataset.labels)
    rows = []
    for c in expected:
        sub = dataset.features[labels == c]
        # identical observations average to themselves exactly
        rows.append(np.where(sub.min(0) == sub.max(0), sub[0], sub.mean(0)))
    centroids = np.vstack(rows)
    lookup = {c: k for k, c in enumerate(expected)}
    resid = dataset.features - centroids[[lookup[l] for l in dataset.labels]]
    dof = max(len(dataset) - len(expected), 1)
    var = (resid**2).sum(axis=0) / dof
    spread = dataset.features.max(axis=0) - dataset.features.min(axis=0)
    floor = _SIGMA_FLOOR_REL * np.where(
        spread > 0, spread, np.maximum(np.abs(dataset.features).max(axis=0), 1.0)
    )
    sigma = np.maximum(np.sqrt(var), floor)
    return CentroidClassifier(tuple(expected), centroids, sigma)


def confusion_matrix(
    classifier: CentroidClassifier, test_set: Dataset
) -> tuple[np.ndarray, float]:
    """Row-stochastic confusion matrix over true classes, plus accuracy."""
    lookup = {c: k for k, c in enumerate(classifier.classes)}
    try:
        truth = np.asarray([lookup[l] for l in test_set.labels])
    except KeyError as exc:
        raise ValueError(f"test label {exc} unknown to the classifier") from exc
    pred = classifier.predict(test_set.features)
    n_classes = len(classifier.classes)
    matrix = np.zeros((n_classes, n_classes), dtype=float)
    for t, p in zip(truth, pred):
        matrix[t, p] += 1.0
    row_sums = matrix.sum(axis=1, keepdims=True)
    accuracy = float(np.trace(matrix) / max(len(test_set), 1))
    with np.errstate(invalid="ignore"):
        matrix = np.where(row_sums > 0, matrix / row_sums, 0.0)
    return matrix, accuracy


def hamming_weight_attack(
    trace: ExecutionTrace | PowerTrace,
    width: int,
    table: CostTable | None = None,
    enhanced: bool = False,
) -> int:
    """Recover the count of 1 bits in a written word from its energy.

    The trace must hold exactly one word write recorded in bit-resolved
    accounting mode; a power trace is integrated in full instead.
    """
    table = table or CostTable()
    if isinstance(trace, ExecutionTrace):
        energy = single_word_write_event(trace).energy_fj
    elif isinstance(trace, PowerTrace):
        energy = trace.integrate()
    else:
        raise MalformedTrace(f"unsupported trace type {type(trace).__name__}")
    e1 = cost_of(OpClass.WRITE1, table, enhanced).energy_fj
    e0 = cost_of(OpClass.WRITE0, table, enhanced).energy_fj
    estimate = math.floor((energy - width * e0) / (e1 - e0) + 0.5)
    return min(max(estimate, 0), width)


def composite_window(table: CostTable | None = None) -> tuple[float, float]:
    """Feature point of an in-memory add fused with a following Write 0."""
    table = table or CostTable()
    add = cost_of(OpClass.CIM_ADD, table, enhanced=True)
    w0 = cost_of(OpClass.WRITE0, table, enhanced=True)
    return (add.delay_ns + w0.delay_ns, add.energy_fj + w0.energy_fj)


@dataclass(frozen=True)
class ObscuringResult:
    sigma_duration: float
    sigma_energy: float
    samples: int
    labeled_write1: int
    rate: float
    wilson_95_ci: tuple[float, float]

    def as_dict(self) -> dict:
        return {
            "sigma_duration": self.sigma_duration,
            "sigma_energy": self.sigma_energy,
            "samples": self.samples,
            "labeled_write1": self.labeled_write1,
            "rate": self.rate,
            "wilson_95_ci": list(self.wilson_95_ci),
        }


def obscuring_experiment(
    noise_levels: Sequence[tuple[float, float]],
    samples: int,
    seed: int,
    table: CostTable | None = None,
) -> list[ObscuringResult]:
    """Rate at which a {Cim op + Write 0} window is read as a Write 1.

    For each (sigma_duration, sigma_energy) level, trains the standard
    four-class attacker on noisy observations and classifies equally noisy
    composite windows.
    """
    table = table or CostTable()
    composite = np.asarray(composite_window(table))
    results = []
    for level_idx, (sig_d, sig_e) in enumerate(noise_levels):
        rng = np.random.default_rng((seed, level_idx))
        train_set = synthesize_dataset(
            STANDARD_CLASSES, table, False, samples, sig_d, sig_e, rng
        )
        classifier = train(train_set, STANDARD_CLASSES)
        windows = composite + rng.normal(0.0, [sig_d, sig_e], (samples, 2))
        pred = classifier.predict(windows)
        write1 = classifier.classes.index("Write1")
        hits = int((pred == write1).sum())
        results.append(
            ObscuringResult(
                sigma_duration=sig_d,
                sigma_energy=sig_e,
                samples=samples,
                labeled_write1=hits,
                rate=hits / samples,
                wilson_95_ci=analytic.wilson_interval(hits, samples),
            )
        )
    return results
