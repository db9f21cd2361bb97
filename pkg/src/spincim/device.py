"""Stochastic behavioral model of MTJ bit-cell and cell-pair sense currents.

Currents are in microamps, temperatures in degrees Celsius. A cell stores one
bit as its free-layer orientation: the parallel (low resistance, high sense
current) state encodes logic 1, the anti-parallel state logic 0. Two-cell
senses see the summed bit-line current, which takes one of three levels
depending on how many of the two cells are parallel.

All sampling is driven by an explicitly passed numpy Generator; there is no
module-level random state. Monte Carlo callers derive one independent stream
per trial with :func:`trial_rng` so results are reproducible under any degree
of parallelism.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from statistics import NormalDist
from typing import Mapping, Union

import numpy as np

from .errors import NonConvergence

AMBIENT_TEMP_C = 20.0

# Shipped calibration: sigma inverts the natural-condition failure rate of the
# upper pair margin (Q(1.25/sigma) = 0.005); the collapse parameters are the
# least-squares fit of the closed-form failure rates to the heated targets.
# calibrate() with default targets reproduces these to well within 1%.
DEFAULT_SIGMA = 0.485281
DEFAULT_COLLAPSE_A = -9.09752
DEFAULT_COLLAPSE_B = 0.0733226


class MtjState(Enum):
    """Free-layer orientation of one cell; P encodes logic 1, AP logic 0."""

    AP = "AP"
    P = "P"

    @classmethod
    def from_bit(cls, bit: int) -> "MtjState":
        return cls.P if bit else cls.AP

    @property
    def bit(self) -> int:
        return 1 if self is MtjState.P else 0


PairState = tuple[MtjState, MtjState]

PAIR_NAMES = ("AP,AP", "AP,P", "P,P")


def parse_pair(name: str) -> PairState:
    """Parse a pair name like ``"AP,P"`` into a state tuple."""
    parts = [p.strip() for p in name.split(",")]
    if len(parts) != 2:
        raise ValueError(f"not a pair name: {name!r}")
    return MtjState(parts[0]), MtjState(parts[1])


def pair_index(states: PairState) -> int:
    """Number of parallel cells in the pair: 0, 1 or 2 (orders equivalent)."""
    return states[0].bit + states[1].bit


@dataclass(frozen=True)
class CurrentLevelModel:
    """Nominal sense-current levels and shared Gaussian sense noise.

    Pair levels are independent configuration, not sums of the single-cell
    levels: the measured pair margins (3.2 and 2.5 uA by default) are smaller
    than linear current summation would give.
    """

    mu_ap: float = 10.0
    mu_p: float = 15.5
    mu_ap_ap: float = 17.0
    mu_ap_p: float = 20.2
    mu_p_p: float = 22.7
    sigma: float = DEFAULT_SIGMA
    ambient_temp: float = AMBIENT_TEMP_C

    def __post_init__(self):
        if not self.mu_ap < self.mu_p:
            raise ValueError("single levels must satisfy mu_ap < mu_p")
        if not self.mu_ap_ap < self.mu_ap_p < self.mu_p_p:
            raise ValueError("pair levels must be strictly increasing")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @property
    def single_levels(self) -> Mapping[MtjState, float]:
        return {MtjState.AP: self.mu_ap, MtjState.P: self.mu_p}

    @property
    def pair_ladder(self) -> tuple[float, float, float]:
        """Pair level means indexed by the number of parallel cells."""
        return (self.mu_ap_ap, self.mu_ap_p, self.mu_p_p)

    @property
    def pair_levels(self) -> Mapping[str, float]:
        return dict(zip(PAIR_NAMES, self.pair_ladder))

    def single_level(self, state: MtjState) -> float:
        return self.mu_p if state is MtjState.P else self.mu_ap

    def pair_level(self, states: PairState) -> float:
        return self.pair_ladder[pair_index(states)]

    def margins(self) -> dict[str, float]:
        """Read margin and the two pair margins, in uA."""
        return {
            "read": round(self.mu_p - self.mu_ap, 9),
            "pair_lower": round(self.mu_ap_p - self.mu_ap_ap, 9),
            "pair_upper": round(self.mu_p_p - self.mu_ap_p, 9),
        }


@dataclass(frozen=True)
class MeanShift:
    """Heating model that raises each pair level by a fixed amount.

    The shifts apply to the three pair levels in ladder order and must satisfy
    0 < alpha < beta < gamma. Single-cell senses are unaffected.
    """

    alpha: float
    beta: float
    gamma: float
    zone_temp: float = AMBIENT_TEMP_C

    def __post_init__(self):
        if not 0 < self.alpha < self.beta < self.gamma:
            raise ValueError("mean shift requires 0 < alpha < beta < gamma")

    @property
    def shifts(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class Collapse:
    """Thermally activated collapse of heated anti-parallel cells.

    Each AP cell in the heated zone independently reads at the next level up
    with probability rho(dT) = exp(a + b*dT), clamped to [0, 1], where dT is
    the zone temperature above ambient (floored at zero). Parallel cells are
    stable under heat and never collapse.
    """

    a: float = DEFAULT_COLLAPSE_A
    b: float = DEFAULT_COLLAPSE_B
    zone_temp: float = AMBIENT_TEMP_C

    def rho(self, ambient_temp: float = AMBIENT_TEMP_C) -> float:
        dt = max(0.0, self.zone_temp - ambient_temp)
        return min(1.0, max(0.0, math.exp(self.a + self.b * dt)))


Disturbance = Union[MeanShift, Collapse, None]
CellDisturbances = Union[Disturbance, tuple[Disturbance, Disturbance]]


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent per-trial stream derived from (master seed, trial index)."""
    return np.random.default_rng((master_seed, index))


def _require_rng(rng, model: CurrentLevelModel, stochastic: bool):
    if rng is None and stochastic:
        raise ValueError("a random generator is required for stochastic sampling")
    return rng


def sample_single_current(
    state: MtjState,
    model: CurrentLevelModel,
    disturbance: Disturbance = None,
    rng: np.random.Generator | None = None,
    size: int | None = None,
):
    """Sample the sense current of one cell, in uA.

    Under a Collapse disturbance an AP cell is replaced by the P level with
    probability rho before noise is added; P cells never collapse. A mean
    shift has no effect on single-cell senses. With ``size`` set, returns an
    ndarray of independent samples drawn from the same stream.
    """
    collapsing = isinstance(disturbance, Collapse) and state is MtjState.AP
    _require_rng(rng, model, collapsing or model.sigma > 0)
    mean = model.single_level(state)
    if size is None:
        if collapsing and rng.random() < disturbance.rho(model.ambient_temp):
            mean = model.mu_p
        if model.sigma > 0:
            return mean + rng.normal(0.0, model.sigma)
        return mean
    out = np.full(size, mean, dtype=float)
    if collapsing:
        hit = rng.random(size) < disturbance.rho(model.ambient_temp)
        out[hit] = model.mu_p
    if model.sigma > 0:
        out += rng.normal(0.0, model.sigma, size)
    return out


def _per_cell(disturbance: CellDisturbances) -> tuple[Disturbance, Disturbance]:
    if isinstance(disturbance, tuple):
        if any(isinstance(d, MeanShift) for d in disturbance):
            raise ValueError("mean shift is a pair-level disturbance, not per-cell")
        return disturbance
    return disturbance, disturbance


def sample_pair_current(
    states: PairState,
    model: CurrentLevelModel,
    disturbance: CellDisturbances = None,
    rng: np.random.Generator | None = None,
    size: int | None = None,
):
    """Sample the summed sense current of a cell pair, in uA.

    (AP, P) and (P, AP) share one level. Under Collapse, each AP cell in the
    pair collapses independently with probability rho, and each collapse
    promotes the pair level one step up the ladder. A pair-level MeanShift
    adds its configured shift to the nominal level. Noise is applied once at
    the sense node. ``disturbance`` may also be a per-cell pair (for senses
    where only one operand row sits in the heated zone).
    """
    base = pair_index(states)
    ladder = model.pair_ladder
    if isinstance(disturbance, MeanShift):
        mean = ladder[base] + disturbance.shifts[base]
        d0 = d1 = None
    else:
        mean = ladder[base]
        d0, d1 = _per_cell(disturbance)
    cell_dist = (d0, d1)
    collapsible = [
        d for s, d in zip(states, cell_dist)
        if s is MtjState.AP and isinstance(d, Collapse)
    ]
    _require_rng(rng, model, bool(collapsible) or model.sigma > 0)
    if size is None:
        idx = base
        for d in collapsible:
            if rng.random() < d.rho(model.ambient_temp):
                idx += 1
        value = ladder[idx] if not isinstance(disturbance, MeanShift) else mean
        if model.sigma > 0:
            return value + rng.normal(0.0, model.sigma)
        return value
    if isinstance(disturbance, MeanShift):
        out = np.full(size, mean, dtype=float)
    else:
        idx = np.full(size, base, dtype=np.intp)
        for d in collapsible:
            idx += rng.random(size) < d.rho(model.ambient_temp)
        out = np.asarray(ladder, dtype=float)[idx]
    if model.sigma > 0:
        out = out + rng.normal(0.0, model.sigma, size)
    return out


@dataclass(frozen=True)
class FailureRateTargets:
    """Target AND-decode failure rates used to calibrate noise and collapse.

    ``natural`` is the ambient rate of sensing a one-parallel pair above the
    AND reference; the heated maps give that rate and the zero-parallel rate
    at elevated zone temperatures. Zero entries mean below Monte Carlo
    resolution, not exact zero.
    """

    natural: float = 0.005
    heated_ap_p: Mapping[float, float] = field(
        default_factory=lambda: {50.0: 0.006, 100.0: 0.044}
    )
    heated_ap_ap: Mapping[float, float] = field(
        default_factory=lambda: {50.0: 0.0, 100.0: 0.003}
    )


@dataclass(frozen=True)
class CalibrationResult:
    sigma: float
    a: float
    b: float
    residuals: dict[str, float]
    fitted_rates: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "a": self.a,
            "b": self.b,
            "residuals": dict(self.residuals),
            "fitted_rates": dict(self.fitted_rates),
        }


def calibrate(
    targets: FailureRateTargets | None = None,
    model: CurrentLevelModel | None = None,
    max_residual: float = 0.005,
) -> CalibrationResult:
    """Fit (sigma, a, b) to the target failure rates.

    sigma inverts the natural-condition rate over the upper pair half-margin;
    (a, b) minimise the squared error of the closed-form failure rates against
    the heated targets. Raises NonConvergence for degenerate targets or when
    any fitted residual exceeds ``max_residual``.
    """
    from scipy.optimize import least_squares

    from .analytic import normal_tail, pair_exceed_prob

    targets = targets or FailureRateTargets()
    model = model or CurrentLevelModel(sigma=1.0)
    if not 0 < targets.natural < 0.5:
        raise NonConvergence(
            "degenerate targets: natural failure rate must lie in (0, 0.5)"
        )
    half = (model.mu_p_p - model.mu_ap_p) / 2.0
    sigma = half / NormalDist().inv_cdf(1.0 - targets.natural)
    ref = model.mu_ap_p + half
    ladder = model.pair_ladder

    q_natural = normal_tail(half / sigma)
    solved = {}
    for temp, rate in targets.heated_ap_p.items():
        rho = (rate - q_natural) / (1.0 - q_natural)
        if rho <= 0:
            raise NonConvergence(
                f"heated rate {rate} at {temp} C does not exceed the natural rate"
            )
        solved[temp] = rho
    if len(solved) < 2:
        raise NonConvergence("need at least two heated temperatures to fit (a, b)")

    temps = sorted(solved)
    dts = [t - model.ambient_temp for t in temps]
    b0 = (math.log(solved[temps[-1]]) - math.log(solved[temps[0]])) / (
        dts[-1] - dts[0]
    )
    a0 = math.log(solved[temps[0]]) - b0 * dts[0]

    rows = [("AP,P", 1, t, r) for t, r in sorted(targets.heated_ap_p.items())]
    rows += [("AP,AP", 0, t, r) for t, r in sorted(targets.heated_ap_ap.items())]

    def residuals(params):
        a, b = params
        out = []
        for _, base, temp, rate in rows:
            rho = min(1.0, math.exp(a + b * (temp - model.ambient_temp)))
            out.append(pair_exceed_prob(ladder, base, sigma, ref, rho) - rate)
        return out

    fit = least_squares(residuals, x0=[a0, b0])
    a, b = float(fit.x[0]), float(fit.x[1])
    resid = {}
    fitted = {}
    for (name, base, temp, rate), r in zip(rows, residuals((a, b))):
        key = f"{name}@{temp:g}C"
        resid[key] = r
        fitted[key] = rate + r
    if max(abs(r) for r in resid.values()) > max_residual:
        raise NonConvergence(
            f"fit residual exceeds bound {max_residual}: {resid}"
        )
    return CalibrationResult(sigma=sigma, a=a, b=b, residuals=resid, fitted_rates=fitted)
