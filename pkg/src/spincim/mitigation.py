"""Disturbance-aware sense references: adapt and evaluate.

Given an estimate of how much heating raises each pair level, the references
move to the midpoints of the shifted adjacent levels. Estimates are supplied
externally (perfect-knowledge or noisy-sensor values); no estimator is
modelled.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import analytic
from .array import SenseConfig
from .attack import McReport, exceedance_mc
from .device import CurrentLevelModel, Disturbance, PairState, parse_pair
from .errors import InvalidShift


@dataclass(frozen=True)
class ShiftEstimate:
    """Estimated current increases of the three pair levels under heat."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not 0 < self.alpha < self.beta < self.gamma:
            raise InvalidShift(
                f"shift estimate must satisfy 0 < alpha < beta < gamma, got "
                f"({self.alpha}, {self.beta}, {self.gamma})"
            )


def adapt_references(
    base: SenseConfig, shift: ShiftEstimate, model: CurrentLevelModel
) -> SenseConfig:
    """Move the OR and AND references to the shifted-level midpoints.

    The read reference is unchanged. Raises InvalidShift if the adapted
    references do not sit strictly between the shifted adjacent levels.
    """
    new_or = (model.mu_ap_ap + model.mu_ap_p + shift.alpha + shift.beta) / 2.0
    new_and = (model.mu_ap_p + model.mu_p_p + shift.beta + shift.gamma) / 2.0
    if not (model.mu_ap_ap + shift.alpha) < new_or < (model.mu_ap_p + shift.beta):
        raise InvalidShift("adapted OR reference leaves the shifted lower gap")
    if not (model.mu_ap_p + shift.beta) < new_and < (model.mu_p_p + shift.gamma):
        raise InvalidShift("adapted AND reference leaves the shifted upper gap")
    try:
        return SenseConfig(
            i_ref_read=base.i_ref_read, i_ref_or=new_or, i_ref_and=new_and
        )
    except ValueError as exc:
        raise InvalidShift(str(exc)) from exc


@dataclass(frozen=True)
class MitigationReport:
    pair: str
    ref_before: float
    ref_after: float
    natural_rate: float
    before: McReport
    after: McReport

    def as_dict(self) -> dict:
        return {
            "pair": self.pair,
            "ref_before": self.ref_before,
            "ref_after": self.ref_after,
            "natural_rate": self.natural_rate,
            "before": self.before.as_dict(),
            "after": self.after.as_dict(),
        }


def evaluate_mitigation(
    disturbance: Disturbance,
    base: SenseConfig,
    adapted: SenseConfig,
    trials: int,
    seed: int,
    pair: PairState | str = "AP,P",
    model: CurrentLevelModel | None = None,
    below: bool = False,
    threads: int = 1,
) -> MitigationReport:
    """Failure rates against the base and adapted AND references.

    Both runs reuse the same per-trial streams, so a reference move acts on
    identical samples and the before/after comparison is paired. ``below``
    measures the opposite decode error (sensing at or under the reference).
    """
    model = model or CurrentLevelModel()
    if isinstance(pair, str):
        pair_states = parse_pair(pair)
        pair_name = pair
    else:
        pair_states = pair
        pair_name = f"{pair[0].value},{pair[1].value}"
    before = exceedance_mc(
        pair_states, disturbance, base.i_ref_and, trials, seed, model,
        below=below, threads=threads,
    )
    after = exceedance_mc(
        pair_states, disturbance, adapted.i_ref_and, trials, seed, model,
        below=below, threads=threads,
    )
    natural = analytic.pair_exceed(model, pair_states, base.i_ref_and, None)
    if below:
        natural = 1.0 - natural
    return MitigationReport(
        pair=pair_name,
        ref_before=base.i_ref_and,
        ref_after=adapted.i_ref_and,
        natural_rate=natural,
        before=before,
        after=after,
    )
