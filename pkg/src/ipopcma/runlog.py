"""Best-so-far traces of optimizer executions.

A RunLog is the unit every downstream consumer works with: a time-ordered
list of per-iteration records plus the stop reason of each descent that
contributed. Two flavors exist and are documented where they are produced:

- per-descent logs (one descent each; `evals` and `best_f` are local to
  that descent), emitted by the scheduling strategies;
- merged logs (records from several descents interleaved by time;
  `evals` is the run-wide cumulative count and `best_f` the run-wide
  incumbent), emitted by the sequential restart driver.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class StopReason(enum.Enum):
    """Why a descent ended; exactly one applies."""

    TARGET_HIT = "TargetHit"
    MAX_EVALS = "MaxEvals"
    TOL_FUN = "TolFun"
    TOL_X = "TolX"
    CONDITION_COV = "ConditionCov"
    NO_EFFECT_AXIS = "NoEffectAxis"
    NO_EFFECT_COORD = "NoEffectCoord"
    STAGNATION = "Stagnation"
    EXTERNAL_DEADLINE = "ExternalDeadline"


@dataclass
class RunRecord:
    """One iteration end: timestamp, evaluations consumed, incumbent quality."""

    wall_ms: float
    evals: int
    best_f: float
    descent_id: str
    k: int


@dataclass
class RunLog:
    """Ordered iteration records plus per-descent outcomes.

    meta maps descent_id to descriptive facts (k, seed, partition bounds,
    start/end timestamps) used by occupancy and scheduling tests.
    """

    records: list[RunRecord] = field(default_factory=list)
    stops: dict[str, StopReason] = field(default_factory=dict)
    meta: dict[str, dict] = field(default_factory=dict)

    def append(self, record: RunRecord) -> None:
        self.records.append(record)

    def best_f(self) -> float:
        """Final incumbent quality, +inf when no iteration completed."""
        best = float("inf")
        for rec in self.records:
            if rec.best_f < best:
                best = rec.best_f
        return best
