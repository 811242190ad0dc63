"""Sequential restart driver with doubling populations.

Runs descents of population K * lambda_start for K = 1, 2, 4, ..., k_max,
one after another, carrying a shared wall-clock deadline and a shared
evaluation budget across the whole ladder. Each descent draws its own
start point uniformly in the search domain from its own seeded stream,
so runs are fully reproducible from the base seed.

The driver emits a single merged RunLog: evaluation counts accumulate
across descents and the best quality is the global incumbent, so the
record stream is non-decreasing in evals and non-increasing in best_f.
A reserved meta key "summary" carries the overall outcome (best quality,
best point, total evaluations).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core, objectives
from ._seeds import make_rng, mix64
from .clocks import RealClock
from .errors import ConfigError
from .runlog import RunLog, RunRecord, StopReason

__all__ = ["IpopConfig", "run_ipop", "resolve_objective"]


@dataclass(frozen=True)
class IpopConfig:
    """Configuration of one restart ladder.

    target_gap is a quality gap above the instance optimum: the ladder
    stops once best quality <= f_opt + target_gap. Budgets are shared by
    all descents: max_wall_ms from the driver's clock start, and
    max_evals_total across the whole ladder. Either may be None.
    """

    lambda_start: int
    k_max: int
    dimension: int
    objective_id: str
    seed: int
    target_gap: float | None = None
    max_wall_ms: float | None = None
    max_evals_total: int | None = None
    instance_seed: int = 0
    cost_ms: float = 0.0

    def validate(self) -> None:
        if self.lambda_start < 2:
            raise ConfigError(f"lambda_start must be >= 2, got {self.lambda_start}")
        if self.k_max < 1 or (self.k_max & (self.k_max - 1)) != 0:
            raise ConfigError(f"k_max must be a power of two >= 1, got {self.k_max}")
        if self.target_gap is not None and self.target_gap <= 0.0:
            raise ConfigError(f"target_gap must be positive, got {self.target_gap}")
        if self.max_wall_ms is not None and self.max_wall_ms <= 0.0:
            raise ConfigError(f"max_wall_ms must be positive, got {self.max_wall_ms}")
        if self.max_evals_total is not None and self.max_evals_total < 1:
            raise ConfigError(
                f"max_evals_total must be >= 1, got {self.max_evals_total}"
            )


def resolve_objective(cfg: IpopConfig) -> objectives.Objective:
    """The suite instance named by the config (seeded shift and offset)."""
    suite = objectives.make_suite(
        cfg.dimension, additional_cost_ms=cfg.cost_ms, instance_seed=cfg.instance_seed
    )
    for obj in suite:
        if obj.id == cfg.objective_id:
            return obj
    known = ", ".join(o.id for o in suite)
    raise ConfigError(f"unknown objective id {cfg.objective_id!r} (known: {known})")


def run_ipop(cfg: IpopConfig, fabric=None, clock=None, objective=None) -> RunLog:
    """Run the restart ladder and return the merged log.

    fabric, when given, is a resource partition whose workers evaluate
    each population by scatter/gather; without one, evaluation is
    sequential on the calling thread. clock defaults to a fresh monotonic
    clock; passing a virtual clock makes the run's timeline logical.
    objective overrides the config lookup (it must match the dimension).
    """
    cfg.validate()
    if objective is None:
        objective = resolve_objective(cfg)
    if objective.dimension != cfg.dimension:
        raise ConfigError(
            f"objective dimension {objective.dimension} vs config {cfg.dimension}"
        )
    if clock is None:
        clock = RealClock()
    if fabric is None:
        evaluator = core.SequentialEvaluator(objective.evaluate)
    else:
        from .fabric import PartitionEvaluator

        evaluator = PartitionEvaluator(fabric, objective)

    deadline = None
    if cfg.max_wall_ms is not None:
        deadline = clock.now_ms() + cfg.max_wall_ms
    target = None
    if cfg.target_gap is not None:
        target = objective.f_opt + cfg.target_gap

    lo, hi = objective.domain
    sigma0 = (hi - lo) / 4.0
    merged = RunLog()
    best_f = float("inf")
    best_x = None
    evals_before = 0

    k = 1
    index = 0
    descents_run = 0
    while k <= cfg.k_max:
        remaining = None
        if cfg.max_evals_total is not None:
            remaining = cfg.max_evals_total - evals_before
            if remaining <= 0:
                break
        params = core.derive_params(cfg.dimension, k * cfg.lambda_start)
        seed = mix64(cfg.seed, index)
        rng = make_rng(seed)
        m0 = rng.uniform(lo, hi, size=cfg.dimension)
        state = core.init_state(params, m0, sigma0, seed)
        limits = core.DescentLimits(
            target=target, max_evals=remaining, deadline_ms=deadline
        )
        descent_id = f"d{index}"
        log, reason = core.run_descent(
            evaluator, params, state, rng, limits, clock, descent_id, k
        )
        descents_run += 1

        for rec in log.records:
            if rec.best_f < best_f:
                best_f = rec.best_f
            merged.append(
                RunRecord(
                    wall_ms=rec.wall_ms,
                    evals=evals_before + rec.evals,
                    best_f=best_f,
                    descent_id=descent_id,
                    k=k,
                )
            )
        if state.best_f < best_f:
            best_f = state.best_f
        if state.best_x is not None and best_f == state.best_f:
            best_x = state.best_x.copy()
        merged.stops[descent_id] = reason
        merged.meta[descent_id] = dict(log.meta[descent_id])
        merged.meta[descent_id]["population"] = params.lam
        merged.meta[descent_id]["descent_evals"] = state.eval_count
        evals_before += state.eval_count

        if reason in (
            StopReason.TARGET_HIT,
            StopReason.EXTERNAL_DEADLINE,
            # the descent's cap was the global remainder, and any larger
            # population fits even fewer iterations into what is left
            StopReason.MAX_EVALS,
        ):
            break
        k *= 2
        index += 1

    merged.meta["summary"] = {
        "best_f": best_f,
        "best_x": None if best_x is None else best_x.tolist(),
        "evals": evals_before,
        "descents": descents_run,
    }
    return merged
