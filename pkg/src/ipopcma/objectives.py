"""Benchmark objectives with known optima and injectable evaluation cost.

Each objective is a shift-only instance of a base function: the base has
its optimum exactly at the origin with value zero, and the instance
evaluates base(x - x_opt) + f_opt, so the optimum location and value stay
known and assertions can be exact. Instance transforms beyond the shift
(rotations, oscillations, per-instance archives) are deliberately not
modeled; the functions exist to exercise the optimizer and the
schedulers, not to reproduce a benchmark archive.

Evaluation cost is injected as a busy-wait against a monotonic wall-clock
deadline. The wait spins on a small matrix product and yields the
processor after every pass, which keeps the worker genuinely occupied
(like real numeric work) while letting concurrent evaluations on other
workers make progress even when they share cores.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass

import numpy as np

from ._seeds import make_rng, mix64
from .errors import ConfigError, ShapeError

__all__ = [
    "Objective",
    "evaluate",
    "make_objective",
    "make_suite",
    "list_function_ids",
    "busy_wait",
    "DEFAULT_DOMAIN",
    "MIN_DIMENSION",
    "MAX_DIMENSION",
]

DEFAULT_DOMAIN = (-5.0, 5.0)
MIN_DIMENSION = 2
MAX_DIMENSION = 1000

# Offset and depth of the worse second basin of two_basins.
_BASIN_SHIFT = 2.5
_BASIN_DEPTH = 1.0

_SPIN_KERNEL = np.random.default_rng(0).standard_normal((24, 24))


def busy_wait(duration_ms: float) -> None:
    """Occupy the calling thread for at least duration_ms of wall time.

    Spins on a small matrix product between monotonic-clock checks and
    ends each pass with a scheduler yield: the thread stays runnable the
    whole time (no sleeping), but both the interpreter lock and the
    processor are handed over once per pass. Concurrent waits therefore
    overlap at fine granularity even on a machine with fewer cores than
    workers, where timeslice-length rotations would otherwise stretch
    every wait far past its deadline. The deadline is a wall-clock
    instant, not an amount of compute.
    """
    if duration_ms <= 0.0:
        return
    deadline = time.perf_counter() + duration_ms / 1000.0
    kernel = _SPIN_KERNEL
    while time.perf_counter() < deadline:
        kernel @ kernel
        os.sched_yield()


def _sphere(z: np.ndarray) -> float:
    return float(z @ z)


def _ellipsoid_weights(n: int, decades: float) -> np.ndarray:
    return 10.0 ** (decades * np.arange(n) / (n - 1))


def _ellipsoid(z: np.ndarray) -> float:
    return float(_ellipsoid_weights(z.shape[0], 6.0) @ (z * z))


def _rastrigin(z: np.ndarray) -> float:
    n = z.shape[0]
    return float(10.0 * (n - np.sum(np.cos(2.0 * math.pi * z))) + z @ z)


def _rosenbrock(z: np.ndarray) -> float:
    # Classic banana valley, translated so the optimum sits at the origin.
    w = z + 1.0
    return float(
        np.sum(100.0 * (w[:-1] ** 2 - w[1:]) ** 2 + (w[:-1] - 1.0) ** 2)
    )


def _step_ellipsoid(z: np.ndarray) -> float:
    # Piecewise-constant ellipsoid: coordinates snap to a lattice (coarse
    # away from zero, fine near it), producing plateaus of null gradient.
    coarse = np.round(z)
    fine = np.round(10.0 * z) / 10.0
    snapped = np.where(np.abs(z) > 0.5, coarse, fine)
    return float(_ellipsoid_weights(z.shape[0], 2.0) @ (snapped * snapped))


def _discus(z: np.ndarray) -> float:
    return float(1e6 * z[0] * z[0] + z[1:] @ z[1:])


def _diff_powers(z: np.ndarray) -> float:
    n = z.shape[0]
    powers = 2.0 + 4.0 * np.arange(n) / (n - 1)
    return float(np.sum(np.abs(z) ** powers))


def _schaffers(z: np.ndarray) -> float:
    s = np.sqrt(z[:-1] ** 2 + z[1:] ** 2)
    root = np.sqrt(s)
    terms = root + root * np.sin(50.0 * s ** 0.2) ** 2
    return float(np.mean(terms) ** 2)


def _two_basins(z: np.ndarray) -> float:
    # Global quadratic basin at the origin and a strictly worse one offset
    # along the normalized all-ones direction; exercises restart behavior.
    n = z.shape[0]
    center = np.full(n, _BASIN_SHIFT / math.sqrt(n))
    local = z - center
    return float(min(z @ z, _BASIN_DEPTH + local @ local))


_BASE_FUNCTIONS = {
    "sphere": _sphere,
    "ellipsoid": _ellipsoid,
    "rastrigin": _rastrigin,
    "rosenbrock": _rosenbrock,
    "step_ellipsoid": _step_ellipsoid,
    "discus": _discus,
    "diff_powers": _diff_powers,
    "schaffers": _schaffers,
    "two_basins": _two_basins,
}

# Difficulty groups; make_suite guarantees coverage of every group.
FUNCTION_GROUPS = {
    "separable": ("sphere", "ellipsoid", "rastrigin"),
    "moderate": ("rosenbrock", "step_ellipsoid"),
    "high_conditioning": ("discus", "diff_powers"),
    "multimodal_structured": ("schaffers",),
    "multimodal_weak_structure": ("two_basins",),
}


def list_function_ids() -> list[str]:
    """All base function ids, in suite order."""
    return list(_BASE_FUNCTIONS)


@dataclass(frozen=True)
class Objective:
    """A shift-only benchmark instance.

    Immutable after construction; evaluate may be called concurrently
    from any number of workers.
    """

    id: str
    dimension: int
    x_opt: np.ndarray
    f_opt: float
    additional_cost_ms: float = 0.0
    domain: tuple[float, float] = DEFAULT_DOMAIN

    def evaluate(self, x) -> float:
        return evaluate(self, x)


def make_objective(
    function_id: str,
    dimension: int,
    x_opt=None,
    f_opt: float = 0.0,
    additional_cost_ms: float = 0.0,
) -> Objective:
    """Construct one instance; x_opt defaults to the origin."""
    if function_id not in _BASE_FUNCTIONS:
        known = ", ".join(_BASE_FUNCTIONS)
        raise ConfigError(f"unknown objective id {function_id!r} (known: {known})")
    if not (MIN_DIMENSION <= dimension <= MAX_DIMENSION):
        raise ConfigError(
            f"dimension must be in [{MIN_DIMENSION}, {MAX_DIMENSION}], got {dimension}"
        )
    if additional_cost_ms < 0.0:
        raise ConfigError(f"additional_cost_ms must be >= 0, got {additional_cost_ms}")
    if x_opt is None:
        shift = np.zeros(dimension)
    else:
        shift = np.asarray(x_opt, dtype=np.float64).copy()
        if shift.shape != (dimension,):
            raise ShapeError(f"x_opt shape {shift.shape}, expected ({dimension},)")
    shift.setflags(write=False)
    return Objective(
        id=function_id,
        dimension=dimension,
        x_opt=shift,
        f_opt=float(f_opt),
        additional_cost_ms=float(additional_cost_ms),
    )


def evaluate(obj: Objective, x) -> float:
    """Quality of one candidate: base(x - x_opt) + f_opt.

    Busy-waits the objective's additional cost first, then computes.
    Thread-safe; no state is touched besides the time spent.
    """
    xv = np.asarray(x, dtype=np.float64).ravel()
    if xv.shape[0] != obj.dimension:
        raise ShapeError(
            f"{obj.id}: point has {xv.shape[0]} coordinates, expected {obj.dimension}"
        )
    busy_wait(obj.additional_cost_ms)
    return _BASE_FUNCTIONS[obj.id](xv - obj.x_opt) + obj.f_opt


def make_suite(
    dimension: int,
    additional_cost_ms: float = 0.0,
    instance_seed: int = 0,
) -> list[Objective]:
    """One instance of every base function, with seeded shifts.

    Each function draws its shift from its own substream of
    instance_seed, uniformly in [-4, 4] per coordinate, so instances do
    not depend on the suite's ordering. Optimum values are drawn uniform
    in [-100, 100] and rounded to two decimals.
    """
    suite = []
    for idx, fid in enumerate(_BASE_FUNCTIONS):
        rng = make_rng(mix64(instance_seed, idx))
        x_opt = rng.uniform(-4.0, 4.0, size=dimension)
        f_opt = round(float(rng.uniform(-100.0, 100.0)), 2)
        suite.append(
            make_objective(
                fid,
                dimension,
                x_opt=x_opt,
                f_opt=f_opt,
                additional_cost_ms=additional_cost_ms,
            )
        )
    return suite
