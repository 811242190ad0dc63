"""Post-processing of run logs.

Turns per-run record streams into target hitting times, expected running
time (ERT) per (algorithm, function, target), quality-target ECDF
curves, pairwise speedup tables with miss markers, and first-hitter
tables for ladder runs, plus the CSV formats that persist each of them.

Conventions: a target is a quality gap epsilon above the instance
optimum; a run hits a target at the earliest record whose best quality
is within epsilon of the optimum. Times default to the wall-clock
milliseconds in the log; every operation also accepts axis="evals" to
measure in evaluation counts instead.

ERT of a target over a set of runs is the sum of the hitting times of
successful runs plus the full spent time of unsuccessful ones, divided
by the number of successful runs; it is undefined (None) without at
least one success. Spent time is what the log actually recorded, not a
nominal budget cap.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .errors import ConfigError, ContractError
from .runlog import RunLog, RunRecord

__all__ = [
    "TargetGrid",
    "ErtEntry",
    "ErtTable",
    "EcdfCurve",
    "SpeedupResult",
    "hitting_times",
    "spent_time",
    "split_by_descent",
    "run_hitting_times",
    "ert",
    "build_ert_table",
    "ecdf",
    "speedup_table",
    "best_k_table",
    "write_runlog_csv",
    "read_runlog_csv",
    "write_ert_csv",
    "read_ert_csv",
    "write_ecdf_csv",
    "write_speedup_csv",
    "write_best_k_csv",
]

DEFAULT_EPSILONS = (
    1e2,
    10 ** 1.5,
    1e1,
    10 ** 0.5,
    1e0,
    1e-2,
    1e-4,
    1e-6,
    1e-8,
)

RUNLOG_HEADER = ["wall_ms", "evals", "best_f", "descent_id", "k"]
ERT_HEADER = ["algorithm", "function", "epsilon", "ert_ms", "successes", "runs"]
ECDF_HEADER = ["algorithm", "time_ms", "fraction"]
SPEEDUP_HEADER = ["function", "epsilon", "ratio_or_marker"]
BEST_K_HEADER = ["function", "epsilon", "mean_log2k", "ties"]

# Cell markers for undefined ERT ratios: the base algorithm alone hit the
# target ("X": the other missed), only the other algorithm hit it, or
# neither did.
MARKER_OTHER_MISSED = "X"
MARKER_BASE_MISSED = "other-only"
MARKER_BOTH_MISSED = "-"
UNDEFINED = "-"


@dataclass(frozen=True)
class TargetGrid:
    """Strictly decreasing positive quality gaps."""

    epsilons: tuple[float, ...] = DEFAULT_EPSILONS

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ConfigError("target grid must not be empty")
        if any(e <= 0.0 for e in eps):
            raise ConfigError("target gaps must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("target gaps must be strictly decreasing")
        object.__setattr__(self, "epsilons", eps)


def _axis_value(record: RunRecord, axis: str) -> float:
    if axis == "wall_ms":
        return record.wall_ms
    if axis == "evals":
        return float(record.evals)
    raise ConfigError(f"unknown time axis {axis!r} (use 'wall_ms' or 'evals')")


def hitting_times(
    log: RunLog, f_opt: float, grid: TargetGrid, axis: str = "wall_ms"
) -> dict[float, float | None]:
    """Earliest time each target gap is reached, or None when missed.

    Relies on the log's best quality being non-increasing, so targets are
    hit in grid order and one pass suffices.
    """
    hits: dict[float, float | None] = {eps: None for eps in grid.epsilons}
    idx = 0
    eps = grid.epsilons
    for record in log.records:
        gap = record.best_f - f_opt
        while idx < len(eps) and gap <= eps[idx]:
            hits[eps[idx]] = _axis_value(record, axis)
            idx += 1
        if idx == len(eps):
            break
    return hits


def spent_time(log: RunLog, axis: str = "wall_ms") -> float:
    """Time the run actually consumed: its last record's timestamp."""
    if not log.records:
        return 0.0
    return _axis_value(log.records[-1], axis)


def split_by_descent(log: RunLog) -> dict[str, RunLog]:
    """Group a multi-descent record stream into per-descent logs."""
    out: dict[str, RunLog] = {}
    for record in log.records:
        out.setdefault(record.descent_id, RunLog()).append(record)
    for descent_id, sub in out.items():
        if descent_id in log.stops:
            sub.stops[descent_id] = log.stops[descent_id]
        if descent_id in log.meta:
            sub.meta[descent_id] = log.meta[descent_id]
    return out


def run_hitting_times(
    logs: list[RunLog], f_opt: float, grid: TargetGrid, axis: str = "wall_ms"
) -> tuple[dict[float, float | None], float]:
    """Hitting times of a whole multi-descent run, and its spent time.

    The run hits a target when any of its descents does (earliest time
    wins); it spends time until its last descent's last record.
    """
    combined: dict[float, float | None] = {eps: None for eps in grid.epsilons}
    spent = 0.0
    for log in logs:
        for eps, t in hitting_times(log, f_opt, grid, axis).items():
            if t is not None and (combined[eps] is None or t < combined[eps]):
                combined[eps] = t
        spent = max(spent, spent_time(log, axis))
    return combined, spent


def ert(times_and_budgets: list[tuple[float | None, float]]) -> float | None:
    """Expected running time over a set of runs for one target.

    Each entry is (hitting time or None, time the run actually spent).
    Undefined (None) when no run succeeded.
    """
    if not times_and_budgets:
        raise ContractError("ert needs at least one run")
    total = 0.0
    successes = 0
    for hit, spent in times_and_budgets:
        if hit is not None:
            if spent < hit:
                raise ContractError(f"spent time {spent} below hitting time {hit}")
            total += hit
            successes += 1
        else:
            total += spent
    if successes == 0:
        return None
    return total / successes


@dataclass(frozen=True)
class ErtEntry:
    ert: float | None
    successes: int
    runs: int


@dataclass
class ErtTable:
    """Per-algorithm ERT entries keyed by (function, epsilon)."""

    algorithm: str
    entries: dict[tuple[str, float], ErtEntry] = field(default_factory=dict)


def build_ert_table(
    algorithm: str,
    runs_by_function: dict[str, list[tuple[dict[float, float | None], float]]],
    grid: TargetGrid,
) -> ErtTable:
    """Aggregate per-run (hits, spent) pairs into an ERT table.

    runs_by_function maps a function id to one (hitting_times, spent)
    pair per run, as produced by hitting_times/run_hitting_times.
    """
    table = ErtTable(algorithm=algorithm)
    for function, runs in runs_by_function.items():
        for eps in grid.epsilons:
            samples = [(hits.get(eps), spent) for hits, spent in runs]
            successes = sum(1 for hit, _ in samples if hit is not None)
            value = ert(samples) if samples else None
            table.entries[(function, eps)] = ErtEntry(
                ert=value, successes=successes, runs=len(samples)
            )
    return table


@dataclass(frozen=True)
class EcdfCurve:
    """Step curve of the fraction of triplets hit by each time.

    Every point's fraction is an exact integer count divided by total,
    so hit counts are kept as integers rather than recovered from the
    float fractions.
    """

    points: tuple[tuple[float, float], ...]
    total: int
    hits: int

    @property
    def final_fraction(self) -> float:
        return self.points[-1][1] if self.points else 0.0


def ecdf(all_triplet_hits: list[float | None], total: int) -> EcdfCurve:
    """Proportion of (function, target, run) triplets hit by time t.

    Duplicate hit times collapse into a single step of combined height;
    misses (None) only contribute to the denominator.
    """
    if total < 1:
        raise ContractError(f"ecdf needs total >= 1, got {total}")
    times = sorted(t for t in all_triplet_hits if t is not None)
    if len(times) > total:
        raise ContractError(f"{len(times)} hits exceed total {total}")
    points: list[tuple[float, float]] = []
    seen = 0
    for i, t in enumerate(times):
        seen += 1
        if i + 1 < len(times) and times[i + 1] == t:
            continue
        points.append((t, seen / total))
    return EcdfCurve(points=tuple(points), total=total, hits=len(times))


@dataclass(frozen=True)
class SpeedupResult:
    """Cellwise ERT ratios (or miss markers) and paired win counts."""

    cells: dict[tuple[str, float], float | str]
    base_wins: int
    other_wins: int


def speedup_table(base: ErtTable, other: ErtTable) -> SpeedupResult:
    """Ratio ert_base / ert_other per cell, with markers for misses.

    A ratio above 1.0 means the other algorithm was faster. Cells where
    only the base hit carry the other-missed marker, cells where only
    the other hit carry the base-missed marker, and cells neither hit
    carry the both-missed marker. Win counts compare defined ERT pairs:
    base_wins counts cells with strictly smaller base ERT.
    """
    if set(base.entries) != set(other.entries):
        raise ContractError("speedup_table needs both tables on the same grid")
    cells: dict[tuple[str, float], float | str] = {}
    base_wins = 0
    other_wins = 0
    for key in base.entries:
        b = base.entries[key].ert
        o = other.entries[key].ert
        if b is not None and o is not None:
            cells[key] = b / o
            if b < o:
                base_wins += 1
            elif o < b:
                other_wins += 1
        elif b is not None:
            cells[key] = MARKER_OTHER_MISSED
        elif o is not None:
            cells[key] = MARKER_BASE_MISSED
        else:
            cells[key] = MARKER_BOTH_MISSED
    return SpeedupResult(cells=cells, base_wins=base_wins, other_wins=other_wins)


def best_k_table(
    per_run_logs: list[list[RunLog]],
    f_opts: list[float],
    grid: TargetGrid,
    axis: str = "wall_ms",
) -> dict[float, tuple[float | None, int]]:
    """Mean log2(K) of the first descent to hit each target.

    Each inner list holds one ladder run's per-descent logs. Within a
    run, the first hitter is the descent with the earliest hitting time;
    exact ties go to the smaller K and are counted in the second half of
    the result. Targets no run hits map to (None, ties).
    """
    if len(per_run_logs) != len(f_opts):
        raise ContractError("one f_opt per run is required")
    sums: dict[float, float] = {eps: 0.0 for eps in grid.epsilons}
    counts: dict[float, int] = {eps: 0 for eps in grid.epsilons}
    ties: dict[float, int] = {eps: 0 for eps in grid.epsilons}
    for logs, f_opt in zip(per_run_logs, f_opts):
        descents = []
        for log in logs:
            if not log.records:
                continue
            k = log.records[0].k
            descents.append((k, hitting_times(log, f_opt, grid, axis)))
        for eps in grid.epsilons:
            hitters = [
                (hits[eps], k) for k, hits in descents if hits[eps] is not None
            ]
            if not hitters:
                continue
            best_time = min(t for t, _ in hitters)
            at_best = sorted(k for t, k in hitters if t == best_time)
            if len(at_best) > 1:
                ties[eps] += 1
            sums[eps] += math.log2(at_best[0])
            counts[eps] += 1
    out: dict[float, tuple[float | None, int]] = {}
    for eps in grid.epsilons:
        mean = sums[eps] / counts[eps] if counts[eps] else None
        out[eps] = (mean, ties[eps])
    return out


# ---------------------------------------------------------------------------
# CSV persistence. Numbers are written with repr so they round-trip
# bit-exactly; undefined values are written as the "-" marker.


def _format(value: float | int | str | None) -> str:
    if value is None:
        return UNDEFINED
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_runlog_csv(path, log: RunLog) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUNLOG_HEADER)
        for r in log.records:
            writer.writerow(
                [_format(r.wall_ms), r.evals, _format(r.best_f), r.descent_id, r.k]
            )


def read_runlog_csv(path) -> RunLog:
    log = RunLog()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RUNLOG_HEADER:
            raise ContractError(f"{path}: not a run log (header {header})")
        for row in reader:
            wall_ms, evals, best_f, descent_id, k = row
            log.append(
                RunRecord(
                    wall_ms=float(wall_ms),
                    evals=int(evals),
                    best_f=float(best_f),
                    descent_id=descent_id,
                    k=int(k),
                )
            )
    return log


def write_ert_csv(path, table: ErtTable, time_column: str = "ert_ms") -> None:
    header = list(ERT_HEADER)
    header[3] = time_column
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for (function, eps), entry in table.entries.items():
            writer.writerow(
                [
                    table.algorithm,
                    function,
                    _format(eps),
                    _format(entry.ert),
                    entry.successes,
                    entry.runs,
                ]
            )


def read_ert_csv(path) -> ErtTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 6 or header[:3] != ERT_HEADER[:3]:
            raise ContractError(f"{path}: not an ERT table (header {header})")
        algorithm = None
        entries: dict[tuple[str, float], ErtEntry] = {}
        for row in reader:
            alg, function, eps, value, successes, runs = row
            if algorithm is None:
                algorithm = alg
            entries[(function, float(eps))] = ErtEntry(
                ert=None if value == UNDEFINED else float(value),
                successes=int(successes),
                runs=int(runs),
            )
    return ErtTable(algorithm=algorithm or "", entries=entries)


def write_ecdf_csv(path, algorithm: str, curve: EcdfCurve,
                   time_column: str = "time_ms") -> None:
    header = list(ECDF_HEADER)
    header[1] = time_column
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, fraction in curve.points:
            writer.writerow([algorithm, _format(t), _format(fraction)])


def write_speedup_csv(path, result: SpeedupResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SPEEDUP_HEADER)
        for (function, eps), cell in result.cells.items():
            writer.writerow([function, _format(eps), _format(cell)])


def write_best_k_csv(
    path, function: str, table: dict[float, tuple[float | None, int]]
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BEST_K_HEADER)
        for eps, (mean, ties) in table.items():
            writer.writerow([function, _format(eps), _format(mean), ties])
