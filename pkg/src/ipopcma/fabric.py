"""Logical-worker fabric and the two descent-scheduling strategies.

The fabric stands in for a cluster at desk scale: a fixed set of worker
threads, addressed by contiguous index ranges (partitions). A descent
evaluates each population by scattering contiguous column blocks over
its partition's workers and gathering the qualities; workers never
exchange search state, so concurrent descents are fully isolated.

Two strategies schedule descents over the fabric:

* k_replicated: every unit partition runs an independent small descent;
  when the two children of a parent partition both finish, the parent
  runs one descent with doubled population on the union of their
  workers, recursively up to the root (or the configured ceiling). The
  join is a blocking barrier: a finished subtree idles until its sibling
  finishes.
* k_distributed: the root is carved into partitions of sizes u, 2u, 4u,
  ..., k_max*u and every ladder rung runs concurrently from the start,
  each with its own population; optionally each rung restarts with a
  fresh start point whenever it finishes early, until the deadline.

Both strategies run in real time (worker threads, monotonic clock) or in
virtual time (sequential simulation, logical clocks): virtual runs
reproduce the same evaluation counts and qualities as real runs with the
same seeds, while their timelines become deterministic. In virtual mode
each evaluation round costs virtual_eval_ms, so a partition of w workers
evaluates ceil(lambda / w) rounds per iteration.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import Future
from dataclasses import dataclass
from queue import SimpleQueue

import numpy as np

from . import core
from ._seeds import make_rng, mix64
from .clocks import RealClock, VirtualClock
from .errors import ConfigError, PartitionError, ShapeError
from .runlog import RunLog, StopReason

__all__ = [
    "WorkerFabric",
    "ResourcePartition",
    "StrategyConfig",
    "split",
    "evaluate_scatter_gather",
    "PartitionEvaluator",
    "run_k_replicated",
    "run_k_distributed",
]


class WorkerFabric:
    """A fixed pool of addressable worker threads.

    Tasks are plain callables submitted to one worker index; each worker
    drains its own queue in submission order. The fabric owns the
    threads; use it as a context manager or call shutdown().
    """

    def __init__(self, total_workers: int):
        if total_workers < 1:
            raise ConfigError(f"total_workers must be >= 1, got {total_workers}")
        self.total_workers = total_workers
        self._queues = [SimpleQueue() for _ in range(total_workers)]
        self._threads = []
        for idx in range(total_workers):
            t = threading.Thread(
                target=self._serve, args=(idx,), name=f"worker-{idx}", daemon=True
            )
            t.start()
            self._threads.append(t)

    def _serve(self, idx: int) -> None:
        queue = self._queues[idx]
        while True:
            item = queue.get()
            if item is None:
                return
            fn, future = item
            try:
                future.set_result(fn())
            except BaseException as exc:  # surface on the gathering side
                future.set_exception(exc)

    def submit(self, worker_id: int, fn) -> Future:
        if not (0 <= worker_id < self.total_workers):
            raise PartitionError(
                f"worker id {worker_id} outside fabric of {self.total_workers}"
            )
        future: Future = Future()
        self._queues[worker_id].put((fn, future))
        return future

    def root(self) -> "ResourcePartition":
        return ResourcePartition(fabric=self, start=0, size=self.total_workers)

    def shutdown(self) -> None:
        for q in self._queues:
            q.put(None)
        for t in self._threads:
            t.join()

    def __enter__(self) -> "WorkerFabric":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


@dataclass(frozen=True)
class ResourcePartition:
    """A contiguous range of logical workers, possibly half of a parent."""

    fabric: WorkerFabric | None
    start: int
    size: int
    parent: "ResourcePartition | None" = None

    def __post_init__(self):
        if self.size < 1:
            raise PartitionError(f"partition size must be >= 1, got {self.size}")

    @property
    def worker_ids(self) -> range:
        return range(self.start, self.start + self.size)


def split(partition: ResourcePartition) -> tuple[ResourcePartition, ResourcePartition]:
    """Two disjoint halves of equal size covering the partition."""
    if partition.size < 2 or partition.size % 2 != 0:
        raise PartitionError(
            f"cannot split a partition of size {partition.size} into equal halves"
        )
    half = partition.size // 2
    left = ResourcePartition(
        fabric=partition.fabric, start=partition.start, size=half, parent=partition
    )
    right = ResourcePartition(
        fabric=partition.fabric,
        start=partition.start + half,
        size=half,
        parent=partition,
    )
    return left, right


def _evaluate_block(objective, block: np.ndarray) -> list[float]:
    fn = core.as_eval_fn(objective)
    out = []
    for col in range(block.shape[1]):
        try:
            out.append(float(fn(block[:, col])))
        except Exception:
            out.append(math.inf)
    return out


def evaluate_scatter_gather(
    partition: ResourcePartition, points, objective
) -> np.ndarray:
    """Evaluate all columns of points across the partition's workers.

    Columns are distributed in contiguous blocks of lambda // size each,
    with the remainder going to the last worker. Every worker of the
    partition receives a task (possibly empty), and the caller blocks
    until all are done, which gives the scatter and the gather barrier
    semantics. A point whose evaluation raises scores +inf.
    """
    if partition.fabric is None:
        raise ConfigError("evaluate_scatter_gather needs a partition with a fabric")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ShapeError(f"points must be a 2-d matrix, got ndim={pts.ndim}")
    lam = pts.shape[1]
    share = lam // partition.size
    counts = [share] * partition.size
    counts[-1] += lam - share * partition.size

    futures = []
    offset = 0
    for worker_id, count in zip(partition.worker_ids, counts):
        block = pts[:, offset : offset + count]
        offset += count
        futures.append(
            partition.fabric.submit(
                worker_id, lambda b=block: _evaluate_block(objective, b)
            )
        )
    qualities = np.empty(lam)
    offset = 0
    for count, future in zip(counts, futures):
        values = future.result()
        qualities[offset : offset + count] = values
        offset += count
    return qualities


class PartitionEvaluator:
    """Population evaluator bound to one partition (real mode)."""

    def __init__(self, partition: ResourcePartition, objective):
        self.partition = partition
        self.objective = objective
        self.slots = partition.size

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return evaluate_scatter_gather(self.partition, x, self.objective)


class _VirtualEvaluator:
    """Sequential evaluator with a parallel slot count (virtual mode).

    Produces the same qualities as scatter/gather over `slots` workers
    while the virtual clock charges ceil(lambda / slots) rounds.
    """

    def __init__(self, objective, slots: int):
        self.objective = objective
        self.slots = slots

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(_evaluate_block(self.objective, np.asarray(x, float)))


@dataclass(frozen=True)
class StrategyConfig:
    """Shared configuration of the two scheduling strategies.

    unit_workers is the partition size of one K=1 descent and defaults to
    lambda_start (one evaluation slot per worker). Per-descent bounds
    (deadline_ms, max_evals_per_descent, target_gap) apply to each
    descent individually; there is no cross-descent coordination.
    virtual_eval_ms switches both strategies to virtual time.
    """

    total_workers: int
    lambda_start: int
    seed: int
    k_max_replicated: int | None = None
    k_max_distributed: int | None = None
    unit_workers: int | None = None
    restart_on_finish: bool = False
    deadline_ms: float | None = None
    max_evals_per_descent: int | None = None
    target_gap: float | None = None
    virtual_eval_ms: float | None = None

    @property
    def unit(self) -> int:
        return self.unit_workers if self.unit_workers is not None else self.lambda_start

    def validate_common(self) -> None:
        if self.total_workers < 1:
            raise ConfigError(f"total_workers must be >= 1, got {self.total_workers}")
        if self.lambda_start < 2:
            raise ConfigError(f"lambda_start must be >= 2, got {self.lambda_start}")
        if self.unit < 1:
            raise ConfigError(f"unit_workers must be >= 1, got {self.unit}")
        if self.restart_on_finish and self.deadline_ms is None:
            raise ConfigError("restart_on_finish needs a deadline_ms to stop at")
        if self.virtual_eval_ms is not None and self.virtual_eval_ms <= 0.0:
            raise ConfigError(
                f"virtual_eval_ms must be positive, got {self.virtual_eval_ms}"
            )


def _require_power_of_two(value: int, what: str) -> None:
    if value < 1 or (value & (value - 1)) != 0:
        raise ConfigError(f"{what} must be a power of two >= 1, got {value}")


def _descent_limits(cfg: StrategyConfig, objective) -> core.DescentLimits:
    target = None
    if cfg.target_gap is not None:
        target = objective.f_opt + cfg.target_gap
    return core.DescentLimits(
        target=target,
        max_evals=cfg.max_evals_per_descent,
        deadline_ms=cfg.deadline_ms,
    )


def _run_one_descent(
    cfg: StrategyConfig,
    objective,
    partition_start: int,
    partition_size: int,
    k: int,
    descent_id: str,
    seed: int,
    evaluator,
    clock,
) -> RunLog:
    params = core.derive_params(objective.dimension, k * cfg.lambda_start)
    rng = make_rng(seed)
    lo, hi = objective.domain
    m0 = rng.uniform(lo, hi, size=objective.dimension)
    state = core.init_state(params, m0, (hi - lo) / 4.0, seed)
    limits = _descent_limits(cfg, objective)
    log, _ = core.run_descent(
        evaluator, params, state, rng, limits, clock, descent_id, k
    )
    log.meta[descent_id]["population"] = params.lam
    log.meta[descent_id]["workers"] = [partition_start, partition_size]
    log.meta[descent_id]["best_f"] = state.best_f
    return log


# ---------------------------------------------------------------------------
# K-Replicated


def _replicated_unit_count(cfg: StrategyConfig) -> int:
    units, rem = divmod(cfg.total_workers, cfg.unit)
    if rem != 0 or units < 1 or (units & (units - 1)) != 0:
        raise ConfigError(
            f"worker count {cfg.total_workers} is not a power-of-two multiple "
            f"of the unit size {cfg.unit}"
        )
    return units


def _replicated_descent(cfg, objective, partition, k, clock) -> RunLog:
    descent_id = f"k{k}-w{partition.start}"
    seed = mix64(cfg.seed, k, partition.start)
    evaluator = PartitionEvaluator(partition, objective)
    return _run_one_descent(
        cfg, objective, partition.start, partition.size, k,
        descent_id, seed, evaluator, clock,
    )


def _replicated_real(cfg, objective, partition, units, k_max, clock) -> list[RunLog]:
    if units == 1:
        return [_replicated_descent(cfg, objective, partition, 1, clock)]
    left, right = split(partition)
    box: dict = {}

    def right_subtree():
        try:
            box["logs"] = _replicated_real(
                cfg, objective, right, units // 2, k_max, clock
            )
        except BaseException as exc:
            box["error"] = exc

    sibling = threading.Thread(target=right_subtree, daemon=True)
    sibling.start()
    logs = _replicated_real(cfg, objective, left, units // 2, k_max, clock)
    sibling.join()  # parent barrier: both halves must finish
    if "error" in box:
        raise box["error"]
    logs.extend(box["logs"])
    if units <= k_max:
        logs.append(_replicated_descent(cfg, objective, partition, units, clock))
    return logs


def _replicated_virtual(
    cfg, objective, partition, units, k_max, start_ms
) -> tuple[list[RunLog], float]:
    if units == 1:
        clock = VirtualClock(cfg.virtual_eval_ms, start_ms=start_ms)
        evaluator = _VirtualEvaluator(objective, slots=partition.size)
        descent_id = f"k1-w{partition.start}"
        seed = mix64(cfg.seed, 1, partition.start)
        log = _run_one_descent(
            cfg, objective, partition.start, partition.size, 1,
            descent_id, seed, evaluator, clock,
        )
        return [log], clock.now_ms()
    left, right = split(partition)
    logs_left, end_left = _replicated_virtual(
        cfg, objective, left, units // 2, k_max, start_ms
    )
    logs_right, end_right = _replicated_virtual(
        cfg, objective, right, units // 2, k_max, start_ms
    )
    logs = logs_left + logs_right
    joined = max(end_left, end_right)  # parent barrier
    if units <= k_max:
        clock = VirtualClock(cfg.virtual_eval_ms, start_ms=joined)
        evaluator = _VirtualEvaluator(objective, slots=partition.size)
        descent_id = f"k{units}-w{partition.start}"
        seed = mix64(cfg.seed, units, partition.start)
        logs.append(
            _run_one_descent(
                cfg, objective, partition.start, partition.size, units,
                descent_id, seed, evaluator, clock,
            )
        )
        joined = clock.now_ms()
    return logs, joined


def run_k_replicated(cfg: StrategyConfig, objective) -> list[RunLog]:
    """Run the replicate-then-merge strategy; one RunLog per descent.

    Logs are ordered deterministically: left subtree, right subtree, then
    the merged parent descent (the order descents complete in a run with
    a fair scheduler).
    """
    cfg.validate_common()
    if cfg.k_max_replicated is None:
        raise ConfigError("k_max_replicated is required for run_k_replicated")
    _require_power_of_two(cfg.k_max_replicated, "k_max_replicated")
    units = _replicated_unit_count(cfg)

    if cfg.virtual_eval_ms is not None:
        root = ResourcePartition(fabric=None, start=0, size=cfg.total_workers)
        logs, _ = _replicated_virtual(
            cfg, objective, root, units, cfg.k_max_replicated, 0.0
        )
        return logs
    with WorkerFabric(cfg.total_workers) as fabric:
        clock = RealClock()
        return _replicated_real(
            cfg, objective, fabric.root(), units, cfg.k_max_replicated, clock
        )


# ---------------------------------------------------------------------------
# K-Distributed


def _distributed_layout(cfg: StrategyConfig, k_max: int) -> list[tuple[int, int, int]]:
    """Partition layout as (k, start, size) rungs, carved contiguously."""
    rungs = []
    start = 0
    k = 1
    while k <= k_max:
        size = k * cfg.unit
        rungs.append((k, start, size))
        start += size
        k *= 2
    if start > cfg.total_workers:
        raise ConfigError(
            f"insufficient workers: ladder up to K={k_max} needs {start}, "
            f"fabric has {cfg.total_workers}"
        )
    return rungs


def _distributed_rung_real(cfg, objective, partition, k, clock) -> list[RunLog]:
    logs = []
    round_index = 0
    while True:
        descent_id = f"k{k}-r{round_index}"
        seed = mix64(cfg.seed, k, round_index)
        evaluator = PartitionEvaluator(partition, objective)
        logs.append(
            _run_one_descent(
                cfg, objective, partition.start, partition.size, k,
                descent_id, seed, evaluator, clock,
            )
        )
        round_index += 1
        if not cfg.restart_on_finish:
            return logs
        if cfg.deadline_ms is not None and clock.now_ms() >= cfg.deadline_ms:
            return logs


def _distributed_rung_virtual(cfg, objective, start, size, k) -> list[RunLog]:
    logs = []
    round_index = 0
    now = 0.0
    while True:
        descent_id = f"k{k}-r{round_index}"
        seed = mix64(cfg.seed, k, round_index)
        clock = VirtualClock(cfg.virtual_eval_ms, start_ms=now)
        evaluator = _VirtualEvaluator(objective, slots=size)
        logs.append(
            _run_one_descent(
                cfg, objective, start, size, k, descent_id, seed, evaluator, clock
            )
        )
        now = clock.now_ms()
        round_index += 1
        if not cfg.restart_on_finish:
            return logs
        if cfg.deadline_ms is not None and now >= cfg.deadline_ms:
            return logs


def run_k_distributed(cfg: StrategyConfig, objective) -> list[RunLog]:
    """Run every ladder rung concurrently on its own partition.

    Returns one RunLog per descent (restarts included), ordered by rung
    then restart round.
    """
    cfg.validate_common()
    if cfg.k_max_distributed is None:
        raise ConfigError("k_max_distributed is required for run_k_distributed")
    _require_power_of_two(cfg.k_max_distributed, "k_max_distributed")
    rungs = _distributed_layout(cfg, cfg.k_max_distributed)

    if cfg.virtual_eval_ms is not None:
        logs: list[RunLog] = []
        for k, start, size in rungs:
            logs.extend(_distributed_rung_virtual(cfg, objective, start, size, k))
        return logs

    with WorkerFabric(cfg.total_workers) as fabric:
        clock = RealClock()
        results: list[list[RunLog] | None] = [None] * len(rungs)
        errors: list[BaseException] = []

        def rung_task(index, k, start, size):
            partition = ResourcePartition(fabric=fabric, start=start, size=size)
            try:
                results[index] = _distributed_rung_real(
                    cfg, objective, partition, k, clock
                )
            except BaseException as exc:
                errors.append(exc)

        threads = [
            threading.Thread(target=rung_task, args=(i, k, start, size), daemon=True)
            for i, (k, start, size) in enumerate(rungs)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]
        logs = []
        for rung_logs in results:
            logs.extend(rung_logs)
        return logs
