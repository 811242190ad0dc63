"""Restarted CMA-ES with batched linear algebra, a logical-worker fabric for
descent scheduling, benchmark objectives with injectable evaluation cost, and
an ERT/ECDF analysis pipeline."""

from __future__ import annotations

from .analysis import (
    TargetGrid,
    best_k_table,
    build_ert_table,
    ecdf,
    ert,
    speedup_table,
)
from .clocks import RealClock, VirtualClock
from .core import (
    CmaParams,
    CmaState,
    DescentLimits,
    SequentialEvaluator,
    derive_params,
    init_state,
    run_descent,
    sample_population,
)
from .errors import (
    ConfigError,
    ContractError,
    NumericError,
    PartitionError,
    ShapeError,
)
from .fabric import (
    PartitionEvaluator,
    ResourcePartition,
    StrategyConfig,
    WorkerFabric,
    evaluate_scatter_gather,
    run_k_distributed,
    run_k_replicated,
)
from .objectives import (
    Objective,
    busy_wait,
    list_function_ids,
    make_objective,
    make_suite,
)
from .restarts import IpopConfig, run_ipop
from .runlog import RunLog, RunRecord, StopReason

__version__ = "0.1.0"

__all__ = [
    "CmaParams",
    "CmaState",
    "ConfigError",
    "ContractError",
    "DescentLimits",
    "IpopConfig",
    "NumericError",
    "Objective",
    "PartitionError",
    "PartitionEvaluator",
    "RealClock",
    "ResourcePartition",
    "RunLog",
    "RunRecord",
    "SequentialEvaluator",
    "ShapeError",
    "StopReason",
    "StrategyConfig",
    "TargetGrid",
    "VirtualClock",
    "WorkerFabric",
    "best_k_table",
    "build_ert_table",
    "busy_wait",
    "derive_params",
    "ecdf",
    "ert",
    "evaluate_scatter_gather",
    "init_state",
    "list_function_ids",
    "make_objective",
    "make_suite",
    "run_descent",
    "run_ipop",
    "run_k_distributed",
    "run_k_replicated",
    "sample_population",
    "speedup_table",
]
