"""Experiment runner.

Subcommands:

- run: execute a plan (algorithms x functions x dimensions x costs x
  seeded runs), writing one run-log CSV per cell plus a manifest that
  records every resolved setting and per-cell seed. Completed cells are
  skipped on re-runs unless forced, and replaying a manifest reproduces
  each log's best_f column bit-exactly.
- analyze: read a results directory and write ERT, ECDF, speedup, and
  first-hitter CSVs on both the wall-clock and evaluation-count axes.
- list-functions: print the objective catalog.

Configuration is a flat key=value file; command-line flags override file
values, and built-in defaults fill the rest. All durations are
milliseconds except --wall-limit-min, which is minutes for convenience
and is converted on parse.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from dataclasses import dataclass
from pathlib import Path

from . import analysis, objectives
from ._seeds import mix64
from .clocks import VirtualClock
from .errors import ConfigError, ContractError
from .fabric import StrategyConfig, run_k_distributed, run_k_replicated
from .restarts import IpopConfig, run_ipop
from .runlog import RunLog

ALGORITHMS = ("seq-ipop", "k-replicated", "k-distributed")
PARALLEL_ALGORITHMS = ("k-replicated", "k-distributed")
_ALG_CODE = {"seq-ipop": 1, "k-replicated": 2, "k-distributed": 3}

MANIFEST_NAME = "manifest.txt"

# The built-in plan: dimension 10, three evaluation-cost levels, the
# default population and ladder height, 20 seeded runs per cell.
DEFAULTS = {
    "algorithms": "seq-ipop",
    "functions": "",  # empty means the whole catalog
    "dims": "10",
    "costs_ms": "0,1,10",
    "runs": "20",
    "lambda_start": "12",
    "kmax": "16",
    "workers": "16",
    "unit_workers": "",
    "wall_limit_ms": "",
    "eval_limit": "",
    "seed": "1",
    "instance_seed": "1",
    "target_gap": "1e-8",
    "restart_on_finish": "false",
    "virtual_time_ms": "",
    "out": "results",
}


def parse_config(path) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments are skipped."""
    values: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def _parse_optional(key: str, value: str, kind):
    if value == "" or value.lower() == "none":
        return None
    return kind(key, value)


def _parse_bool(key: str, value: str) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key} must be true or false, got {value!r}")


def _parse_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


@dataclass(frozen=True)
class ExperimentPlan:
    """Fully resolved run grid and shared limits."""

    algorithms: tuple[str, ...]
    functions: tuple[str, ...]
    dims: tuple[int, ...]
    costs_ms: tuple[float, ...]
    runs: int
    lambda_start: int
    kmax: int
    workers: int
    unit_workers: int | None
    wall_limit_ms: float | None
    eval_limit: int | None
    seed: int
    instance_seed: int
    target_gap: float | None
    restart_on_finish: bool
    virtual_time_ms: float | None
    out: str

    def validate(self) -> None:
        known = objectives.list_function_ids()
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ConfigError(
                    f"unknown algorithm {alg!r} (known: {', '.join(ALGORITHMS)})"
                )
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        for fid in self.functions:
            if fid not in known:
                raise ConfigError(
                    f"unknown function {fid!r} (known: {', '.join(known)})"
                )
        if not self.functions:
            raise ConfigError("at least one function is required")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if not self.dims:
            raise ConfigError("at least one dimension is required")
        if not self.costs_ms:
            raise ConfigError("at least one cost level is required")
        if any(c < 0 for c in self.costs_ms):
            raise ConfigError("costs_ms must be non-negative")
        if any(alg in PARALLEL_ALGORITHMS for alg in self.algorithms):
            if self.workers < self.lambda_start:
                raise ConfigError(
                    f"parallel algorithms need workers >= lambda_start, "
                    f"got {self.workers} < {self.lambda_start}"
                )

    def cells(self):
        """(algorithm, function, dim, cost_ms, run_index) in a fixed order."""
        return itertools.product(
            self.algorithms, self.functions, self.dims, self.costs_ms,
            range(self.runs),
        )

    def cell_name(self, alg: str, fid: str, dim: int, cost: float, run: int) -> str:
        return f"{alg}__{fid}__d{dim}__c{cost:g}__r{run}"

    def cell_seed(self, alg: str, fid: str, dim: int, cost: float, run: int) -> int:
        """Stable per-cell seed, independent of which subsets get run."""
        func_index = objectives.list_function_ids().index(fid)
        cost_us = round(cost * 1000.0)
        return mix64(self.seed, _ALG_CODE[alg], func_index, dim, cost_us, run)


def resolve_plan(file_values: dict[str, str], overrides: dict[str, str]) -> ExperimentPlan:
    """Defaults, then config-file values, then command-line overrides."""
    values = dict(DEFAULTS)
    for source in (file_values, overrides):
        for key, value in source.items():
            if key.startswith("seed."):
                continue  # informational per-cell seeds in a replayed manifest
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key {key!r}")
            values[key] = value
    functions = tuple(_parse_list(values["functions"]))
    if not functions:
        functions = tuple(objectives.list_function_ids())
    plan = ExperimentPlan(
        algorithms=tuple(_parse_list(values["algorithms"])),
        functions=functions,
        dims=tuple(_parse_int("dims", d) for d in _parse_list(values["dims"])),
        costs_ms=tuple(
            _parse_float("costs_ms", c) for c in _parse_list(values["costs_ms"])
        ),
        runs=_parse_int("runs", values["runs"]),
        lambda_start=_parse_int("lambda_start", values["lambda_start"]),
        kmax=_parse_int("kmax", values["kmax"]),
        workers=_parse_int("workers", values["workers"]),
        unit_workers=_parse_optional("unit_workers", values["unit_workers"], _parse_int),
        wall_limit_ms=_parse_optional(
            "wall_limit_ms", values["wall_limit_ms"], _parse_float
        ),
        eval_limit=_parse_optional("eval_limit", values["eval_limit"], _parse_int),
        seed=_parse_int("seed", values["seed"]),
        instance_seed=_parse_int("instance_seed", values["instance_seed"]),
        target_gap=_parse_optional("target_gap", values["target_gap"], _parse_float),
        restart_on_finish=_parse_bool(
            "restart_on_finish", values["restart_on_finish"]
        ),
        virtual_time_ms=_parse_optional(
            "virtual_time_ms", values["virtual_time_ms"], _parse_float
        ),
        out=values["out"],
    )
    plan.validate()
    return plan


def _plan_values(plan: ExperimentPlan) -> dict[str, str]:
    """The plan as manifest key=value strings (inverse of resolve_plan)."""

    def join(items):
        return ",".join(f"{item:g}" if isinstance(item, float) else str(item)
                        for item in items)

    def opt(value):
        return "" if value is None else f"{value:g}"

    return {
        "algorithms": join(plan.algorithms),
        "functions": join(plan.functions),
        "dims": join(plan.dims),
        "costs_ms": join(plan.costs_ms),
        "runs": str(plan.runs),
        "lambda_start": str(plan.lambda_start),
        "kmax": str(plan.kmax),
        "workers": str(plan.workers),
        "unit_workers": "" if plan.unit_workers is None else str(plan.unit_workers),
        "wall_limit_ms": opt(plan.wall_limit_ms),
        "eval_limit": "" if plan.eval_limit is None else str(plan.eval_limit),
        "seed": str(plan.seed),
        "instance_seed": str(plan.instance_seed),
        "target_gap": "" if plan.target_gap is None else repr(plan.target_gap),
        "restart_on_finish": "true" if plan.restart_on_finish else "false",
        "virtual_time_ms": opt(plan.virtual_time_ms),
        "out": plan.out,
    }


def write_manifest(plan: ExperimentPlan, path) -> None:
    lines = [f"{key}={value}" for key, value in _plan_values(plan).items()]
    for alg, fid, dim, cost, run in plan.cells():
        name = plan.cell_name(alg, fid, dim, cost, run)
        lines.append(f"seed.{name}={plan.cell_seed(alg, fid, dim, cost, run)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _merge_logs(logs: list[RunLog]) -> RunLog:
    """Concatenate per-descent logs in their structural (deterministic) order."""
    merged = RunLog()
    for log in logs:
        merged.records.extend(log.records)
        merged.stops.update(log.stops)
        merged.meta.update(log.meta)
    return merged


def run_cell(
    plan: ExperimentPlan, alg: str, fid: str, dim: int, cost: float, run: int
) -> RunLog:
    """Execute one (algorithm, function, dimension, cost, run) cell.

    In virtual-time mode the evaluation cost is modeled by the logical
    clock instead of being spun on the CPU, so the objective is built
    with zero additional cost.
    """
    seed = plan.cell_seed(alg, fid, dim, cost, run)
    virtual = plan.virtual_time_ms
    real_cost = 0.0 if virtual is not None else cost
    if alg == "seq-ipop":
        cfg = IpopConfig(
            lambda_start=plan.lambda_start,
            k_max=plan.kmax,
            dimension=dim,
            objective_id=fid,
            seed=seed,
            target_gap=plan.target_gap,
            max_wall_ms=plan.wall_limit_ms,
            max_evals_total=plan.eval_limit,
            instance_seed=plan.instance_seed,
            cost_ms=real_cost,
        )
        clock = VirtualClock(virtual) if virtual is not None else None
        return run_ipop(cfg, clock=clock)
    suite = objectives.make_suite(
        dim, additional_cost_ms=real_cost, instance_seed=plan.instance_seed
    )
    objective = next(obj for obj in suite if obj.id == fid)
    cfg = StrategyConfig(
        total_workers=plan.workers,
        lambda_start=plan.lambda_start,
        seed=seed,
        k_max_replicated=plan.kmax if alg == "k-replicated" else None,
        k_max_distributed=plan.kmax if alg == "k-distributed" else None,
        unit_workers=plan.unit_workers,
        restart_on_finish=plan.restart_on_finish,
        deadline_ms=plan.wall_limit_ms,
        max_evals_per_descent=plan.eval_limit,
        target_gap=plan.target_gap,
        virtual_eval_ms=virtual,
    )
    runner = run_k_replicated if alg == "k-replicated" else run_k_distributed
    return _merge_logs(runner(cfg, objective))


def cmd_run(args) -> int:
    file_values = parse_config(args.config) if args.config else {}
    plan = resolve_plan(file_values, _cli_overrides(args))
    out_dir = Path(plan.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(plan, out_dir / MANIFEST_NAME)
    executed = skipped = 0
    for alg, fid, dim, cost, run in plan.cells():
        path = out_dir / f"{plan.cell_name(alg, fid, dim, cost, run)}.csv"
        if path.exists() and not args.force:
            skipped += 1
            continue
        log = run_cell(plan, alg, fid, dim, cost, run)
        analysis.write_runlog_csv(path, log)
        executed += 1
    print(f"{executed} cells run, {skipped} skipped, results in {out_dir}")
    return 0


def _slice_runs(plan: ExperimentPlan, out_dir: Path, alg: str, dim: int,
                cost: float, suite_by_id, grid, axis):
    """(hits, spent) per run for every function of one grid slice."""
    runs_by_function: dict[str, list[tuple[dict, float]]] = {}
    for fid in plan.functions:
        f_opt = suite_by_id[fid].f_opt
        per_run = []
        for run in range(plan.runs):
            path = out_dir / f"{plan.cell_name(alg, fid, dim, cost, run)}.csv"
            if not path.exists():
                raise ContractError(f"missing run log {path}")
            log = analysis.read_runlog_csv(path)
            if alg == "seq-ipop":
                hits = analysis.hitting_times(log, f_opt, grid, axis)
                spent = analysis.spent_time(log, axis)
            else:
                descents = list(analysis.split_by_descent(log).values())
                hits, spent = analysis.run_hitting_times(descents, f_opt, grid, axis)
            per_run.append((hits, spent))
        runs_by_function[fid] = per_run
    return runs_by_function


def _best_k_inputs(plan: ExperimentPlan, out_dir: Path, dim: int, cost: float,
                   fid: str):
    per_run_logs = []
    for run in range(plan.runs):
        path = out_dir / f"{plan.cell_name('k-distributed', fid, dim, cost, run)}.csv"
        if not path.exists():
            raise ContractError(f"missing run log {path}")
        log = analysis.read_runlog_csv(path)
        per_run_logs.append(list(analysis.split_by_descent(log).values()))
    return per_run_logs


def cmd_analyze(args) -> int:
    out_dir = Path(args.out)
    manifest_path = out_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise ContractError(f"missing manifest {manifest_path}")
    values = parse_config(manifest_path)
    plan = resolve_plan(values, {})
    if args.epsilons:
        grid = analysis.TargetGrid(
            epsilons=tuple(_parse_float("epsilons", e)
                           for e in _parse_list(args.epsilons))
        )
    else:
        grid = analysis.TargetGrid()
    written = []
    axes = (("wall_ms", "ert_ms", "time_ms", ""), ("evals", "ert_evals", "evals", "_evals"))
    for dim, cost in itertools.product(plan.dims, plan.costs_ms):
        suite_by_id = {
            obj.id: obj
            for obj in objectives.make_suite(dim, instance_seed=plan.instance_seed)
        }
        tag = f"d{dim}__c{cost:g}"
        tables_by_axis: dict[str, dict[str, analysis.ErtTable]] = {}
        for axis, ert_col, time_col, suffix in axes:
            tables: dict[str, analysis.ErtTable] = {}
            for alg in plan.algorithms:
                runs_by_function = _slice_runs(
                    plan, out_dir, alg, dim, cost, suite_by_id, grid, axis
                )
                table = analysis.build_ert_table(alg, runs_by_function, grid)
                tables[alg] = table
                path = out_dir / f"ert__{alg}__{tag}{suffix}.csv"
                analysis.write_ert_csv(path, table, time_column=ert_col)
                written.append(path)
                all_hits = [
                    hits[eps]
                    for runs in runs_by_function.values()
                    for hits, _ in runs
                    for eps in grid.epsilons
                ]
                curve = analysis.ecdf(all_hits, total=len(all_hits))
                path = out_dir / f"ecdf__{alg}__{tag}{suffix}.csv"
                analysis.write_ecdf_csv(path, alg, curve, time_column=time_col)
                written.append(path)
            tables_by_axis[axis] = tables
        wall_tables = tables_by_axis["wall_ms"]
        if len(plan.algorithms) >= 2:
            if ("k-replicated" in wall_tables and "k-distributed" in wall_tables):
                base_alg, other_alg = "k-replicated", "k-distributed"
            else:
                base_alg, other_alg = plan.algorithms[0], plan.algorithms[1]
            result = analysis.speedup_table(
                wall_tables[base_alg], wall_tables[other_alg]
            )
            path = out_dir / f"speedup__{base_alg}_vs_{other_alg}__{tag}.csv"
            analysis.write_speedup_csv(path, result)
            written.append(path)
        if "k-distributed" in plan.algorithms:
            for fid in plan.functions:
                per_run_logs = _best_k_inputs(plan, out_dir, dim, cost, fid)
                f_opts = [suite_by_id[fid].f_opt] * plan.runs
                table = analysis.best_k_table(per_run_logs, f_opts, grid)
                path = out_dir / f"best_k__{fid}__{tag}.csv"
                analysis.write_best_k_csv(path, fid, table)
                written.append(path)
    print(f"{len(written)} analysis files written to {out_dir}")
    return 0


def cmd_list_functions(args) -> int:
    group_of = {}
    for group, ids in objectives.FUNCTION_GROUPS.items():
        for fid in ids:
            group_of[fid] = group
    for fid in objectives.list_function_ids():
        print(f"{fid}  ({group_of[fid]})")
    return 0


def _cli_overrides(args) -> dict[str, str]:
    """Flag values, translated to config keys; unset flags contribute nothing."""
    overrides: dict[str, str] = {}
    if args.algo is not None:
        overrides["algorithms"] = args.algo
    if args.functions is not None:
        overrides["functions"] = args.functions
    if args.dim is not None:
        overrides["dims"] = args.dim
    if args.cost_ms is not None:
        overrides["costs_ms"] = args.cost_ms
    if args.runs is not None:
        overrides["runs"] = str(args.runs)
    if args.lambda_start is not None:
        overrides["lambda_start"] = str(args.lambda_start)
    if args.kmax is not None:
        overrides["kmax"] = str(args.kmax)
    if args.workers is not None:
        overrides["workers"] = str(args.workers)
    if args.unit_workers is not None:
        overrides["unit_workers"] = str(args.unit_workers)
    if args.wall_limit_min is not None:
        overrides["wall_limit_ms"] = repr(args.wall_limit_min * 60000.0)
    if args.eval_limit is not None:
        overrides["eval_limit"] = str(args.eval_limit)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.instance_seed is not None:
        overrides["instance_seed"] = str(args.instance_seed)
    if args.target_gap is not None:
        overrides["target_gap"] = args.target_gap
    if args.restart_on_finish:
        overrides["restart_on_finish"] = "true"
    if args.virtual_time is not None:
        overrides["virtual_time_ms"] = repr(args.virtual_time)
    if args.out is not None:
        overrides["out"] = args.out
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipopcma",
        description="Run and analyze restart-ladder optimizer experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment plan")
    run.add_argument("--config", help="key=value plan file (a manifest replays)")
    run.add_argument("--algo", help="comma list: seq-ipop,k-replicated,k-distributed")
    run.add_argument("--functions", help="comma list of function ids (default: all)")
    run.add_argument("--dim", help="comma list of dimensions")
    run.add_argument("--cost-ms", help="comma list of per-evaluation costs (ms)")
    run.add_argument("--runs", type=int, help="seeded runs per cell")
    run.add_argument("--lambda-start", type=int, help="base population size")
    run.add_argument("--kmax", type=int, help="largest population multiplier")
    run.add_argument("--workers", type=int, help="fabric size for parallel algorithms")
    run.add_argument("--unit-workers", type=int,
                     help="workers per K=1 descent (default: lambda-start)")
    run.add_argument("--wall-limit-min", type=float,
                     help="wall-clock limit per run, in minutes")
    run.add_argument("--eval-limit", type=int, help="evaluation budget per run")
    run.add_argument("--seed", type=int, help="base seed of the whole plan")
    run.add_argument("--instance-seed", type=int, help="objective instance seed")
    run.add_argument("--target-gap", help="stop gap above the optimum (or 'none')")
    run.add_argument("--restart-on-finish", action="store_true",
                     help="k-distributed restarts finished descents until deadline")
    run.add_argument("--virtual-time", type=float, metavar="MS_PER_EVAL",
                     help="virtual-time mode: logical ms per evaluation")
    run.add_argument("--out", help="results directory")
    run.add_argument("--force", action="store_true",
                     help="re-run cells whose logs already exist")
    run.set_defaults(fn=cmd_run)

    analyze = sub.add_parser("analyze", help="post-process a results directory")
    analyze.add_argument("--out", required=True, help="results directory to analyze")
    analyze.add_argument("--epsilons",
                         help="comma list of target gaps (default: built-in grid)")
    analyze.set_defaults(fn=cmd_analyze)

    lf = sub.add_parser("list-functions", help="print the objective catalog")
    lf.set_defaults(fn=cmd_list_functions)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ContractError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
