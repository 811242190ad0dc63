"""Restart ladder with doubling populations on a multimodal landscape.

A single small-population descent on the rastrigin function usually
parks in a local basin. The ladder reacts by restarting with twice the
population each time, which widens the search until a descent reaches
the global basin. This script runs one ladder and reports what each
rung did.
"""

from ipopcma import IpopConfig, run_ipop
from ipopcma.restarts import resolve_objective


def main() -> None:
    cfg = IpopConfig(
        lambda_start=8,
        k_max=16,
        dimension=8,
        objective_id="rastrigin",
        seed=9,
        target_gap=1e-8,
        max_evals_total=200_000,
        instance_seed=5,
    )
    f_opt = resolve_objective(cfg).f_opt
    log = run_ipop(cfg)

    print(f"{'descent':>8} {'popsize':>8} {'evals':>8} {'stop':>12} {'gap after':>12}")
    for descent_id, reason in log.stops.items():
        meta = log.meta[descent_id]
        incumbent = max(
            (r for r in log.records if r.descent_id == descent_id),
            key=lambda r: r.evals,
        ).best_f
        print(
            f"{descent_id:>8} {meta['population']:>8} {meta['descent_evals']:>8}"
            f" {reason.value:>12} {incumbent - f_opt:>12.3e}"
        )

    summary = log.meta["summary"]
    print()
    print(f"total evaluations: {summary['evals']}")
    print(f"best quality found: {summary['best_f']:.10f}")
    print(f"gap to the instance optimum: {summary['best_f'] - f_opt:.3e}")


if __name__ == "__main__":
    main()
