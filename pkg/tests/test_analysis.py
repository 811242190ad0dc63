"""Tests for run-log post-processing.

Hitting times are checked against an independent per-target linear scan,
ERT against hand-computed values and a charging identity, ECDF against a
counting oracle, and the CSV formats against bit-exact round-trips.
"""

import math

import numpy as np
import pytest

from ipopcma import analysis
from ipopcma.analysis import (
    DEFAULT_EPSILONS,
    EcdfCurve,
    ErtEntry,
    ErtTable,
    TargetGrid,
    best_k_table,
    build_ert_table,
    ecdf,
    ert,
    hitting_times,
    read_ert_csv,
    read_runlog_csv,
    run_hitting_times,
    speedup_table,
    spent_time,
    split_by_descent,
    write_best_k_csv,
    write_ecdf_csv,
    write_ert_csv,
    write_runlog_csv,
    write_speedup_csv,
)
from ipopcma.errors import ConfigError, ContractError
from ipopcma.runlog import RunLog, RunRecord


def make_log(rows):
    """rows: (wall_ms, evals, best_f) or (wall_ms, evals, best_f, id, k)."""
    log = RunLog()
    for row in rows:
        wall, evals, best = row[:3]
        descent_id = row[3] if len(row) > 3 else "d0"
        k = row[4] if len(row) > 4 else 1
        log.append(RunRecord(wall_ms=float(wall), evals=int(evals),
                             best_f=float(best), descent_id=descent_id, k=k))
    return log


def hitting_times_oracle(log, f_opt, grid, axis="wall_ms"):
    """Independent per-target scan over all records."""
    out = {}
    for eps in grid.epsilons:
        out[eps] = None
        for rec in log.records:
            if rec.best_f - f_opt <= eps:
                out[eps] = rec.wall_ms if axis == "wall_ms" else float(rec.evals)
                break
    return out


def random_monotone_log(rng, n_records):
    """Log with strictly increasing time and non-increasing quality."""
    walls = np.cumsum(rng.uniform(0.5, 3.0, size=n_records))
    best = 10.0 ** rng.uniform(-9, 3)
    rows = []
    for i, wall in enumerate(walls):
        if rng.uniform() < 0.6:
            best *= rng.uniform(0.05, 0.99)
        rows.append((wall, (i + 1) * 12, best))
    return make_log(rows)


class TestTargetGrid:
    def test_default_grid_values(self):
        grid = TargetGrid()
        assert grid.epsilons == (1e2, 10 ** 1.5, 1e1, 10 ** 0.5, 1e0,
                                 1e-2, 1e-4, 1e-6, 1e-8)
        assert grid.epsilons[1] == pytest.approx(31.6227766016838, rel=1e-13)
        assert grid.epsilons == DEFAULT_EPSILONS

    def test_rejects_empty(self):
        with pytest.raises(ConfigError):
            TargetGrid(epsilons=())

    def test_rejects_nonpositive(self):
        with pytest.raises(ConfigError):
            TargetGrid(epsilons=(1.0, 0.0))
        with pytest.raises(ConfigError):
            TargetGrid(epsilons=(1.0, -2.0))

    def test_rejects_nondecreasing(self):
        with pytest.raises(ConfigError):
            TargetGrid(epsilons=(1.0, 1.0))
        with pytest.raises(ConfigError):
            TargetGrid(epsilons=(1.0, 2.0))

    def test_accepts_custom_grid(self):
        grid = TargetGrid(epsilons=(5.0, 0.5))
        assert grid.epsilons == (5.0, 0.5)


class TestHittingTimes:
    def test_hand_example(self):
        grid = TargetGrid(epsilons=(10.0, 1.0, 0.01))
        log = make_log([(1.0, 12, 50.0), (2.0, 24, 8.0),
                        (3.0, 36, 0.5), (4.0, 48, 0.5)])
        hits = hitting_times(log, f_opt=0.0, grid=grid)
        assert hits == {10.0: 2.0, 1.0: 3.0, 0.01: None}

    def test_nonzero_optimum(self):
        grid = TargetGrid(epsilons=(1.0,))
        log = make_log([(1.0, 12, -99.2), (2.0, 24, -99.6)])
        hits = hitting_times(log, f_opt=-100.0, grid=grid)
        assert hits == {1.0: 1.0}

    def test_boundary_is_inclusive(self):
        grid = TargetGrid(epsilons=(1.0,))
        log = make_log([(5.0, 12, 1.0)])
        assert hitting_times(log, 0.0, grid) == {1.0: 5.0}

    def test_empty_log_misses_everything(self):
        grid = TargetGrid()
        assert all(t is None for t in hitting_times(RunLog(), 0.0, grid).values())

    def test_evals_axis(self):
        grid = TargetGrid(epsilons=(1.0,))
        log = make_log([(1.0, 12, 5.0), (2.0, 24, 0.5)])
        assert hitting_times(log, 0.0, grid, axis="evals") == {1.0: 24.0}

    def test_unknown_axis_rejected(self):
        log = make_log([(1.0, 12, 5.0)])
        with pytest.raises(ConfigError):
            hitting_times(log, 0.0, TargetGrid(), axis="iterations")

    def test_matches_linear_scan_oracle(self):
        grid = TargetGrid()
        rng = np.random.default_rng(41)
        for trial in range(200):
            log = random_monotone_log(rng, n_records=rng.integers(1, 40))
            f_opt = float(rng.uniform(-100, 100))
            for rec in log.records:
                rec.best_f += f_opt
            for axis in ("wall_ms", "evals"):
                got = hitting_times(log, f_opt, grid, axis=axis)
                want = hitting_times_oracle(log, f_opt, grid, axis=axis)
                assert got == want, f"trial {trial} axis {axis}"

    def test_spent_time(self):
        log = make_log([(1.5, 12, 5.0), (7.25, 24, 0.5)])
        assert spent_time(log) == 7.25
        assert spent_time(log, axis="evals") == 24.0
        assert spent_time(RunLog()) == 0.0


class TestMultiDescent:
    def test_split_by_descent(self):
        log = make_log([
            (1.0, 12, 5.0, "k1-w0", 1),
            (1.0, 12, 7.0, "k2-w0", 2),
            (2.0, 24, 3.0, "k1-w0", 1),
        ])
        parts = split_by_descent(log)
        assert set(parts) == {"k1-w0", "k2-w0"}
        assert [r.wall_ms for r in parts["k1-w0"].records] == [1.0, 2.0]
        assert len(parts["k2-w0"].records) == 1

    def test_run_hitting_times_takes_earliest_descent(self):
        grid = TargetGrid(epsilons=(1.0, 0.01))
        slow = make_log([(5.0, 12, 0.5, "a", 1), (9.0, 24, 0.001, "a", 1)])
        fast = make_log([(2.0, 24, 0.5, "b", 2)])
        hits, spent = run_hitting_times([slow, fast], 0.0, grid)
        assert hits == {1.0: 2.0, 0.01: 9.0}
        assert spent == 9.0

    def test_run_spent_is_latest_descent_end(self):
        grid = TargetGrid(epsilons=(1e-8,))
        a = make_log([(4.0, 12, 3.0, "a", 1)])
        b = make_log([(11.0, 24, 2.0, "b", 2)])
        hits, spent = run_hitting_times([a, b], 0.0, grid)
        assert hits == {1e-8: None}
        assert spent == 11.0


class TestErt:
    def test_all_successes_with_equal_times(self):
        assert ert([(10.0, 10.0)] * 3) == 10.0

    def test_mixed_success_and_miss(self):
        # (5 + 7 + 9) / 2 successful runs.
        assert ert([(5.0, 5.0), (None, 7.0), (9.0, 9.0)]) == 10.5

    def test_all_miss_is_undefined(self):
        assert ert([(None, 3.0), (None, 8.0)]) is None

    def test_empty_input_rejected(self):
        with pytest.raises(ContractError):
            ert([])

    def test_spent_below_hit_rejected(self):
        with pytest.raises(ContractError):
            ert([(5.0, 4.0)])

    def test_all_success_equals_mean(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            times = rng.uniform(1.0, 500.0, size=rng.integers(1, 12))
            value = ert([(float(t), float(t) + 1.0) for t in times])
            assert value == pytest.approx(float(np.mean(times)), rel=1e-15)

    def test_monotone_in_each_hit_time(self):
        rng = np.random.default_rng(43)
        for _ in range(100):
            n = int(rng.integers(2, 10))
            hits = [float(t) for t in rng.uniform(1.0, 100.0, size=n)]
            spent = [h + float(rng.uniform(0, 50)) for h in hits]
            samples = list(zip(hits, spent))
            base = ert(samples)
            i = int(rng.integers(0, n))
            bumped = list(samples)
            bumped[i] = (hits[i] + float(rng.uniform(0, 20)), spent[i] + 20.0)
            assert ert(bumped) >= base

    def test_miss_charges_spent_time_not_budget(self):
        # The miss contributes its recorded 7.0, whatever any cap was.
        assert ert([(2.0, 2.0), (None, 7.0)]) == 9.0


class TestErtTable:
    def test_build_from_hits(self):
        grid = TargetGrid(epsilons=(1.0, 0.01))
        runs = [
            ({1.0: 5.0, 0.01: None}, 20.0),
            ({1.0: 3.0, 0.01: 9.0}, 9.0),
        ]
        table = build_ert_table("seq-ipop", {"sphere": runs}, grid)
        assert table.algorithm == "seq-ipop"
        entry = table.entries[("sphere", 1.0)]
        assert entry == ErtEntry(ert=4.0, successes=2, runs=2)
        entry = table.entries[("sphere", 0.01)]
        assert entry.ert == 29.0  # (20 spent + 9 hit) / 1 success
        assert (entry.successes, entry.runs) == (1, 2)

    def test_unreached_target_has_none(self):
        grid = TargetGrid(epsilons=(1e-8,))
        table = build_ert_table("a", {"f": [({1e-8: None}, 5.0)]}, grid)
        assert table.entries[("f", 1e-8)].ert is None


class TestEcdf:
    def test_hand_example(self):
        curve = ecdf([1.0, 2.0, 3.0, None], total=4)
        assert curve.points == ((1.0, 0.25), (2.0, 0.5), (3.0, 0.75))
        assert curve.final_fraction == 0.75
        assert curve.hits == 3

    def test_duplicates_collapse_into_one_step(self):
        curve = ecdf([2.0, 2.0, 5.0, None], total=4)
        assert curve.points == ((2.0, 0.5), (5.0, 0.75))

    def test_no_hits_is_constant_zero(self):
        curve = ecdf([None, None], total=2)
        assert curve.points == ()
        assert curve.final_fraction == 0.0
        assert curve.hits == 0

    def test_rejects_bad_total(self):
        with pytest.raises(ContractError):
            ecdf([1.0], total=0)
        with pytest.raises(ContractError):
            ecdf([1.0, 2.0], total=1)

    def test_counting_oracle_thousand_cases(self):
        rng = np.random.default_rng(44)
        for _ in range(50):
            total = int(rng.integers(1, 40))
            hits = [
                float(rng.integers(1, 10)) if rng.uniform() < 0.7 else None
                for _ in range(total)
            ]
            curve = ecdf(hits, total)
            hit_times = sorted(t for t in hits if t is not None)
            assert curve.hits == len(hit_times)
            # Fractions are exactly count/total at every step.
            for t, fraction in curve.points:
                count = sum(1 for h in hit_times if h <= t)
                assert fraction == count / total
            # Times strictly increase and fractions strictly increase.
            times = [t for t, _ in curve.points]
            fracs = [f for _, f in curve.points]
            assert times == sorted(set(times))
            assert all(b > a for a, b in zip(fracs, fracs[1:]))

    def test_fractions_nondecreasing_and_bounded(self):
        rng = np.random.default_rng(45)
        for _ in range(50):
            total = int(rng.integers(1, 30))
            hits = [float(rng.uniform(0, 100)) if rng.uniform() < 0.5 else None
                    for _ in range(total)]
            curve = ecdf(hits, total)
            assert 0.0 <= curve.final_fraction <= 1.0


def table_from(algorithm, cells):
    entries = {}
    for (function, eps), value in cells.items():
        if isinstance(value, tuple):
            ert_value, successes, runs = value
        else:
            ert_value, successes, runs = value, 10, 10
        entries[(function, eps)] = ErtEntry(
            ert=ert_value, successes=successes, runs=runs)
    return ErtTable(algorithm=algorithm, entries=entries)


class TestSpeedup:
    def test_self_comparison_is_all_ones(self):
        table = table_from("a", {("f1", 1.0): 5.0, ("f1", 0.01): 80.0})
        result = speedup_table(table, table)
        assert all(cell == 1.0 for cell in result.cells.values())
        assert result.base_wins == 0 and result.other_wins == 0

    def test_ratio_orientation(self):
        base = table_from("base", {("f1", 1.0): 10.0})
        other = table_from("other", {("f1", 1.0): 4.0})
        result = speedup_table(base, other)
        assert result.cells[("f1", 1.0)] == 2.5
        assert result.base_wins == 0 and result.other_wins == 1

    def test_markers(self):
        keys = [("f1", 1.0), ("f1", 0.01), ("f2", 1.0), ("f2", 0.01)]
        base = table_from("b", {keys[0]: 5.0, keys[1]: 5.0,
                                keys[2]: None, keys[3]: None})
        other = table_from("o", {keys[0]: 10.0, keys[1]: None,
                                 keys[2]: 3.0, keys[3]: None})
        result = speedup_table(base, other)
        assert result.cells[keys[0]] == 0.5
        assert result.cells[keys[1]] == "X"
        assert result.cells[keys[2]] == "other-only"
        assert result.cells[keys[3]] == "-"
        assert result.base_wins == 1 and result.other_wins == 0

    def test_win_counts_ignore_exact_ties(self):
        base = table_from("b", {("f", 1.0): 7.0, ("f", 0.1): 3.0})
        other = table_from("o", {("f", 1.0): 7.0, ("f", 0.1): 4.0})
        result = speedup_table(base, other)
        assert result.base_wins == 1 and result.other_wins == 0

    def test_mismatched_grids_rejected(self):
        base = table_from("b", {("f", 1.0): 5.0})
        other = table_from("o", {("f", 0.5): 5.0})
        with pytest.raises(ContractError):
            speedup_table(base, other)


class TestBestK:
    def test_hand_example_mean_of_two_runs(self):
        grid = TargetGrid(epsilons=(1.0,))
        run1 = [make_log([(3.0, 4, 0.5, "k2-r0", 2)]),
                make_log([(5.0, 16, 0.5, "k8-r0", 8)])]
        run2 = [make_log([(9.0, 4, 0.5, "k2-r0", 2)]),
                make_log([(4.0, 16, 0.5, "k8-r0", 8)])]
        table = best_k_table([run1, run2], [0.0, 0.0], grid)
        # First hitters have K=2 then K=8: mean of log2 is (1 + 3) / 2.
        assert table[1.0] == (2.0, 0)

    def test_tie_goes_to_smaller_k_and_is_counted(self):
        grid = TargetGrid(epsilons=(1.0,))
        run = [make_log([(3.0, 4, 0.5, "k2-r0", 2)]),
               make_log([(3.0, 16, 0.5, "k8-r0", 8)])]
        table = best_k_table([run], [0.0], grid)
        assert table[1.0] == (1.0, 1)

    def test_unhit_target_is_none(self):
        grid = TargetGrid(epsilons=(1.0, 1e-8))
        run = [make_log([(3.0, 4, 0.5, "k2-r0", 2)])]
        table = best_k_table([run], [0.0], grid)
        assert table[1.0] == (1.0, 0)
        assert table[1e-8] == (None, 0)

    def test_runs_without_hitters_do_not_contribute(self):
        grid = TargetGrid(epsilons=(1.0,))
        hitter = [make_log([(3.0, 4, 0.5, "k4-r0", 4)])]
        misser = [make_log([(3.0, 4, 50.0, "k2-r0", 2)])]
        table = best_k_table([hitter, misser], [0.0, 0.0], grid)
        assert table[1.0] == (2.0, 0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ContractError):
            best_k_table([[RunLog()]], [0.0, 1.0], TargetGrid())


class TestCsvRoundTrips:
    def test_runlog_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(46)
        log = RunLog()
        for i in range(60):
            log.append(RunRecord(
                wall_ms=float(rng.uniform(0, 1e4)),
                evals=int(rng.integers(1, 10 ** 7)),
                best_f=float(rng.standard_normal() * 10.0 ** rng.integers(-12, 12)),
                descent_id=f"k{2 ** (i % 4)}-w{i % 3}",
                k=2 ** (i % 4),
            ))
        path = tmp_path / "run.csv"
        write_runlog_csv(path, log)
        back = read_runlog_csv(path)
        assert len(back.records) == len(log.records)
        for a, b in zip(log.records, back.records):
            assert a.wall_ms == b.wall_ms
            assert a.evals == b.evals
            assert a.best_f == b.best_f
            assert a.descent_id == b.descent_id
            assert a.k == b.k

    def test_runlog_header(self, tmp_path):
        path = tmp_path / "run.csv"
        write_runlog_csv(path, make_log([(1.0, 12, 5.0)]))
        first = path.read_text().splitlines()[0]
        assert first == "wall_ms,evals,best_f,descent_id,k"

    def test_runlog_reader_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ContractError) as err:
            read_runlog_csv(path)
        assert "other.csv" in str(err.value)

    def test_ert_round_trip_with_undefined_cells(self, tmp_path):
        table = table_from("seq-ipop", {
            ("sphere", 1.0): (12.5, 10, 10),
            ("sphere", 1e-8): (None, 0, 10),
            ("rastrigin", 1.0): (10 ** 1.5, 7, 10),
        })
        path = tmp_path / "ert.csv"
        write_ert_csv(path, table)
        first = path.read_text().splitlines()[0]
        assert first == "algorithm,function,epsilon,ert_ms,successes,runs"
        back = read_ert_csv(path)
        assert back.algorithm == "seq-ipop"
        assert back.entries == table.entries

    def test_ert_evals_axis_column_name(self, tmp_path):
        table = table_from("a", {("f", 1.0): 3.0})
        path = tmp_path / "ert_evals.csv"
        write_ert_csv(path, table, time_column="ert_evals")
        first = path.read_text().splitlines()[0]
        assert first == "algorithm,function,epsilon,ert_evals,successes,runs"
        assert read_ert_csv(path).entries == table.entries

    def test_ecdf_csv(self, tmp_path):
        curve = ecdf([1.0, 2.0, 2.0, None], total=4)
        path = tmp_path / "ecdf.csv"
        write_ecdf_csv(path, "k-dist", curve)
        lines = path.read_text().splitlines()
        assert lines[0] == "algorithm,time_ms,fraction"
        assert lines[1] == "k-dist,1.0,0.25"
        assert lines[2] == "k-dist,2.0,0.75"

    def test_speedup_csv(self, tmp_path):
        base = table_from("b", {("f1", 1.0): 5.0, ("f1", 0.01): 5.0})
        other = table_from("o", {("f1", 1.0): 10.0, ("f1", 0.01): None})
        path = tmp_path / "speedup.csv"
        write_speedup_csv(path, speedup_table(base, other))
        lines = path.read_text().splitlines()
        assert lines[0] == "function,epsilon,ratio_or_marker"
        assert "f1,1.0,0.5" in lines
        assert "f1,0.01,X" in lines

    def test_best_k_csv(self, tmp_path):
        grid = TargetGrid(epsilons=(1.0, 1e-8))
        run = [make_log([(3.0, 4, 0.5, "k4-r0", 4)])]
        table = best_k_table([run], [0.0], grid)
        path = tmp_path / "bestk.csv"
        write_best_k_csv(path, "step_ellipsoid", table)
        lines = path.read_text().splitlines()
        assert lines[0] == "function,epsilon,mean_log2k,ties"
        assert lines[1] == "step_ellipsoid,1.0,2.0,0"
        assert lines[2] == "step_ellipsoid,1e-08,-,0"


class TestPipelineEndToEnd:
    def test_logs_to_speedup_via_tables(self):
        grid = TargetGrid(epsilons=(1.0, 1e-4))
        fast = [hitting_times(make_log([(2.0, 12, 0.5), (4.0, 24, 0.0)]),
                              0.0, grid)]
        slow = [hitting_times(make_log([(6.0, 12, 0.5), (9.0, 24, 0.0)]),
                              0.0, grid)]
        base = build_ert_table("base", {"f": [(fast[0], 4.0)]}, grid)
        other = build_ert_table("other", {"f": [(slow[0], 9.0)]}, grid)
        result = speedup_table(base, other)
        assert result.cells[("f", 1.0)] == pytest.approx(2.0 / 6.0)
        assert result.cells[("f", 1e-4)] == pytest.approx(4.0 / 9.0)
        assert result.base_wins == 2
