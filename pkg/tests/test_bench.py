import io

import numpy as np
import pytest

from ptsbe.bench import (
    CSV_COLUMNS,
    batch_time_curve,
    geo_stats,
    instance_circuit,
    read_csv,
    speedup,
    sweep,
    throughput,
    write_csv,
)
from ptsbe.circuits import random_circuit
from ptsbe.engine import RunConfig


class TestThroughput:
    def test_simple_rate(self):
        assert throughput(1000, 2.0) == 500.0

    def test_zero_shots(self):
        assert throughput(0, 1.0) == 0.0

    def test_zero_time_is_measurement_error(self):
        with pytest.raises(ValueError):
            throughput(10, 0.0)

    def test_speedup_ratio(self):
        assert speedup(100.0, 2.0) == 50.0
        with pytest.raises(ValueError):
            speedup(100.0, 0.0)


class TestGeoStats:
    def test_two_point_mean(self):
        gm, _ = geo_stats([10.0, 1000.0])
        assert gm == pytest.approx(100.0)

    def test_identical_values_have_unit_gsd(self):
        gm, gsd = geo_stats([7.0, 7.0, 7.0])
        assert gm == pytest.approx(7.0)
        assert gsd == pytest.approx(1.0)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            geo_stats([1.0, -2.0])
        with pytest.raises(ValueError):
            geo_stats([])

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_log_space_recomputation(self, seed):
        rng = np.random.default_rng(seed)
        vals = np.exp(rng.standard_normal(int(rng.integers(2, 20))) * 3.0)
        gm, gsd = geo_stats(vals)
        logs = np.log(vals)
        assert abs(np.log(gm) - logs.mean()) <= 1e-12
        assert abs(np.log(gsd) - logs.std()) <= 1e-12


def tiny_template(**kw):
    base = dict(
        n=4,
        g=6,
        mode="ptsbe-proportional",
        error_sets=2,
        total_shots=10,
        hypersamples=2,
        seed=5,
        timeout_s=60.0,
    )
    base.update(kw)
    return RunConfig(**base)


class TestSweep:
    def test_row_counting_and_modes(self):
        rows = sweep(
            tiny_template(),
            ns=[4, 5],
            gs=[6, 8],
            modes=["ptsbe-proportional", "baseline"],
            circuits_per_point=2,
        )
        instance_rows = [r for r in rows if r["row_type"] == "instance"]
        summary_rows = [r for r in rows if r["row_type"] == "summary"]
        # 2x2 grid x 2 instances x 2 modes
        assert len(instance_rows) == 16
        assert len(summary_rows) == 8

    def test_modes_share_circuit_seeds(self):
        rows = sweep(
            tiny_template(),
            ns=[4],
            gs=[6],
            modes=["ptsbe-proportional", "baseline"],
            circuits_per_point=3,
        )
        inst = [r for r in rows if r["row_type"] == "instance"]
        by_mode = {}
        for r in inst:
            by_mode.setdefault(r["mode"], []).append((r["instance"], r["circuit_seed"]))
        assert by_mode["ptsbe-proportional"] == by_mode["baseline"]

    def test_speedup_present_only_with_baseline_partner(self):
        rows = sweep(
            tiny_template(),
            ns=[4],
            gs=[6],
            modes=["ptsbe-proportional", "baseline"],
            circuits_per_point=2,
        )
        for r in rows:
            if r["row_type"] == "instance" and r["mode"] == "ptsbe-proportional":
                assert float(r["speedup"]) > 0
            if r["row_type"] == "instance" and r["mode"] == "baseline":
                assert "speedup" not in r

    def test_resource_failures_flagged(self):
        rows = sweep(
            tiny_template(max_intermediate=1),
            ns=[4],
            gs=[6],
            modes=["ptsbe-proportional"],
            circuits_per_point=2,
        )
        inst = [r for r in rows if r["row_type"] == "instance"]
        summary = [r for r in rows if r["row_type"] == "summary"][0]
        assert all(r["failed"] for r in inst)
        assert float(summary["failed_fraction"]) == 1.0
        assert summary["flagged"] is True

    def test_explicit_batch_sizes_used_when_matching(self):
        rows = sweep(
            tiny_template(batch_sizes=(2, 2)),
            ns=[4],
            gs=[6],
            modes=["ptsbe-proportional"],
            circuits_per_point=1,
        )
        inst = [r for r in rows if r["row_type"] == "instance"][0]
        assert inst["batch_sizes"] == "2,2"

    def test_parallel_points_produce_identical_records(self):
        kwargs = dict(
            ns=[4, 5],
            gs=[6],
            modes=["ptsbe-proportional"],
            circuits_per_point=2,
        )
        serial = sweep(tiny_template(), point_workers=1, **kwargs)
        parallel = sweep(tiny_template(), point_workers=2, **kwargs)
        stable = lambda r: {k: v for k, v in r.items()
                            if "time" not in k and k != "throughput" and "geo" not in k and "gsd" not in k}
        assert [stable(r) for r in serial] == [stable(r) for r in parallel]

    def test_pinned_circuits_reused(self):
        circuits = [
            random_circuit(4, 6, rng=np.random.default_rng(s)) for s in range(2)
        ]
        rows = sweep(
            tiny_template(),
            ns=[4],
            gs=[6],
            modes=["ptsbe-proportional"],
            circuits_per_point=2,
            circuits=circuits,
        )
        assert len([r for r in rows if r["row_type"] == "instance"]) == 2
        with pytest.raises(ValueError):
            sweep(
                tiny_template(),
                ns=[4, 5],
                gs=[6],
                modes=["ptsbe-proportional"],
                circuits=circuits,
            )


class TestCsv:
    def test_round_trip_lossless(self):
        rows = sweep(
            tiny_template(),
            ns=[4],
            gs=[6],
            modes=["ptsbe-proportional", "baseline"],
            circuits_per_point=2,
        )
        buf = io.StringIO()
        write_csv(rows, buf)
        buf.seek(0)
        back = read_csv(buf)
        assert len(back) == len(rows)
        for orig, parsed in zip(rows, back):
            for col in CSV_COLUMNS:
                if col in orig and orig[col] is not None:
                    assert parsed[col] == str(orig[col])
        # float fields survive exactly through repr
        for orig, parsed in zip(rows, back):
            if orig["row_type"] == "instance" and not orig["failed"]:
                assert float(parsed["throughput"]) == float(orig["throughput"])

    def test_rows_carry_rerun_information(self):
        rows = sweep(
            tiny_template(),
            ns=[4],
            gs=[6],
            modes=["ptsbe-proportional"],
            circuits_per_point=1,
        )
        inst = [r for r in rows if r["row_type"] == "instance"][0]
        for col in ("mode", "n", "g", "circuit_seed", "run_seed", "batch_sizes",
                    "error_sets", "total_shots", "hypersamples"):
            assert inst.get(col) not in (None, "")


class TestInstanceCircuits:
    def test_instance_seeds_mode_independent(self):
        a, seed_a = instance_circuit(tiny_template(mode="ptsbe-proportional"), 3, 0)
        b, seed_b = instance_circuit(tiny_template(mode="baseline"), 3, 0)
        assert a == b and seed_a == seed_b

    def test_instances_distinct(self):
        a, _ = instance_circuit(tiny_template(), 3, 0)
        b, _ = instance_circuit(tiny_template(), 3, 1)
        assert a != b

    def test_row_circuit_seed_regenerates_circuit(self):
        cfg = tiny_template()
        c, seed = instance_circuit(cfg, 3, 1)
        again = random_circuit(
            cfg.n, cfg.g,
            two_qubit_fraction=cfg.two_qubit_fraction,
            p_range=cfg.p_range,
            rng=np.random.default_rng(seed),
        )
        assert again == c


class TestBatchCurve:
    def test_rows_for_each_feasible_b(self):
        c = random_circuit(8, 16, rng=np.random.default_rng(2))
        rows = batch_time_curve(c, [4, 6, 8, 12], hypersamples=2, reps=2)
        assert [r["b"] for r in rows] == [4, 6, 8]  # 12 > n skipped
        for r in rows:
            assert r["stage_seconds"] > 0
            assert r["per_qubit_seconds"] == pytest.approx(r["stage_seconds"] / r["b"])
