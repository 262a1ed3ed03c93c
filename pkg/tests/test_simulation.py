import math

import numpy as np
import pytest

from sparsescan import simulation
from sparsescan.distributions import Cauchy, MixtureSpec, Normal, StudentT, Uniform01
from sparsescan.simulation import (
    CellError,
    ExperimentConfig,
    boundary_annotations,
    calibrate_null,
    calibrate_tests,
    estimate_power,
    estimate_powers,
    replication_rng,
    run_experiment,
)
from sparsescan.statistics import TEST_NAMES

ALPHA = 0.05


def small_config(**kw):
    base = dict(
        family="student_t",
        params={"df": 1.0},
        n=200,
        beta=0.6,
        r_grid=[0.4, 1.2],
        tests=["HC", "StoufferScan"],
        null_reps=200,
        power_reps=40,
        seed=11,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestSeeds:
    def test_replication_streams(self):
        a = replication_rng(1, "null", 0, 5).random(4)
        b = replication_rng(1, "null", 0, 5).random(4)
        c = replication_rng(1, "null", 0, 6).random(4)
        d = replication_rng(1, "power", 0, 5).random(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)

    def test_workers_from_env(self, monkeypatch):
        monkeypatch.setenv("SPARSESCAN_WORKERS", "3")
        assert simulation.resolve_workers() == 3
        assert simulation.resolve_workers(2) == 2
        monkeypatch.delenv("SPARSESCAN_WORKERS")
        assert simulation.resolve_workers() == 1


class TestCalibration:
    def test_max_matches_exact_quantile(self):
        n, reps = 100, 4000
        cal = calibrate_null("Max", n, ALPHA, reps, seed=5)
        exact = (1 - ALPHA) ** (1 / n)
        density = n * exact ** (n - 1)
        se = math.sqrt(ALPHA * (1 - ALPHA) / reps) / density
        assert abs(cal.critical - exact) <= 2 * se

    def test_deterministic(self):
        a = calibrate_null("TippettScan", 150, ALPHA, 300, seed=8)
        b = calibrate_null("TippettScan", 150, ALPHA, 300, seed=8)
        assert a == b

    def test_shared_samples_do_not_change_results(self):
        joint = calibrate_tests(TEST_NAMES, 120, ALPHA, 200, seed=3)
        for t in TEST_NAMES:
            assert calibrate_null(t, 120, ALPHA, 200, seed=3) == joint[t]

    def test_worker_count_invariant(self):
        a = calibrate_tests(["BJ", "HC"], 100, ALPHA, 120, seed=4, workers=1)
        b = calibrate_tests(["BJ", "HC"], 100, ALPHA, 120, seed=4, workers=2)
        assert a == b

    def test_too_few_reps(self):
        with pytest.raises(ValueError, match="null_reps"):
            calibrate_null("HC", 100, ALPHA, 99, seed=0)

    def test_conservative_order_statistic(self):
        # at most ceil(alpha * reps) - 1 calibration scores are strictly beyond the critical value
        scores = np.arange(1000.0)
        assert simulation._critical_from_scores(scores, "large", 0.05) == 950.0
        assert simulation._critical_from_scores(scores, "small", 0.05) == 49.0

    def test_hc_fresh_level(self):
        cal = calibrate_null("HC", 1000, ALPHA, 2000, seed=21)
        null = MixtureSpec(Normal(), 1000, 0.6, shift=0.0)
        power, _ = estimate_power("HC", null, cal, 2000, seed=22)
        assert 0.03 <= power <= 0.07


class TestPower:
    def test_null_power_near_alpha(self):
        cals = calibrate_tests(TEST_NAMES, 100, ALPHA, 2000, seed=1)
        # calibration and fresh draws each carry binomial noise
        band = 3 * math.sqrt(2 * ALPHA * (1 - ALPHA) / 2000)
        for base in (Cauchy(), Normal(), StudentT(0.5)):
            res = estimate_powers(TEST_NAMES, MixtureSpec(base, 100, 0.6, shift=0.0), cals, 2000, seed=2)
            for t, (p, se) in res.items():
                assert abs(p - ALPHA) <= band, t

    def test_deep_signal(self):
        cal = calibrate_null("StoufferScan", 1000, ALPHA, 300, seed=7)
        power, se = estimate_power("StoufferScan", MixtureSpec(Cauchy(), 1000, 0.55, 3.0), cal, 100, seed=8)
        assert power >= 0.95
        assert se == pytest.approx(math.sqrt(power * (1 - power) / 100))

    def test_monotone_in_r(self):
        cals = calibrate_tests(["HC", "TippettScan"], 500, ALPHA, 400, seed=9)
        prev = None
        for k, r in enumerate((0.2, 0.6, 1.0, 1.4)):
            res = estimate_powers(["HC", "TippettScan"], MixtureSpec(StudentT(1.0), 500, 0.6, r), cals, 150, 10, stream=k)
            if prev is not None:
                for t in res:
                    joint = math.hypot(res[t][1], prev[t][1])
                    assert res[t][0] >= prev[t][0] - 2 * joint - 1e-12
            prev = res

    def test_mismatched_n(self):
        cal = calibrate_null("HC", 100, ALPHA, 100, seed=0)
        with pytest.raises(ValueError, match="n="):
            estimate_power("HC", MixtureSpec(Normal(), 200, 0.6, 0.5), cal, 10, seed=0)

    def test_plain_float_critical(self):
        p, _ = estimate_power("Max", MixtureSpec(Normal(), 100, 0.6, 0.5), 2.0, 50, seed=0)
        assert 0.0 <= p <= 1.0


class TestExperiment:
    def test_runs_and_echoes_config(self):
        config = small_config()
        curve = run_experiment(config)
        assert len(curve.cells) == 4
        assert curve.metadata["config"] == config.to_dict()
        assert curve.metadata["code_version"]
        assert curve.boundaries == {"pl-scan": pytest.approx(0.2), "pl-threshold": pytest.approx(0.4)}
        for c in curve.cells:
            assert 0 <= c.power <= 1
            assert c.se == pytest.approx(math.sqrt(c.power * (1 - c.power) / c.reps))

    def test_bit_identical_across_workers(self):
        a = run_experiment(small_config(), workers=1)
        b = run_experiment(small_config(), workers=2)
        assert a.cells == b.cells

    def test_precomputed_criticals_skip_calibration(self):
        cal = calibrate_null("HC", 200, ALPHA, 200, seed=11)
        curve = run_experiment(small_config(tests=["HC"], criticals={"HC": cal}, null_reps=0))
        assert all(c.critical == cal.critical for c in curve.cells)

    def test_empty_tests(self):
        with pytest.raises(ValueError, match="tests"):
            small_config(tests=[])

    @pytest.mark.parametrize(
        "kw, field",
        [({"beta": 0.4}, "beta"), ({"r_grid": [1.0, 0.5]}, "r_grid"), ({"n": 1}, "n"), ({"null_reps": 10}, "null_reps"), ({"family": "laplace"}, "family")],
    )
    def test_validation(self, kw, field):
        with pytest.raises(ValueError, match=field):
            small_config(**kw)

    def test_cell_failures_recorded(self, monkeypatch):
        real = simulation.estimate_powers

        def flaky(tests, spec, *args, **kwargs):
            if spec.r > 1.0:
                raise RuntimeError("boom")
            return real(tests, spec, *args, **kwargs)

        monkeypatch.setattr(simulation, "estimate_powers", flaky)
        curve = run_experiment(small_config())
        assert len(curve.cells) == 2
        assert {(f.test, f.r) for f in curve.failures} == {("HC", 1.2), ("StoufferScan", 1.2)}

        monkeypatch.setattr(simulation, "estimate_powers", lambda *a, **k: (_ for _ in ()).throw(RuntimeError("x")))
        with pytest.raises(CellError) as info:
            run_experiment(small_config())
        assert info.value.r == 0.4

    def test_annotations(self):
        assert set(boundary_annotations(Normal(), 0.7)) == {"ingster"}
        assert boundary_annotations(Cauchy(), 0.7)["pl-threshold"] == pytest.approx(0.8)
        assert boundary_annotations(Uniform01(), 0.7) == {}
