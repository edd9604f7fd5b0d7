import math
from dataclasses import replace

import numpy as np
import pytest

import robust_mpc.sim as sim
from robust_mpc.errors import DomainError
from robust_mpc.sim import (
    ConstantReference,
    Scenario,
    SquareWave,
    compare_controllers,
    compute_metrics,
    servo_scenarios,
    run_scenario,
    settled_mask,
    square_wave,
)

TRACE_FIELDS = ("t", "r", "y", "y_true", "u", "x_hat", "theta")


def short(plant="nonlinear-perturbed", **kw):
    kw.setdefault("duration", 30.0)
    return Scenario(name="short", plant_kind=plant, reference=SquareWave(period=40.0), **kw)


class TestReference:
    @pytest.mark.parametrize("t,want", [(10.0, math.pi), (30.0, 0.0), (50.0, math.pi), (0.0, math.pi),
                                        (25.0, 0.0), (49.9, 0.0)])
    def test_square_wave(self, t, want):
        assert square_wave(t, 50.0, 0.5, 0.0, math.pi) == want

    def test_vectorized(self):
        np.testing.assert_array_equal(square_wave(np.array([10.0, 30.0])), [math.pi, 0.0])

    def test_domain(self):
        with pytest.raises(DomainError):
            square_wave(1.0, period=0.0)
        with pytest.raises(DomainError):
            square_wave(1.0, duty=1.0)

    def test_edges(self):
        np.testing.assert_allclose(SquareWave().edges(200.0), np.arange(0.0, 201.0, 25.0))
        np.testing.assert_array_equal(ConstantReference(1.0).edges(100.0), [0.0])

    def test_constant(self):
        assert ConstantReference(2.5)(3.0) == 2.5
        np.testing.assert_array_equal(ConstantReference(2.5)(np.zeros(3)), [2.5] * 3)


class TestMetrics:
    def test_settled_mask(self):
        t = np.arange(0, 50, 1.0)
        mask = settled_mask(t, np.array([0.0, 25.0]), settle_window=10.0, preview=2.0)
        want = ((t >= 10) & (t < 23)) | (t >= 35)
        np.testing.assert_array_equal(mask, want)

    def test_hand_values(self):
        t = np.arange(6.0)
        r = np.zeros(6)
        y = np.array([0.0, 0.0, 1.0, -1.0, 0.0, 2.0])
        u = np.array([1.0, 2.0, 2.0, 0.0, 0.0, 1.0])
        m = compute_metrics(t, r, y, u, np.array([0.0]), 0.5, settle_window=2.0)
        assert m["tracking_rmse_settled"] == pytest.approx(math.sqrt((1 + 1 + 0 + 4) / 4))
        assert m["tracking_rmse_steady"] == m["tracking_rmse_settled"]
        assert m["control_energy"] == pytest.approx(10.0 * 0.5)
        assert m["smoothness"] == pytest.approx(1 + 1 + 0 + 4 + 0 + 1)
        assert m["smoothness_steady"] == pytest.approx(0 + 4 + 0 + 1)
        assert m["max_overshoot"] == pytest.approx(2.0)

    def test_preview_window(self):
        # an edge at t = 4 seen 2 s early: samples 2 and 3 leave the steady set only
        t = np.arange(8.0)
        r = np.array([0.0, 0, 0, 0, 1, 1, 1, 1])
        y = np.array([0.0, 0, 0.5, 0.5, 1, 1, 1, 1])
        u = np.zeros(8)
        m = compute_metrics(t, r, y, u, np.array([0.0, 4.0]), 1.0, settle_window=0.0, preview=2.0)
        assert m["tracking_rmse_settled"] == pytest.approx(math.sqrt(0.5 / 8))
        assert m["tracking_rmse_steady"] == 0.0


class TestScenario:
    @pytest.mark.parametrize("kw", [{"duration": 0.0}, {"sample_time": -0.1}, {"c": -1.0},
                                    {"plant_kind": "other"}, {"substeps": 0}])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            Scenario(**kw)

    def test_steps(self):
        assert Scenario(duration=200.0, sample_time=0.1).n_steps == 2000


class TestRun:
    def test_equilibrium(self):
        sc = Scenario(plant_kind="linear-nominal", reference=ConstantReference(0.0), duration=20.0,
                      inject_noise=False)
        res = run_scenario(sc)
        assert not res.failed
        assert not res.u.any()
        assert not res.y.any()
        assert not res.y_true.any()

    def test_trace_lengths(self):
        res = run_scenario(short(robust=True, c=0.1))
        N = 300
        for name in TRACE_FIELDS:
            assert getattr(res, name).shape[0] == N
        assert res.x_hat.shape == (N, 4)
        np.testing.assert_allclose(res.t, np.arange(N) * 0.1)

    def test_deterministic(self):
        sc = short(robust=True, c=1.0)
        a, b = run_scenario(sc), run_scenario(sc)
        for name in TRACE_FIELDS:
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
        assert a.metrics == b.metrics

    def test_seed_changes_noise(self):
        a = run_scenario(short(seed=1))
        b = run_scenario(short(seed=2))
        assert not np.array_equal(a.y, b.y)

    def test_saturated_input_logged(self):
        res = run_scenario(short())
        assert np.abs(res.u).max() <= 220.0
        assert np.abs(res.u).max() == 220.0

    @pytest.mark.parametrize("plant", ["linear-nominal", "nonlinear-perturbed"])
    def test_theta_bounds(self, plant):
        for c in (0.1, 1.0):
            res = run_scenario(short(plant, robust=True, c=c))
            assert np.all(res.theta > 0)
            assert np.all(res.theta < 1.0 / res.p_lmax)

    def test_standard_has_no_theta(self):
        assert np.isnan(run_scenario(short(duration=5.0)).theta).all()

    @pytest.mark.parametrize("plant", ["linear-nominal", "nonlinear-perturbed"])
    def test_c_zero_matches_standard(self, plant):
        a = run_scenario(short(plant, robust=False, duration=20.0))
        b = run_scenario(short(plant, robust=True, c=0.0, duration=20.0))
        for name in ("y", "y_true", "u", "x_hat"):
            x, y = getattr(a, name), getattr(b, name)
            assert np.abs(x - y).max() <= 1e-10 * max(1.0, np.abs(x).max())

    def test_metrics_recomputable(self):
        sc = short(robust=True, c=0.1)
        res = run_scenario(sc)
        m = compute_metrics(res.t, res.r, res.y_true, res.u, sc.reference.edges(sc.duration), sc.sample_time,
                            settle_window=sc.settle_window, preview=sc.mpc.Hp * sc.sample_time)
        assert m == res.metrics
        # literal definitions, straight from the traces
        keep = np.ones(res.t.shape[0], bool)
        for e in sc.reference.edges(sc.duration):
            keep &= ~((res.t >= e - 1e-9) & (res.t < e + sc.settle_window - 1e-9))
        err = res.y_true - res.r
        assert m["tracking_rmse_settled"] == pytest.approx(np.sqrt(np.mean(err[keep] ** 2)), rel=1e-12)
        assert m["smoothness"] == pytest.approx(np.sum(np.diff(np.r_[0.0, res.u]) ** 2), rel=1e-12)
        assert m["control_energy"] == pytest.approx(np.sum(res.u ** 2) * 0.1, rel=1e-12)

    def test_divergence_is_recorded(self, monkeypatch):
        real = sim.kernels.servo_rk4
        calls = {"n": 0}

        def flaky(*args):
            calls["n"] += 1
            out = real(*args)
            if calls["n"] > 40:
                out[:] = np.nan
            return out

        monkeypatch.setattr(sim.kernels, "servo_rk4", flaky)
        res = run_scenario(short())
        assert res.failed
        assert "non-finite" in res.error
        assert res.t.shape[0] == 40 and res.u.shape[0] == 40
        assert all(math.isnan(v) for v in res.metrics.values())

    def test_prior_override(self):
        from robust_mpc.statespace import GaussianBelief

        sc = short(duration=1.0, prior=GaussianBelief(np.ones(4), np.eye(4)))
        res = run_scenario(sc)
        assert res.x_hat[0, 1] != 0.0


class TestCompare:
    def test_single_row(self):
        cmp = compare_controllers([short(duration=5.0)])
        assert len(cmp.rows()) == 1
        assert cmp.rows()[0]["rank"] == 1

    def test_ranking_and_workers(self):
        scs = servo_scenarios("nonlinear-perturbed", duration=60.0)
        serial = compare_controllers(scs)
        parallel = compare_controllers(scs, workers=3)
        assert [r.controller for r in serial.results] == ["S-MPC", "R-MPC1", "R-MPC2"]
        for a, b in zip(serial.results, parallel.results):
            np.testing.assert_array_equal(a.u, b.u)
        rmse = [serial.results[i].metrics["tracking_rmse_settled"] for i in serial.ranking]
        assert rmse == sorted(rmse)
        assert set(serial.by_controller()) == {"S-MPC", "R-MPC1", "R-MPC2"}

    def test_standard_roster(self):
        scs = servo_scenarios("linear-nominal", seed=4)
        assert [(s.controller, s.robust, s.c) for s in scs] == [
            ("S-MPC", False, 0.0), ("R-MPC1", True, 0.1), ("R-MPC2", True, 1.0)
        ]
        assert all(s.name == "sim1" and s.seed == 4 for s in scs)
        assert scs[0].mpc.Hp == 10 and scs[0].mpc.Hu == 3
        assert replace(scs[0], seed=5).seed == 5
