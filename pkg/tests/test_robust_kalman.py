import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_model, scalar_model
from robust_mpc.errors import DomainError
from robust_mpc.kalman import kf_run
from robust_mpc.robust_kalman import gamma, inflate, rkf_init, rkf_run, rkf_step, solve_theta
from robust_mpc.statespace import GaussianBelief

C_HALF = np.log(0.5) + 1.0  # gamma of the scalar P = 1 at theta = 0.5


def scalar_gamma(x):
    return np.log(1 - x) + 1 / (1 - x) - 1


def lhs_as_printed(P, theta):
    """-log det (I - theta P)^-1 + tr[(I - theta P)^-1 - I], written out literally."""
    n = P.shape[0]
    Minv = np.linalg.inv(np.eye(n) - theta * P)
    return -np.log(np.linalg.det(Minv)) + np.trace(Minv - np.eye(n))


def random_pd(rng, n):
    M = rng.standard_normal((n, n))
    return M @ M.T + rng.uniform(1e-3, 1.0) * np.eye(n)


class TestGamma:
    def test_zero(self, rng):
        for n in (1, 3, 5):
            assert gamma(random_pd(rng, n), 0.0) == pytest.approx(0.0, abs=1e-13)

    def test_scalar(self):
        assert gamma([[1.0]], 0.5) == pytest.approx(0.306853, abs=1e-6)
        assert gamma([[1.0]], 0.5) == pytest.approx(scalar_gamma(0.5), abs=1e-15)

    def test_additive(self):
        assert gamma(np.eye(2), 0.5) == pytest.approx(0.613706, abs=1e-6)

    def test_matches_printed_form(self, rng):
        for _ in range(50):
            P = random_pd(rng, int(rng.integers(1, 6)))
            th = rng.uniform(0, 0.99) / np.linalg.eigvalsh(P).max()
            assert gamma(P, th) == pytest.approx(lhs_as_printed(P, th), rel=1e-9, abs=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            gamma([[2.0]], 0.5)
        with pytest.raises(DomainError):
            gamma([[2.0]], -0.1)

    def test_monotone(self, rng):
        for _ in range(1000):
            P = random_pd(rng, int(rng.integers(1, 7)))
            lmax = np.linalg.eigvalsh(P).max()
            t1, t2 = np.sort(rng.uniform(0, 0.999, 2)) / lmax
            if t2 > t1:
                assert gamma(P, t1) < gamma(P, t2)


class TestSolveTheta:
    def test_scalar(self):
        assert solve_theta([[1.0]], 0.306853) == pytest.approx(0.5, abs=2e-6)
        assert solve_theta([[1.0]], C_HALF) == pytest.approx(0.5, abs=1e-9)

    def test_scalar_scaling(self):
        assert solve_theta([[2.0]], C_HALF) == pytest.approx(0.25, abs=1e-9)

    def test_identity(self):
        assert solve_theta(np.eye(2), 2 * C_HALF) == pytest.approx(0.5, abs=1e-9)

    def test_domain(self):
        with pytest.raises(DomainError):
            solve_theta([[1.0]], 0.0)
        with pytest.raises(DomainError):
            solve_theta([[1.0]], -1.0)

    def test_residual_random(self, rng):
        for _ in range(1000):
            P = random_pd(rng, int(rng.integers(1, 7)))
            c = 10 ** rng.uniform(-4, 1)
            th = solve_theta(P, c, tol=1e-10)
            assert 0 < th < 1 / np.linalg.eigvalsh(P).max()
            assert abs(gamma(P, th) - c) <= 1e-10 * (1 + 1e-6) + 1e-12

    def test_against_brentq(self, rng):
        for _ in range(100):
            P = random_pd(rng, 4)
            c = rng.uniform(0.01, 5)
            hi = (1 - 1e-12) / np.linalg.eigvalsh(P).max()
            ref = scipy.optimize.brentq(lambda t: lhs_as_printed(P, t) - c, 0.0, hi, xtol=1e-15)
            assert solve_theta(P, c) == pytest.approx(ref, rel=1e-7)

    def test_deterministic(self, rng):
        P = random_pd(rng, 5)
        assert solve_theta(P, 0.7) == solve_theta(P.copy(), 0.7)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-3, 1e3), st.floats(1e-4, 10.0))
    def test_scale_invariance(self, p, c):
        # gamma depends on theta * P only
        assert solve_theta([[p]], c) * p == pytest.approx(solve_theta([[1.0]], c), rel=1e-8)


class TestStep:
    def test_scalar_hand_case(self):
        m = scalar_model()
        st = rkf_step(rkf_init(GaussianBelief([0.0], [[1.0]]), C_HALF), m, [1.0], [0.0])
        assert st.theta == pytest.approx(0.5, abs=1e-12)
        assert st.V[0, 0] == pytest.approx(2.0, abs=1e-12)
        assert st.L[0, 0] == pytest.approx(2 / 3, abs=1e-12)
        assert st.K[0, 0] == pytest.approx(2 / 3, abs=1e-12)
        assert st.P[0, 0] == pytest.approx(5 / 3, abs=1e-12)

    def test_c_zero_is_kalman(self, rng):
        m = random_model(rng, 3)
        prior = GaussianBelief(np.zeros(3), np.eye(3))
        ys = rng.standard_normal((30, 1))
        us = rng.standard_normal((30, 1))
        a = kf_run(m, prior, ys, us)
        b = rkf_run(m, prior, 0.0, ys, us)
        P_before = [prior.covariance] + [sb.P for sb in b[:-1]]
        for sa, sb, P0 in zip(a, b, P_before):
            assert sb.theta == 0.0
            np.testing.assert_array_equal(sb.V, P0)
            np.testing.assert_allclose(sb.x_pred, sa.x_pred, rtol=1e-10, atol=0)
            np.testing.assert_allclose(sb.P, sa.P, rtol=1e-10, atol=0)

    def test_c_zero_V_equals_P(self):
        st0 = rkf_init(GaussianBelief([0.0], [[1.3]]), 0.0)
        st = rkf_step(st0, scalar_model(), [0.2], [0.0])
        assert st.V[0, 0] == 1.3

    def test_zero_innovation(self):
        m = scalar_model(b=2.0)
        st0 = rkf_init(GaussianBelief([0.4], [[1.0]]), C_HALF)
        st = rkf_step(st0, m, [0.4], [0.25])
        assert st.x_filt[0] == 0.4
        assert st.x_pred[0] == pytest.approx(0.4 + 0.5, abs=1e-15)

    def test_run_empty(self):
        assert rkf_run(scalar_model(), GaussianBelief([0.0], [[1.0]]), 0.5, [], []) == []

    def test_inflation_V_minus_P(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 6))
            P = random_pd(rng, n)
            th = solve_theta(P, rng.uniform(1e-3, 3))
            V = inflate(P, th)
            assert np.linalg.eigvalsh(V - P).min() >= -1e-10 * max(1.0, np.abs(V).max())
            np.testing.assert_allclose(V, np.linalg.inv(np.linalg.inv(P) - th * np.eye(n)), rtol=1e-7)

    def test_matches_independent_recursion(self, rng):
        a, b, g, d = 0.97, 0.3, 0.4, 0.5
        m = scalar_model(a=a, b=b, g=g, d=d)
        c = 0.2
        ys = rng.standard_normal(50)
        us = rng.standard_normal(50)
        out = rkf_run(m, GaussianBelief([0.0], [[1.0]]), c, ys[:, None], us[:, None])
        x, P = 0.0, 1.0
        for k in range(50):
            th = scipy.optimize.brentq(lambda t: scalar_gamma(t * P) - c, 0.0, (1 - 1e-14) / P, xtol=1e-16)
            V = 1.0 / (1.0 / P - th)
            L = V / (V + d * d)
            K = a * L
            x = a * x + K * (ys[k] - x) + b * us[k]
            P = a * V * a - K * (V + d * d) * K + g * g
            assert out[k].theta == pytest.approx(th, rel=1e-8)
            assert out[k].P[0, 0] == pytest.approx(P, rel=1e-8)
            assert out[k].x_pred[0] == pytest.approx(x, rel=1e-8, abs=1e-12)

    def test_monotone_conservatism_scalar(self, rng):
        # for a scalar state, a larger ball gives a larger variance at every step
        for _ in range(50):
            m = scalar_model(a=rng.uniform(-1.2, 1.2), b=1.0, g=rng.uniform(0.05, 1), d=rng.uniform(0.05, 1))
            prior = GaussianBelief([0.0], [[rng.uniform(0.01, 3)]])
            ys = rng.standard_normal((40, 1))
            us = rng.standard_normal((40, 1))
            lo = rkf_run(m, prior, 0.1, ys, us)
            hi = rkf_run(m, prior, 1.0, ys, us)
            for sa, sb in zip(lo, hi):
                assert sb.P[0, 0] >= sa.P[0, 0] * (1 - 1e-12)
