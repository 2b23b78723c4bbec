import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from floqlin.errors import BranchCutError, DegenerateSpectrumError, DivergenceError
from floqlin.numerics import (
    NoiseDraw,
    eig2,
    gaussian_stream,
    integrate_ode,
    laguerre,
    principal_log2,
)


class TestIntegrateOde:
    def test_exponential_decay(self):
        times, ys = integrate_ode(lambda t, y: -y, 1.0 + 0.0j, 0.0, 1.0, 1e-3)
        assert times[-1] == pytest.approx(1.0, abs=0)
        assert abs(ys[-1] - math.exp(-1.0)) < 1e-9

    def test_rotation_preserves_norm(self):
        _, ys = integrate_ode(lambda t, y: 1j * y, 1.0 + 0.0j, 0.0, 5.0, 1e-3)
        assert np.max(np.abs(np.abs(ys) - 1.0)) < 1e-9

    def test_attracting_unit_circle(self):
        # Undriven normal form (1 - |y|^2) y pulls any start onto |y| = 1.
        _, ys = integrate_ode(
            lambda t, y: (1.0 - abs(y) ** 2) * y, 0.1 + 0.0j, 0.0, 50.0, 1e-2
        )
        assert abs(abs(ys[-1]) - 1.0) < 1e-6

    def test_final_partial_step(self):
        times, ys = integrate_ode(lambda t, y: -y, 1.0 + 0.0j, 0.0, 0.35, 0.1)
        assert np.allclose(times, [0.0, 0.1, 0.2, 0.3, 0.35])
        assert abs(ys[-1] - math.exp(-0.35)) < 1e-6  # coarse-step truncation

    def test_fourth_order(self):
        def err(dt):
            _, ys = integrate_ode(lambda t, y: -y, 1.0 + 0.0j, 0.0, 1.0, dt)
            return abs(ys[-1] - math.exp(-1.0))

        assert err(2e-2) / err(1e-2) >= 14.0

    def test_divergence_reports_time(self):
        with pytest.raises(DivergenceError) as exc:
            integrate_ode(lambda t, y: y * y, 2.0 + 0.0j, 0.0, 5.0, 1e-2)
        assert exc.value.t is not None

    def test_vector_state(self):
        _, ys = integrate_ode(lambda t, y: np.array([-y[0], 1j * y[1]]),
                              np.array([1.0, 1.0], dtype=complex), 0.0, 1.0, 1e-3)
        assert abs(ys[-1, 0] - math.exp(-1.0)) < 1e-9
        assert abs(abs(ys[-1, 1]) - 1.0) < 1e-9


class TestEig2:
    def test_identity_degenerate(self):
        with pytest.raises(DegenerateSpectrumError):
            eig2(np.eye(2))

    def test_swap_matrix(self):
        e = eig2(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert sorted(e.values.real) == pytest.approx([-1.0, 1.0])
        for j, lam in enumerate(e.values):
            v = e.right[:, j]
            assert abs(v[0] - lam * v[1]) < 1e-12  # proportional to (1, +-1)

    def test_diagonal(self):
        m = np.diag([2.0 + 1.0j, -3.0])
        e = eig2(m)
        assert set(np.round(e.values, 12)) == {2.0 + 1.0j, -3.0 + 0.0j}
        assert np.allclose(np.abs(e.right), np.eye(2))

    @given(
        st.lists(st.floats(-3, 3, allow_nan=False), min_size=8, max_size=8)
    )
    @settings(max_examples=80, deadline=None)
    def test_eigensystem_residuals(self, vals):
        m = np.array(vals[:4]).reshape(2, 2) + 1j * np.array(vals[4:]).reshape(2, 2)
        norm = np.linalg.norm(m)
        try:
            e = eig2(m)
        except DegenerateSpectrumError:
            return
        for j, lam in enumerate(e.values):
            assert np.linalg.norm(m @ e.right[:, j] - lam * e.right[:, j]) < 1e-10 * max(norm, 1.0)
            assert np.linalg.norm(e.left[j] @ m - lam * e.left[j]) < 1e-10 * max(norm, 1.0)
        assert np.allclose(e.left @ e.right, np.eye(2), atol=1e-12)


class TestPrincipalLog2:
    def test_log_identity_is_zero(self):
        with pytest.raises(DegenerateSpectrumError):
            principal_log2(np.eye(2))
        # Non-degenerate near-identity diagonal stays computable.
        m = np.diag([1.0, 2.0])
        assert np.allclose(principal_log2(m), np.diag([0.0, math.log(2.0)]), atol=1e-14)

    def test_log_diagonal_exponentials(self):
        m = np.diag([math.e, math.e**2])
        assert np.allclose(principal_log2(m), np.diag([1.0, 2.0]), atol=1e-12)

    def test_rotation_generator(self):
        th = 0.3
        rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        assert np.allclose(principal_log2(rot), [[0.0, -th], [th, 0.0]], atol=1e-12)

    def test_branch_cut(self):
        with pytest.raises(BranchCutError):
            principal_log2(np.diag([-1.0, 2.0]))

    @given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=8, max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_exp_roundtrip(self, vals):
        m = np.array(vals[:4]).reshape(2, 2) + 1j * np.array(vals[4:]).reshape(2, 2)
        try:
            lg = principal_log2(m)
        except (DegenerateSpectrumError, BranchCutError):
            return
        assert np.linalg.norm(expm(lg) - m) < 1e-8 * max(np.linalg.norm(m), 1.0)


def _laguerre_sum(n, k, x):
    # Direct finite-sum evaluation, the independent oracle.
    return sum(
        (-1.0) ** i * math.comb(n + k, n - i) * x**i / math.factorial(i)
        for i in range(n + 1)
    )


class TestLaguerre:
    def test_order_zero(self):
        for k in (0, 1, 5):
            for x in (0.0, 0.3, 7.0):
                assert laguerre(0, k, x) == 1.0

    def test_first_order(self):
        for x in (0.0, 0.5, 2.0):
            assert laguerre(1, 0, x) == pytest.approx(1.0 - x, abs=1e-14)

    def test_against_direct_sum(self):
        assert laguerre(3, 2, 1.5) == pytest.approx(_laguerre_sum(3, 2, 1.5), rel=1e-12)
        for n in range(11):
            for k in range(6):
                for x in (0.0, 0.5, 1.0, 2.0):
                    ref = _laguerre_sum(n, k, x)
                    assert laguerre(n, k, x) == pytest.approx(ref, rel=1e-10, abs=1e-12)

    def test_vectorized(self):
        x = np.linspace(0.0, 3.0, 7)
        vals = laguerre(4, 1, x)
        assert vals.shape == x.shape
        assert vals[0] == pytest.approx(_laguerre_sum(4, 1, 0.0))

    def test_domain_guard(self):
        with pytest.raises(ValueError):
            laguerre(-1, 0, 1.0)


class TestGaussianStream:
    def test_determinism(self):
        a = gaussian_stream(42).standard_normal(1000)
        b = gaussian_stream(42).standard_normal(1000)
        assert np.array_equal(a, b)

    def test_moments(self):
        x = gaussian_stream(7).standard_normal(10**6)
        assert -0.005 < x.mean() < 0.005
        assert 0.99 < x.var() < 1.01

    def test_stream_independence(self):
        a = gaussian_stream(7, stream=0).standard_normal(10**5)
        b = gaussian_stream(7, stream=1).standard_normal(10**5)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


class TestNoiseDraw:
    def test_white_noise_scaling(self):
        gen = gaussian_stream(3)
        dtau = 0.25
        draws = [NoiseDraw.sample(gen, dtau) for _ in range(40000)]
        eta = np.array([d.eta for d in draws])
        xi = np.array([d.xi for d in draws])
        assert eta.var() == pytest.approx(1.0 / dtau, rel=0.05)
        assert np.mean(np.abs(xi) ** 2) == pytest.approx(1.0 / dtau, rel=0.05)

    def test_zero_draw(self):
        z = NoiseDraw.zeros(0.1)
        assert z.eta == z.eta_plus == 0.0 and z.xi == 0.0
