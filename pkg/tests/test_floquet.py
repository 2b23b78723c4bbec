import math

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from floqlin.errors import DegenerateMonodromyError
from floqlin.floquet import (
    U_MAP,
    analytic_q1,
    build_floquet_system,
    fundamental_matrix,
    monodromy_eigen,
    stability_matrix,
)

ROOT_04 = math.sqrt(0.4)


def _trace_integral(cycle):
    """Independent quadrature of tr L via a periodic spline antiderivative."""
    tr = 2.0 - 4.0 * np.abs(cycle.samples) ** 2
    tau = np.append(cycle.tau, cycle.period)
    spl = CubicSpline(tau, np.append(tr, tr[0]), bc_type="periodic")
    anti = spl.antiderivative()
    return anti


def _collinearity(a, b):
    num = np.abs(np.einsum("ki,ki->k", np.conj(a), b))
    den = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    return num / den


class TestStabilityMatrix:
    def test_at_origin(self):
        m = stability_matrix(0.0 + 0.0j, 0.7)
        assert np.allclose(m, np.diag([1.0 + 0.7j, 1.0 - 0.7j]))

    def test_on_unit_circle_resonant(self):
        m = stability_matrix(1.0 + 0.0j, 0.0)
        assert np.allclose(m, [[-1.0, -1.0], [-1.0, -1.0]])

    def test_trace_identity(self):
        for beta in (0.3 + 0.1j, -1.2 + 0.8j, 2.0j):
            m = stability_matrix(beta, 0.44)
            assert np.trace(m) == pytest.approx(2.0 - 4.0 * abs(beta) ** 2, abs=1e-14)


class TestFundamentalMatrix:
    def test_starts_from_identity(self, free_cycle):
        fm = fundamental_matrix(free_cycle, ROOT_04)
        assert np.allclose(fm.R[0], np.eye(2), atol=1e-15)

    def test_abel_identity_everywhere(self, driven_cycle, driven_system):
        anti = _trace_integral(driven_cycle)
        expected = np.exp(anti(driven_cycle.tau) - anti(0.0))
        rel = np.abs(driven_system.det_R - expected) / np.abs(expected)
        assert np.max(rel) < 1e-7

    def test_free_cycle_multipliers(self, free_cycle, free_system):
        vals = np.sort(np.abs(np.linalg.eigvals(free_system.R_T)))
        T = free_cycle.period
        assert abs(vals[1] - 1.0) < 1e-6
        assert abs(vals[0] - math.exp(-2.0 * T)) < 1e-6


class TestMonodromyEigen:
    def test_free_cycle_exponents(self, free_system):
        assert abs(free_system.mu0) < 1e-8
        assert free_system.mu1.real == pytest.approx(-2.0, abs=1e-6)
        assert abs(free_system.mu1.imag) < 1e-8

    def test_trace_sum_rule(self, driven_cycle, driven_system):
        anti = _trace_integral(driven_cycle)
        mean_tr = (anti(driven_cycle.period) - anti(0.0)) / driven_cycle.period
        s = driven_system.mu0 + driven_system.mu1
        assert abs(s - mean_tr) < 1e-6

    def test_driven_exponent_is_real_negative(self, driven_system):
        assert driven_system.mu1.real < 0.0
        assert abs(driven_system.mu1.imag) < 1e-8

    def test_degenerate_monodromy(self):
        with pytest.raises(DegenerateMonodromyError):
            monodromy_eigen(np.diag([1.0, 1.0 + 1e-7]).astype(complex), 5.0)

    def test_eigenvector_normalization(self, driven_system):
        v = driven_system.v
        assert v[0, 0] * v[1, 0] == pytest.approx(1.0, abs=1e-9)
        assert v[0, 1] * v[1, 1] == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(driven_system.w_dag @ v, np.eye(2), atol=1e-12)


class TestFloquetModes:
    def test_goldstone_tracks_tangent(self, driven_system):
        tang = np.stack(
            [driven_system.cycle.derivatives, np.conj(driven_system.cycle.derivatives)], axis=1
        )
        assert np.min(_collinearity(driven_system.p0, tang)) > 1.0 - 1e-8

    def test_orthogonality_everywhere(self, free_system, driven_system):
        for sysf in (free_system, driven_system):
            P = np.stack([sysf.p0, sysf.p1], axis=-1)
            Q = np.stack([sysf.q0_dag, sysf.q1_dag], axis=-2)
            gram = np.einsum("kij,kjl->kil", Q, P)
            assert np.max(np.abs(gram - np.eye(2))) < 1e-8

    def test_periodicity(self, free_system, driven_system):
        assert free_system.periodicity_residual < 1e-6
        assert driven_system.periodicity_residual < 1e-6

    def test_free_cycle_closed_forms(self, free_system):
        # On the undriven circle: p1 ~ (b, b*), q0^dag ~ (b*, -b).
        b = free_system.cycle.samples
        p1_ref = np.stack([b, np.conj(b)], axis=1)
        assert np.min(_collinearity(free_system.p1, p1_ref)) > 1.0 - 1e-8
        q0_ref = np.stack([np.conj(b), -b], axis=1)
        assert np.min(_collinearity(free_system.q0_dag, q0_ref)) > 1.0 - 1e-8

    def test_mode_geometry(self, free_system, driven_system):
        # The right Goldstone mode maps onto the orbit tangent, the left
        # transverse mode onto the orbit normal, everywhere on the cycle.
        for sysf in (free_system, driven_system):
            d = sysf.cycle.derivatives
            tang_real = np.stack([2.0 * d.real, 2.0 * d.imag], axis=1)
            tang_real /= np.linalg.norm(tang_real, axis=1)[:, None]
            up0 = np.einsum("ij,kj->ki", U_MAP, sysf.p0)
            assert np.max(np.abs(up0.imag)) < 1e-7
            up0 = up0.real / np.linalg.norm(up0.real, axis=1)[:, None]
            cross = np.abs(up0[:, 0] * tang_real[:, 1] - up0[:, 1] * tang_real[:, 0])
            assert np.max(cross) < 1e-4  # tangent alignment
            q1_col = np.conj(sysf.q1_dag)
            uq1 = np.einsum("ij,kj->ki", U_MAP, q1_col)
            assert np.max(np.abs(uq1.imag)) < 1e-7
            uq1 = uq1.real / np.linalg.norm(uq1.real, axis=1)[:, None]
            dot = np.abs(np.sum(uq1 * tang_real, axis=1))
            assert np.max(dot) < 1e-4  # normal alignment


class TestAnalyticQ1:
    def test_direction_at_start(self, driven_cycle, driven_system):
        rows = analytic_q1(driven_cycle, ROOT_04, driven_system.mu1)
        d0 = driven_cycle.derivatives[0]
        expected = np.array([1j * np.conj(d0), -1j * d0])
        assert np.allclose(rows[0], expected, atol=1e-12)

    def test_free_cycle_constant_norm(self, free_cycle, free_system):
        rows = analytic_q1(free_cycle, ROOT_04, free_system.mu1)
        norms = np.linalg.norm(rows, axis=1)
        assert np.max(np.abs(norms - norms[0])) < 1e-6

    def test_matches_ivp_up_to_global_scale(self, free_system, driven_system):
        for sysf in (free_system, driven_system):
            rows = analytic_q1(sysf.cycle, sysf.delta, sysf.mu1)
            scale = np.vdot(rows.ravel(), sysf.q1_dag.ravel()) / np.vdot(
                rows.ravel(), rows.ravel()
            )
            dev = np.max(np.abs(scale * rows - sysf.q1_dag)) / np.max(np.abs(sysf.q1_dag))
            assert dev < 1e-5


class TestFloquetSystem:
    def test_goldstone_residual_logged(self, driven_system):
        assert 0.0 <= driven_system.goldstone_residual < 1e-7

    def test_matrix_log_consistency(self, driven_system):
        from scipy.linalg import expm

        recon = expm(driven_system.M * driven_system.period)
        assert np.linalg.norm(recon - driven_system.R_T) < 1e-8 * max(
            np.linalg.norm(driven_system.R_T), 1.0
        )

    def test_stability_samples_match(self, driven_system):
        k = 173
        beta = driven_system.cycle.samples[k]
        assert np.allclose(driven_system.L[k], stability_matrix(beta, driven_system.delta))
