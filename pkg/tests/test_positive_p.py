import math
from types import SimpleNamespace

import numpy as np
import pytest

from floqlin import _kernels
from floqlin.classical import ModelParams, drift
from floqlin.errors import InconsistentModesError, ReliabilityError
from floqlin.fluctuations import c_kernel, theta_kernel
from floqlin.numerics import NoiseDraw, gaussian_stream
from floqlin.positive_p import (
    PPState,
    linearized_theta_sim,
    normally_ordered,
    period_averaged_slope,
    pp_step,
    simulate_ensemble,
)

ROOT_04 = math.sqrt(0.4)
ROOT_01 = math.sqrt(0.1)


class TestPPStep:
    def test_noise_free_is_classical_euler(self):
        params = ModelParams(F=0.3, Delta=0.7, gamma=0.5)
        st = PPState(beta=0.4 + 0.2j, beta_plus=0.4 - 0.2j)
        out = pp_step(st, params, NoiseDraw.zeros(1e-3))
        expected = st.beta + 1e-3 * drift(st.beta, params)
        assert out.beta == pytest.approx(expected, abs=1e-16)
        assert out.beta_plus == pytest.approx(np.conj(expected), abs=1e-16)
        assert out.tau == pytest.approx(1e-3)

    def test_zero_loss_rate_drops_noise(self):
        # gamma = 0 removes every noise term identically.
        params = SimpleNamespace(F=0.3, Delta=0.7, gamma=0.0)
        gen = gaussian_stream(1)
        st = PPState(beta=0.1 + 0.9j, beta_plus=0.1 - 0.9j)
        noisy = pp_step(st, params, NoiseDraw.sample(gen, 1e-3))
        quiet = pp_step(st, params, NoiseDraw.zeros(1e-3))
        assert noisy.beta == quiet.beta and noisy.beta_plus == quiet.beta_plus

    def test_divergence_flag(self):
        params = ModelParams(F=0.0, Delta=0.0, gamma=0.1)
        st = PPState(beta=2e6 + 0.0j, beta_plus=0.0j)
        out = pp_step(st, params, NoiseDraw.zeros(1e-6))
        assert out.diverged
        # Flagged states freeze.
        assert pp_step(out, params, NoiseDraw.zeros(1e-6)) is out

    def test_one_step_mean_is_drift(self):
        # Statistical oracle: the noise terms have zero mean.
        params = ModelParams(F=0.2, Delta=0.5, gamma=0.2)
        dt = 1e-3
        m = 10**6
        b0 = 0.8 + 0.3j
        b = np.full(m, b0)
        bp = np.full(m, np.conj(b0))
        alive = np.ones(m)
        noise = gaussian_stream(9).standard_normal((1, 4, m))
        _kernels.pp_chunk(b, bp, alive, params.F, params.Delta, params.gamma, dt, 1e12, noise)
        disp = b - b0
        expected = dt * drift(b0, params)
        se = np.std(disp.real) / math.sqrt(m) + 1j * np.std(disp.imag) / math.sqrt(m)
        assert abs(disp.mean().real - expected.real) < 3.0 * se.real
        assert abs(disp.mean().imag - expected.imag) < 3.0 * se.imag

    def test_kernel_matches_pp_step(self):
        params = ModelParams(F=0.2, Delta=0.5, gamma=0.2)
        dt = 2e-3
        g = gaussian_stream(4).standard_normal((1, 4, 1))
        b = np.array([0.7 - 0.4j])
        bp = np.array([0.6 + 0.5j])
        alive = np.ones(1)
        _kernels.pp_chunk(b, bp, alive, params.F, params.Delta, params.gamma, dt, 1e12, g)
        root = 1.0 / math.sqrt(dt)
        draw = NoiseDraw(
            eta=g[0, 0, 0] * root,
            eta_plus=g[0, 1, 0] * root,
            xi=complex(g[0, 2, 0], g[0, 3, 0]) * (root / math.sqrt(2.0)),
            dtau=dt,
        )
        ref = pp_step(PPState(beta=0.7 - 0.4j, beta_plus=0.6 + 0.5j), params, draw)
        assert b[0] == pytest.approx(ref.beta, rel=1e-12)
        assert bp[0] == pytest.approx(ref.beta_plus, rel=1e-12)


class TestSimulateEnsemble:
    def test_bit_reproducible(self):
        params = ModelParams(F=ROOT_01, Delta=ROOT_04, gamma=0.1)
        a = simulate_ensemble(params, n_traj=200, dt=2e-3, t_end=6.0, seed=5)
        b = simulate_ensemble(params, n_traj=200, dt=2e-3, t_end=6.0, seed=5)
        for key in a.moments:
            assert np.array_equal(a.moments[key], b.moments[key])
        assert a.steady[(1, 1)] == b.steady[(1, 1)]

    def test_classical_limit_recovers_cycle_intensity(self, driven_cycle):
        params = ModelParams(F=ROOT_01, Delta=ROOT_04, gamma=1e-6)
        stats = simulate_ensemble(
            params, n_traj=100, dt=2e-4, t_end=5.0 * driven_cycle.period, seed=2,
            record_every=5,
        )
        val, _ = stats.steady[(1, 1)]
        assert val.real == pytest.approx(driven_cycle.mean_intensity(), abs=1e-3)

    def test_free_case_matches_exact_oracle(self):
        from floqlin.fock_oracle import OracleParams, evolve_steady, expectation

        params = ModelParams(F=0.0, Delta=ROOT_04, gamma=0.1)
        stats = simulate_ensemble(params, n_traj=4000, dt=2e-3, t_end=80.0, seed=21)
        exact = evolve_steady(
            OracleParams(F=0.0, Delta=ROOT_04, gamma=0.1, n_max=40, steady_tol=1e-9)
        )
        n_pp, se = normally_ordered(stats, 1, 1, 0.1)
        n_ex = expectation(exact, 1, 1).real
        assert abs(n_pp.real - n_ex) < 3.0 * se.real
        # Phase symmetry: the first moment decays to zero.
        b_pp, b_se = normally_ordered(stats, 0, 1, 0.1)
        assert abs(b_pp.real) < 3.0 * max(b_se.real, 1e-12)
        assert abs(b_pp.imag) < 3.0 * max(b_se.imag, 1e-12)

    def test_step_size_robustness(self):
        params = ModelParams(F=0.0, Delta=ROOT_04, gamma=0.1)
        coarse = simulate_ensemble(params, n_traj=2000, dt=2e-3, t_end=30.0, seed=13)
        fine = simulate_ensemble(params, n_traj=2000, dt=1e-3, t_end=30.0, seed=14)
        v1, s1 = coarse.steady[(1, 1)]
        v2, s2 = fine.steady[(1, 1)]
        combined = math.hypot(s1.real, s2.real)
        assert abs(v1.real - v2.real) < 2.0 * combined

    def test_divergence_reliability_guard(self):
        params = ModelParams(F=ROOT_01, Delta=ROOT_04, gamma=0.1)
        with pytest.raises(ReliabilityError):
            simulate_ensemble(
                params, n_traj=100, dt=1e-3, t_end=1.0, seed=1, divergence_radius=1e-3
            )

    def test_minimum_ensemble(self):
        with pytest.raises(ValueError):
            simulate_ensemble(ModelParams(F=0.0, Delta=1.0), 10, 1e-3, 1.0, 0)


class TestLinearizedThetaSim:
    def test_free_cycle_slope(self, free_system):
        res = linearized_theta_sim(
            free_system, 0.1, dt=2e-3, t_end=8 * free_system.period, n_traj=2000, seed=3
        )
        slope, _ = period_averaged_slope(res.times, res.var_theta, free_system.period)
        assert slope == pytest.approx(0.1 * 3.0 / (2.0 * 0.4), rel=0.05)
        assert res.imag_fraction < 1e-12

    def test_free_cycle_transverse_variance(self, free_system):
        res = linearized_theta_sim(
            free_system, 0.1, dt=1e-3, t_end=6 * free_system.period, n_traj=4000, seed=8
        )
        assert res.c1_second[-1].real / 0.1 == pytest.approx(0.125, rel=0.05)

    def test_driven_transverse_variance_tracks_kernel(self, driven_system):
        # Compare at a phase where the periodic kernel is large.
        T = driven_system.period
        c = c_kernel(driven_system)
        t_end = 5 * T + 0.5 * T
        res = linearized_theta_sim(
            driven_system, 0.1, dt=1e-3, t_end=t_end, n_traj=4000, seed=12
        )
        phase = res.times[-1] % T
        kc = np.interp(phase, driven_system.cycle.tau, c)
        assert res.c1_second[-1].real / 0.1 == pytest.approx(kc, rel=0.05)

    def test_unstable_guard(self, driven_system):
        import dataclasses

        bad = dataclasses.replace(driven_system, mu1=0.1 + 0.0j)
        with pytest.raises(InconsistentModesError):
            linearized_theta_sim(bad, 0.1, dt=1e-3, t_end=1.0, n_traj=100, seed=0)


class TestPeriodAveragedSlope:
    def test_recovers_synthetic_slope(self):
        t = np.linspace(0.0, 50.0, 800)
        values = 0.7 * t + 0.3 * np.sin(2 * np.pi * t / 5.0)
        slope, r2 = period_averaged_slope(t, values, 5.0)
        assert slope == pytest.approx(0.7, rel=1e-3)
        assert r2 > 0.9999

    def test_needs_enough_blocks(self):
        with pytest.raises(ValueError):
            period_averaged_slope([0.0, 1.0], [0.0, 1.0], 10.0)
