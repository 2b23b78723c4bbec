"""Stochastic oracle on the doubled phase space, plus the projected
linearized simulators.

``simulate_ensemble`` integrates the exact Langevin pair (independent
``beta``, ``beta_plus``) by Euler-Maruyama over a trajectory ensemble and
reports normally-ordered moments with standard errors.  ``linearized_theta_sim``
integrates the two projected scalar equations (cycle offset and transverse
amplitude) driven by the same three noises, as a testbed for the
quadrature predictions.

Noise is drawn in fixed-size chunks from per-batch substreams, so a run
is bit-reproducible for a given ``(seed, n_traj, dt)`` on either kernel
backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .classical import ModelParams, classical_attractor, stability_eigenvalues
from .errors import InconsistentModesError, ReliabilityError
from .floquet import FloquetSystem
from .numerics import NoiseDraw, gaussian_stream

__all__ = [
    "PPState",
    "EnsembleStats",
    "ThetaSimResult",
    "pp_step",
    "simulate_ensemble",
    "normally_ordered",
    "linearized_theta_sim",
    "period_averaged_slope",
]

_CHUNK_STEPS = 128
_MAX_BATCH = 20000
MOMENT_KEYS = ((0, 1), (1, 0), (1, 1), (2, 2))


@dataclass(frozen=True)
class PPState:
    """Doubled-phase-space point; ``beta_plus`` is independent of ``beta*``."""

    beta: complex
    beta_plus: complex
    tau: float = 0.0
    diverged: bool = False


def pp_step(state, params, noise, divergence_radius=1e6):
    """One Euler-Maruyama step of the doubled Langevin pair.

    ``noise`` carries white-scaled values (variance ``1/dtau``); with all
    noises zero, or ``gamma = 0``, the update reduces exactly to the
    classical drift step.  A state beyond ``divergence_radius`` is
    returned flagged, not raised: ensembles count and exclude such
    trajectories.
    """
    if state.diverged:
        return state
    dt = noise.dtau
    b, bp = state.beta, state.beta_plus
    root_g = math.sqrt(params.gamma)
    prod = bp * b
    db = dt * (params.F + (1.0 + 1j * params.Delta - prod) * b) + dt * root_g * (
        math.sqrt(2.0) * noise.xi + 1j * b * noise.eta
    )
    dbp = dt * (params.F + (1.0 - 1j * params.Delta - prod) * bp) + dt * root_g * (
        math.sqrt(2.0) * noise.xi.conjugate() - 1j * bp * noise.eta_plus
    )
    b, bp = b + db, bp + dbp
    return PPState(
        beta=b,
        beta_plus=bp,
        tau=state.tau + dt,
        diverged=abs(b) > divergence_radius or abs(bp) > divergence_radius,
    )


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Ensemble moment estimates.

    ``moments[(m, n)]`` is the time series of ``<beta_plus^m beta^n>`` over
    the surviving trajectories; ``steady[(m, n)]`` is the late-window value
    with its standard error (stored as ``complex(se_re, se_im)``,
    sample-std over per-trajectory window means divided by sqrt(count)).
    """

    n_traj: int
    dt: float
    t_end: float
    seed: int
    times: np.ndarray
    moments: dict
    steady: dict
    divergent: int
    window: tuple
    backend: str = field(default="")

    @property
    def divergent_fraction(self):
        return self.divergent / self.n_traj


def normally_ordered(stats, m, n, gamma):
    """Quantum moment ``<adag^m a^n>`` from the stochastic steady moment."""
    value, se = stats.steady[(m, n)]
    scale = gamma ** (0.5 * (m + n))
    return value / scale, se / scale


def _monomials(b, bp):
    n1 = bp * b
    return {(0, 1): b, (1, 0): bp, (1, 1): n1, (2, 2): n1 * n1}


def _relaxation_rate(params, attractor):
    kind, obj = attractor
    if kind == "cycle":
        return max(abs(2.0 - 4.0 * obj.mean_intensity()), 0.05)
    lam_p, lam_m = stability_eigenvalues(abs(obj) ** 2, params.Delta)
    rates = [abs(l.real) for l in (lam_p, lam_m) if l.real < 0.0]
    return max(min(rates), 0.05) if rates else 0.05


def simulate_ensemble(
    params: ModelParams,
    n_traj,
    dt,
    t_end,
    seed,
    *,
    record_every=None,
    initial=None,
    divergence_radius=1e6,
    window_start=None,
    max_divergent_fraction=0.01,
):
    """Integrate an ensemble of doubled-Langevin trajectories.

    All trajectories start on the deterministic attractor (a cycle point
    or the stable stationary amplitude) with zero fluctuation, which
    keeps transients short.  The steady window opens after ten relaxation
    times (estimated from the transverse exponent or the stationary
    eigenvalues) and is snapped to whole periods on a cycle.  Divergent
    trajectories are frozen, counted, and excluded; more than
    ``max_divergent_fraction`` of them raises :class:`ReliabilityError`.
    """
    if n_traj < 100:
        raise ValueError("n_traj must be >= 100")
    nsteps = int(round(t_end / dt))
    if record_every is None:
        record_every = max(1, nsteps // 400)

    if initial is None:
        attractor = classical_attractor(params)
        init = attractor[1].samples[0] if attractor[0] == "cycle" else attractor[1]
        t_cycle = attractor[1].period if attractor[0] == "cycle" else None
        rate = _relaxation_rate(params, attractor)
    else:
        init = complex(initial)
        t_cycle = None
        rate = 0.5

    if window_start is None:
        window_start = min(10.0 / rate, 0.6 * t_end)
    if t_cycle is not None:
        n_per = int((t_end - window_start) / t_cycle)
        if n_per >= 1:
            window_start = t_end - n_per * t_cycle

    rec_steps = np.arange(0, nsteps + 1, record_every)
    if rec_steps[-1] != nsteps:
        rec_steps = np.append(rec_steps, nsteps)
    times = rec_steps * dt
    n_rec = rec_steps.shape[0]
    series_sum = {k: np.zeros(n_rec, dtype=np.complex128) for k in MOMENT_KEYS}
    series_cnt = np.zeros(n_rec)
    win_mean = {k: [] for k in MOMENT_KEYS}
    divergent = 0

    n_batches = (n_traj + _MAX_BATCH - 1) // _MAX_BATCH
    for batch in range(n_batches):
        m = min(_MAX_BATCH, n_traj - batch * _MAX_BATCH)
        gen = gaussian_stream(seed, stream=batch)
        b = np.full(m, init, dtype=np.complex128)
        bp = np.full(m, np.conj(init), dtype=np.complex128)
        alive = np.ones(m)
        wsum = {k: np.zeros(m, dtype=np.complex128) for k in MOMENT_KEYS}
        wcnt = 0
        ever_dead = np.zeros(m, dtype=bool)

        def record(idx):
            mask = alive > 0.0
            vals = _monomials(b, bp)
            for k in MOMENT_KEYS:
                series_sum[k][idx] += np.sum(vals[k][mask])
            series_cnt[idx] += int(mask.sum())
            return vals

        record(0)
        step = 0
        for rec_idx in range(1, n_rec):
            target = int(rec_steps[rec_idx])
            while step < target:
                s = min(_CHUNK_STEPS, target - step)
                noise = gen.standard_normal((s, 4, m))
                _kernels.pp_chunk(
                    b, bp, alive, params.F, params.Delta, params.gamma,
                    dt, divergence_radius**2, noise,
                )
                step += s
            ever_dead |= alive == 0.0
            vals = record(rec_idx)
            if step * dt >= window_start:
                for k in MOMENT_KEYS:
                    wsum[k] += vals[k]
                wcnt += 1

        good = ~ever_dead
        divergent += int(ever_dead.sum())
        if wcnt > 0:
            for k in MOMENT_KEYS:
                win_mean[k].append(wsum[k][good] / wcnt)

    steady = {}
    for k in MOMENT_KEYS:
        per_traj = np.concatenate(win_mean[k]) if win_mean[k] else np.zeros(0, dtype=complex)
        if per_traj.size:
            value = complex(np.mean(per_traj))
            se = complex(
                np.std(per_traj.real, ddof=1) / math.sqrt(per_traj.size),
                np.std(per_traj.imag, ddof=1) / math.sqrt(per_traj.size),
            )
        else:
            value, se = complex(np.nan), complex(np.nan)
        steady[k] = (value, se)

    moments = {k: series_sum[k] / np.maximum(series_cnt, 1) for k in MOMENT_KEYS}
    stats = EnsembleStats(
        n_traj=n_traj,
        dt=dt,
        t_end=t_end,
        seed=seed,
        times=times,
        moments=moments,
        steady=steady,
        divergent=divergent,
        window=(float(window_start), float(t_end)),
        backend=_kernels.backend_name(),
    )
    if stats.divergent_fraction > max_divergent_fraction:
        raise ReliabilityError(
            f"{divergent}/{n_traj} trajectories diverged "
            f"(> {max_divergent_fraction:.0%}); boundary-term pathology suspected"
        )
    return stats


@dataclass(frozen=True, eq=False)
class ThetaSimResult:
    """Ensemble statistics of the projected scalar equations.

    ``var_theta`` tracks the offset variance, ``c1_second`` the complex
    (unconjugated) second moment of the transverse amplitude.
    ``imag_fraction`` is the ratio of imaginary to real variance in the
    offset increments: the offset is real up to this contamination.
    """

    times: np.ndarray
    var_theta: np.ndarray
    mean_theta: np.ndarray
    c1_second: np.ndarray
    imag_fraction: float
    n_traj: int
    dt: float
    seed: int


def linearized_theta_sim(sys: FloquetSystem, gamma, dt, t_end, n_traj, seed, record_every=None):
    """Simulate the offset and transverse fluctuation equations directly.

    Per trajectory: ``theta' = sqrt(gamma) Re[q0^dag(tau + theta) n(tau)]``
    with the tangent-normalized Goldstone row evaluated at the shifted
    phase, and ``c1' = mu1 c1 + sqrt(gamma) q1^dag(tau) n(tau)`` at the
    unshifted phase, both driven by the same noise draws.  The imaginary
    part of the offset increments is accumulated and must stay below 1%
    of the real variance.

    Raises
    ------
    InconsistentModesError
        If the imaginary contamination reaches 1%.
    """
    if sys.mu1.real >= 0.0:
        raise InconsistentModesError("offset simulation requires a stable cycle")
    nsteps = int(round(t_end / dt))
    if record_every is None:
        record_every = max(1, nsteps // 400)

    z = sys.q0_dag[0] @ sys.tangent(0)
    q0rows = sys.q0_dag / z

    def wrap(arr):
        return np.ascontiguousarray(np.append(arr, arr[:1]), dtype=np.complex128)

    beta_tab = wrap(sys.cycle.samples)
    q0a, q0b = wrap(q0rows[:, 0]), wrap(q0rows[:, 1])
    q1a, q1b = wrap(sys.q1_dag[:, 0]), wrap(sys.q1_dag[:, 1])

    rec_steps = np.arange(0, nsteps + 1, record_every)
    if rec_steps[-1] != nsteps:
        rec_steps = np.append(rec_steps, nsteps)
    times = rec_steps * dt
    n_rec = rec_steps.shape[0]
    sum_th = np.zeros(n_rec)
    sum_th2 = np.zeros(n_rec)
    sum_c2 = np.zeros(n_rec, dtype=np.complex128)
    count = np.zeros(n_rec)
    accum = np.zeros(2)

    n_batches = (n_traj + _MAX_BATCH - 1) // _MAX_BATCH
    for batch in range(n_batches):
        m = min(_MAX_BATCH, n_traj - batch * _MAX_BATCH)
        gen = gaussian_stream(seed, stream=batch)
        theta = np.zeros(m)
        c1 = np.zeros(m, dtype=np.complex128)

        def record(idx):
            sum_th[idx] += float(np.sum(theta))
            sum_th2[idx] += float(np.sum(theta * theta))
            sum_c2[idx] += complex(np.sum(c1 * c1))
            count[idx] += m

        record(0)
        step = 0
        for rec_idx in range(1, n_rec):
            target = int(rec_steps[rec_idx])
            while step < target:
                s = min(_CHUNK_STEPS, target - step)
                noise = gen.standard_normal((s, 4, m))
                _kernels.theta_c1_chunk(
                    theta, c1, step * dt, dt, gamma, sys.mu1, sys.period,
                    beta_tab, q0a, q0b, q1a, q1b, noise, accum,
                )
                step += s
            record(rec_idx)

    mean_th = sum_th / count
    var_th = sum_th2 / count - mean_th**2
    c1_second = sum_c2 / count
    imag_fraction = float(accum[1] / accum[0]) if accum[0] > 0 else 0.0
    if imag_fraction >= 0.01:
        raise InconsistentModesError(
            f"imaginary offset-noise contamination {imag_fraction:.2%} >= 1%"
        )
    return ThetaSimResult(
        times=times,
        var_theta=var_th,
        mean_theta=mean_th,
        c1_second=c1_second,
        imag_fraction=imag_fraction,
        n_traj=n_traj,
        dt=dt,
        seed=seed,
    )


def period_averaged_slope(times, values, period):
    """Least-squares slope and R^2 of period-block-averaged data."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    blocks = (times / period).astype(int)
    n_blocks = blocks.max() + 1
    t_avg, v_avg = [], []
    for j in range(n_blocks):
        sel = blocks == j
        if sel.sum() >= 2:
            t_avg.append(times[sel].mean())
            v_avg.append(values[sel].mean())
    t_avg = np.asarray(t_avg)
    v_avg = np.asarray(v_avg)
    if t_avg.size < 3:
        raise ValueError("need at least three period blocks for a slope")
    slope, intercept = np.polyfit(t_avg, v_avg, 1)
    fit = slope * t_avg + intercept
    ss_res = float(np.sum((v_avg - fit) ** 2))
    ss_tot = float(np.sum((v_avg - v_avg.mean()) ** 2))
    return float(slope), 1.0 - ss_res / ss_tot


def draw_noise(gen, dtau):
    """Single :class:`NoiseDraw` from a stream (thin convenience wrapper)."""
    return NoiseDraw.sample(gen, dtau)
