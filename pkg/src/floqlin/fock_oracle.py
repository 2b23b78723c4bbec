"""Exact verification oracle in a truncated number basis.

Evolves the dissipative oscillator's density matrix to its steady state,
extracts normally- and symmetric-ordered moments, and reconstructs the
exact phase-space distribution through the displaced-parity/Laguerre
closed form (no Fourier transforms, no aliasing).  Conventions match the
linearized module: ``x = a + a^dag``, vacuum covariance = identity,
distributions integrate to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from . import classical
from .errors import (
    AccuracyGuardError,
    CutoffError,
    NoLimitCycleError,
    PeriodDetectionError,
    SteadyStateError,
)
from .fluctuations import WignerGrid

__all__ = [
    "OracleParams",
    "FockState",
    "ladder",
    "lindblad_rhs",
    "evolve_steady",
    "expectation",
    "coherent_state",
    "exact_wigner",
]


@dataclass(frozen=True)
class OracleParams:
    """Master-equation run configuration.

    ``n_max`` is the Fock cutoff (``None`` picks one from the classical
    intensity and escalates on leakage); ``steady_tol`` bounds the
    Frobenius norm of the time derivative at acceptance.
    """

    F: float
    Delta: float
    gamma: float
    n_max: int | None = None
    steady_tol: float = 1e-9
    max_time: float = 4000.0
    dt: float = 1e-3
    leak_tol: float = 1e-7
    n_max_cap: int = 400
    check_every: int = 100

    def __post_init__(self):
        if self.n_max is not None and self.n_max < 4:
            raise ValueError("n_max must be >= 4")
        if self.steady_tol <= 0.0 or self.leak_tol <= 0.0:
            raise ValueError("tolerances must be > 0")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be > 0")


@dataclass(frozen=True, eq=False)
class FockState:
    """Density matrix in a truncated number basis."""

    n_max: int
    rho: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.n_max + 1

    @property
    def leakage(self):
        """Population of the top retained level."""
        return float(self.rho[-1, -1].real)

    def trace_error(self):
        return abs(float(np.trace(self.rho).real) - 1.0)

    def hermiticity_error(self):
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min())


def ladder(n_max):
    """Annihilation and creation matrices at cutoff ``n_max``."""
    s = np.sqrt(np.arange(1, n_max + 1))
    a = np.diag(s, k=1).astype(np.complex128)
    return a, a.conj().T


class _Generator:
    """Banded evaluation of the master-equation right-hand side.

    Every term is a product of the density matrix with shift/diagonal
    operators, so the evaluation is O(dim^2) per call instead of matrix
    products.
    """

    def __init__(self, dim, F, Delta, gamma):
        n = np.arange(dim, dtype=float)
        self.s1 = np.sqrt(n)  # sqrt(k)
        self.s2 = np.sqrt(n * (n - 1.0))  # sqrt(k(k-1))
        self.n = n
        self.n2 = n * (n - 1.0)
        # a adag in the truncated algebra: the top level has no state above it.
        self.aad = n + 1.0
        self.aad[-1] = 0.0
        self.f = F / math.sqrt(gamma)
        self.delta = Delta
        self.half_gamma = 0.5 * gamma

    def rhs(self, rho):
        s1, s2 = self.s1, self.s2
        out = np.zeros_like(rho)
        # Coherent part: [f*(adag - a) + i*Delta*n, rho]
        out[1:, :] += self.f * s1[1:, None] * rho[:-1, :]  # adag rho
        out[:-1, :] -= self.f * s1[1:, None] * rho[1:, :]  # - a rho
        out[:, :-1] -= self.f * s1[None, 1:] * rho[:, 1:]  # - rho adag
        out[:, 1:] += self.f * s1[None, 1:] * rho[:, :-1]  # + rho a
        out += 1j * self.delta * (self.n[:, None] - self.n[None, :]) * rho
        # Pair loss: (gamma/2) * (2 a^2 rho adag^2 - n(n-1) rho - rho n(n-1))
        t = np.zeros_like(rho)
        t[:-2, :-2] = s2[2:, None] * rho[2:, 2:] * s2[None, 2:]
        out += self.half_gamma * (2.0 * t - (self.n2[:, None] + self.n2[None, :]) * rho)
        # Linear pump: 2 adag rho a - a adag rho - rho a adag
        t2 = np.zeros_like(rho)
        t2[1:, 1:] = s1[1:, None] * rho[:-1, :-1] * s1[None, 1:]
        out += 2.0 * t2 - (self.aad[:, None] + self.aad[None, :]) * rho
        return out


def lindblad_rhs(state, params):
    """Time derivative of the density matrix under the master equation.

    The coherent part is the plain commutator of
    ``F/sqrt(gamma) (a^dag - a) + i Delta a^dag a`` with the state; the
    incoherent parts are the pair-loss channel at rate ``gamma`` and the
    linear pump at unit rate.
    """
    rho = state.rho if isinstance(state, FockState) else np.asarray(state)
    dim = rho.shape[0]
    if rho.shape != (dim, dim):
        raise ValueError("density matrix must be square")
    gen = _Generator(dim, params.F, params.Delta, params.gamma)
    return gen.rhs(rho)


def _auto_cutoff(params):
    try:
        cyc = classical.find_limit_cycle(
            classical.ModelParams(F=params.F, Delta=params.Delta, gamma=params.gamma),
            ngrid=256,
        )
        i_ref = float(np.max(np.abs(cyc.samples) ** 2))
    except (NoLimitCycleError, PeriodDetectionError):
        roots = classical.stationary_intensities(params.F, params.Delta)
        stable = [I for I in roots if classical.stationary_state(I, params.Delta).stable]
        i_ref = max(stable) if stable else max(roots.max(), 1.0)
    n_bar = i_ref / params.gamma
    return max(int(math.ceil(n_bar + 5.0 * math.sqrt(n_bar) + 10.0)), 8)


def _stability_dt(params, dim):
    # RK4 stability estimate for the stiffest decay rates at the cutoff.
    n = dim - 1
    rate = params.gamma * n * (n - 1.0) + 2.0 * (n + 1.0) + abs(params.Delta) * n
    rate += 4.0 * params.F / math.sqrt(params.gamma) * math.sqrt(n)
    return 2.0 / max(rate, 1.0)


def evolve_steady(params, initial=None):
    """Relax the master equation to its steady state by RK4 stepping.

    Starts from vacuum (or ``initial``), runs until the Frobenius norm of
    the derivative drops below ``steady_tol``; trace drift beyond 1e-9
    halves the step, and top-level leakage beyond ``leak_tol`` restarts
    at 1.5x the cutoff.  Trace, Hermiticity and positivity are monitored
    every ``check_every`` steps.

    Raises
    ------
    SteadyStateError
        If ``max_time`` elapses without convergence.
    CutoffError
        If cutoff escalation exceeds ``n_max_cap``.
    """
    n_max = params.n_max if params.n_max is not None else _auto_cutoff(params)
    if n_max > params.n_max_cap:
        raise CutoffError(f"cutoff {n_max} exceeds cap {params.n_max_cap}")
    dim = n_max + 1
    gen = _Generator(dim, params.F, params.Delta, params.gamma)
    if initial is None:
        rho = np.zeros((dim, dim), dtype=np.complex128)
        rho[0, 0] = 1.0
    else:
        rho = np.zeros((dim, dim), dtype=np.complex128)
        src = initial.rho if isinstance(initial, FockState) else np.asarray(initial)
        k = min(src.shape[0], dim)
        rho[:k, :k] = src[:k, :k]
        rho /= np.trace(rho).real

    dt = min(params.dt, _stability_dt(params, dim))
    t = 0.0
    steps = 0
    residual = math.inf
    while t < params.max_time:
        k1 = gen.rhs(rho)
        k2 = gen.rhs(rho + (0.5 * dt) * k1)
        k3 = gen.rhs(rho + (0.5 * dt) * k2)
        k4 = gen.rhs(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
        steps += 1
        if steps % params.check_every == 0:
            residual = float(np.linalg.norm(k1))
            tr_err = abs(float(np.trace(rho).real) - 1.0)
            if not np.isfinite(residual):
                raise SteadyStateError(f"evolution diverged at t={t:.3g}")
            if tr_err > 1e-9:
                dt *= 0.5  # trace drift: the step was too aggressive
            herm = float(np.max(np.abs(rho - rho.conj().T)))
            if herm > 1e-8:
                raise SteadyStateError(f"hermiticity violated ({herm:.2e}) at t={t:.3g}")
            min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
            if min_eig < -1e-6:
                raise SteadyStateError(f"positivity violated ({min_eig:.2e}) at t={t:.3g}")
            leak = float(rho[-1, -1].real)
            if leak > params.leak_tol:
                bigger = int(math.ceil(1.5 * n_max))
                if bigger > params.n_max_cap:
                    raise CutoffError(
                        f"leakage {leak:.2e} at cutoff {n_max}; escalation exceeds cap"
                    )
                return evolve_steady(replace(params, n_max=bigger), initial=initial)
            if residual < params.steady_tol:
                break
    if residual >= params.steady_tol:
        raise SteadyStateError(
            f"no steady state within t={params.max_time}: residual {residual:.2e}"
        )
    return FockState(
        n_max=n_max,
        rho=rho,
        meta={"time": t, "residual": residual, "dt": dt, "leakage": float(rho[-1, -1].real)},
    )


def expectation(state, m, n):
    """Normally-ordered moment ``Tr[rho adag^m a^n]``.

    Guarded by ``m + n <= n_max / 2``: higher orders are dominated by
    truncation error.
    """
    if m < 0 or n < 0:
        raise ValueError("orders must be >= 0")
    if m + n > state.n_max / 2:
        raise AccuracyGuardError(
            f"moment order {m}+{n} exceeds n_max/2 = {state.n_max / 2:.0f}"
        )
    a, adag = ladder(state.n_max)
    op = np.linalg.matrix_power(adag, m) @ np.linalg.matrix_power(a, n)
    return complex(np.trace(state.rho @ op))


def coherent_state(alpha, n_max):
    """Coherent-state density matrix from the normalized number-basis series."""
    n = np.arange(n_max + 1)
    log_amp = n * np.log(complex(alpha)) - 0.5 * gammaln(n + 1.0) - 0.5 * abs(alpha) ** 2
    vec = np.exp(log_amp)
    vec /= np.linalg.norm(vec)
    return FockState(n_max=n_max, rho=np.outer(vec, vec.conj()))


def exact_wigner(state, grid=None, nx=201, ny=201, pad_sigma=6.0):
    """Phase-space distribution of a Fock-basis density matrix.

    Uses the displaced-parity closed form: each number-basis dyad
    contributes an associated Laguerre polynomial times
    ``(x + i p)^d exp(-(x^2+p^2)/2)``.  The Laguerre recurrence is run
    with the Gaussian and the ``1/sqrt(d!)`` factor folded into its seed
    so intermediates stay bounded at large cutoff.  Diagonal terms reduce
    to ``(-1)^n exp(-r2/2) L_n(r2) / (2 pi)``.
    """
    rho = state.rho
    dim = state.dim
    if grid is None:
        mean_a = complex(np.trace(rho @ np.diag(np.sqrt(np.arange(1, dim)), k=1)))
        mx, mp = 2.0 * mean_a.real, 2.0 * mean_a.imag
        nbar = float(np.sum(np.arange(dim) * np.diag(rho).real))
        spread = 2.0 * math.sqrt(nbar + 1.0) + pad_sigma
        x = np.linspace(mx - spread, mx + spread, nx)
        p = np.linspace(mp - spread, mp + spread, ny)
    elif isinstance(grid, WignerGrid):
        x, p = grid.x.copy(), grid.p.copy()
    else:
        x, p = (np.asarray(g, dtype=float) for g in grid)

    xg, pg = np.meshgrid(x, p)
    z = xg * xg + pg * pg
    r = np.sqrt(z)
    phase = np.arctan2(pg, xg)
    w = np.zeros_like(z)
    signs = (-1.0) ** np.arange(dim)
    log_n = gammaln(np.arange(dim) + 1.0)
    for d in range(dim):
        diag = np.diagonal(rho, offset=-d)  # rho[l+d, l]
        if not np.any(np.abs(diag) > 1e-16):
            continue
        nterms = dim - d
        coeff = diag * signs[:nterms] * np.exp(
            0.5 * (log_n[d] + log_n[:nterms] - log_n[d : d + nterms])
        )
        if d == 0:
            base = np.exp(-0.5 * z)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                mag = np.where(r > 0.0, np.exp(d * np.log(np.where(r > 0.0, r, 1.0)) - 0.5 * z - 0.5 * gammaln(d + 1.0)), 0.0)
            base = mag * np.exp(1j * d * phase)
        acc = coeff[0] * base
        if nterms > 1:
            lag_prev = base
            lag_cur = (1.0 + d - z) * base
            acc = acc + coeff[1] * lag_cur
            for l in range(2, nterms):
                lag_prev, lag_cur = (
                    lag_cur,
                    ((2.0 * l - 1.0 + d - z) * lag_cur - (l - 1.0 + d) * lag_prev) / l,
                )
                acc = acc + coeff[l] * lag_cur
        w += acc.real if d == 0 else 2.0 * acc.real
    w /= 2.0 * math.pi
    out = WignerGrid(x=x, p=p, values=w, meta={"kind": "exact", "n_max": state.n_max})
    out.meta["mass"] = out.mass()
    return out
