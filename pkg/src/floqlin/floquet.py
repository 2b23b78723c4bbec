"""Floquet analysis of a classical limit cycle.

Builds the periodic stability matrix, the fundamental matrix and its
monodromy, extracts the two Floquet exponents (the Goldstone exponent is
measured, never imposed), and integrates the four Floquet modes over one
period.  Modes whose one-period flow is expanding are integrated
backward in time, where the same flow contracts, so that all four are
obtained at uniform accuracy; periodicity and bi-orthogonality are never
enforced, only measured.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from .classical import LimitCycle
from .errors import (
    BranchCutError,
    DegenerateMonodromyError,
    DivergenceError,
    ModeConsistencyError,
)
from .numerics import eig2, principal_log2

__all__ = [
    "U_MAP",
    "FloquetSystem",
    "MonodromyEigen",
    "stability_matrix",
    "fundamental_matrix",
    "monodromy_eigen",
    "floquet_modes",
    "analytic_q1",
    "build_floquet_system",
]

# Maps the doubled complex representation (beta, beta*) to real (x, p).
U_MAP = np.array([[1.0, 1.0], [-1.0j, 1.0j]])

_PERIODICITY_TOL = 1e-5
# Below this multiplier ratio the contracting multiplier cannot be read off
# the monodromy in double precision; it is recovered from the Abel identity.
_TINY_MULTIPLIER_RATIO = 1e-5


def stability_matrix(beta, Delta):
    """Linearization of the classical flow at amplitude ``beta``."""
    b2 = beta.real * beta.real + beta.imag * beta.imag
    return np.array(
        [
            [1.0 - 2.0 * b2 + 1j * Delta, -beta * beta],
            [-np.conj(beta) * np.conj(beta), 1.0 - 2.0 * b2 - 1j * Delta],
        ]
    )


def _periodic_spline(cycle):
    """Periodic cubic spline of the orbit samples over one period."""
    tau = np.append(cycle.tau, cycle.period)
    vals = np.append(cycle.samples, cycle.samples[0])
    re = CubicSpline(tau, vals.real, bc_type="periodic")
    im = CubicSpline(tau, vals.imag, bc_type="periodic")
    return lambda t: re(t) + 1j * im(t)


def _half_grid_L(cycle, delta, substeps):
    """Stability matrices on the integration half-grid (2n+1 points)."""
    n = cycle.ngrid * substeps
    h = cycle.period / n
    taus = np.arange(2 * n + 1) * (0.5 * h)
    betas = _periodic_spline(cycle)(taus)
    b2 = np.abs(betas) ** 2
    L = np.empty((2 * n + 1, 2, 2), dtype=np.complex128)
    L[:, 0, 0] = 1.0 - 2.0 * b2 + 1j * delta
    L[:, 0, 1] = -betas * betas
    L[:, 1, 0] = -np.conj(betas) * np.conj(betas)
    L[:, 1, 1] = 1.0 - 2.0 * b2 - 1j * delta
    return L, h, n


def _rk4_linear(Ltab, h, n, y0, mu, store_every):
    """RK4 for ``y' = (L(tau) - mu) y`` with L sampled on the half-grid.

    ``y0`` may be a (2,) column mode or a (2,2) matrix; returns the
    samples at every ``store_every``-th step plus the final state.
    """
    y = np.array(y0, dtype=np.complex128)
    stored = [y.copy()]
    shift = mu * np.eye(2)
    for k in range(n):
        l0 = Ltab[2 * k] - shift
        lh = Ltab[2 * k + 1] - shift
        l1 = Ltab[2 * k + 2] - shift
        k1 = l0 @ y
        k2 = lh @ (y + (0.5 * h) * k1)
        k3 = lh @ (y + (0.5 * h) * k2)
        k4 = l1 @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (k + 1) % store_every == 0:
            stored.append(y.copy())
    if not np.all(np.isfinite(stored[-1].real)) or not np.all(np.isfinite(stored[-1].imag)):
        raise DivergenceError("fundamental-matrix integration diverged")
    return np.stack(stored)


class FundamentalMatrix(NamedTuple):
    """Fundamental-matrix samples on the cycle grid plus the monodromy.

    ``det`` holds determinant samples evaluated before rounding to double;
    for strongly contracting cycles the determinant is smaller than the
    entry roundoff of the stored matrices and cannot be recovered from
    them.
    """

    R: np.ndarray
    R_T: np.ndarray
    det: np.ndarray


def fundamental_matrix(cycle, Delta, substeps=8):
    """Integrate ``R' = L(tau) R`` from the identity over one period.

    ``L(tau)`` is evaluated from a periodic cubic interpolation of the
    orbit between grid samples (RK4 needs midpoint values off the stored
    grid).  The integration runs in extended precision so that the
    determinant survives the ``exp(mu1 T)`` contraction; the returned
    samples are double precision.
    """
    Ltab, h, n = _half_grid_L(cycle, Delta, substeps)
    stored = _rk4_linear(
        Ltab.astype(np.clongdouble), h, n, np.eye(2, dtype=np.clongdouble), 0.0, substeps
    )
    dets = stored[:, 0, 0] * stored[:, 1, 1] - stored[:, 0, 1] * stored[:, 1, 0]
    out = stored.astype(np.complex128)
    return FundamentalMatrix(R=out[:-1], R_T=out[-1], det=dets[:-1].astype(np.complex128))


@dataclass(frozen=True, eq=False)
class MonodromyEigen:
    """Floquet exponents and monodromy eigenvectors.

    ``v[:, j]`` are right eigenvectors scaled so ``v[0, j] * v[1, j] = 1``
    (the self-conjugate normalization under which the transverse variance
    kernel takes its standard values); ``w_dag[j]`` are left rows with
    ``w_dag @ v = I``.  ``goldstone_residual`` is the distance of the
    neutral multiplier from 1 -- measured, not imposed.
    """

    mu0: complex
    mu1: complex
    multipliers: np.ndarray
    v: np.ndarray
    w_dag: np.ndarray
    goldstone_residual: float


def _normalize_product(vec):
    z = vec[0] * vec[1]
    if abs(z) < 1e-12 * float(np.linalg.norm(vec)) ** 2:
        # Orbit-tangent eigenvectors of this model never have a null
        # component; fall back to unit norm if that assumption breaks.
        return vec / np.linalg.norm(vec)
    return vec / np.sqrt(z)


def monodromy_eigen(R_T, T, *, log_det=None, tangent0=None):
    """Eigen-decompose the monodromy into Floquet exponents and vectors.

    The multiplier closest to 1 defines the Goldstone branch; its
    exponent is reported with the measured residual.  When the other
    multiplier is too small to be resolved from the matrix entries
    (ratio below 1e-5) and ``log_det`` (the quadrature of the stability
    trace over one period) is supplied, it is recovered from
    ``det R(T) = exp(log_det)``; the mode-periodicity checks downstream
    still validate the exponent independently.

    Raises
    ------
    DegenerateMonodromyError
        If both multipliers sit within 1e-6 of each other (cycle at a
        bifurcation).
    BranchCutError
        If a multiplier lies on the negative real axis.
    """
    e = eig2(R_T)
    order = np.argsort(np.abs(e.values - 1.0))
    lam_g = e.values[order[0]]
    lam_o = e.values[order[1]]
    if abs(lam_o / lam_g - 1.0) < 1e-6:
        raise DegenerateMonodromyError(
            f"multipliers {lam_g:.8g} and {lam_o:.8g} are unresolvable"
        )
    if log_det is not None and abs(lam_o) < _TINY_MULTIPLIER_RATIO * abs(lam_g):
        lam_o = np.exp(log_det) / lam_g
    for lam in (lam_g, lam_o):
        if lam.real < 0.0 and abs(lam.imag) <= 1e-10 * max(1.0, abs(lam)):
            raise BranchCutError(f"multiplier {lam:.6g} on the branch cut")
    mu0 = np.log(lam_g) / T
    mu1 = np.log(lam_o) / T

    v0 = _normalize_product(e.right[:, order[0]])
    v1 = _normalize_product(e.right[:, order[1]])
    if tangent0 is not None and np.vdot(v0, np.asarray(tangent0)).real < 0.0:
        v0 = -v0
    if v1[0].real < 0.0 or (v1[0].real == 0.0 and v1[0].imag < 0.0):
        v1 = -v1
    v = np.column_stack([v0, v1])
    det = v[0, 0] * v[1, 1] - v[0, 1] * v[1, 0]
    w_dag = np.array([[v[1, 1], -v[0, 1]], [-v[1, 0], v[0, 0]]]) / det
    return MonodromyEigen(
        mu0=complex(mu0),
        mu1=complex(mu1),
        multipliers=np.array([lam_g, lam_o]),
        v=v,
        w_dag=w_dag,
        goldstone_residual=float(abs(lam_g - 1.0)),
    )


def floquet_modes(cycle, Delta, eig, substeps=8):
    """Integrate the four Floquet modes over one period.

    Columns ``p_j`` obey ``p_j' = (L - mu_j) p_j`` with ``p_j(0) = v_j``;
    rows ``q_j^dag`` obey ``(q_j^dag)' = q_j^dag (mu_j - L)`` with
    ``q_j^dag(0) = w_j^dag``.  The expanding pair (``p1`` and ``q0`` for a
    stable cycle) is integrated backward from its periodic endpoint,
    where that flow is contracting; with exact arithmetic the result is
    identical, numerically it avoids ``exp(|mu1| T)`` error growth.

    Returns ``(p0, p1, q0_dag, q1_dag, periodicity_residual)`` sampled on
    the cycle grid.

    Raises
    ------
    ModeConsistencyError
        If a mode's one-period closure error exceeds 1e-5 (grid too
        coarse, or an inaccurate exponent).
    """
    Ltab, h, n = _half_grid_L(cycle, Delta, substeps)
    LtabT = np.transpose(Ltab, (0, 2, 1))
    rev = Ltab[::-1]
    revT = LtabT[::-1]
    residuals = []

    def closure_err(a, b):
        return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))

    # p0 forward: column mode, neutral exponent.
    s = _rk4_linear(Ltab, h, n, eig.v[:, 0], eig.mu0, substeps)
    p0 = s[:-1]
    residuals.append(("p0", closure_err(s[-1], eig.v[:, 0])))

    # q1 forward: the row entries transpose to a column obeying
    # y' = (mu1 - L^T) y, no conjugation involved.
    s = _rk4_linear(-LtabT, h, n, eig.w_dag[1], -eig.mu1, substeps)
    q1_dag = s[:-1]
    residuals.append(("q1", closure_err(s[-1], eig.w_dag[1])))

    # p1 backward: u(s) = p1(T - s) obeys u' = -(L(T-s) - mu1) u.
    s = _rk4_linear(-rev, h, n, eig.v[:, 1], -eig.mu1, substeps)
    p1 = s[::-1][:-1]
    residuals.append(("p1", closure_err(s[-1], eig.v[:, 1])))

    # q0 backward, in the same transposed-column form as q1.
    s = _rk4_linear(revT, h, n, eig.w_dag[0], eig.mu0, substeps)
    q0_dag = s[::-1][:-1]
    residuals.append(("q0", closure_err(s[-1], eig.w_dag[0])))

    worst = max(residuals, key=lambda item: item[1])
    if worst[1] > _PERIODICITY_TOL:
        raise ModeConsistencyError(
            f"mode {worst[0]} closure error {worst[1]:.2e} exceeds {_PERIODICITY_TOL:.0e}"
        )
    return p0, p1, q0_dag, q1_dag, worst[1]


def analytic_q1(cycle, Delta, mu1):
    """Closed-form left transverse mode, for cross-validation only.

    Evaluates ``q1(tau) = (-i b'(tau), i b'(tau)*)^T *
    exp(int_0^tau [mu1 - tr L])`` with unit factor at ``tau = 0``; the
    trace integral uses the antiderivative of a periodic cubic spline.
    Returned as dagger rows on the cycle grid, to be compared with the
    initial-value-problem route up to one global complex rescale.
    """
    tr = 2.0 - 4.0 * np.abs(cycle.samples) ** 2
    tau = np.append(cycle.tau, cycle.period)
    spl = CubicSpline(tau, np.append(tr, tr[0]), bc_type="periodic")
    anti = spl.antiderivative()
    integ = anti(cycle.tau) - anti(0.0)
    f = np.exp(mu1.real * cycle.tau - integ)
    db = cycle.derivatives
    rows = np.empty((cycle.ngrid, 2), dtype=np.complex128)
    rows[:, 0] = 1j * np.conj(db) * f
    rows[:, 1] = -1j * db * f
    return rows


@dataclass(frozen=True, eq=False)
class FloquetSystem:
    """Complete Floquet data of one limit cycle.

    Mode samples live on the cycle grid; ``q0_dag``/``q1_dag`` store the
    left modes as dagger rows, so ``q_j^dag(tau_k) p_l(tau_k)`` is the
    plain row-column product.  ``M`` is the principal logarithm of the
    monodromy divided by the period; ``mu0``/``mu1`` are the reported
    exponents (see :func:`monodromy_eigen` for the small-multiplier
    recovery).  Instances are immutable and safe to share.
    """

    cycle: LimitCycle
    delta: float
    L: np.ndarray
    R: np.ndarray
    R_T: np.ndarray
    det_R: np.ndarray
    M: np.ndarray
    mu0: complex
    mu1: complex
    multipliers: np.ndarray
    v: np.ndarray
    w_dag: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    q0_dag: np.ndarray
    q1_dag: np.ndarray
    trace_samples: np.ndarray
    mean_trace: float
    goldstone_residual: float
    periodicity_residual: float
    orthogonality_residual: float

    @property
    def period(self):
        return self.cycle.period

    def tangent(self, k=0):
        """Orbit tangent ``(b', b'*)`` at grid index ``k``."""
        d = self.cycle.derivatives[k]
        return np.array([d, np.conj(d)])


def build_floquet_system(cycle, delta=None, substeps=8):
    """Assemble the full Floquet eigensystem of ``cycle``.

    Bi-orthogonality of the mode samples is measured across the whole
    grid and stored as a residual; only the periodicity gate raises.
    """
    if delta is None:
        delta = cycle.params.Delta
    fm = fundamental_matrix(cycle, delta, substeps)
    tr = 2.0 - 4.0 * np.abs(cycle.samples) ** 2
    mean_trace = float(np.mean(tr))
    log_det = mean_trace * cycle.period
    d0 = cycle.derivatives[0]
    eig = monodromy_eigen(
        fm.R_T, cycle.period, log_det=log_det, tangent0=np.array([d0, np.conj(d0)])
    )
    p0, p1, q0_dag, q1_dag, per_res = floquet_modes(cycle, delta, eig, substeps)

    P = np.stack([p0, p1], axis=-1)
    Q = np.stack([q0_dag, q1_dag], axis=-2)
    gram = np.einsum("kij,kjl->kil", Q, P)
    orth = float(np.max(np.abs(gram - np.eye(2))))

    L_grid = np.empty((cycle.ngrid, 2, 2), dtype=np.complex128)
    b = cycle.samples
    b2 = np.abs(b) ** 2
    L_grid[:, 0, 0] = 1.0 - 2.0 * b2 + 1j * delta
    L_grid[:, 0, 1] = -b * b
    L_grid[:, 1, 0] = -np.conj(b) * np.conj(b)
    L_grid[:, 1, 1] = 1.0 - 2.0 * b2 - 1j * delta

    return FloquetSystem(
        cycle=cycle,
        delta=float(delta),
        L=L_grid,
        R=fm.R,
        R_T=fm.R_T,
        det_R=fm.det,
        M=principal_log2(fm.R_T) / cycle.period,
        mu0=eig.mu0,
        mu1=eig.mu1,
        multipliers=eig.multipliers,
        v=eig.v,
        w_dag=eig.w_dag,
        p0=p0,
        p1=p1,
        q0_dag=q0_dag,
        q1_dag=q1_dag,
        trace_samples=tr,
        mean_trace=mean_trace,
        goldstone_residual=eig.goldstone_residual,
        periodicity_residual=per_res,
        orthogonality_residual=orth,
    )
