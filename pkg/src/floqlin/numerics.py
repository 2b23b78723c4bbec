"""Shared numerical primitives.

Fixed-step RK4 integration, the 2x2 complex eigen-machinery used for
monodromy analysis, associated Laguerre polynomials, and reproducible
Gaussian noise streams.  Everything here is pure and reentrant; random
streams are value-owned by their consumer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchCutError, DegenerateSpectrumError, DivergenceError

__all__ = [
    "rk4_step",
    "integrate_ode",
    "Eig2",
    "eig2",
    "principal_log2",
    "laguerre",
    "gaussian_stream",
    "NoiseDraw",
]


def rk4_step(rhs, t, y, h):
    """One classical Runge-Kutta step of size ``h`` for ``y' = rhs(t, y)``."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_ode(rhs, y0, t0, t1, dt):
    """Integrate ``y' = rhs(t, y)`` with fixed-step RK4.

    Samples are taken at ``t0 + k*dt``; if ``t1`` is not a multiple of
    ``dt`` away, a final shorter step lands exactly on ``t1``.

    Parameters
    ----------
    rhs : callable(t, y) -> array_like
        Derivative field; must return the same shape as ``y``.
    y0 : complex or array_like
        Initial state.
    t0, t1 : float
        Integration interval, ``t1 > t0``.
    dt : float
        Step size, ``> 0``.

    Returns
    -------
    (times, states)
        ``times`` is a float array, ``states`` a complex array with the
        sample index first.

    Raises
    ------
    DivergenceError
        If the state stops being finite; the exception carries the time.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    y = np.asarray(y0, dtype=np.complex128)
    scalar = y.ndim == 0
    times = [t0]
    states = [y.copy()]
    t = t0
    # Tiny slack so t1 = t0 + k*dt does not produce a zero-length tail step.
    eps = 1e-12 * max(abs(t0), abs(t1), 1.0)
    while t < t1 - eps:
        h = min(dt, t1 - t)
        y = np.asarray(rk4_step(rhs, t, y, h), dtype=np.complex128)
        t = t + h
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"state diverged at t={t:.6g}", t=t)
        times.append(t)
        states.append(y.copy())
    out = np.stack([s[np.newaxis] if scalar else s for s in states])
    if scalar:
        out = out[:, 0]
    return np.asarray(times), out


@dataclass(frozen=True)
class Eig2:
    """Eigensystem of a 2x2 complex matrix.

    ``right[:, j]`` are unit-norm right eigenvectors, ``left[j]`` are left
    eigenvector rows scaled so that ``left @ right == I`` (bi-orthonormal).
    """

    values: np.ndarray
    right: np.ndarray
    left: np.ndarray


def _inv2(m):
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]], dtype=np.complex128) / det


def eig2(m):
    """Eigen-decompose a 2x2 complex matrix via the characteristic quadratic.

    Raises
    ------
    DegenerateSpectrumError
        If the eigenvalue gap is below ``1e-8 * ||m||_F``; below that the
        two directions cannot be separated reliably.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.shape != (2, 2) or not np.all(np.isfinite(m.view(np.float64))):
        raise ValueError("expected a finite 2x2 matrix")
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = np.sqrt(np.complex128(tr * tr - 4.0 * det))
    la = 0.5 * (tr + disc)
    lb = 0.5 * (tr - disc)
    scale = math.sqrt(float(np.sum(np.abs(m) ** 2)))
    if abs(la - lb) < 1e-8 * max(scale, 1e-300):
        raise DegenerateSpectrumError(
            f"eigenvalue gap {abs(la - lb):.3e} below 1e-8 * ||M|| = {1e-8 * scale:.3e}"
        )

    def vec(lam):
        c1 = np.array([m[0, 1], lam - m[0, 0]], dtype=np.complex128)
        c2 = np.array([lam - m[1, 1], m[1, 0]], dtype=np.complex128)
        v = c1 if np.linalg.norm(c1) >= np.linalg.norm(c2) else c2
        n = np.linalg.norm(v)
        if n == 0.0:  # diagonal matrix: canonical basis vector
            v = np.array([1.0, 0.0], dtype=np.complex128)
            n = 1.0
        return v / n

    right = np.column_stack([vec(la), vec(lb)])
    left = _inv2(right)
    return Eig2(values=np.array([la, lb]), right=right, left=left)


def principal_log2(m):
    """Principal matrix logarithm of a diagonalizable 2x2 complex matrix.

    Computed through the eigendecomposition (never a series expansion:
    the matrices handled here are far from the identity).  Eigenvalue
    logarithms are taken on the principal branch, imaginary part in
    (-pi, pi].

    Raises
    ------
    BranchCutError
        If an eigenvalue lies on the negative real axis (within 1e-10) or
        the matrix is singular.
    DegenerateSpectrumError
        Propagated from :func:`eig2`.
    """
    e = eig2(m)
    logs = np.empty(2, dtype=np.complex128)
    for j, lam in enumerate(e.values):
        if abs(lam) < 1e-300:
            raise BranchCutError("singular matrix has no logarithm")
        if lam.real < 0.0 and abs(lam.imag) <= 1e-10 * max(1.0, abs(lam)):
            raise BranchCutError(
                f"eigenvalue {lam:.6g} lies on the principal branch cut"
            )
        logs[j] = np.log(lam)
    return (e.right * logs[np.newaxis, :]) @ e.left


def laguerre(n, k, x):
    """Associated Laguerre polynomial ``L_n^k(x)`` by the three-term recurrence.

    Stable upward recurrence in the degree; ``x`` may be a scalar or an
    ndarray (evaluated elementwise).
    """
    if n < 0 or k < 0:
        raise ValueError("laguerre requires n >= 0 and k >= 0")
    xa = np.asarray(x, dtype=np.float64)
    prev = np.ones_like(xa)
    if n == 0:
        out = prev
    else:
        cur = 1.0 + k - xa
        for i in range(2, n + 1):
            prev, cur = cur, ((2.0 * i - 1.0 + k - xa) * cur - (i - 1.0 + k) * prev) / i
        out = cur
    if np.isscalar(x):
        return float(out)
    return out


def gaussian_stream(seed, stream=0):
    """Deterministic standard-normal stream.

    Distinct ``(seed, stream)`` pairs give statistically independent
    streams (PCG64 seeded through a spawned ``SeedSequence``), and the
    same pair always reproduces the same values.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class NoiseDraw:
    """One step's worth of discretized white noise.

    ``eta`` and ``eta_plus`` are real, ``xi`` is complex with
    ``<xi xi*> = 1/dtau``; each scalar carries the variance ``1/dtau`` of
    white noise averaged over a step.
    """

    eta: float
    eta_plus: float
    xi: complex
    dtau: float

    @classmethod
    def sample(cls, gen, dtau):
        """Draw one step of noise from ``gen`` at step size ``dtau``."""
        g = gen.standard_normal(4)
        root = 1.0 / math.sqrt(dtau)
        return cls(
            eta=g[0] * root,
            eta_plus=g[1] * root,
            xi=complex(g[2], g[3]) * (root / math.sqrt(2.0)),
            dtau=dtau,
        )

    @classmethod
    def zeros(cls, dtau):
        """Deterministic zero draw (useful for drift-only checks)."""
        return cls(eta=0.0, eta_plus=0.0, xi=0.0 + 0.0j, dtau=dtau)
