"""Quantum fluctuations around a limit cycle.

Implements the projected noise machinery: the cycle-offset diffusion
variance, the periodic transverse variance kernel, per-offset Gaussian
snapshots (mean and covariance in real phase space), and their uniform
mixture evaluated on a phase-space grid.

Conventions: quadratures ``x = a + a^dag``, ``p = -i(a - a^dag)``, so the
vacuum covariance is the identity and phase-space distributions integrate
to one.  The exact-diagonalization oracle mirrors these exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DegenerateCovarianceError,
    InconsistentModesError,
    KernelConvergenceError,
    UnstableCycleError,
)
from .floquet import U_MAP, FloquetSystem

__all__ = [
    "GaussianSnapshot",
    "ThetaDiffusion",
    "WignerGrid",
    "diffusion_matrix",
    "theta_kernel",
    "theta_variance",
    "theta_variance_series",
    "c_kernel",
    "gaussian_moments",
    "mixture_wigner",
    "l1_distance",
    "sup_distance",
]

_IMAG_TOL = 1e-8


def diffusion_matrix(beta):
    """Symmetric noise-correlation matrix ``[[-beta^2, 2], [2, -beta*^2]]``."""
    return np.array([[-beta * beta, 2.0], [2.0, -np.conj(beta) * np.conj(beta)]])


def _bilinear(rows, betas):
    """Row-N-row^T contraction of the diffusion matrix, vectorized over the grid."""
    r0 = rows[:, 0]
    r1 = rows[:, 1]
    return 4.0 * r0 * r1 - (r0 * betas) ** 2 - (r1 * np.conj(betas)) ** 2


def _real_checked(values, what):
    values = np.asarray(values)
    bad = float(np.max(np.abs(values.imag)))
    if bad > _IMAG_TOL:
        raise InconsistentModesError(
            f"{what} has imaginary residue {bad:.2e} > {_IMAG_TOL:.0e}"
        )
    return values.real


def theta_kernel(sys: FloquetSystem):
    """Diffusion kernel of the cycle offset, sampled on the cycle grid.

    The stored left Goldstone row is renormalized against the true orbit
    tangent ``(b', b'*)`` so the offset is measured in time units; the
    resulting kernel is independent of the monodromy eigenvector scaling.
    The kernel must come out real and positive; anything else means the
    modes are inconsistent.
    """
    z = sys.q0_dag[0] @ sys.tangent(0)
    rows = sys.q0_dag / z
    kernel = _bilinear(rows, sys.cycle.samples)
    kernel = _real_checked(kernel, "offset diffusion kernel")
    if np.min(kernel) <= 0.0:
        raise InconsistentModesError("offset diffusion kernel is not positive")
    return kernel


def theta_variance(sys: FloquetSystem, gamma, tau):
    """Variance of the cycle offset accumulated over ``[0, tau]``.

    Trapezoidal quadrature of the periodic kernel on the stored grid,
    extended periodically beyond one period, scaled by ``gamma``.
    """
    if tau < 0.0:
        raise ValueError("tau must be >= 0")
    if gamma <= 0.0:
        raise ValueError("gamma must be > 0")
    kernel = theta_kernel(sys)
    return gamma * _periodic_cumquad(kernel, sys.period, tau)


def _periodic_cumquad(kernel, period, tau):
    n = kernel.shape[0]
    h = period / n
    full = h * float(np.sum(kernel))  # periodic trapezoid = plain sum
    wraps, rem = divmod(tau, period)
    total = full * wraps
    j = int(rem // h)
    if j > 0:
        seg = kernel[: j + 1] if j < n else np.append(kernel, kernel[0])
        total += h * (0.5 * seg[0] + np.sum(seg[1:-1]) + 0.5 * seg[-1])
    frac_t = rem - j * h
    if frac_t > 0.0:
        k0 = kernel[j % n]
        k1 = kernel[(j + 1) % n]
        kf = k0 + (k1 - k0) * (frac_t / h)
        total += 0.5 * (k0 + kf) * frac_t
    return float(total)


@dataclass(frozen=True, eq=False)
class ThetaDiffusion:
    """Offset-variance curve with its coarse-grained diffusion rate.

    ``coarse_slope`` is the least-squares slope through samples at whole
    periods (where the periodic modulation vanishes); ``mean_kernel`` is
    the period average of the diffusion kernel, so the slope equals
    ``gamma * mean_kernel`` up to quadrature error.
    """

    times: np.ndarray
    variances: np.ndarray
    coarse_slope: float
    mean_kernel: float


def theta_variance_series(sys: FloquetSystem, gamma, times):
    """Offset variance evaluated on a time grid (monotone, starts at 0)."""
    kernel = theta_kernel(sys)
    times = np.asarray(times, dtype=float)
    var = np.array([gamma * _periodic_cumquad(kernel, sys.period, t) for t in times])
    n_per = max(int(times.max() / sys.period), 1)
    tp = np.arange(n_per + 1) * sys.period
    vp = np.array([gamma * _periodic_cumquad(kernel, sys.period, t) for t in tp])
    slope = float(np.polyfit(tp, vp, 1)[0]) if n_per >= 2 else gamma * float(np.mean(kernel))
    return ThetaDiffusion(
        times=times,
        variances=var,
        coarse_slope=slope,
        mean_kernel=float(np.mean(kernel)),
    )


def c_kernel(sys: FloquetSystem):
    """Converged periodic variance kernel of the transverse amplitude.

    Solves ``S' = 2 mu1 S + g(tau)`` with ``g = q1^dag N q1*`` from
    ``S(0) = 0``, iterating whole periods until two successive periods
    agree within 1e-10 (geometric convergence at rate ``exp(2 Re mu1 T)``).
    The result is independent of the noise strength; the stationary
    transverse second moment is ``gamma * C``.

    Raises
    ------
    UnstableCycleError
        If ``Re mu1 >= 0``.
    KernelConvergenceError
        If 200 periods do not suffice.
    InconsistentModesError
        If the kernel fails its reality/positivity checks.
    """
    if sys.mu1.real >= 0.0:
        raise UnstableCycleError(f"Re mu1 = {sys.mu1.real:.3g} >= 0")
    g = _real_checked(_bilinear(sys.q1_dag, sys.cycle.samples), "transverse noise kernel")
    n = sys.cycle.ngrid
    period = sys.period
    h = period / n
    tau = np.append(sys.cycle.tau, period)
    spl = CubicSpline(tau, np.append(g, g[0]), bc_type="periodic")
    g_half = spl(np.arange(2 * n + 1) * (0.5 * h))
    two_mu = 2.0 * sys.mu1

    sigma = 0.0 + 0.0j
    prev = None
    for _ in range(200):
        samples = np.empty(n, dtype=np.complex128)
        for k in range(n):
            samples[k] = sigma
            d0 = two_mu * sigma + g_half[2 * k]
            d1 = two_mu * (sigma + 0.5 * h * d0) + g_half[2 * k + 1]
            d2 = two_mu * (sigma + 0.5 * h * d1) + g_half[2 * k + 1]
            d3 = two_mu * (sigma + h * d2) + g_half[2 * k + 2]
            sigma = sigma + (h / 6.0) * (d0 + 2.0 * d1 + 2.0 * d2 + d3)
        if prev is not None and float(np.max(np.abs(samples - prev))) < 1e-10:
            out = _real_checked(samples, "transverse variance kernel")
            if np.min(out) <= 0.0:
                raise InconsistentModesError("transverse variance kernel is not positive")
            return out
        prev = samples
    raise KernelConvergenceError("periodic variance kernel: no convergence in 200 periods")


@dataclass(frozen=True, eq=False)
class GaussianSnapshot:
    """Mean and covariance of the snapshot Gaussian at one cycle offset.

    The covariance is ``identity + C(theta) * u u^T`` with ``u`` the real
    image of the transverse mode, so its eigenvalues are 1 (along the
    Goldstone image) and ``det`` (along ``u``).
    """

    theta: float
    mean: np.ndarray
    cov: np.ndarray


class _SnapshotFamily:
    """Periodic interpolators for snapshot moments at arbitrary offsets."""

    def __init__(self, sys: FloquetSystem, gamma):
        self.gamma = gamma
        self.period = sys.period
        tau = np.append(sys.cycle.tau, sys.period)

        def per(vals):
            v = np.append(vals, vals[:1], axis=0)
            if np.iscomplexobj(v):
                re = CubicSpline(tau, v.real, bc_type="periodic")
                im = CubicSpline(tau, v.imag, bc_type="periodic")
                return lambda t: re(t) + 1j * im(t)
            return CubicSpline(tau, v, bc_type="periodic")

        self._beta = per(sys.cycle.samples)
        self._p1 = per(sys.p1)
        self._c = per(c_kernel(sys))

    def moments(self, thetas):
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float)) % self.period
        beta = self._beta(thetas)
        means = np.stack([2.0 * beta.real, 2.0 * beta.imag], axis=-1) / math.sqrt(self.gamma)
        p1 = self._p1(thetas)
        u = np.einsum("ij,kj->ki", U_MAP, p1)
        cvals = self._c(thetas)
        excess = cvals[:, None, None] * u[:, :, None] * u[:, None, :]
        excess = _real_checked(excess, "snapshot covariance")
        covs = np.eye(2)[None, :, :] + excess
        return means, covs


def gaussian_moments(sys: FloquetSystem, gamma, theta):
    """Snapshot mean and covariance at cycle offset ``theta``.

    The mean is the orbit point mapped to quadratures and scaled by
    ``1/sqrt(gamma)``; the covariance is the identity plus the converged
    transverse variance along the real image of the transverse mode (a
    plain, unconjugated outer product) and carries no ``gamma``.
    """
    if not 0.0 <= theta < sys.period:
        raise ValueError("theta must lie in [0, period)")
    means, covs = _SnapshotFamily(sys, gamma).moments(theta)
    return GaussianSnapshot(theta=float(theta), mean=means[0], cov=covs[0])


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """Rectangular phase-space grid of real values.

    ``values[i, j]`` corresponds to ``(p[i], x[j])`` (row-major).  ``meta``
    records normalization data for emitted files.
    """

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def dp(self):
        return float(self.p[1] - self.p[0])

    def cell_area(self):
        return self.dx * self.dp

    def mass(self):
        """Riemann-sum normalization (1 when the grid covers the support)."""
        return float(np.sum(self.values) * self.cell_area())

    def moments(self):
        """Grid mean vector and covariance of (x, p)."""
        w = self.values * self.cell_area()
        total = float(np.sum(w))
        xg, pg = np.meshgrid(self.x, self.p)
        mx = float(np.sum(w * xg)) / total
        mp = float(np.sum(w * pg)) / total
        cxx = float(np.sum(w * (xg - mx) ** 2)) / total
        cpp = float(np.sum(w * (pg - mp) ** 2)) / total
        cxp = float(np.sum(w * (xg - mx) * (pg - mp))) / total
        return np.array([mx, mp]), np.array([[cxx, cxp], [cxp, cpp]])


def _same_axes(a: WignerGrid, b: WignerGrid):
    return a.x.shape == b.x.shape and np.allclose(a.x, b.x) and np.allclose(a.p, b.p)


def l1_distance(a: WignerGrid, b: WignerGrid):
    """Cell-weighted L1 distance between two grids on identical axes."""
    if not _same_axes(a, b):
        raise ValueError("grids must share axes")
    return float(np.sum(np.abs(a.values - b.values)) * a.cell_area())


def sup_distance(a: WignerGrid, b: WignerGrid):
    """Sup-norm distance between two grids on identical axes."""
    if not _same_axes(a, b):
        raise ValueError("grids must share axes")
    return float(np.max(np.abs(a.values - b.values)))


def auto_axes(means, covs, nx=201, ny=201, pad_sigma=5.0):
    """Axes covering every snapshot mean to ``pad_sigma`` standard deviations."""
    sig = np.sqrt(np.linalg.det(covs))  # largest covariance eigenvalue
    lo = np.min(means - pad_sigma * sig[:, None], axis=0)
    hi = np.max(means + pad_sigma * sig[:, None], axis=0)
    return np.linspace(lo[0], hi[0], nx), np.linspace(lo[1], hi[1], ny)


def mixture_wigner(sys: FloquetSystem, gamma, grid=None, n_theta=256, nx=201, ny=201, pad_sigma=5.0):
    """Uniform mixture of snapshot Gaussians on a phase-space grid.

    Snapshots are evaluated at ``n_theta`` midpoint offsets and averaged
    with equal weight; each Gaussian uses its inverse covariance and the
    ``2 pi sqrt(det)`` normalization.  With ``grid=None`` the axes
    auto-extend to every snapshot mean plus ``pad_sigma`` standard
    deviations.

    Raises
    ------
    DegenerateCovarianceError
        If any snapshot covariance has determinant below 1e-12.
    """
    if n_theta < 64:
        raise ValueError("n_theta must be >= 64")
    thetas = (np.arange(n_theta) + 0.5) * (sys.period / n_theta)
    means, covs = _SnapshotFamily(sys, gamma).moments(thetas)
    dets = np.linalg.det(covs)
    if np.min(dets) < 1e-12:
        raise DegenerateCovarianceError(f"snapshot covariance determinant {np.min(dets):.2e}")

    if grid is None:
        x, p = auto_axes(means, covs, nx=nx, ny=ny, pad_sigma=pad_sigma)
    elif isinstance(grid, WignerGrid):
        x, p = grid.x.copy(), grid.p.copy()
    else:
        x, p = (np.asarray(g, dtype=float) for g in grid)

    xg, pg = np.meshgrid(x, p)
    w = np.zeros_like(xg)
    for m in range(n_theta):
        c = covs[m]
        det = dets[m]
        inv00, inv01, inv11 = c[1, 1] / det, -c[0, 1] / det, c[0, 0] / det
        dxg = xg - means[m, 0]
        dpg = pg - means[m, 1]
        quad = inv00 * dxg * dxg + 2.0 * inv01 * dxg * dpg + inv11 * dpg * dpg
        w += np.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))
    w /= n_theta
    out = WignerGrid(x=x, p=p, values=w, meta={"kind": "mixture", "n_theta": n_theta})
    out.meta["mass"] = out.mass()
    return out
