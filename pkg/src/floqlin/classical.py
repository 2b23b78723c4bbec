"""Classical driven Van der Pol dynamics.

Stationary solutions of ``beta' = F + (1 + i*Delta - |beta|^2) beta``,
their stability and phase-diagram classification, numerical limit-cycle
construction by Poincare section + Newton shooting, and bifurcation scans
over the drive strength.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, NoLimitCycleError, PeriodDetectionError

__all__ = [
    "ModelParams",
    "StationaryState",
    "TurningPoints",
    "PhaseRegion",
    "LimitCycle",
    "ScanRow",
    "drift",
    "stationary_intensities",
    "stability_eigenvalues",
    "damping_coefficients",
    "turning_points",
    "classify",
    "stationary_state",
    "fixed_point_amplitude",
    "find_limit_cycle",
    "classical_attractor",
    "bifurcation_scan",
]

STABLE_OVERDAMPED = "stable-overdamped"
STABLE_UNDERDAMPED = "stable-underdamped"
UNSTABLE_STATIC = "unstable-static"
UNSTABLE_HOPF_SIDE = "unstable-hopf-side"

REGION_LABELS = (
    STABLE_OVERDAMPED,
    STABLE_UNDERDAMPED,
    UNSTABLE_STATIC,
    UNSTABLE_HOPF_SIDE,
)

_DIVERGENCE_RADIUS = 1e8


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model parameters.

    ``F`` is the drive amplitude, ``Delta`` the detuning, ``gamma`` the
    nonlinear-loss rate.  ``gamma`` does not enter the classical flow but
    sets the quantum noise strength downstream.
    """

    F: float
    Delta: float
    gamma: float = 0.1

    def __post_init__(self):
        if self.F < 0.0:
            raise ValueError("drive amplitude F must be >= 0")
        if self.gamma <= 0.0:
            raise ValueError("nonlinear-loss rate gamma must be > 0")


def drift(beta, params):
    """Deterministic velocity ``F + (1 + i*Delta - |beta|^2) beta``."""
    return params.F + (1.0 + 1j * params.Delta - (beta.real * beta.real + beta.imag * beta.imag)) * beta


def _f2_of_intensity(intensity, delta2):
    return (delta2 + 1.0) * intensity - 2.0 * intensity**2 + intensity**3


def _cardano_real_root(p, q):
    # Single real root of t^3 + p t + q (discriminant < 0 branch).
    r = math.sqrt(max(q * q / 4.0 + p**3 / 27.0, 0.0))
    return math.copysign(abs(-q / 2.0 + r) ** (1.0 / 3.0), -q / 2.0 + r) + math.copysign(
        abs(-q / 2.0 - r) ** (1.0 / 3.0), -q / 2.0 - r
    )


def stationary_intensities(F, Delta):
    """All real non-negative roots ``I`` of ``F^2 = (Delta^2+1) I - 2 I^2 + I^3``.

    Returned sorted ascending with multiplicity preserved (1 or 3 entries).
    Roots are obtained from the closed-form trigonometric/Cardano solution
    and polished with Newton iterations; a double root (|discriminant|
    below 1e-12) is located at the matching turning point.
    """
    if F < 0.0:
        raise ValueError("F must be >= 0")
    f2 = F * F
    d2 = Delta * Delta
    a, b, c = -2.0, d2 + 1.0, -f2
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    disc = -4.0 * p**3 - 27.0 * q * q
    shift = -a / 3.0

    def cubic(i):
        return ((i + a) * i + b) * i + c

    def dcubic(i):
        return (3.0 * i + 2.0 * a) * i + b

    if abs(disc) < 1e-12:
        tps = turning_points(Delta)
        if tps is None:
            roots = [_cardano_real_root(p, q) + shift]
        else:
            cands = [(tps.I_plus, tps.F2_plus), (tps.I_minus, tps.F2_minus)]
            i_dbl = min(cands, key=lambda it: abs(f2 - it[1]))[0]
            for _ in range(4):  # polish the fold location on dF^2/dI = 0
                i_dbl -= dcubic(i_dbl) / (6.0 * i_dbl + 2.0 * a)
            roots = [i_dbl, i_dbl, 2.0 - 2.0 * i_dbl]
    elif disc > 0.0:
        mag = 2.0 * math.sqrt(-p / 3.0)
        arg = min(1.0, max(-1.0, 3.0 * q / (p * mag)))
        phi = math.acos(arg) / 3.0
        roots = [mag * math.cos(phi - 2.0 * math.pi * k / 3.0) + shift for k in range(3)]
    else:
        roots = [_cardano_real_root(p, q) + shift]

    polished = []
    for r in roots:
        for _ in range(12):
            d = dcubic(r)
            if abs(d) < 1e-9:
                break
            step = cubic(r) / d
            r -= step
            if abs(step) < 1e-15 * max(1.0, abs(r)):
                break
        if -1e-9 < r < 0.0:
            r = 0.0
        polished.append(r)
    return np.array(sorted(polished))


def stability_eigenvalues(I, Delta):
    """Eigenvalue pair ``1 - 2I +/- sqrt(I^2 - Delta^2)`` of a stationary state.

    The pair is complex-conjugate exactly when ``I^2 < Delta^2``.
    """
    if I < 0.0:
        raise ValueError("intensity must be >= 0")
    s = cmath.sqrt(complex(I * I - Delta * Delta, 0.0))
    base = 1.0 - 2.0 * I
    return base + s, base - s


def damping_coefficients(I, Delta):
    """Damping rate and squared frequency of phase fluctuations.

    Returns ``(Gamma, Omega2)`` with ``Gamma = 2(2I - 1)`` and
    ``Omega2 = Delta^2 + (2I - 1)^2 - I^2``; the identity
    ``Gamma^2 - 4 Omega2 = 4 (I^2 - Delta^2)`` holds exactly.
    """
    gam = 2.0 * (2.0 * I - 1.0)
    om2 = Delta * Delta + (2.0 * I - 1.0) ** 2 - I * I
    return gam, om2


@dataclass(frozen=True)
class TurningPoints:
    """Fold locations of the S-shaped intensity response (present for Delta^2 < 1/3)."""

    I_plus: float
    I_minus: float
    F2_plus: float
    F2_minus: float


def turning_points(Delta):
    """Turning points ``I_pm = (2 +/- sqrt(1 - 3 Delta^2))/3`` or ``None``.

    Absent (returns ``None``) when ``Delta^2 > 1/3``; at ``Delta^2 = 1/3``
    the two folds coalesce at ``I = 2/3``.
    """
    d2 = Delta * Delta
    s2 = 1.0 - 3.0 * d2
    if s2 < 0.0:
        return None
    r = math.sqrt(s2)
    return TurningPoints(
        I_plus=(2.0 + r) / 3.0,
        I_minus=(2.0 - r) / 3.0,
        F2_plus=(2.0 / 27.0) * (2.0 + r) * (1.0 + 3.0 * d2 - r),
        F2_minus=(2.0 / 27.0) * (2.0 - r) * (1.0 + 3.0 * d2 + r),
    )


@dataclass(frozen=True)
class PhaseRegion:
    """Classification of a point in the (Delta^2, I) plane.

    Distances are measured vertically in ``I`` at fixed detuning;
    turning-point distances are ``nan`` where the folds do not exist.
    """

    label: str
    dist_tp_plus: float
    dist_tp_minus: float
    dist_hb: float
    dist_up: float


def classify(I, Delta):
    """Label a stationary intensity by stability and damping character.

    Stable states split into overdamped/underdamped phase relaxation at
    ``I^2 = Delta^2``; unstable states split into the static (fold) side,
    where the eigenvalues are real, and the Hopf side, where they form a
    complex pair with positive real part.
    """
    lam_p, lam_m = stability_eigenvalues(I, Delta)
    oscillatory = I * I < Delta * Delta
    stable = max(lam_p.real, lam_m.real) < 0.0
    if stable:
        label = STABLE_UNDERDAMPED if oscillatory else STABLE_OVERDAMPED
    else:
        label = UNSTABLE_HOPF_SIDE if oscillatory else UNSTABLE_STATIC
    tps = turning_points(Delta)
    return PhaseRegion(
        label=label,
        dist_tp_plus=abs(I - tps.I_plus) if tps else math.nan,
        dist_tp_minus=abs(I - tps.I_minus) if tps else math.nan,
        dist_hb=abs(I - 0.5),
        dist_up=abs(I - abs(Delta)),
    )


@dataclass(frozen=True)
class StationaryState:
    """A stationary intensity with its stability data.

    The stored phase follows the ``arg(1 - I^2 - i*Delta)`` labelling
    convention; :func:`fixed_point_amplitude` gives the complex amplitude
    that actually zeroes the drift.
    """

    intensity: float
    phase: float
    lam_plus: complex
    lam_minus: complex
    stable: bool
    damping: str


def stationary_state(I, Delta):
    """Bundle intensity, phase convention, eigenvalues and flags for one root."""
    lam_p, lam_m = stability_eigenvalues(I, Delta)
    phase = math.atan2(-Delta, 1.0 - I * I) % (2.0 * math.pi)
    return StationaryState(
        intensity=I,
        phase=phase,
        lam_plus=lam_p,
        lam_minus=lam_m,
        stable=max(lam_p.real, lam_m.real) < 0.0,
        damping="underdamped" if I * I < Delta * Delta else "overdamped",
    )


def fixed_point_amplitude(I, Delta, F):
    """Complex amplitude ``beta = F / (I - 1 - i*Delta)`` of a stationary root.

    Requires ``I`` to solve the intensity equation at this ``F``; then
    ``|beta|^2 = I`` and ``drift(beta) = 0``.  For ``F = 0`` the phase is
    free and ``sqrt(I)`` is returned.
    """
    denom = complex(I - 1.0, -Delta)
    if F == 0.0 or abs(denom) < 1e-12:
        return complex(math.sqrt(max(I, 0.0)), 0.0)
    return F / denom


# ---------------------------------------------------------------------------
# Limit-cycle construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LimitCycle:
    """A periodic orbit sampled on a uniform grid.

    ``samples[k]`` is ``beta(tau_k)`` at ``tau_k = k * period / ngrid``;
    ``derivatives`` holds the drift evaluated at the samples.  ``residual``
    is the closure gap ``|beta(period) - beta(0)|`` of the final
    integration.
    """

    period: float
    samples: np.ndarray
    derivatives: np.ndarray
    residual: float
    params: ModelParams

    @property
    def ngrid(self):
        return self.samples.shape[0]

    @property
    def tau(self):
        return np.arange(self.ngrid) * (self.period / self.ngrid)

    def mean_intensity(self):
        """Time-averaged ``|beta|^2`` over one period (uniform grid mean)."""
        return float(np.mean(np.abs(self.samples) ** 2))

    def amplitude(self):
        """Peak deviation of the orbit from its time average."""
        center = np.mean(self.samples)
        return float(np.max(np.abs(self.samples - center)))


def _advance(beta, h, n, F, D):
    """n fixed RK4 steps of the scalar classical flow (hot scalar loop)."""
    for _ in range(n):
        k1 = F + (1.0 + 1j * D - (beta.real * beta.real + beta.imag * beta.imag)) * beta
        y = beta + 0.5 * h * k1
        k2 = F + (1.0 + 1j * D - (y.real * y.real + y.imag * y.imag)) * y
        y = beta + 0.5 * h * k2
        k3 = F + (1.0 + 1j * D - (y.real * y.real + y.imag * y.imag)) * y
        y = beta + h * k3
        k4 = F + (1.0 + 1j * D - (y.real * y.real + y.imag * y.imag)) * y
        beta = beta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not (math.isfinite(beta.real) and math.isfinite(beta.imag)):
        raise DivergenceError("classical trajectory diverged")
    if abs(beta) > _DIVERGENCE_RADIUS:
        raise DivergenceError("classical trajectory left the trapping region")
    return beta


def _record(beta, h, n, F, D):
    """Integrate n steps recording every state (initial point included)."""
    out = np.empty(n + 1, dtype=np.complex128)
    out[0] = beta
    for k in range(n):
        b = out[k]
        k1 = F + (1.0 + 1j * D - (b.real * b.real + b.imag * b.imag)) * b
        y = b + 0.5 * h * k1
        k2 = F + (1.0 + 1j * D - (y.real * y.real + y.imag * y.imag)) * y
        y = b + 0.5 * h * k2
        k3 = F + (1.0 + 1j * D - (y.real * y.real + y.imag * y.imag)) * y
        y = b + h * k3
        k4 = F + (1.0 + 1j * D - (y.real * y.real + y.imag * y.imag)) * y
        out[k + 1] = b + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out.view(np.float64))):
        raise DivergenceError("classical trajectory diverged")
    return out


def _flow(beta0, T, nsteps, F, D):
    """End point of the flow over [0, T] with exactly nsteps RK4 steps.

    Keeping the step count fixed makes the map smooth in T, which the
    shooting Newton iteration relies on.
    """
    return _advance(beta0, T / nsteps, nsteps, F, D)


def _hermite_zero(t0, h, g0, g1, dg0, dg1):
    """Zero of the cubic Hermite interpolant of g on [t0, t0+h]."""
    s = g0 / (g0 - g1) if g0 != g1 else 0.5  # chord start
    for _ in range(8):
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        g = h00 * g0 + h10 * h * dg0 + h01 * g1 + h11 * h * dg1
        d = (
            6 * s * (s - 1) * (g0 - g1) / h
            + (3 * s * s - 4 * s + 1) * dg0
            + (3 * s * s - 2 * s) * dg1
        ) * h
        if d == 0.0:
            break
        step = g / d
        s = min(1.0, max(0.0, s - step))
        if abs(step) < 1e-14:
            break
    return t0 + s * h, s


def find_limit_cycle(
    params,
    *,
    ngrid=1024,
    substeps=4,
    transient=50.0,
    max_transient=400.0,
    initial=1e-3 + 0.0j,
    detect_dt=2e-3,
    detect_window=60.0,
    shoot_tol=1e-11,
    max_newton=40,
    min_amplitude=1e-8,
):
    """Locate the attracting periodic orbit of the classical flow.

    The flow is integrated past the transient from ``initial`` (a small
    perturbation off the origin by default), the period is detected from
    successive transversal crossings of the section
    ``Im beta = Im beta_ref`` (crossing direction fixed by the reference
    point's own velocity, nearest-to-reference crossings kept), crossing
    times are refined by cubic Hermite interpolation, and ``(beta(0), T)``
    are then polished by a damped Newton shooting iteration on the closure
    condition.  The orbit is finally resampled on a uniform ``ngrid`` grid.

    Raises
    ------
    NoLimitCycleError
        If the post-transient motion has amplitude below ``min_amplitude``
        (the flow reached a fixed point, or the cycle has shrunk to one).
    PeriodDetectionError
        If no reproducible period emerges within the transient budget, or
        the shooting iteration fails to converge.
    """
    F, D = params.F, params.Delta
    tr_dt = 1e-2
    beta = complex(initial)
    t_spent = 0.0
    window = detect_window
    crossings = None

    while True:
        beta = _advance(beta, tr_dt, int(round(transient / tr_dt)), F, D)
        t_spent += transient
        nwin = int(round(window / detect_dt))
        traj = _record(beta, detect_dt, nwin, F, D)
        beta = traj[-1]

        center = traj.mean()
        amp = float(np.max(np.abs(traj - center)))
        if amp < min_amplitude:
            raise NoLimitCycleError(
                f"post-transient motion amplitude {amp:.2e} < {min_amplitude:.0e}"
            )

        vel = params.F + (1.0 + 1j * D - np.abs(traj) ** 2) * traj
        # Reference point: needs a transversal (non-horizontal) crossing.
        ref_idx = int(np.argmax(np.abs(vel.imag)))
        ref = traj[ref_idx]
        direction = 1.0 if vel.imag[ref_idx] > 0 else -1.0
        g = (traj.imag - ref.imag) * direction
        dg = vel.imag * direction
        hits = np.flatnonzero((g[:-1] < 0.0) & (g[1:] >= 0.0))
        # Nearest-to-reference filter guards against extra intersections of
        # non-convex orbits with the section line.
        keep = [k for k in hits if abs(traj[k] - ref) < 0.35 * 2.0 * amp]
        if len(keep) >= 3:
            times, points = [], []
            for k in keep:
                t_star, s = _hermite_zero(k * detect_dt, detect_dt, g[k], g[k + 1], dg[k], dg[k + 1])
                # Hermite interpolation of the state at the crossing.
                h00 = (1 + 2 * s) * (1 - s) ** 2
                h10 = s * (1 - s) ** 2
                h01 = s * s * (3 - 2 * s)
                h11 = s * s * (s - 1)
                pt = (
                    h00 * traj[k]
                    + h10 * detect_dt * vel[k]
                    + h01 * traj[k + 1]
                    + h11 * detect_dt * vel[k + 1]
                )
                times.append(t_star)
                points.append(pt)
            periods = np.diff(times)
            t_est = float(np.median(periods))
            if t_est > 0 and (periods.max() - periods.min()) < 5e-3 * t_est:
                crossings = (points[-1], t_est)
                break
        if t_spent >= max_transient:
            raise PeriodDetectionError(
                f"no reproducible period within transient budget {max_transient}"
            )
        window = min(2.0 * window, 240.0)

    b_start, t_est = crossings
    anchor = b_start.imag
    nsteps = ngrid * substeps

    def closure(re0, T):
        b0 = complex(re0, anchor)
        r = _flow(b0, T, nsteps, F, D) - b0
        return np.array([r.real, r.imag])

    x = np.array([b_start.real, t_est])
    r = closure(*x)
    best = float(np.hypot(*r))
    for _ in range(max_newton):
        if best < shoot_tol:
            break
        jac = np.empty((2, 2))
        for j, dx in enumerate([1e-7 * max(1.0, abs(x[0])), 1e-7 * max(1.0, x[1])]):
            xp = x.copy()
            xp[j] += dx
            jac[:, j] = (closure(*xp) - r) / dx
        try:
            step = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            raise PeriodDetectionError("singular shooting Jacobian") from None
        lam, improved = 1.0, False
        for _ in range(10):
            xn = x - lam * step
            if xn[1] < 0.2 * t_est or xn[1] > 5.0 * t_est:
                lam *= 0.5
                continue
            rn = closure(*xn)
            if float(np.hypot(*rn)) < best:
                x, r, best = xn, rn, float(np.hypot(*rn))
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
    if best >= 1e-10:
        raise PeriodDetectionError(
            f"shooting stalled at closure residual {best:.2e} (target < 1e-10)"
        )

    b0 = complex(x[0], anchor)
    period = float(x[1])
    h = period / nsteps
    dense = _record(b0, h, nsteps, F, D)
    samples = dense[:-1:substeps].copy()
    residual = float(abs(dense[-1] - dense[0]))
    if samples.shape[0] != ngrid:
        raise PeriodDetectionError("grid assembly failed")  # pragma: no cover
    if float(np.max(np.abs(samples - samples.mean()))) < min_amplitude:
        raise NoLimitCycleError("converged orbit has vanishing amplitude")
    derivs = params.F + (1.0 + 1j * D - np.abs(samples) ** 2) * samples
    return LimitCycle(
        period=period,
        samples=samples,
        derivatives=derivs,
        residual=residual,
        params=params,
    )


def classical_attractor(params, **cycle_opts):
    """Identify the attractor reached from the default initial condition.

    Returns ``("cycle", LimitCycle)`` or ``("fixed-point", beta)``.
    """
    try:
        cyc = find_limit_cycle(params, **cycle_opts)
        return "cycle", cyc
    except NoLimitCycleError:
        beta = _advance(1e-3 + 0.0j, 1e-2, 8000, params.F, params.Delta)
        return "fixed-point", beta


# ---------------------------------------------------------------------------
# Bifurcation scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScanRow:
    """One drive strength of a bifurcation scan."""

    f2: float
    states: tuple
    cycle_mean_intensity: float | None = None
    cycle_period: float | None = None
    cycle_note: str | None = None
    extras: dict = field(default_factory=dict)


def bifurcation_scan(
    Delta,
    f2_max,
    resolution,
    *,
    gamma=0.1,
    f2_values=None,
    with_cycles=True,
    cycle_opts=None,
):
    """Sweep the drive strength and tabulate branches.

    For each ``F^2`` the stationary intensities are classified; where no
    stable stationary state exists (so the attractor must be a cycle) a
    limit-cycle search is attempted and its mean intensity recorded.
    Failed searches are recorded as absent, with a note.  In coexistence
    windows the scan reports the stationary branches only; the attractor
    chosen from the default initial condition is what
    :func:`classical_attractor` reports.
    """
    if f2_values is None:
        f2_values = np.linspace(0.0, f2_max, resolution)
    cycle_opts = dict(cycle_opts or {})
    rows = []
    for f2 in np.asarray(f2_values, dtype=float):
        F = math.sqrt(max(f2, 0.0))
        roots = stationary_intensities(F, Delta)
        states = tuple(stationary_state(I, Delta) for I in roots)
        mean_i = period = note = None
        if with_cycles and not any(s.stable for s in states):
            try:
                cyc = find_limit_cycle(ModelParams(F=F, Delta=Delta, gamma=gamma), **cycle_opts)
                mean_i, period = cyc.mean_intensity(), cyc.period
            except (NoLimitCycleError, PeriodDetectionError, DivergenceError) as exc:
                note = f"{type(exc).__name__}: {exc}"
        rows.append(
            ScanRow(
                f2=float(f2),
                states=states,
                cycle_mean_intensity=mean_i,
                cycle_period=period,
                cycle_note=note,
            )
        )
    return rows
