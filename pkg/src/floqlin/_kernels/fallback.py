"""Pure-numpy ensemble stepping kernels (fallback backend).

Vectorized over trajectories; consumes pre-drawn standard normals laid
out as ``noise[step, component, trajectory]`` with components
``(eta, eta_plus, Re xi, Im xi)``.  Mirrors the compiled backend in
``_sde.pyx`` operation-for-operation.
"""

import math

import numpy as np

NAME = "numpy"


def pp_chunk(b, bp, alive, F, Delta, gamma, dt, radius2, noise):
    """Advance the doubled-amplitude ensemble through one noise chunk.

    ``b``, ``bp`` and ``alive`` (1.0 while a trajectory is active) are
    updated in place; trajectories beyond the divergence radius freeze.
    """
    cn = math.sqrt(gamma * dt)
    lp = 1.0 + 1j * Delta
    lm = 1.0 - 1j * Delta
    for s in range(noise.shape[0]):
        eta = noise[s, 0]
        etap = noise[s, 1]
        u = noise[s, 2]
        v = noise[s, 3]
        prod = bp * b
        db = dt * (F + (lp - prod) * b) + cn * ((u + 1j * v) + 1j * b * eta)
        dbp = dt * (F + (lm - prod) * bp) + cn * ((u - 1j * v) - 1j * bp * etap)
        b += db * alive
        bp += dbp * alive
        bad = (b.real * b.real + b.imag * b.imag > radius2) | (
            bp.real * bp.real + bp.imag * bp.imag > radius2
        )
        if bad.any():
            alive[bad] = 0.0


def _interp(table, x):
    """Linear interpolation on a wrapped table (len N+1) at grid coordinate x."""
    i0 = x.astype(np.int64) if isinstance(x, np.ndarray) else int(x)
    frac = x - i0
    return table[i0] * (1.0 - frac) + table[i0 + 1] * frac


def theta_c1_chunk(theta, c1, tau0, dt, gamma, mu1, period, beta_tab, q0a, q0b, q1a, q1b, noise, accum):
    """Advance the projected scalar fluctuation ensemble through one chunk.

    ``theta`` (real cycle offsets) and ``c1`` (complex transverse
    amplitudes) are updated in place.  The offset equation projects the
    noise with the tangent-normalized left Goldstone mode evaluated at the
    trajectory's own shifted phase; the transverse equation uses the
    unshifted phase.  ``accum`` collects the summed squared real and
    imaginary parts of the offset increments (imaginary-contamination
    diagnostic).
    """
    n = beta_tab.shape[0] - 1
    cn = math.sqrt(gamma * dt)
    scale = n / period
    for s in range(noise.shape[0]):
        tau = tau0 + s * dt
        eta = noise[s, 0]
        etap = noise[s, 1]
        u = noise[s, 2]
        v = noise[s, 3]
        xc = (tau % period) * scale
        if xc >= n:
            xc -= n
        b_c = _interp(beta_tab, xc)
        r0_c = _interp(q1a, xc)
        r1_c = _interp(q1b, xc)
        x = ((tau + theta) % period) * scale
        np.subtract(x, n, out=x, where=x >= n)
        b_t = _interp(beta_tab, x)
        r0 = _interp(q0a, x)
        r1 = _interp(q0b, x)
        xi = u + 1j * v
        a = r0 * xi + r1 * np.conj(xi) + 1j * (r0 * b_t * eta - r1 * np.conj(b_t) * etap)
        d_re = cn * a.real
        d_im = cn * a.imag
        accum[0] += float(np.sum(d_re * d_re))
        accum[1] += float(np.sum(d_im * d_im))
        theta += d_re
        bc = r0_c * xi + r1_c * np.conj(xi) + 1j * (r0_c * b_c * eta - r1_c * np.conj(b_c) * etap)
        c1 += dt * mu1 * c1 + cn * bc
