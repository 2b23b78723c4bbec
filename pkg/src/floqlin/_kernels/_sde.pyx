# cython: language_level=3
"""Compiled ensemble stepping kernels (hot inner loops).

Same contracts as ``fallback.py``; trajectories are advanced one step at
a time with scalar complex arithmetic.
"""

from libc.math cimport fmod, sqrt

NAME = "cython"


def pp_chunk(double complex[::1] b, double complex[::1] bp, double[::1] alive,
             double F, double Delta, double gamma, double dt, double radius2,
             double[:, :, ::1] noise):
    cdef Py_ssize_t nsteps = noise.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    cdef Py_ssize_t s, i
    cdef double cn = sqrt(gamma * dt)
    cdef double complex lp = 1.0 + 1j * Delta
    cdef double complex lm = 1.0 - 1j * Delta
    cdef double complex bi, bpi, prod, db, dbp
    cdef double eta, etap, u, v
    for s in range(nsteps):
        for i in range(m):
            if alive[i] == 0.0:
                continue
            bi = b[i]
            bpi = bp[i]
            eta = noise[s, 0, i]
            etap = noise[s, 1, i]
            u = noise[s, 2, i]
            v = noise[s, 3, i]
            prod = bpi * bi
            db = dt * (F + (lp - prod) * bi) + cn * ((u + 1j * v) + 1j * bi * eta)
            dbp = dt * (F + (lm - prod) * bpi) + cn * ((u - 1j * v) - 1j * bpi * etap)
            bi = bi + db
            bpi = bpi + dbp
            b[i] = bi
            bp[i] = bpi
            if (bi.real * bi.real + bi.imag * bi.imag > radius2 or
                    bpi.real * bpi.real + bpi.imag * bpi.imag > radius2):
                alive[i] = 0.0


cdef inline double complex _interp(double complex[::1] table, double x) noexcept:
    cdef Py_ssize_t i0 = <Py_ssize_t> x
    cdef double frac = x - i0
    return table[i0] * (1.0 - frac) + table[i0 + 1] * frac


def theta_c1_chunk(double[::1] theta, double complex[::1] c1,
                   double tau0, double dt, double gamma, double complex mu1,
                   double period,
                   double complex[::1] beta_tab,
                   double complex[::1] q0a, double complex[::1] q0b,
                   double complex[::1] q1a, double complex[::1] q1b,
                   double[:, :, ::1] noise, double[::1] accum):
    cdef Py_ssize_t nsteps = noise.shape[0]
    cdef Py_ssize_t m = theta.shape[0]
    cdef Py_ssize_t n = beta_tab.shape[0] - 1
    cdef Py_ssize_t s, i
    cdef double cn = sqrt(gamma * dt)
    cdef double scale = n / period
    cdef double tau, x, xc, eta, etap, u, v, d_re, d_im, s_re, s_im
    cdef double complex b_c, r0_c, r1_c, b_t, r0, r1, xi, a, bc
    s_re = 0.0
    s_im = 0.0
    for s in range(nsteps):
        tau = tau0 + s * dt
        xc = fmod(tau, period) * scale
        if xc >= n:
            xc -= n
        b_c = _interp(beta_tab, xc)
        r0_c = _interp(q1a, xc)
        r1_c = _interp(q1b, xc)
        for i in range(m):
            eta = noise[s, 0, i]
            etap = noise[s, 1, i]
            u = noise[s, 2, i]
            v = noise[s, 3, i]
            x = fmod(tau + theta[i], period)
            if x < 0.0:
                x += period
            x = x * scale
            if x >= n:
                x -= n
            b_t = _interp(beta_tab, x)
            r0 = _interp(q0a, x)
            r1 = _interp(q0b, x)
            xi = u + 1j * v
            a = (r0 * xi + r1 * xi.conjugate()
                 + 1j * (r0 * b_t * eta - r1 * b_t.conjugate() * etap))
            d_re = cn * a.real
            d_im = cn * a.imag
            s_re += d_re * d_re
            s_im += d_im * d_im
            theta[i] += d_re
            bc = (r0_c * xi + r1_c * xi.conjugate()
                  + 1j * (r0_c * b_c * eta - r1_c * b_c.conjugate() * etap))
            c1[i] = c1[i] + dt * mu1 * c1[i] + cn * bc
    accum[0] += s_re
    accum[1] += s_im
