import math

import numpy as np
import pytest

from floqlin._kernels import available_backends, backend_name
from floqlin.numerics import gaussian_stream

BACKENDS = available_backends()

needs_both = pytest.mark.skipif(
    "cython" not in BACKENDS, reason="compiled kernels not built"
)


def test_backend_selected():
    assert backend_name() in BACKENDS


@needs_both
def test_pp_chunk_backend_agreement():
    m, steps = 512, 64
    noise = gaussian_stream(77).standard_normal((steps, 4, m))
    init_b = gaussian_stream(1).standard_normal(m) + 1j * gaussian_stream(2).standard_normal(m)
    results = {}
    for name, impl in BACKENDS.items():
        b = init_b.astype(np.complex128).copy()
        bp = np.conj(init_b).astype(np.complex128).copy()
        alive = np.ones(m)
        impl.pp_chunk(b, bp, alive, 0.3, 0.6, 0.1, 1e-3, 1e12, noise)
        results[name] = (b, bp, alive)
    b_c, bp_c, al_c = results["cython"]
    b_n, bp_n, al_n = results["numpy"]
    assert np.allclose(b_c, b_n, rtol=1e-12, atol=1e-14)
    assert np.allclose(bp_c, bp_n, rtol=1e-12, atol=1e-14)
    assert np.array_equal(al_c, al_n)


@needs_both
def test_theta_chunk_backend_agreement():
    m, steps, n = 256, 48, 64
    period = 7.3
    rng = np.random.default_rng(11)

    def table():
        v = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
        v[-1] = v[0]
        return np.ascontiguousarray(v)

    beta_tab, q0a, q0b, q1a, q1b = (table() for _ in range(5))
    noise = gaussian_stream(42).standard_normal((steps, 4, m))
    results = {}
    for name, impl in BACKENDS.items():
        theta = np.linspace(-1.0, 1.0, m).copy()
        c1 = np.zeros(m, dtype=np.complex128)
        accum = np.zeros(2)
        impl.theta_c1_chunk(
            theta, c1, 0.4, 1e-3, 0.1, -1.9 + 0.0j, period,
            beta_tab, q0a, q0b, q1a, q1b, noise, accum,
        )
        results[name] = (theta, c1, accum)
    th_c, c1_c, ac_c = results["cython"]
    th_n, c1_n, ac_n = results["numpy"]
    assert np.allclose(th_c, th_n, rtol=1e-12, atol=1e-14)
    assert np.allclose(c1_c, c1_n, rtol=1e-12, atol=1e-14)
    assert np.allclose(ac_c, ac_n, rtol=1e-10)


def test_divergent_trajectories_freeze():
    for impl in BACKENDS.values():
        b = np.array([10.0 + 0.0j, 0.1 + 0.0j])
        bp = np.conj(b).copy()
        alive = np.ones(2)
        noise = np.zeros((3, 4, 2))
        impl.pp_chunk(b, bp, alive, 0.0, 0.0, 0.1, 1e-2, 25.0, noise)
        assert alive.tolist() == [0.0, 1.0]
        frozen = b[0]
        impl.pp_chunk(b, bp, alive, 0.0, 0.0, 0.1, 1e-2, 25.0, noise)
        assert b[0] == frozen  # no further motion once flagged
        assert b[1] != 0.1  # the live one keeps evolving
