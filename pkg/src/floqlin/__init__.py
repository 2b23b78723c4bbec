"""Linearized quantum fluctuations around classical limit cycles.

Subpackages
-----------
numerics
    RK4 stepping, 2x2 complex eigen-machinery, Laguerre polynomials,
    seeded Gaussian streams.
classical
    Driven Van der Pol fixed points, phase diagram, limit-cycle search.
floquet
    Stability matrix, fundamental matrix, monodromy and Floquet modes.
fluctuations
    Phase diffusion, periodic variance kernel, Gaussian snapshots and the
    mixture phase-space distribution.
fock_oracle
    Exact master-equation steady state and Wigner reconstruction in a
    truncated number basis.
positive_p
    Stochastic ensemble integration of the doubled-phase-space Langevin
    equations and the projected scalar fluctuation equations.
cli
    Batch command-line front end.
"""

__version__ = "0.1.0"

from . import errors  # noqa: F401
