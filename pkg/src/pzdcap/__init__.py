"""Capacity of the per-sample zero-dispersion optical fiber channel.

Library layout:

- specfun: scaled Bessel functions, Laguerre L_{1/2}
- channel: conditional density series, coefficients, truncation, bounds
- constellation: ring constellations, cost functions, constraint sets
- infomath: quadrature grids, entropies, mutual information
- optimizer: capacity solver and optimality certificates
- montecarlo: exact channel sampling and simulation-based validation
- audit: runtime checks of every analytic bound used above
- cli: command-line front end
"""

__version__ = "0.1.0"
