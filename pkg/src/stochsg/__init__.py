"""Perturbative machinery for the stochastic sine-Gordon equation in 1+1D.

Subpackages:

- :mod:`stochsg.kernels`   propagator kernels and the noise covariance Q
- :mod:`stochsg.algebra`   exact symbolic vertex-generator engine
- :mod:`stochsg.quad`      randomized lattice-rule quadrature
- :mod:`stochsg.series`    numeric perturbative coefficients
- :mod:`stochsg.bounds`    convergence-bound constants and checks
- :mod:`stochsg.spde_mc`   lattice Monte Carlo oracle
- :mod:`stochsg.cli`       batch front-end
"""

__version__ = "0.1.0"
