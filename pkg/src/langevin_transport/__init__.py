"""Langevin transport maps between a log-concave measure and its log-Lipschitz perturbation.

Modules
-------
geometry    Euclidean space and the round sphere: exp/log maps, parallel transport.
measures    Source potentials, perturbations and exact samplers.
semigroup   Path simulation and Monte Carlo estimators of P_t exp(-W) and its log-derivatives.
flow        The transport flow, its Jacobian, and Lipschitz / pushforward diagnostics.
bounds      Closed-form Hessian profiles and Lipschitz constants.
oracle      Quadrature and spectral reference values.
"""

from . import bounds, flow, geometry, measures, oracle, rng, semigroup
from .geometry import Space, euclidean, sphere

__all__ = ["Space", "bounds", "euclidean", "flow", "geometry", "measures", "oracle", "rng", "semigroup",
           "sphere"]
