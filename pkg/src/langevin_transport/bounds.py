"""Closed-form Hessian profiles and Lipschitz constants for Langevin transport maps.

Each ``theta_*`` is an upper bound on the Hessian of ``log P_t exp(-W)``;
integrating it over ``t`` in ``(0, inf)`` and exponentiating gives a Lipschitz
constant for the transport map.  The ``ell_profile`` functions are the
matching lower-bound profiles used for the inverse map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import ndtri

__all__ = [
    "BoundsError",
    "EuclideanParams",
    "ManifoldParams",
    "SphereParams",
    "ell_profile",
    "gaussian_isoperimetric_profile",
    "integrate_profile",
    "inverse_lip_const",
    "lip_const_euclidean",
    "lip_const_manifold",
    "lip_const_sphere",
    "sharpness_lower_bound",
    "theta_euclidean",
    "theta_manifold",
    "theta_sphere",
]

SQRT_PI = math.sqrt(math.pi)


class BoundsError(ValueError):
    pass


@dataclass(frozen=True)
class EuclideanParams:
    kappa: float
    K: float = 0.0
    L: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise BoundsError("kappa must be positive")
        if self.K < 0 or self.L < 0:
            raise BoundsError("K and L must be nonnegative")


@dataclass(frozen=True)
class SphereParams:
    n: int
    L: float = 0.0

    def __post_init__(self):
        if self.n < 3:
            raise BoundsError("the sphere results need n >= 3")
        if self.L < 0:
            raise BoundsError("L must be nonnegative")

    @property
    def rate(self) -> float:
        return float(self.n - 2)


@dataclass(frozen=True)
class ManifoldParams:
    kappa: float
    L: float = 0.0
    riem_inf: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        vals = (self.kappa, self.L, self.riem_inf, self.beta)
        if not all(math.isfinite(v) for v in vals):
            raise BoundsError("manifold parameters must be finite")
        if not self.kappa > 0:
            raise BoundsError("kappa must be positive")
        if min(self.L, self.riem_inf, self.beta) < 0:
            raise BoundsError("L, riem_inf and beta must be nonnegative")


def _exp(x: float) -> float:
    """``exp`` that saturates to ``inf``; a constant that large is still a valid (vacuous) bound."""
    return math.exp(x) if x < 709.0 else math.inf


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise BoundsError("profiles are defined for t > 0")
    return t


def theta_euclidean(t, p: EuclideanParams):
    """``L e^{-kappa t} (5L + 5/sqrt(t) + K t / 2)``."""
    t = _check_t(t)
    return p.L * np.exp(-p.kappa * t) * (5.0 * p.L + 5.0 / np.sqrt(t) + 0.5 * p.K * t)


def lip_const_euclidean(p: EuclideanParams) -> tuple[float, float]:
    """Return ``(tight, stated)`` Lipschitz constants of the Euclidean map."""
    k, K, L = p.kappa, p.K, p.L
    tight = _exp(5 * L**2 / k + 5 * SQRT_PI * L / math.sqrt(k) + L * K / (2 * k**2))
    stated = _exp(10 * (L / math.sqrt(k) + L**2 / k + L * K / k**2))
    return tight, stated


def theta_sphere(t, p: SphereParams, prefactor: float = 12.0):
    """``c (L + L^2/sqrt(n-2)) e^{-(n-2)t} (1/sqrt(t) + 1)`` with ``c = 12`` by default."""
    t = _check_t(t)
    r = p.rate
    return prefactor * (p.L + p.L**2 / math.sqrt(r)) * np.exp(-r * t) * (1.0 / np.sqrt(t) + 1.0)


def lip_const_sphere(p: SphereParams) -> tuple[float, float]:
    """Return ``(tight, stated)``; ``tight <= stated`` once ``12 (1/sqrt(n-2) + sqrt(pi)) <= 35``."""
    r = p.rate
    a = p.L / math.sqrt(r) + p.L**2 / r
    tight = _exp(12 * a * (1 / math.sqrt(r) + SQRT_PI))
    stated = _exp(35 * a)
    return tight, stated


def theta_manifold(t, p: ManifoldParams, variant: str = "proof", frozen_exponent: bool = False):
    """Hessian profile for a weighted manifold.

    ``variant="proof"`` uses ``sqrt(kappa)/sqrt(e^{2 kappa t} - 1)`` and
    ``variant="statement"`` uses ``sqrt(kappa)/sqrt(e^{kappa t} - 1)``; the two
    disagree in the source and both are kept.  ``frozen_exponent`` replaces
    ``L^2 (1 - e^{-2 kappa t}) / (2 kappa)`` by its supremum ``L^2 / (2 kappa)``,
    which is the majorant whose integral gives :func:`lip_const_manifold`.
    """
    t = _check_t(t)
    k, L = p.kappa, p.L
    if variant == "proof":
        # sqrt(k) / sqrt(e^{2kt} - 1), written to avoid overflow
        sing = math.sqrt(k) * np.exp(-k * t) / np.sqrt(-np.expm1(-2 * k * t))
    elif variant == "statement":
        sing = math.sqrt(k) * np.exp(-0.5 * k * t) / np.sqrt(-np.expm1(-k * t))
    else:
        raise BoundsError(f"unknown variant {variant!r}")
    if frozen_exponent:
        expo = L**2 / (2 * k) + 0 * t
    else:
        expo = L**2 * (-np.expm1(-2 * k * t)) / (2 * k)
    return np.exp(-k * t) * L * ((sing + p.riem_inf / math.sqrt(k)) * np.exp(expo) + p.beta / k)


def lip_const_manifold(p: ManifoldParams) -> float:
    k, L = p.kappa, p.L
    g = _exp(L**2 / (2 * k))
    return _exp(L * (g / math.sqrt(k) + g * p.riem_inf / k**1.5 + p.beta / k**2))


def ell_profile(t, setting: str, params, sphere_prefactor: float = 12.0, variant: str = "proof"):
    """Lower-bound profile ``theta(t) + L^2 e^{-2 kappa t}`` for the inverse map.

    ``sphere_prefactor`` selects the constant in front of the sphere profile;
    12 is the value proved for the Hessian, while 35 and 45 also occur in the
    inverse-map argument.
    """
    if setting == "euclidean":
        base, rate = theta_euclidean(t, params), params.kappa
    elif setting == "sphere":
        base, rate = theta_sphere(t, params, prefactor=sphere_prefactor), params.rate
    elif setting == "manifold":
        base, rate = theta_manifold(t, params, variant=variant), params.kappa
    else:
        raise BoundsError(f"unknown setting {setting!r}")
    return base + params.L**2 * np.exp(-2 * rate * np.asarray(t, dtype=float))


def inverse_lip_const(setting: str, params) -> float:
    """Lipschitz constant of the inverse map ``S`` as stated for each setting."""
    L = params.L
    if setting == "euclidean":
        k, K = params.kappa, params.K
        return _exp(21 * L**2 / (2 * k) + 5 * SQRT_PI * L / math.sqrt(k) + L * K / (2 * k**2))
    if setting == "sphere":
        r = params.rate
        return _exp(35 * L / math.sqrt(r) + 35.5 * L**2 / r)
    if setting == "manifold":
        return lip_const_manifold(params) * _exp(L**2 / (2 * params.kappa))
    raise BoundsError(f"unknown setting {setting!r}")


def integrate_profile(fn, tol: float = 1e-12) -> float:
    """``int_0^inf fn(t) dt`` for a profile with at most a ``t^{-1/2}`` singularity at 0.

    The substitution ``t = s^2`` makes the integrand bounded near 0.
    """
    val, err = integrate.quad(lambda s: float(fn(s * s)) * 2 * s if s > 0 else 0.0, 0, np.inf,
                              epsabs=0.0, epsrel=tol, limit=1000)
    return val


def gaussian_isoperimetric_profile(p):
    """``I(p) = phi(Phi^{-1}(p))`` for the standard normal density ``phi``."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise BoundsError("the isoperimetric profile is defined on (0, 1)")
    z = ndtri(p)
    out = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return out if out.ndim else float(out)


def sharpness_lower_bound(L: float) -> float:
    """Any Lipschitz map from N(0,1) onto ``exp(-L|x|) N(0,1)`` has constant >= ``e^{L^2/2}``."""
    if L < 0:
        raise BoundsError("L must be nonnegative")
    return _exp(L**2 / 2)
