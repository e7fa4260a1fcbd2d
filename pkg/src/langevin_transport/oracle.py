"""Deterministic reference computations.

* One-dimensional Ornstein-Uhlenbeck semigroup ``P_t f(x) = E f(e^{-kappa t} x + sigma_t Z)``
  evaluated by composite Gauss-Legendre quadrature in the standard-normal
  variable ``Z``.  Panels are split at kinks of ``W`` and graded geometrically
  around them, so both smooth and piecewise-smooth perturbations converge to
  near machine precision.
* The exact monotone (quantile) map between ``mu = N(0, 1/kappa)`` and ``nu``.
* Heat semigroup on the round two-sphere for axisymmetric ``W = a x_3``,
  expanded in Legendre polynomials with eigenvalues ``l (l + 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import integrate
from scipy.special import ndtr, spherical_in

from .bounds import gaussian_isoperimetric_profile
from .measures import AbsValue, Linear, SmoothedAbs, Zero

__all__ = [
    "OracleError",
    "NuCDF",
    "OUQuadrature",
    "adaptive_Pt",
    "spectral_hess_log",
    "spectral_Pt_sphere",
    "SphereSpectral",
    "gauss_expectation",
    "isoperimetry_check",
    "monotone_map",
    "nu_cdf",
    "nu_density",
    "quad_grad_log_Pt",
    "quad_hess_log_Pt",
    "quad_Pt",
    "reverse_holder_margin",
    "sphere_axis_cdf",
    "sphere_reverse_holder_margin",
]

_GL_NODES, _GL_WEIGHTS = npleg.leggauss(16)
_Z_RANGE = 13.0


class OracleError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Gaussian expectations with kink-aware panels


def _breakpoints(centers, scale, zmax, n_uniform):
    """Per-row sorted panel edges in z.

    ``centers`` has shape (nx, nk): kink locations in z.  Around each kink the
    edges ``c +- scale * 2^j`` are added until they exceed one unit.
    """
    nx = centers.shape[0]
    uniform = np.linspace(-zmax, zmax, n_uniform)
    edges = [np.broadcast_to(uniform, (nx, n_uniform))]
    if centers.shape[1]:
        cz = np.clip(centers, -zmax, zmax)
        edges.append(cz)
        if scale is not None and scale < 1.0:
            steps = scale * 2.0 ** np.arange(0, int(math.ceil(math.log2(1.0 / scale))) + 1)
            for c in cz.T:
                edges.append(np.clip(c[:, None] + steps, -zmax, zmax))
                edges.append(np.clip(c[:, None] - steps, -zmax, zmax))
    return np.sort(np.concatenate(edges, axis=1), axis=1)


def gauss_expectation(g, m, sigma, kinks=(), eps=None, upper=None, lower=None, zmax=None):
    """``E[g(m + sigma Z)]`` for a standard normal ``Z``, vectorized over ``m``.

    Parameters
    ----------
    g : callable
        Maps an array of ``y`` values to an array of the same shape, or to a
        tuple of such arrays (several integrands share the nodes).
    m : array_like
        Means.
    sigma : float
        Common standard deviation; must be positive.
    kinks : sequence of float
        Locations in ``y`` where ``g`` is not smooth.
    eps : float, optional
        Width of a smoothed kink; panels are graded down to ``eps / sigma``.
    upper, lower : array_like, optional
        Restrict the integral to ``y <= upper`` (resp. ``y >= lower``).
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if sigma <= 0:
        raise OracleError("sigma must be positive")
    zmax = _Z_RANGE if zmax is None else zmax
    cols = [(k - m) / sigma for k in kinks]
    if upper is not None:
        cols.append((np.broadcast_to(upper, m.shape) - m) / sigma)
    if lower is not None:
        cols.append((np.broadcast_to(lower, m.shape) - m) / sigma)
    centers = np.stack(cols, axis=1) if cols else np.empty((len(m), 0))
    scale = None if eps is None else eps / sigma
    n_uniform = int(2 * zmax) + 1
    edges = _breakpoints(centers, scale, zmax, n_uniform)
    a, b = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (b - a)
    z = (0.5 * (a + b))[..., None] + half[..., None] * _GL_NODES
    w = half[..., None] * _GL_WEIGHTS * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    if upper is not None:
        zu = ((np.broadcast_to(upper, m.shape) - m) / sigma)[:, None, None]
        w = np.where(z <= zu, w, 0.0)
    if lower is not None:
        zl = ((np.broadcast_to(lower, m.shape) - m) / sigma)[:, None, None]
        w = np.where(z >= zl, w, 0.0)
    vals = g(m[:, None, None] + sigma * z)
    if isinstance(vals, tuple):
        return tuple(np.sum(v * w, axis=(1, 2)) for v in vals)
    return np.sum(vals * w, axis=(1, 2))


# --------------------------------------------------------------------------
# one-dimensional OU semigroup


def _density_derivs(w, y):
    """``f = exp(-W)``, ``f'`` and the absolutely continuous part of ``f''``."""
    if isinstance(w, Zero):
        one = np.ones_like(y)
        return one, 0 * y, 0 * y
    if isinstance(w, Linear):
        ell = w.ell[0]
        f = np.exp(-ell * y)
        return f, -ell * f, ell * ell * f
    if isinstance(w, SmoothedAbs):
        c = w.coef
        r = np.sqrt(y * y + w.eps**2)
        f = np.exp(-c * (r - w.eps))
        w1 = c * y / r
        w2 = c * w.eps**2 / r**3
        return f, -w1 * f, (w1 * w1 - w2) * f
    if isinstance(w, AbsValue):
        f = np.exp(-w.coef * np.abs(y))
        return f, -w.coef * np.sign(y) * f, w.L**2 * f
    raise OracleError(f"no 1D oracle for {type(w).__name__}")


def _point_masses(w):
    """Dirac parts of ``f''``: ``(location, mass)`` pairs."""
    if isinstance(w, AbsValue):
        return [(0.0, -2.0 * w.coef)]
    return []


@dataclass(frozen=True)
class OUQuadrature:
    """``P_t exp(-W)`` and its first two x-derivatives for ``V = kappa x^2 / 2`` in 1D.

    ``form="direct"`` integrates the x-differentiated integrand
    ``a f'(m + sigma z)`` and ``a^2 f''``; ``form="score"`` moves the
    derivatives onto the Gaussian kernel (weights ``z / sigma`` and
    ``(z^2 - 1) / sigma^2``).  The two are independent routes to the same numbers.
    """

    w: object
    kappa: float = 1.0
    form: str = "direct"

    def _scale(self, t):
        a = math.exp(-self.kappa * t)
        sigma = math.sqrt(-math.expm1(-2.0 * self.kappa * t) / self.kappa)
        return a, sigma

    def moments(self, x, t):
        """Return ``(P, P', P'')`` of ``P_t exp(-W)`` at ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if t < 0:
            raise OracleError("t must be nonnegative")
        a, sigma = self._scale(t)
        if sigma == 0.0:
            f, f1, f2 = _density_derivs(self.w, x)
            return f, f1, f2
        m = a * x
        eps = getattr(self.w, "eps", None)
        kinks = tuple(self.w.kinks)
        if self.form == "score":
            def g(y):
                f = _density_derivs(self.w, y)[0]
                z = (y - m[:, None, None]) / sigma
                return f, f * z, f * (z * z - 1.0)

            P, S1, S2 = gauss_expectation(g, m, sigma, kinks, eps)
            return P, a / sigma * S1, (a / sigma) ** 2 * S2
        if self.form != "direct":
            raise OracleError(f"unknown form {self.form!r}")
        P, D1, D2 = gauss_expectation(lambda y: _density_derivs(self.w, y), m, sigma, kinks, eps)
        for loc, mass in _point_masses(self.w):
            z0 = (loc - m) / sigma
            D2 = D2 + mass * np.exp(-0.5 * z0 * z0) / (math.sqrt(2 * math.pi) * sigma)
        return P, a * D1, a * a * D2

    def Pt(self, x, t):
        return self.moments(x, t)[0]

    def grad_log(self, x, t):
        P, P1, _ = self.moments(x, t)
        return P1 / P

    def hess_log(self, x, t):
        P, P1, P2 = self.moments(x, t)
        return P2 / P - (P1 / P) ** 2

    def Pt_of(self, g, x, t, kinks=(), eps=None):
        """``P_t g(x)`` for an arbitrary vectorized function ``g``."""
        a, sigma = self._scale(t)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if sigma == 0.0:
            return g(x)
        return gauss_expectation(g, a * x, sigma, kinks, eps)


def quad_Pt(w, kappa, x, t):
    return OUQuadrature(w, kappa).Pt(x, t)


def quad_grad_log_Pt(w, kappa, x, t):
    return OUQuadrature(w, kappa).grad_log(x, t)


def quad_hess_log_Pt(w, kappa, x, t):
    if t <= 0:
        raise OracleError("the Hessian oracle needs t > 0")
    return OUQuadrature(w, kappa).hess_log(x, t)


def reverse_holder_margin(w, kappa, x, t):
    """``exp(L^2 (1 - e^{-2 kappa t}) / kappa) (P_t f)^2 - P_t(f^2)`` with ``f = exp(-W)``."""
    q = OUQuadrature(w, kappa)
    Pf = q.Pt(x, t)
    Pf2 = q.Pt_of(lambda y: _density_derivs(w, y)[0] ** 2, x, t, w.kinks, getattr(w, "eps", None))
    factor = math.exp(w.L**2 * (-math.expm1(-2 * kappa * t)) / kappa)
    return factor * Pf**2 - Pf2, Pf2, Pf


# --------------------------------------------------------------------------
# exact monotone map in 1D


def _lipschitz(w) -> float:
    return float(getattr(w, "L", 0.0))


class NuCDF:
    """Tabulated CDF of ``nu = exp(-W) N(0, 1/kappa)``.

    Panel integrals of the unnormalized density are accumulated from both
    ends, so lower and upper tail probabilities both keep full relative
    precision.  Evaluation between table edges adds one Gauss-Legendre panel.
    """

    def __init__(self, w, kappa: float = 1.0, h: float = 0.05):
        self.w, self.kappa = w, float(kappa)
        sd = 1.0 / math.sqrt(kappa)
        lo = -(_lipschitz(w) / kappa + 14.0 * sd)
        edges = [np.arange(lo, -lo + h * sd, h * sd)]
        eps = getattr(w, "eps", None)
        for k in w.kinks:
            edges.append([k])
            if eps is not None:
                steps = eps * 2.0 ** np.arange(0, int(math.ceil(math.log2(h * sd / eps))) + 1)
                edges.extend([k + steps, k - steps])
        e = np.unique(np.concatenate([np.atleast_1d(np.asarray(v, dtype=float)) for v in edges]))
        self.edges = e[(e >= lo) & (e <= -lo)]
        pieces = self._panel(self.edges[:-1], self.edges[1:])
        self.cum_lo = np.concatenate([[0.0], np.cumsum(pieces)])
        self.cum_hi = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
        self.Z = self.cum_lo[-1]

    def unnormalized(self, y):
        y = np.asarray(y, dtype=float)
        return _density_derivs(self.w, y)[0] * np.exp(-0.5 * self.kappa * y * y) * math.sqrt(
            self.kappa / (2 * math.pi)
        )

    def _panel(self, a, b):
        half = 0.5 * (b - a)
        y = (0.5 * (a + b))[..., None] + half[..., None] * _GL_NODES
        return np.sum(half[..., None] * _GL_WEIGHTS * self.unnormalized(y), axis=-1)

    def density(self, y):
        return self.unnormalized(y) / self.Z

    def tails(self, y):
        """``(F(y), 1 - F(y))``."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        yc = np.clip(y, self.edges[0], self.edges[-1])
        k = np.clip(np.searchsorted(self.edges, yc, side="right") - 1, 0, len(self.edges) - 2)
        left, right = self.edges[k], self.edges[k + 1]
        lo = self.cum_lo[k] + self._panel(left, yc)
        hi = self.cum_hi[k + 1] + self._panel(yc, right)
        return lo / self.Z, hi / self.Z


def nu_density(w, kappa, y):
    """Normalized density of ``nu = exp(-W) N(0, 1/kappa)``."""
    return NuCDF(w, kappa).density(y)


def nu_cdf(w, kappa, y):
    """CDF of ``nu``; returns ``(F, 1 - F)`` each computed without cancellation."""
    return NuCDF(w, kappa).tails(y)


def monotone_map(w, kappa, x, tol=1e-12, max_iter=100, cdf: NuCDF | None = None):
    """Increasing rearrangement ``T = F_nu^{-1} o F_mu`` and its derivative ``f_mu(x) / f_nu(T(x))``.

    Solved by Newton iteration safeguarded by a bisection bracket, vectorized
    over ``x``.  Lower or upper tail probabilities are matched depending on the
    side of the median, to keep precision in both tails.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(w, Zero):
        return x.copy(), np.ones_like(x)
    cdf = NuCDF(w, kappa) if cdf is None else cdf
    s = math.sqrt(kappa)
    p_lo, p_hi = ndtr(s * x), ndtr(-s * x)
    use_hi = p_hi < p_lo
    target = np.where(use_hi, p_hi, p_lo)

    def resid(y):
        lo, hi = cdf.tails(y)
        return np.where(use_hi, target - hi, lo - target)

    width = 2.0 * _lipschitz(w) / kappa + 1.0
    a, b = x - width, x + width
    for _ in range(60):
        bad_a, bad_b = resid(a) > 0, resid(b) < 0
        if not (bad_a.any() or bad_b.any()):
            break
        a = np.where(bad_a, a - width, a)
        b = np.where(bad_b, b + width, b)
        width *= 2
    else:
        raise OracleError("failed to bracket the monotone map")
    y = np.clip(x, a, b)
    for _ in range(max_iter):
        r = resid(y)
        a = np.where(r < 0, y, a)
        b = np.where(r > 0, y, b)
        dens = cdf.density(y)
        step = r / np.where(dens > 0, dens, np.inf)
        y_new = y - step
        outside = ~((y_new > a) & (y_new < b)) | (dens <= 0)
        y_new = np.where(outside & (r != 0), 0.5 * (a + b), y_new)
        done = (np.abs(y_new - y) <= tol * (1.0 + np.abs(y))) | (r == 0)
        y = y_new
        if done.all():
            break
    else:
        raise OracleError("monotone map root finding did not converge")
    f_mu = s / math.sqrt(2 * math.pi) * np.exp(-0.5 * kappa * x * x)
    return y, f_mu / cdf.density(y)


def isoperimetry_check(w, kappa, M, grid):
    """Check ``nu'(a) >= sqrt(kappa) I(F_nu(a)) / M`` on half-lines ``(-inf, a]``.

    ``N(0, 1/kappa)`` satisfies the Gaussian isoperimetric inequality with
    constant ``sqrt(kappa)``, and an ``M``-Lipschitz push-forward divides it by ``M``.
    Returns a dict with per-point slack and its minimum.
    """
    if M < 1:
        raise OracleError("M must be >= 1")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    cdf = NuCDF(w, kappa)
    lo, hi = cdf.tails(grid)
    # I is symmetric; evaluate on the smaller tail
    prof = gaussian_isoperimetric_profile(np.minimum(lo, hi))
    lhs = cdf.density(grid)
    rhs = math.sqrt(kappa) * np.asarray(prof) / M
    slack = lhs - rhs
    return {"grid": grid, "boundary": lhs, "bound": rhs, "slack": slack, "min_slack": float(slack.min())}


# --------------------------------------------------------------------------
# heat semigroup on the two-sphere


def sphere_axis_cdf(a, u):
    """CDF of ``x_3`` under ``nu ∝ exp(-a x_3)`` on the two-sphere (``x_3`` is uniform under mu)."""
    u = np.asarray(u, dtype=float)
    if a == 0:
        return (u + 1.0) / 2.0
    return -np.expm1(-a * (u + 1.0)) / -np.expm1(-2.0 * a)


class SphereSpectral:
    """Axisymmetric heat semigroup on the unit sphere of ``R^3``.

    ``exp(-a cos(theta))`` is expanded as ``sum_l c_l P_l(cos theta)``;
    ``P_t`` multiplies ``c_l`` by ``exp(-l (l + 1) t)``.  ``scale`` multiplies
    the exponent, e.g. ``scale=2`` gives ``exp(-2 a cos(theta))``.
    """

    def __init__(self, a: float, lmax: int = 200, method: str = "bessel", nquad: int = 400,
                 tail_tol: float = 1e-14):
        self.a = float(a)
        self.lmax = lmax
        ell = np.arange(lmax + 1)
        if method == "bessel":
            # exp(-a u) = sum_l (2l + 1) (-1)^l i_l(a) P_l(u)
            self.coef = (2 * ell + 1) * (-1.0) ** ell * spherical_in(ell, self.a)
        elif method == "quadrature":
            # absolute noise floor ~1e-12 from node error amplified by P_l'
            u, wq = npleg.leggauss(nquad)
            self.coef = (2 * ell + 1) / 2.0 * (npleg.legvander(u, lmax).T @ (wq * np.exp(-self.a * u)))
        else:
            raise OracleError(f"unknown method {method!r}")
        self.eig = ell * (ell + 1.0)
        big = np.max(np.abs(self.coef))
        tail = np.max(np.abs(self.coef[-3:]))
        if method == "bessel" and tail > tail_tol * big:
            raise OracleError(f"Legendre tail {tail:.2e} exceeds tolerance; raise lmax")

    def _series(self, t):
        if t < 0:
            raise OracleError("t must be nonnegative")
        return self.coef * np.exp(-self.eig * t)

    def theta_derivs(self, t, theta):
        """``F, dF/dtheta, d2F/dtheta2`` of ``F = P_t exp(-a x_3)`` at polar angle ``theta``."""
        theta = np.asarray(theta, dtype=float)
        c = self._series(t)
        u = np.cos(theta)
        s = np.sin(theta)
        G = npleg.legval(u, c)
        G1 = npleg.legval(u, npleg.legder(c))
        G2 = npleg.legval(u, npleg.legder(c, 2))
        return G, -s * G1, s * s * G2 - u * G1

    def Pt(self, t, theta):
        return self.theta_derivs(t, theta)[0]

    def grad_log(self, t, theta):
        """Derivative of ``log P_t exp(-W)`` along the unit meridian direction (increasing theta)."""
        F, F1, _ = self.theta_derivs(t, theta)
        return F1 / F

    def hess_log(self, t, theta):
        """Hessian of ``log P_t exp(-W)`` along the meridian: ``d^2/dtheta^2 log F``."""
        F, F1, F2 = self.theta_derivs(t, theta)
        return F2 / F - (F1 / F) ** 2

    def hess_log_azimuthal(self, t, theta):
        """Hessian eigenvalue along the parallel of latitude: ``cot(theta) d/dtheta log F``."""
        F, F1, _ = self.theta_derivs(t, theta)
        return np.cos(theta) / np.sin(theta) * F1 / F


def sphere_reverse_holder_margin(a, t, theta, lmax=200):
    """Sphere analogue of :func:`reverse_holder_margin` on the two-sphere (rate ``n - 2 = 1``)."""
    Pf = SphereSpectral(a, lmax).Pt(t, theta)
    Pf2 = SphereSpectral(2 * a, lmax).Pt(t, theta)
    factor = math.exp(a * a * -math.expm1(-2 * t))
    return factor * Pf**2 - Pf2, Pf2, Pf


def spectral_Pt_sphere(a, t, theta):
    return SphereSpectral(a).Pt(t, theta)


def spectral_hess_log(a, t, theta):
    return SphereSpectral(a).hess_log(t, theta)


def adaptive_Pt(w, kappa, x, t, tol=1e-12):
    """Scalar ``P_t exp(-W)(x)`` by adaptive quadrature; a fallback and cross-check."""
    a = math.exp(-kappa * t)
    sigma = math.sqrt(-math.expm1(-2 * kappa * t) / kappa)
    f = lambda z: _density_derivs(w, np.asarray(a * x + sigma * z))[0] * math.exp(-0.5 * z * z)
    pts = [(k - a * x) / sigma for k in w.kinks if abs((k - a * x) / sigma) < 30]
    val, err = integrate.quad(f, -30, 30, points=pts or None, epsabs=tol, epsrel=tol, limit=400)
    if err > 1e3 * tol * max(1.0, abs(val)):
        raise OracleError(f"adaptive quadrature did not converge (err={err:.2e})")
    return val / math.sqrt(2 * math.pi)
