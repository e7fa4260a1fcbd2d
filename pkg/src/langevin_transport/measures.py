"""Source potentials, log-Lipschitz perturbations and exact samplers.

A source measure is ``mu = exp(-V)`` on a :class:`~langevin_transport.geometry.Space`;
a perturbation ``W`` defines the target ``nu = exp(-W) mu``.  Evaluators are
vectorized over leading axes of ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import rng as rngmod
from .geometry import Space, euclidean, sphere

__all__ = [
    "AbsValue",
    "GaussianQuadratic",
    "Linear",
    "MeasureError",
    "PerturbedConvex",
    "SampleBatch",
    "SmoothedAbs",
    "SphereLinear",
    "SphereUniform",
    "Zero",
    "eval_potential_suite",
    "sample_source",
    "sample_target",
]


class MeasureError(ValueError):
    """Raised when a sampler cannot produce reliable samples."""


# --------------------------------------------------------------------------
# source measures


@dataclass(frozen=True)
class GaussianQuadratic:
    """``V(x) = kappa |x|^2 / 2`` on ``R^d``."""

    kappa: float
    d: int = 1

    def __post_init__(self):
        if self.kappa <= 0:
            raise MeasureError("kappa must be positive")

    @property
    def space(self) -> Space:
        return euclidean(self.d)

    @property
    def K(self) -> float:
        return 0.0

    def V(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.kappa * np.sum(x * x, axis=-1)

    def grad_V(self, x):
        return self.kappa * np.asarray(x, dtype=float)

    def hess_V(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.kappa * np.eye(self.d), x.shape + (self.d,)).copy()

    def hess_V_dot(self, x, u):
        return self.kappa * np.broadcast_to(np.asarray(u, dtype=float), np.shape(x)).copy()

    def third_V(self, x, u, v):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(u), np.shape(v)))


@dataclass(frozen=True)
class PerturbedConvex:
    """``V(x) = kappa_base |x|^2 / 2 + lam * sum_i cos(x_i)``.

    The Hessian is bounded below by ``kappa = kappa_base - lam`` and the third
    derivative satisfies ``|D^3 V(x)(u, u)| <= lam`` for unit ``u``.
    """

    kappa_base: float
    lam: float
    d: int = 1

    def __post_init__(self):
        if self.lam < 0:
            raise MeasureError("lam must be nonnegative")
        if self.kappa_base - self.lam <= 0:
            raise MeasureError("need kappa_base > lam for a uniformly convex potential")

    @property
    def space(self) -> Space:
        return euclidean(self.d)

    @property
    def kappa(self) -> float:
        return self.kappa_base - self.lam

    @property
    def K(self) -> float:
        return self.lam

    def V(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.kappa_base * np.sum(x * x, axis=-1) + self.lam * np.sum(np.cos(x), axis=-1)

    def grad_V(self, x):
        x = np.asarray(x, dtype=float)
        return self.kappa_base * x - self.lam * np.sin(x)

    def hess_V(self, x):
        x = np.asarray(x, dtype=float)
        diag = self.kappa_base - self.lam * np.cos(x)
        return diag[..., :, None] * np.eye(self.d)

    def hess_V_dot(self, x, u):
        x = np.asarray(x, dtype=float)
        return (self.kappa_base - self.lam * np.cos(x)) * u

    def third_V(self, x, u, v):
        # [D^3 V(x)(u, v)]_i = lam sin(x_i) u_i v_i
        return self.lam * np.sin(np.asarray(x, dtype=float)) * u * v


@dataclass(frozen=True)
class SphereUniform:
    """Uniform probability measure on the unit sphere of ``R^n`` (``V = 0``)."""

    n: int = 3

    @property
    def space(self) -> Space:
        return sphere(self.n)

    @property
    def kappa(self) -> float:
        # curvature-dimension constant of the round sphere
        return float(self.n - 2)

    @property
    def K(self) -> float:
        return 0.0

    def V(self, x):
        return np.zeros(np.shape(x)[:-1])

    def grad_V(self, x):
        return np.zeros(np.shape(x))

    def hess_V_dot(self, x, u):
        return np.zeros(np.shape(u))

    def third_V(self, x, u, v):
        return np.zeros(np.shape(u))


# --------------------------------------------------------------------------
# perturbations


@dataclass(frozen=True)
class Zero:
    d: int = 1
    on_sphere: bool = False
    kinks: tuple = ()
    smooth = True

    @property
    def L(self) -> float:
        return 0.0

    def W(self, x):
        return np.zeros(np.shape(x)[:-1])

    def grad_W(self, x):
        return np.zeros(np.shape(x))


@dataclass(frozen=True)
class Linear:
    """``W(x) = <ell, x>`` on ``R^d``."""

    ell: tuple
    kinks: tuple = ()
    smooth = True

    def __post_init__(self):
        object.__setattr__(self, "ell", tuple(float(v) for v in np.atleast_1d(self.ell)))

    @property
    def d(self) -> int:
        return len(self.ell)

    @property
    def L(self) -> float:
        return float(np.linalg.norm(self.ell))

    def W(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.ell)

    def grad_W(self, x):
        return np.broadcast_to(np.asarray(self.ell), np.shape(x)).copy()


@dataclass(frozen=True)
class SmoothedAbs:
    """``W(x) = sign * L (sqrt(|x|^2 + eps^2) - eps)``, a smooth stand-in for ``sign * L|x|``.

    ``sign=-1`` tilts mass away from the origin (``nu`` has a dip at 0); this
    is the direction in which Lipschitz constants are forced up.
    """

    L: float
    eps: float = 1e-3
    d: int = 1
    sign: float = 1.0
    kinks: tuple = (0.0,)
    smooth = True

    def __post_init__(self):
        if self.eps <= 0:
            raise MeasureError("eps must be positive; use AbsValue for the exact kink")
        if self.L < 0 or self.sign not in (1.0, -1.0):
            raise MeasureError("need L >= 0 and sign in {+1, -1}")

    @property
    def coef(self) -> float:
        return self.sign * self.L

    def W(self, x):
        x = np.asarray(x, dtype=float)
        return self.coef * (np.sqrt(np.sum(x * x, axis=-1) + self.eps**2) - self.eps)

    def grad_W(self, x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1, keepdims=True) + self.eps**2)
        return self.coef * x / r


@dataclass(frozen=True)
class AbsValue:
    """Exact ``W(x) = sign * L |x|``; not differentiable at 0, meant for quadrature oracles."""

    L: float
    d: int = 1
    sign: float = 1.0
    kinks: tuple = (0.0,)
    smooth = False

    def __post_init__(self):
        if self.L < 0 or self.sign not in (1.0, -1.0):
            raise MeasureError("need L >= 0 and sign in {+1, -1}")

    @property
    def coef(self) -> float:
        return self.sign * self.L

    def W(self, x):
        return self.coef * np.linalg.norm(np.asarray(x, dtype=float), axis=-1)

    def grad_W(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return self.coef * x / np.where(r > 0, r, 1.0)


@dataclass(frozen=True)
class SphereLinear:
    """``W(x) = a <x, axis>`` restricted to the sphere; Lipschitz constant ``|a|``."""

    a: float
    n: int = 3
    axis: tuple = field(default=None)
    kinks: tuple = ()
    smooth = True

    def __post_init__(self):
        if self.axis is None:
            axis = np.zeros(self.n)
            axis[-1] = 1.0
        else:
            axis = np.asarray(self.axis, dtype=float)
            axis = axis / np.linalg.norm(axis)
        object.__setattr__(self, "axis", tuple(axis))

    @property
    def L(self) -> float:
        return abs(self.a)

    def W(self, x):
        return self.a * (np.asarray(x, dtype=float) @ np.asarray(self.axis))

    def grad_W(self, x):
        """Spherical gradient ``a (axis - <x, axis> x)``."""
        x = np.asarray(x, dtype=float)
        e = np.asarray(self.axis)
        return self.a * (e - (x @ e)[..., None] * x)


# --------------------------------------------------------------------------
# evaluation and sampling


class PotentialSuite(NamedTuple):
    V: np.ndarray
    grad_V: np.ndarray
    hess_V_u: np.ndarray
    third_V_uu: np.ndarray
    W: np.ndarray
    grad_W: np.ndarray


def eval_potential_suite(m, w, x, u=None) -> PotentialSuite:
    """All closed-form potential data at ``x`` (``u`` defaults to the first basis vector)."""
    x = np.asarray(x, dtype=float)
    if u is None:
        u = np.zeros(x.shape[-1])
        u[0] = 1.0
        if isinstance(m, SphereUniform):
            u = m.space.project_tangent(x, u)
            u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    u = np.asarray(u, dtype=float)
    return PotentialSuite(
        V=m.V(x),
        grad_V=m.grad_V(x),
        hess_V_u=m.hess_V_dot(x, u),
        third_V_uu=m.third_V(x, u, u),
        W=w.W(x),
        grad_W=w.grad_W(x),
    )


@dataclass
class SampleBatch:
    """A batch of points; ``weights`` is set only by importance sampling."""

    points: np.ndarray
    weights: np.ndarray | None = None
    ess: float | None = None

    def __len__(self):
        return len(self.points)


_SRC_STREAM = rngmod.stream_id("sample_source")
_TGT_STREAM = rngmod.stream_id("sample_target")
_MIN_ACCEPT = 1e-3


def _draw_source_block(m, gen, count):
    if isinstance(m, GaussianQuadratic):
        return gen.standard_normal((count, m.d)) / np.sqrt(m.kappa)
    if isinstance(m, SphereUniform):
        z = gen.standard_normal((count, m.n))
        return z / np.linalg.norm(z, axis=1, keepdims=True)
    if isinstance(m, PerturbedConvex):
        # envelope N(0, I/kappa_base); acceptance exp(-lam * sum(1 + cos x_i)) >= exp(-2 lam d)
        if np.exp(-2.0 * m.lam * m.d) < _MIN_ACCEPT:
            raise MeasureError(
                f"rejection acceptance may fall below {_MIN_ACCEPT}: "
                f"lam={m.lam}, d={m.d}, worst case exp(-2 lam d)={np.exp(-2 * m.lam * m.d):.2e}"
            )
        out = np.empty((0, m.d))
        tries = 0
        while len(out) < count:
            z = gen.standard_normal((2 * count + 16, m.d)) / np.sqrt(m.kappa_base)
            acc = gen.random(len(z)) < np.exp(-m.lam * np.sum(1.0 + np.cos(z), axis=1))
            out = np.concatenate([out, z[acc]])
            tries += len(z)
            if len(out) / tries < _MIN_ACCEPT:
                raise MeasureError(f"observed acceptance rate {len(out) / tries:.2e} below {_MIN_ACCEPT}")
        return out[:count]
    raise MeasureError(f"no sampler for {type(m).__name__}")


def sample_source(m, count: int, rng_seed: int, stream: int = _SRC_STREAM) -> SampleBatch:
    """Exact i.i.d. samples from ``mu``."""
    if count < 1:
        raise MeasureError("count must be >= 1")
    parts = rngmod.map_blocks(lambda g, a, z: _draw_source_block(m, g, z - a), count, rng_seed, stream)
    return SampleBatch(np.concatenate(parts))


def sample_target(m, w, count: int, rng_seed: int, oversample: int = 20) -> SampleBatch:
    """Samples from ``nu = exp(-W) mu`` by self-normalized importance resampling.

    ``oversample * count`` exact source draws are weighted by ``exp(-W)`` and
    ``count`` of them are resampled multinomially.  The effective sample size
    of the weights is reported in ``ess``.
    """
    if count < 1:
        raise MeasureError("count must be >= 1")
    n_src = max(oversample, 20) * count
    src = sample_source(m, n_src, rng_seed, stream=_TGT_STREAM).points
    logw = -w.W(src)
    logw -= logw.max()
    wts = np.exp(logw)
    wts /= wts.sum()
    ess = 1.0 / np.sum(wts**2)
    if ess < count / 2:
        raise MeasureError(
            f"effective sample size {ess:.0f} < count/2 = {count / 2:.0f}; increase oversample"
        )
    gen = rngmod.generator(rng_seed, _TGT_STREAM, 1 << 30)
    idx = gen.choice(n_src, size=count, p=wts)
    return SampleBatch(src[idx], weights=np.full(count, 1.0 / count), ess=float(ess))
