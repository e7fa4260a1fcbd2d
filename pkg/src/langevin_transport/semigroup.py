"""Langevin path simulation and Monte Carlo estimators of ``P_t exp(-W)`` and its log-derivatives.

Euclidean paths follow ``dX = -grad V(X) dt + sqrt(2) dw`` by Euler-Maruyama,
carrying the first and second variation flows and the Bismut martingale.
Sphere paths are geodesic random walks with a parallel-transported frame;
since the Ricci curvature of the unit sphere in ``R^n`` is ``n - 2``, the
damped transport ``Q_t = exp(-(n-2) t) //_t`` plays the role of the
first variation.

Every estimator is a smooth function of means of per-path statistics,
computed from one set of paths (common random numbers), and its standard
error comes from the delta method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from . import rng as rngmod
from .geometry import Space
from .measures import GaussianQuadratic, SphereUniform, Zero

__all__ = [
    "EuclideanPathState",
    "SemigroupError",
    "SemigroupEstimate",
    "SpherePathState",
    "default_dt",
    "est_Pt",
    "est_grad_log_Pt",
    "est_hess_log_Pt_euclidean",
    "est_hess_log_Pt_sphere",
    "est_reverse_holder",
    "martingale_tail",
    "ou_transition_sample",
    "simulate_variation_paths",
    "sphere_frame",
    "step_euclidean",
    "step_sphere",
]

_EUC_STREAM = rngmod.stream_id("euclidean-paths")
_SPH_STREAM = rngmod.stream_id("sphere-paths")
_OU_STREAM = rngmod.stream_id("ou-endpoints")
_MART_STREAM = rngmod.stream_id("martingale-tail")


class SemigroupError(RuntimeError):
    pass


@dataclass
class SemigroupEstimate:
    """Monte Carlo estimate with its standard error.

    ``terms`` holds the Bismut breakdown (each divided by ``P_t f``) for the
    Hessian estimators, as ``{name: (value, std_error)}``.
    """

    value: float | np.ndarray
    std_error: float | np.ndarray
    n_paths: int
    terms: dict = field(default_factory=dict)


def default_dt(kappa: float = 1.0, n: int | None = None) -> float:
    scales = [1.0, 1.0 / kappa]
    if n is not None:
        scales.append(1.0 / (n - 2))
    return 1e-3 * min(scales)


def _grid(t, dt):
    steps = max(1, int(math.ceil(t / dt - 1e-9)))
    return steps, t / steps


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise SemigroupError(f"non-finite {name} in path simulation; reduce dt")


def _delta(acc: rngmod.MomentAccumulator, fn, eps=1e-7):
    """Value and delta-method standard error of ``fn(mean)``; ``fn`` maps a mean vector to a 1D array."""
    n = acc.count
    if n < 2:
        raise SemigroupError("need at least two paths")
    mean, cov = acc.mean(), acc.cov()
    val = np.asarray(fn(mean), dtype=float)
    grad = np.empty((val.size, mean.size))
    for j in range(mean.size):
        h = eps * max(1.0, abs(mean[j]))
        up, dn = mean.copy(), mean.copy()
        up[j] += h
        dn[j] -= h
        grad[:, j] = (np.asarray(fn(up)) - np.asarray(fn(dn))).ravel() / (2 * h)
    var = np.einsum("ij,jk,ik->i", grad, cov, grad) / n
    return val, np.sqrt(np.maximum(var, 0.0))


def _ratio_guard(acc):
    p, se = acc.mean()[0], math.sqrt(max(acc.cov()[0, 0], 0.0) / acc.count)
    if not p > 10 * se:
        raise SemigroupError(f"P_t estimate {p:.3e} below 10 x its standard error {se:.3e}; ratio unreliable")


# --------------------------------------------------------------------------
# Euclidean paths


@dataclass
class EuclideanPathState:
    """Batch of Euclidean paths with variation data.

    ``x`` has shape ``(paths, d)``, ``J`` ``(paths, d, d)``; ``H`` is the
    second variation along the tracked direction ``u``.  ``Jinv`` is kept
    only when the adjoint inverse is requested.
    """

    x: np.ndarray
    J: np.ndarray
    H: np.ndarray
    u: np.ndarray
    M: np.ndarray
    qv: np.ndarray
    t: float = 0.0
    Jinv: np.ndarray | None = None

    @classmethod
    def start(cls, x0, count, u=None, adjoint=False):
        x0 = np.asarray(x0, dtype=float)
        d = x0.shape[-1]
        u = np.eye(d)[0] if u is None else np.asarray(u, dtype=float)
        eye = np.broadcast_to(np.eye(d), (count, d, d)).copy()
        return cls(
            x=np.broadcast_to(x0, (count, d)).copy(),
            J=eye,
            H=np.zeros((count, d)),
            u=u,
            M=np.zeros(count),
            qv=np.zeros(count),
            Jinv=eye.copy() if adjoint else None,
        )


def step_euclidean(m, state: EuclideanPathState, dt: float, rng=None, xi=None) -> EuclideanPathState:
    """One Euler-Maruyama step for the path, its variation flows and the Bismut martingale.

    ``xi`` (standard normals of shape ``(paths, d)``) may be passed instead of ``rng``.
    """
    if not dt > 0:
        raise SemigroupError("dt must be positive")
    if xi is None:
        xi = rng.standard_normal(state.x.shape)
    x, J = state.x, state.J
    A = m.hess_V(x)
    Ju = J @ state.u
    dw = math.sqrt(dt) * xi
    x_new = x - m.grad_V(x) * dt + math.sqrt(2.0) * dw
    J_new = J - (A @ J) * dt
    H_new = state.H - (m.third_V(x, Ju, Ju) + np.einsum("pij,pj->pi", A, state.H)) * dt
    M_new = state.M + np.sum(Ju * dw, axis=-1)
    qv_new = state.qv + np.sum(Ju * Ju, axis=-1) * dt
    Jinv = None if state.Jinv is None else state.Jinv + (state.Jinv @ A) * dt
    for name, arr in (("x", x_new), ("J", J_new), ("H", H_new), ("M", M_new)):
        _check_finite(name, arr)
    return EuclideanPathState(x_new, J_new, H_new, state.u, M_new, qv_new, state.t + dt, Jinv)


def ou_transition_sample(x, t, kappa, rng, count=None):
    """Exact endpoints of the Ornstein-Uhlenbeck process started at ``x``."""
    x = np.asarray(x, dtype=float)
    shape = x.shape if count is None else (count,) + x.shape[-1:]
    sd = math.sqrt(-math.expm1(-2 * kappa * t) / kappa)
    return math.exp(-kappa * t) * x + sd * rng.standard_normal(shape)


def _euclid_block(m, w, x0, t, dt, u, what, inverse):
    """Per-block path statistic function for :func:`rngmod.map_blocks`."""
    steps, h = _grid(t, dt)

    def run(gen, a, z):
        count = z - a
        if what == "Pt" and isinstance(m, GaussianQuadratic):
            xt = ou_transition_sample(x0, t, m.kappa, gen, count)
            return np.exp(-w.W(xt))[:, None]
        st = EuclideanPathState.start(x0, count, u=u, adjoint=inverse == "adjoint")
        d = st.x.shape[1]
        # trapezoid accumulator of J_s^{-1} H_s
        acc = np.zeros((count, d))
        prev = np.zeros((count, d))
        for _ in range(steps):
            st = step_euclidean(m, st, h, gen)
            if what == "hess":
                if inverse == "adjoint":
                    cur = np.einsum("pij,pj->pi", st.Jinv, st.H)
                else:
                    cur = np.linalg.solve(st.J, st.H[..., None])[..., 0]
                acc += 0.5 * h * (prev + cur)
                prev = cur
        f = np.exp(-w.W(st.x))
        gf = -f[:, None] * w.grad_W(st.x)
        if what == "Pt":
            return f[:, None]
        if what == "grad":
            return np.concatenate([f[:, None], np.einsum("pji,pj->pi", st.J, gf)], axis=1)
        Ju = st.J @ u
        g_u = np.sum(gf * Ju, axis=1)
        t1 = g_u * st.M / (t * math.sqrt(2.0))
        t2 = np.sum(gf * np.einsum("pij,pj->pi", st.J, acc), axis=1) / t
        return np.stack([f, g_u, t1, t2], axis=1)

    return run


def _collect(fn, n_paths, seed, stream, width):
    acc = rngmod.MomentAccumulator(width)
    for block in rngmod.map_blocks(fn, n_paths, seed, stream):
        acc.add(block)
    return acc


# --------------------------------------------------------------------------
# sphere paths


def sphere_frame(x, v=None):
    """Orthonormal basis of ``T_x S^{n-1}`` as rows, with first row ``v`` when given."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    cand = [] if v is None else [np.asarray(v, dtype=float)]
    cand += list(np.eye(n))
    rows = []
    for c in cand:
        r = c - np.dot(c, x) * x - sum(np.dot(c, b) * b for b in rows)
        nr = np.linalg.norm(r)
        if nr > 1e-8:
            rows.append(r / nr)
        if len(rows) == n - 1:
            break
    return np.array(rows)


def _orthonormalize(x, frame):
    """Project frame rows onto ``T_x`` and apply modified Gram-Schmidt, batched over paths."""
    out = frame - np.sum(frame * x[:, None, :], axis=-1, keepdims=True) * x[:, None, :]
    for i in range(out.shape[1]):
        for j in range(i):
            out[:, i] -= np.sum(out[:, i] * out[:, j], axis=-1, keepdims=True) * out[:, j]
        out[:, i] /= np.linalg.norm(out[:, i], axis=-1, keepdims=True)
    return out


@dataclass
class SpherePathState:
    """Batch of spherical Brownian paths started at ``x0``.

    ``frame[p]`` holds the rows ``//_t E_i`` for an orthonormal basis ``E_i``
    of ``T_{x0}`` whose first vector is the tracked direction ``v``, so
    increments expressed in ``frame`` coordinates are already pulled back by
    ``//_t^{-1}``.  ``mart2`` lives in these coordinates; its first entry
    stays 0 because the ``v`` component is removed.
    """

    x: np.ndarray
    frame: np.ndarray
    mart1: np.ndarray
    mart2: np.ndarray
    qv1: np.ndarray
    qv2: np.ndarray
    horizon: float
    t: float = 0.0

    @classmethod
    def start(cls, x0, v, count, horizon):
        x0 = np.asarray(x0, dtype=float)
        fr = sphere_frame(x0, v)
        k = fr.shape[0]
        return cls(
            x=np.broadcast_to(x0, (count, x0.size)).copy(),
            frame=np.broadcast_to(fr, (count,) + fr.shape).copy(),
            mart1=np.zeros(count),
            mart2=np.zeros((count, k)),
            qv1=np.zeros(count),
            qv2=np.zeros(count),
            horizon=float(horizon),
        )


def _exp_sq_integral(r, a, b, t, power):
    """``int_a^b e^{-2 r s} k(s)^power ds`` for ``k(s) = 1 - s/t`` and ``power`` in {0, 2}."""
    if power == 0:
        return (math.exp(-2 * r * a) - math.exp(-2 * r * b)) / (2 * r)

    def prim(s):
        # antiderivative of e^{-2rs} (1 - s/t)^2
        k, c = 1 - s / t, 2 * r
        return -math.exp(-c * s) * (k * k / c - 2 * k / (t * c * c) + 2 / (t * t * c**3))

    return prim(b) - prim(a)


def step_sphere(space: Space, state: SpherePathState, dt: float, rng=None, xi=None) -> SpherePathState:
    """One geodesic random-walk step with frame transport and martingale updates.

    The tangent increment is ``sqrt(2) dB`` with ``dB ~ N(0, dt I)`` in the
    current frame.  Martingale integrands are deterministic, so each step
    uses the root-mean-square of the integrand over the step; the recorded
    quadratic variations then equal the continuous-time integrals exactly.
    """
    if not dt > 0:
        raise SemigroupError("dt must be positive")
    n = space.ambient_dim
    r = float(n - 2)
    if xi is None:
        xi = rng.standard_normal(state.mart2.shape)
    dB = math.sqrt(dt) * xi
    step = math.sqrt(2.0) * np.einsum("pi,pij->pj", dB, state.frame)
    length = np.linalg.norm(step, axis=-1)
    if np.any(length >= math.pi / 4):
        raise SemigroupError("geodesic step length >= pi/4; reduce dt")
    a, b, T = state.t, state.t + dt, state.horizon
    q1 = _exp_sq_integral(r, a, min(b, T), T, 0) / T**2 if a < T else 0.0
    q2 = _exp_sq_integral(r, a, min(b, T), T, 2) if a < T else 0.0
    c1, c2 = math.sqrt(q1 / dt), math.sqrt(q2 / dt)
    # k'(s) = -1/t enters mart1 with its sign
    mart1 = state.mart1 - c1 * dB[:, 0]
    perp = dB.copy()
    perp[:, 0] = 0.0
    mart2 = state.mart2 + c2 * perp
    x_new = space.exp_map(state.x, step)
    frame = _orthonormalize(x_new, space.transport_along(state.x, step, state.frame))
    _check_finite("x", x_new)
    _check_finite("frame", frame)
    return SpherePathState(
        x=x_new,
        frame=frame,
        mart1=mart1,
        mart2=mart2,
        qv1=state.qv1 + q1,
        qv2=state.qv2 + (n - 2) * q2,
        horizon=T,
        t=b,
    )


# Coefficients of the two Bismut terms on the sphere, for the increment
# convention sqrt(2) dB.  They were fixed against the Legendre oracle.
SPHERE_TERM1_COEF = -1.0 / math.sqrt(2.0)
SPHERE_TERM2_COEF = math.sqrt(2.0)


def _sphere_block(space, w, x0, v, t, dt, what):
    steps, h = _grid(t, dt)
    r = space.ambient_dim - 2.0

    def run(gen, a, z):
        st = SpherePathState.start(x0, v, z - a, t)
        for _ in range(steps):
            st = step_sphere(space, st, h, gen)
        f = np.exp(-w.W(st.x))
        gf = -f[:, None] * w.grad_W(st.x)
        if what == "Pt":
            return f[:, None]
        # gradient pulled back to T_{x0} in frame coordinates, damped by Q_t
        back = math.exp(-r * t) * np.einsum("pij,pj->pi", st.frame, gf)
        if what == "grad":
            return np.concatenate([f[:, None], back], axis=1)
        if what == "qv":
            return np.stack([st.qv1, st.qv2], axis=1)
        g_v = back[:, 0]
        t1 = SPHERE_TERM1_COEF * g_v * st.mart1
        t2 = SPHERE_TERM2_COEF * np.sum(back * st.mart2, axis=1)
        return np.stack([f, g_v, t1, t2], axis=1)

    return run


# --------------------------------------------------------------------------
# public estimators


def _tag(x):
    return tuple(np.round(np.atleast_1d(np.asarray(x, dtype=float)), 12))


def est_Pt(m, w, x, t, n_paths=200_000, dt=None, seed=0) -> SemigroupEstimate:
    """Monte Carlo ``P_t exp(-W)(x)``; exact OU endpoints are used for Gaussian sources."""
    if t < 0:
        raise SemigroupError("t must be >= 0")
    x = np.asarray(x, dtype=float)
    if t == 0 or isinstance(w, Zero):
        return SemigroupEstimate(float(np.exp(-w.W(x))), 0.0, n_paths)
    fn, stream = _dispatch(m, w, x, t, dt, None, "Pt")
    acc = _collect(fn, n_paths, seed, stream, 1)
    val, se = _delta(acc, lambda mu: mu[:1])
    return SemigroupEstimate(float(val[0]), float(se[0]), n_paths)


def _dispatch(m, w, x, t, dt, u, what, inverse="solve"):
    if isinstance(m, SphereUniform):
        dt = default_dt(1.0, m.n) if dt is None else dt
        if u is None:
            u = sphere_frame(x)[0]
        return _sphere_block(m.space, w, x, u, t, dt, what), _SPH_STREAM
    dt = default_dt(m.kappa) if dt is None else dt
    if u is None:
        u = np.eye(x.shape[-1])[0]
    u = np.asarray(u, dtype=float)
    return _euclid_block(m, w, x, t, dt, u / np.linalg.norm(u), what, inverse), _EUC_STREAM


def est_grad_log_Pt(m, w, x, t, n_paths=200_000, dt=None, seed=0) -> SemigroupEstimate:
    """Monte Carlo ``grad log P_t exp(-W)(x)``.

    On the sphere the result is in the coordinates of :func:`sphere_frame` at ``x``.
    """
    if not t > 0:
        raise SemigroupError("t must be positive")
    x = np.asarray(x, dtype=float)
    dim = m.space.dim
    if isinstance(w, Zero):
        return SemigroupEstimate(np.zeros(dim), np.zeros(dim), n_paths)
    fn, stream = _dispatch(m, w, x, t, dt, None, "grad")
    acc = _collect(fn, n_paths, seed, stream, 1 + dim)
    _ratio_guard(acc)
    val, se = _delta(acc, lambda mu: mu[1:] / mu[0])
    return SemigroupEstimate(val, se, n_paths)


def _hess_estimate(acc, n_paths):
    _ratio_guard(acc)
    val, se = _delta(acc, lambda mu: [(mu[2] + mu[3]) / mu[0] - (mu[1] / mu[0]) ** 2])
    terms = {}
    for name, k in (("term1", 2), ("term2", 3), ("grad", 1)):
        v, s = _delta(acc, lambda mu, k=k: [mu[k] / mu[0]])
        terms[name] = (float(v[0]), float(s[0]))
    return SemigroupEstimate(float(val[0]), float(se[0]), n_paths, terms)


def est_hess_log_Pt_euclidean(m, w, x, t, u=None, n_paths=200_000, dt=None, seed=0,
                              inverse="solve") -> SemigroupEstimate:
    """Bismut estimate of ``Hess log P_t exp(-W)(x)(u, u)``.

    ``terms`` reports ``term1 / P_t f`` and ``term2 / P_t f``: the martingale
    term and the second-variation term.  The inner expectation of the second
    term is collapsed onto the same path through ``J_t J_s^{-1}``;
    ``inverse`` selects a linear solve or the adjoint flow for ``J_s^{-1}``.
    """
    if not t > 0:
        raise SemigroupError("t must be positive")
    if inverse not in ("solve", "adjoint"):
        raise SemigroupError(f"unknown inverse method {inverse!r}")
    x = np.asarray(x, dtype=float)
    if isinstance(w, Zero):
        return SemigroupEstimate(0.0, 0.0, n_paths, {"term1": (0.0, 0.0), "term2": (0.0, 0.0)})
    fn, stream = _dispatch(m, w, x, t, dt, u, "hess", inverse)
    return _hess_estimate(_collect(fn, n_paths, seed, stream, 4), n_paths)


def est_hess_log_Pt_sphere(m, w, x, t, v=None, n_paths=200_000, dt=None, seed=0) -> SemigroupEstimate:
    """Bismut estimate of ``Hess log P_t exp(-W)(x)(v, v)`` on the sphere, ``v`` a unit tangent."""
    if not t > 0:
        raise SemigroupError("t must be positive")
    x = np.asarray(x, dtype=float)
    if v is not None:
        v = np.asarray(v, dtype=float)
        if abs(np.dot(v, x)) > 1e-10 or abs(np.linalg.norm(v) - 1) > 1e-10:
            raise SemigroupError("v must be a unit tangent vector at x")
    if isinstance(w, Zero):
        return SemigroupEstimate(0.0, 0.0, n_paths, {"term1": (0.0, 0.0), "term2": (0.0, 0.0)})
    fn, stream = _dispatch(m, w, x, t, dt, v, "hess")
    return _hess_estimate(_collect(fn, n_paths, seed, stream, 4), n_paths)


def sphere_quadratic_variations(n, t, n_paths=1000, dt=None, seed=0):
    """Per-path ``(qv1, qv2)`` of the sphere Bismut martingales, shape ``(paths, 2)``."""
    space = SphereUniform(n).space
    x0 = np.eye(n)[-1]
    dt = default_dt(1.0, n) if dt is None else dt
    fn = _sphere_block(space, Zero(n, on_sphere=True), x0, None, t, dt, "qv")
    return np.concatenate(rngmod.map_blocks(fn, n_paths, seed, _SPH_STREAM))


def simulate_variation_paths(m, x0, t, n_paths=1000, dt=1e-3, seed=0, u=None):
    """Per-step sup over paths of ``|J|_op`` and ``|H|``.

    Returns ``(times, J_norm, H_norm)``: for every grid time, the largest
    operator norm of ``J`` and Euclidean norm of ``H`` across all paths.
    """
    steps, h = _grid(t, dt)
    x0 = np.asarray(x0, dtype=float)

    def run(gen, a, z):
        st = EuclideanPathState.start(x0, z - a, u=u)
        jn, hn = np.empty(steps), np.empty(steps)
        for k in range(steps):
            st = step_euclidean(m, st, h, gen)
            jn[k] = np.max(np.linalg.norm(st.J, ord=2, axis=(1, 2)))
            hn[k] = np.max(np.linalg.norm(st.H, axis=1))
        return jn, hn

    parts = rngmod.map_blocks(run, n_paths, seed, _EUC_STREAM)
    jn = np.max([p[0] for p in parts], axis=0)
    hn = np.max([p[1] for p in parts], axis=0)
    return h * np.arange(1, steps + 1), jn, hn


def est_reverse_holder(m, w, x, t, n_paths=200_000, dt=None, seed=0):
    """Common-random-number estimate of ``log P_t(f^2) - 2 log P_t f`` with ``f = exp(-W)``.

    Returns ``(value, std_error, bound)`` where ``bound = L^2 (1 - e^{-2 kappa t}) / kappa``.
    """
    x = np.asarray(x, dtype=float)
    fn, stream = _dispatch(m, w, x, t, dt, None, "Pt")

    def sq(gen, a, z):
        f = fn(gen, a, z)[:, 0]
        return np.stack([f, f * f], axis=1)

    acc = _collect(sq, n_paths, seed, stream, 2)
    val, se = _delta(acc, lambda mu: [math.log(mu[1]) - 2 * math.log(mu[0])])
    kappa = m.kappa
    bound = w.L**2 * -math.expm1(-2 * kappa * t) / kappa
    return float(val[0]), float(se[0]), bound


def martingale_tail(kappa, t, deltas, n_sims=100_000, dt=1e-3, seed=0, level=0.99):
    """Tail of ``M_t = int_0^t e^{-kappa s} dB_s`` against its sub-Gaussian bound.

    Returns rows ``(delta, empirical, bound, margin, fourth_moment_ratio)``
    with ``bound = 2 exp(-delta^2 / (2 phi(t)))``, ``phi(t) = (1 - e^{-2 kappa t}) / (2 kappa)``
    and ``margin`` the one-sided binomial upper confidence excess at ``level``.
    The last entry is ``E[M^4] / phi(t)^2`` (the quadratic variation is deterministic).
    """
    steps, h = _grid(t, dt)
    s = h * np.arange(steps)
    # root-mean-square integrand per step keeps the discrete variance exact
    coef = np.sqrt((np.exp(-2 * kappa * s) - np.exp(-2 * kappa * (s + h))) / (2 * kappa * h))

    def run(gen, a, z):
        out = np.zeros(z - a)
        for k in range(steps):
            out += coef[k] * math.sqrt(h) * gen.standard_normal(z - a)
        return out

    mt = np.concatenate(rngmod.map_blocks(run, n_sims, seed, _MART_STREAM))
    phi = -math.expm1(-2 * kappa * t) / (2 * kappa)
    rows = []
    for d in np.atleast_1d(deltas):
        hits = int(np.sum(np.abs(mt) >= d))
        emp = hits / n_sims
        upper = binom.ppf(level, n_sims, min(1.0, 2 * math.exp(-d * d / (2 * phi)))) / n_sims
        bound = 2 * math.exp(-d * d / (2 * phi))
        rows.append((float(d), emp, bound, upper - min(bound, 1.0), float(np.mean(mt**4) / phi**2)))
    return rows
