"""Points, tangent vectors, geodesics and parallel transport.

Two spaces are supported: flat Euclidean space and the unit round sphere,
both stored in ambient coordinates.  All routines accept arrays with
arbitrary leading batch axes; the last axis is the ambient coordinate.
Sphere points are re-projected onto the unit sphere after every operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["GeometryError", "Space", "euclidean", "sphere"]

# below this step length the sphere exponential map uses its Taylor form
_SMALL = 1e-12


class GeometryError(ValueError):
    """Raised for dimension mismatches and undefined geodesic operations."""


@dataclass(frozen=True)
class Space:
    """A Euclidean space or a unit sphere, embedded in ``R^ambient_dim``.

    Parameters
    ----------
    kind : {"euclidean", "sphere"}
    ambient_dim : int
        Number of ambient coordinates ``n``.  The sphere is the unit sphere
        of ``R^n`` and has manifold dimension ``n - 1``.
    """

    kind: str
    ambient_dim: int

    def __post_init__(self):
        if self.kind not in ("euclidean", "sphere"):
            raise GeometryError(f"unknown space kind {self.kind!r}")
        if self.kind == "euclidean" and self.ambient_dim < 1:
            raise GeometryError("Euclidean space needs ambient_dim >= 1")
        if self.kind == "sphere" and self.ambient_dim < 3:
            raise GeometryError("the sphere needs ambient_dim >= 3")

    @property
    def is_sphere(self) -> bool:
        return self.kind == "sphere"

    @property
    def dim(self) -> int:
        """Manifold dimension."""
        return self.ambient_dim - 1 if self.is_sphere else self.ambient_dim

    @property
    def curvature_rate(self) -> float:
        """Ricci lower bound ``n - 2`` of the sphere (0 for flat space)."""
        return float(self.ambient_dim - 2) if self.is_sphere else 0.0

    def _check(self, *arrays):
        for a in arrays:
            if a.shape[-1] != self.ambient_dim:
                raise GeometryError(
                    f"expected last axis of length {self.ambient_dim}, got shape {a.shape}"
                )

    def point(self, coords) -> np.ndarray:
        """Validate coordinates and return them as a point (normalized on the sphere)."""
        p = np.asarray(coords, dtype=float)
        self._check(p)
        if self.is_sphere:
            norm = np.linalg.norm(p, axis=-1, keepdims=True)
            if np.any(norm == 0):
                raise GeometryError("zero vector is not a point of the sphere")
            p = p / norm
        return p

    def project_tangent(self, p, w) -> np.ndarray:
        """Orthogonal projection of the ambient vector ``w`` onto ``T_p``."""
        p = np.asarray(p, dtype=float)
        w = np.asarray(w, dtype=float)
        self._check(p, w)
        if not self.is_sphere:
            return w.copy()
        return w - np.sum(w * p, axis=-1, keepdims=True) * p

    def exp_map(self, p, v) -> np.ndarray:
        """Follow the geodesic from ``p`` with initial velocity ``v`` for unit time."""
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        self._check(p, v)
        if not self.is_sphere:
            return p + v
        s = np.linalg.norm(v, axis=-1, keepdims=True)
        safe = np.where(s > _SMALL, s, 1.0)
        sinc = np.where(s > _SMALL, np.sin(safe) / safe, 1.0 - s**2 / 6.0)
        q = np.cos(s) * p + sinc * v
        return q / np.linalg.norm(q, axis=-1, keepdims=True)

    def log_map(self, p, q) -> np.ndarray:
        """Initial velocity of the minimizing geodesic from ``p`` to ``q``."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        self._check(p, q)
        if not self.is_sphere:
            return q - p
        c = np.clip(np.sum(p * q, axis=-1, keepdims=True), -1.0, 1.0)
        if np.any(c <= -1.0 + 1e-14):
            raise GeometryError("antipodal points have no unique geodesic")
        w = q - c * p
        nw = np.linalg.norm(w, axis=-1, keepdims=True)
        theta = np.arccos(c)
        scale = np.where(nw > _SMALL, theta / np.where(nw > _SMALL, nw, 1.0), 1.0)
        return scale * w

    def geodesic_distance(self, p, q) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        self._check(p, q)
        if not self.is_sphere:
            return np.linalg.norm(p - q, axis=-1)
        # arctan2 form is accurate for nearby points, unlike a bare arccos
        cross = np.linalg.norm(q - np.sum(p * q, axis=-1, keepdims=True) * p, axis=-1)
        return np.arctan2(cross, np.sum(p * q, axis=-1))

    def transport_along(self, p, v, w) -> np.ndarray:
        """Parallel transport of ``w`` along the geodesic ``s -> exp_p(s v)``, ``s in [0, 1]``.

        On the sphere the transported vector is
        ``w + <w, e> ((cos|v| - 1) e - sin|v| p)`` with ``e = v / |v|``.
        """
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        if not self.is_sphere:
            return w.copy()
        s = np.linalg.norm(v, axis=-1, keepdims=True)
        e = v / np.where(s > _SMALL, s, 1.0)
        if p.ndim < w.ndim:
            # w carries an extra axis of frame vectors
            p_, e_, s_ = p[..., None, :], e[..., None, :], s[..., None, :]
        else:
            p_, e_, s_ = p, e, s
        we = np.sum(w * e_, axis=-1, keepdims=True)
        return w + we * ((np.cos(s_) - 1.0) * e_ - np.sin(s_) * p_)

    def parallel_transport(self, p, q, v) -> np.ndarray:
        """Transport ``v`` in ``T_p`` to ``T_q`` along the minimizing geodesic."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        self._check(p, q, v)
        if not self.is_sphere:
            return v.copy()
        out = self.transport_along(p, self.log_map(p, q), v)
        return self.project_tangent(q, out)


def euclidean(d: int) -> Space:
    return Space("euclidean", d)


def sphere(n: int) -> Space:
    """Unit sphere in ``R^n``."""
    return Space("sphere", n)
