"""Convex set descriptors with exact projections and support functions.

Every solver in this package consumes the primitives defined here: a small
taxonomy of closed convex sets, each with an exact Euclidean projection, a
support function, and the supporting halfspace generated by a projection
residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

# Relative tolerance for deciding that a projection residual is zero.
ZERO_RESIDUAL_RTOL = 1e-12

# Relative tolerance when testing whether a direction is feasible for a
# support function before declaring the value +inf.  Values that are within
# roundoff of a feasible direction are snapped to the finite branch.
DIRECTION_SNAP_RTOL = 1e-9


def _as_vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("vector entries must be finite")
    return a


@dataclass(frozen=True)
class Halfspace:
    """The set {x : <normal, x> <= offset}, with unit normal after construction."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = _as_vec(self.normal)
        nrm = float(np.linalg.norm(a))
        if nrm == 0.0:
            raise ValueError("halfspace normal must be nonzero; use WholeSpace")
        object.__setattr__(self, "normal", a / nrm)
        object.__setattr__(self, "offset", float(self.offset) / nrm)

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    def contains(self, x, tol: float = 1e-10) -> bool:
        return float(self.normal @ x) <= self.offset + tol


@dataclass(frozen=True)
class Hyperplane:
    """The set {x : <normal, x> = offset}, with unit normal after construction."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = _as_vec(self.normal)
        nrm = float(np.linalg.norm(a))
        if nrm == 0.0:
            raise ValueError("hyperplane normal must be nonzero")
        object.__setattr__(self, "normal", a / nrm)
        object.__setattr__(self, "offset", float(self.offset) / nrm)

    @property
    def dim(self) -> int:
        return self.normal.shape[0]


@dataclass(frozen=True)
class Box:
    """Componentwise bounds {x : lo <= x <= hi}."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _as_vec(self.lo)
        hi = _as_vec(self.hi)
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have the same dimension")
        if np.any(lo > hi):
            raise ValueError("box requires lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]


@dataclass(frozen=True)
class Ball:
    """Euclidean ball {x : ||x - center|| <= radius}; radius 0 is a point."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = _as_vec(self.center)
        r = float(self.radius)
        if r < 0:
            raise ValueError("ball radius must be nonnegative")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class AffineSubspace:
    """Affine subspace {point + span(directions)} with orthonormal directions.

    The spanning directions are orthonormalized on construction so that
    projection is a matrix-free sum of inner products.
    """

    point: np.ndarray
    directions: np.ndarray  # shape (k, n), rows orthonormal

    def __post_init__(self):
        p = _as_vec(self.point)
        V = np.asarray(self.directions, dtype=float)
        if V.ndim != 2 or V.shape[1] != p.shape[0]:
            raise ValueError("directions must have shape (k, n) matching point")
        # Orthonormal basis of the row space; dependent directions drop out.
        if V.shape[0] == 0:
            basis = V
        else:
            _, sv, vt = np.linalg.svd(V, full_matrices=False)
            rank = int(np.sum(sv > 1e-12 * max(1.0, float(sv.max(initial=0.0)))))
            basis = vt[:rank].copy()
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "directions", basis)

    @property
    def dim(self) -> int:
        return self.point.shape[0]


@dataclass(frozen=True)
class Polyhedron:
    """Intersection of finitely many halfspaces.

    Feasibility is the caller's responsibility; the QP module detects empty
    intersections lazily.  Projection onto a Polyhedron is owned by
    :mod:`bapsolver.polytope_qp` and is not dispatched from :func:`project`.
    """

    halfspaces: tuple

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        if not hs:
            raise ValueError("polyhedron requires at least one halfspace")
        dims = {h.dim for h in hs}
        if len(dims) != 1:
            raise ValueError("halfspaces must share one dimension")
        object.__setattr__(self, "halfspaces", hs)

    @property
    def dim(self) -> int:
        return self.halfspaces[0].dim


@dataclass(frozen=True)
class WholeSpace:
    """The whole space; projection is the identity."""

    @property
    def dim(self) -> Optional[int]:
        return None


@dataclass(frozen=True)
class CartesianProduct:
    """Product set B_1 x ... x B_k over concatenated coordinate blocks.

    Projection, support, and distance all decompose blockwise.  Blocks of a
    WholeSpace factor are not allowed because their dimension would be
    ambiguous in the concatenation.
    """

    blocks: tuple

    def __post_init__(self):
        bs = tuple(self.blocks)
        if not bs:
            raise ValueError("product requires at least one block")
        if any(b.dim is None for b in bs):
            raise ValueError("every product block must have a definite dimension")
        object.__setattr__(self, "blocks", bs)

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    def slices(self):
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b.dim))
            start += b.dim
        return out


ConvexSet = Union[
    Halfspace, Hyperplane, Box, Ball, AffineSubspace, Polyhedron, CartesianProduct, WholeSpace
]


@dataclass(frozen=True)
class ProjectionResult:
    """Projection x of z, residual y = z - x, and the supporting halfspace at x.

    The halfspace is absent when the residual is (numerically) zero.
    """

    x: np.ndarray
    y: np.ndarray
    halfspace: Optional[Halfspace] = None


def _check_dim(set_dim: Optional[int], v: np.ndarray):
    if set_dim is not None and set_dim != v.shape[0]:
        raise ValueError(f"dimension mismatch: set has dim {set_dim}, vector has dim {v.shape[0]}")


def _project_point(s: ConvexSet, z: np.ndarray) -> np.ndarray:
    if isinstance(s, Halfspace):
        viol = float(s.normal @ z) - s.offset
        return z - max(0.0, viol) * s.normal
    if isinstance(s, Hyperplane):
        return z - (float(s.normal @ z) - s.offset) * s.normal
    if isinstance(s, Box):
        return np.clip(z, s.lo, s.hi)
    if isinstance(s, Ball):
        w = z - s.center
        nrm = float(np.linalg.norm(w))
        if nrm <= s.radius:
            return z.copy()
        return s.center + (s.radius / nrm) * w
    if isinstance(s, AffineSubspace):
        w = z - s.point
        return s.point + s.directions.T @ (s.directions @ w)
    if isinstance(s, WholeSpace):
        return z.copy()
    if isinstance(s, CartesianProduct):
        parts = []
        for b, sl in zip(s.blocks, s.slices()):
            if isinstance(b, Polyhedron):
                from .polytope_qp import project_polyhedron

                parts.append(project_polyhedron(list(b.halfspaces), z[sl]).x)
            else:
                parts.append(_project_point(b, z[sl]))
        return np.concatenate(parts)
    if isinstance(s, Polyhedron):
        raise TypeError("projection onto a Polyhedron is owned by the polytope_qp module")
    raise TypeError(f"unknown set descriptor {type(s).__name__}")


def project(s: ConvexSet, z) -> ProjectionResult:
    """Project z onto the set, returning the projection, residual, and
    supporting halfspace generated at the projected point."""
    z = _as_vec(z)
    _check_dim(s.dim, z)
    x = _project_point(s, z)
    y = z - x
    return ProjectionResult(x=x, y=y, halfspace=_halfspace_of(z, x))


def _halfspace_of(z: np.ndarray, x: np.ndarray) -> Optional[Halfspace]:
    y = z - x
    nrm = float(np.linalg.norm(y))
    if nrm <= ZERO_RESIDUAL_RTOL * max(1.0, float(np.linalg.norm(z))):
        return None
    a = y / nrm
    return Halfspace(normal=a, offset=float(a @ x))


def supporting_halfspace(z, x) -> Union[Halfspace, WholeSpace]:
    """Halfspace with unit normal (z - x)/||z - x|| passing through x.

    When x is the projection of z onto a convex set D, the returned halfspace
    contains D and matches its support function in the residual direction.
    Returns WholeSpace when the residual is below the zero threshold.
    """
    z = _as_vec(z)
    x = _as_vec(x)
    h = _halfspace_of(z, x)
    return WholeSpace() if h is None else h


def support(s: ConvexSet, y) -> float:
    """Support function sup_{x in set} <y, x>; may be +inf, and is 0 at y = 0.

    Directions within ``DIRECTION_SNAP_RTOL`` of a feasible direction are
    treated as feasible so the dual objective stays finitely evaluable along
    iterate paths.
    """
    y = _as_vec(y)
    _check_dim(s.dim, y)
    ynrm = float(np.linalg.norm(y))
    if ynrm == 0.0:
        return 0.0
    snap = DIRECTION_SNAP_RTOL * max(1.0, ynrm)
    if isinstance(s, Halfspace):
        t = float(s.normal @ y)
        if float(np.linalg.norm(y - t * s.normal)) > snap or t < -snap:
            return math.inf
        return max(t, 0.0) * s.offset
    if isinstance(s, Hyperplane):
        t = float(s.normal @ y)
        if float(np.linalg.norm(y - t * s.normal)) > snap:
            return math.inf
        return t * s.offset
    if isinstance(s, Box):
        return float(np.sum(np.where(y > 0, s.hi, s.lo) * y))
    if isinstance(s, Ball):
        return float(y @ s.center) + s.radius * ynrm
    if isinstance(s, AffineSubspace):
        in_span = s.directions.T @ (s.directions @ y)
        if float(np.linalg.norm(in_span)) > snap:
            return math.inf
        return float(y @ s.point)
    if isinstance(s, WholeSpace):
        return 0.0 if ynrm <= snap else math.inf
    if isinstance(s, Polyhedron):
        return _polyhedron_support(s, y)
    if isinstance(s, CartesianProduct):
        return float(sum(support(b, y[sl]) for b, sl in zip(s.blocks, s.slices())))
    raise TypeError(f"unknown set descriptor {type(s).__name__}")


def _polyhedron_support(s: Polyhedron, y: np.ndarray) -> float:
    from scipy.optimize import linprog

    A = np.array([h.normal for h in s.halfspaces])
    b = np.array([h.offset for h in s.halfspaces])
    res = linprog(-y, A_ub=A, b_ub=b, bounds=[(None, None)] * y.shape[0], method="highs")
    if res.status == 3:  # unbounded
        return math.inf
    if res.status != 0:
        raise RuntimeError(f"support LP failed: {res.message}")
    return float(-res.fun)


def distance(s: ConvexSet, z) -> float:
    """Euclidean distance from z to the set (Polyhedron dispatches to the QP)."""
    z = _as_vec(z)
    if isinstance(s, Polyhedron):
        from .polytope_qp import project_polyhedron

        return float(np.linalg.norm(z - project_polyhedron(list(s.halfspaces), z).x))
    return float(np.linalg.norm(z - _project_point(s, z)))


def scale(s: ConvexSet, factor: float) -> ConvexSet:
    """Descriptor of {factor * x : x in set}, for factor > 0."""
    if factor <= 0:
        raise ValueError("scale factor must be positive")
    if isinstance(s, Halfspace):
        return Halfspace(s.normal, factor * s.offset)
    if isinstance(s, Hyperplane):
        return Hyperplane(s.normal, factor * s.offset)
    if isinstance(s, Box):
        return Box(factor * s.lo, factor * s.hi)
    if isinstance(s, Ball):
        return Ball(factor * s.center, factor * s.radius)
    if isinstance(s, AffineSubspace):
        return AffineSubspace(factor * s.point, s.directions)
    if isinstance(s, Polyhedron):
        return Polyhedron(tuple(scale(h, factor) for h in s.halfspaces))
    if isinstance(s, CartesianProduct):
        return CartesianProduct(tuple(scale(b, factor) for b in s.blocks))
    if isinstance(s, WholeSpace):
        return s
    raise TypeError(f"unknown set descriptor {type(s).__name__}")
