"""Shared instance generators and oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from bapsolver import (
    Ball,
    Box,
    Halfspace,
    Hyperplane,
    Problem,
    project_polyhedron,
)


def random_halfspace_instance(rng, n=None, m=None, margin_lo=0.0, margin_hi=0.6):
    """Feasible instance whose sets are individual halfspaces.

    A hidden interior point anchors feasibility; the point to project sits a
    couple of units away so some constraints are active at the solution.
    """
    n = int(rng.integers(2, 6)) if n is None else n
    m = int(rng.integers(2, 6)) if m is None else m
    p = rng.standard_normal(n)
    sets = []
    for _ in range(m):
        a = rng.standard_normal(n)
        a /= np.linalg.norm(a)
        sets.append(Halfspace(a, float(a @ p) + float(rng.uniform(margin_lo, margin_hi))))
    d = p + 2.0 * rng.standard_normal(n)
    return Problem(d=d, sets=tuple(sets))


def random_mixed_instance(rng, n=None, m=None, kinds=("halfspace", "ball", "box")):
    """Feasible instance mixing halfspace/ball/box (optionally hyperplane)
    sets around a hidden common point."""
    n = int(rng.integers(2, 5)) if n is None else n
    m = int(rng.integers(2, 5)) if m is None else m
    p = rng.standard_normal(n)
    sets = []
    for _ in range(m):
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == "halfspace":
            a = rng.standard_normal(n)
            a /= np.linalg.norm(a)
            sets.append(Halfspace(a, float(a @ p) + float(rng.uniform(0.0, 0.5))))
        elif kind == "ball":
            c = p + 0.5 * rng.standard_normal(n)
            sets.append(Ball(c, float(np.linalg.norm(c - p)) + float(rng.uniform(0.1, 0.8))))
        elif kind == "box":
            lo = p - rng.uniform(0.1, 1.0, size=n)
            hi = p + rng.uniform(0.1, 1.0, size=n)
            sets.append(Box(lo, hi))
        else:
            a = rng.standard_normal(n)
            sets.append(Hyperplane(a, float(a @ p)))
    d = p + 2.0 * rng.standard_normal(n)
    return Problem(d=d, sets=tuple(sets))


def qp_oracle(problem):
    """Exact projection of d for instances whose sets are all halfspaces."""
    hs = list(problem.sets)
    assert all(isinstance(s, Halfspace) for s in hs)
    return project_polyhedron(hs, problem.d).x


def inf_dual(problem, x_star):
    """Exact infimum of the dual objective for a known projection point."""
    d = problem.d
    x_star = np.asarray(x_star, dtype=float)
    return 0.5 * float(d @ d) - 0.5 * float((d - x_star) @ (d - x_star))


def two_orthogonal_halfspaces():
    """d=(1,1) against {x1 <= 0} and {x2 <= 0}; projection is the origin."""
    return Problem(
        d=np.array([1.0, 1.0]),
        sets=(Halfspace(np.array([1.0, 0.0]), 0.0), Halfspace(np.array([0.0, 1.0]), 0.0)),
    )


def tangent_disks():
    """Two unit disks meeting only at the origin; the dual has no minimizer."""
    return Problem(
        d=np.array([1.0, 0.0]),
        sets=(Ball(np.array([0.0, 1.0]), 1.0), Ball(np.array([0.0, -1.0]), 1.0)),
    )


def narrow_wedge(angle=0.01):
    """Hyperplane {x2 = 0} against a halfspace whose boundary meets it at the
    given angle; the projection of d=(-1, 1) is the wedge vertex (origin)."""
    a = np.array([-np.sin(angle), np.cos(angle)])
    return Problem(
        d=np.array([-1.0, 1.0]),
        sets=(Hyperplane(np.array([0.0, 1.0]), 0.0), Halfspace(a, 0.0)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)
