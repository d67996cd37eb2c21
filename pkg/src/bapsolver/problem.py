"""Problem instances, solver state, traces, and stopping rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import geometry
from .geometry import ConvexSet, Polyhedron, ProjectionResult


@dataclass(frozen=True)
class Problem:
    """Best approximation instance: project the point d onto the intersection
    of the given closed convex sets, with optional per-set weights."""

    d: np.ndarray
    sets: tuple
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        sets = tuple(self.sets)
        if not sets:
            raise ValueError("at least one set is required")
        for s in sets:
            if s.dim is not None and s.dim != d.shape[0]:
                raise ValueError("set dimension does not match the point")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "sets", sets)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape[0] != len(sets):
                raise ValueError("one weight per set is required")
            if np.any(w <= 0):
                raise ValueError("weights must be positive")
            if abs(float(np.sum(w)) - 1.0) > 1e-12:
                raise ValueError("weights must sum to one")
            object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return len(self.sets)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def uniform_weights(self) -> np.ndarray:
        if self.weights is not None:
            return self.weights
        return np.full(self.m, 1.0 / self.m)


def project_any(s: ConvexSet, z: np.ndarray) -> ProjectionResult:
    """Projection that also handles Polyhedron sets via the QP module."""
    if isinstance(s, Polyhedron):
        x = project_point_any(s, z)
        return ProjectionResult(x=x, y=z - x, halfspace=geometry._halfspace_of(z, x))
    return geometry.project(s, z)


def project_point_any(s: ConvexSet, z: np.ndarray) -> np.ndarray:
    """Projection point only; the fast path for solver sweeps."""
    if isinstance(s, Polyhedron):
        from .polytope_qp import project_polyhedron

        return project_polyhedron(list(s.halfspaces), z).x
    return geometry._project_point(s, z)


@dataclass
class StoppingRule:
    """Primal feasibility plus dual stationarity, with a sweep cap."""

    primal_tol: float = 1e-8
    dual_tol: float = 1e-10
    max_sweeps: int = 100_000

    def __post_init__(self):
        if self.primal_tol <= 0 or self.dual_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")


@dataclass
class DualState:
    """Dual block vector plus the derived primal iterate.

    ``y`` has one row per block: the m ordinary blocks first, then one row per
    extra halfspace-buffer block when present.
    """

    y: np.ndarray  # (n_blocks, n)
    x: np.ndarray  # current primal iterate
    k: int = 0
    n_extra: int = 0

    @property
    def m(self) -> int:
        return self.y.shape[0] - self.n_extra


@dataclass
class SolveTrace:
    """Per-sweep record of a solver run."""

    sweeps: List[int] = field(default_factory=list)
    h: List[float] = field(default_factory=list)
    h_ext: List[float] = field(default_factory=list)
    block_change_norms: List[np.ndarray] = field(default_factory=list)
    primal: List[np.ndarray] = field(default_factory=list)
    max_dist: List[float] = field(default_factory=list)
    v_monitor: List[float] = field(default_factory=list)
    max_block_norm: List[float] = field(default_factory=list)
    decrease_slack: List[float] = field(default_factory=list)
    inner_x: List[np.ndarray] = field(default_factory=list)
    inner_e: List[np.ndarray] = field(default_factory=list)
    blocks: List[np.ndarray] = field(default_factory=list)  # per-sweep dual blocks, opt-in
    converged: bool = False

    def append(self, sweep, h, h_ext, dy, x, max_dist, v, max_norm, slack):
        if self.sweeps and sweep <= self.sweeps[-1]:
            raise ValueError("sweep indices must be strictly increasing")
        self.sweeps.append(sweep)
        self.h.append(h)
        self.h_ext.append(h_ext)
        self.block_change_norms.append(np.asarray(dy, dtype=float))
        self.primal.append(np.asarray(x, dtype=float).copy())
        self.max_dist.append(max_dist)
        self.v_monitor.append(v)
        self.max_block_norm.append(max_norm)
        self.decrease_slack.append(slack)


class MaxSweepsExceeded(Exception):
    """Stopping rule not satisfied within the sweep budget.

    Carries the best state reached so far and the full trace.
    """

    def __init__(self, state: DualState, trace: SolveTrace):
        super().__init__(f"stopping rule not met within {len(trace.sweeps)} sweeps")
        self.state = state
        self.trace = trace


def max_distance(problem: Problem, x: np.ndarray) -> float:
    return max(
        float(np.linalg.norm(x - project_point_any(s, x))) for s in problem.sets
    )
