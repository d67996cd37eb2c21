"""Accelerated proximal gradient solver for the block dual.

The dual objective splits into a smooth quadratic coupling term, whose
gradient is the same vector ``sum_j y_j - d`` in every block and is Lipschitz
with constant m, plus a separable sum of support functions, whose prox is a
set projection by Moreau decomposition.  Acceleration follows the standard
three-sequence scheme with the theta recursion run as an equality from
theta_0 = 1; the reported solution is the iterate with the smallest dual
value seen so far, which is the quantity the O(1/k^2) guarantee bounds.
"""

from __future__ import annotations

import math
from typing import List, Optional

import numpy as np

from .geometry import ConvexSet, Halfspace
from .problem import (
    DualState,
    Problem,
    SolveTrace,
    StoppingRule,
    max_distance,
    project_any,
    project_point_any,
)
from .dykstra import dual_objective, shqp_refine


class MaxIterationsExceeded(Exception):
    """Stopping rule not satisfied within the iteration budget; carries the
    best state reached and the full trace."""

    def __init__(self, state: DualState, trace: SolveTrace):
        super().__init__(f"stopping rule not met within {len(trace.sweeps)} iterations")
        self.state = state
        self.trace = trace


def prox_support(s: ConvexSet, u, t: float) -> np.ndarray:
    """Minimizer of t*support(., set) + 0.5*||. - u||^2.

    By Moreau decomposition applied to the scaled conjugate pair
    (indicator, support), this is u - t * P_set(u / t).
    """
    if t <= 0:
        raise ValueError("prox step must be positive")
    u = np.asarray(u, dtype=float)
    return u - t * project_point_any(s, u / t)


def theta_schedule_next(theta: float) -> float:
    """Positive root of (1 - t)/t^2 = 1/theta^2, the equality-form update.

    Starting from theta_0 = 1 the sequence satisfies theta_k <= 2/(k + 2) and
    decreases strictly to zero.
    """
    if not (0.0 < theta <= 1.0):
        raise ValueError("theta must lie in (0, 1]")
    t2 = theta * theta
    return 0.5 * (math.sqrt(t2 * t2 + 4.0 * t2) - t2)


def _smooth_value_and_gradient(problem: Problem, blocks: np.ndarray):
    r = np.sum(blocks, axis=0) - problem.d
    return 0.5 * float(r @ r), r


def apg_solve(
    problem: Problem,
    start=None,
    rule: Optional[StoppingRule] = None,
    shqp_improve: bool = False,
):
    """Accelerated proximal gradient on the dual blocks.

    Parameters
    ----------
    problem : Problem
    start : array_like, optional
        Initial blocks, shape (m, n), finite dual value required; defaults to
        all zeros.
    rule : StoppingRule, optional
        ``max_sweeps`` caps iterations; the primal tolerance is evaluated on
        the candidate d - sum(y) recovered from the best blocks so far.
    shqp_improve : bool, optional
        After forming the accelerated iterate, re-minimize the moved blocks
        over the supporting halfspaces generated by the iteration's prox
        projections, accepting the refined point only when it keeps the
        upper-model inequality that drives the convergence proof.

    Returns
    -------
    (DualState, SolveTrace)
        State holds the best (lowest dual value) blocks; trace rows carry the
        current iterate's dual value in ``h`` and the running minimum in
        ``h_ext``.

    Raises
    ------
    MaxIterationsExceeded
    """
    rule = rule or StoppingRule()
    m, n = problem.m, problem.n
    L = float(m)
    if start is None:
        x = np.zeros((m, n))
    else:
        x = np.array(start, dtype=float)
        if x.shape != (m, n):
            raise ValueError(f"start must have shape {(m, n)}, got {x.shape}")
    z = x.copy()
    theta = 1.0
    h_x = dual_objective(problem, x)
    if not math.isfinite(h_x):
        raise ValueError("start must have a finite dual objective")
    best_h, best_x = h_x, x.copy()
    trace = SolveTrace()
    state = DualState(y=best_x, x=problem.d - np.sum(best_x, axis=0), k=0, n_extra=0)

    for k in range(1, rule.max_sweeps + 1):
        yk = (1.0 - theta) * x + theta * z
        f_y, grad = _smooth_value_and_gradient(problem, yk)
        t = 1.0 / (theta * L)
        z_new = np.empty_like(z)
        cuts = {}
        for i, s in enumerate(problem.sets):
            u = z[i] - t * grad
            if shqp_improve:
                res = project_any(s, u / t)
                z_new[i] = u - t * res.x
                if res.halfspace is not None:
                    cuts[i] = res.halfspace
            else:
                z_new[i] = prox_support(s, u, t)
        x_hat = (1.0 - theta) * x + theta * z_new

        x_next = x_hat
        if shqp_improve and cuts:
            refined = shqp_refine(problem, x_hat, sorted(cuts), cuts)
            # Upper model at the accelerated point; the hat iterate satisfies
            # it automatically, the refined one must be checked.
            upper = (
                f_y
                + float(np.sum(grad * np.sum(x_hat - yk, axis=0)))
                + 0.5 * L * float(np.sum((x_hat - yk) ** 2))
                + _support_total(problem, x_hat)
            )
            if dual_objective(problem, refined) <= upper + 1e-12:
                x_next = refined

        dy = np.linalg.norm(x_next - x, axis=1)
        x, z = x_next, z_new
        h_x = dual_objective(problem, x)
        if h_x < best_h:
            best_h, best_x = h_x, x.copy()
        theta = theta_schedule_next(theta)

        primal = problem.d - np.sum(best_x, axis=0)
        md = max_distance(problem, primal)
        max_norm = float(np.max(np.linalg.norm(x, axis=1)))
        trace.append(k, h_x, best_h, dy, primal, md, math.nan, max_norm, math.nan)

        state.y = best_x
        state.x = primal
        state.k = k
        if md <= rule.primal_tol and float(np.sum(dy)) <= rule.dual_tol:
            trace.converged = True
            return state, trace

    raise MaxIterationsExceeded(state, trace)


def _support_total(problem: Problem, blocks: np.ndarray) -> float:
    from .geometry import support

    total = 0.0
    for i, s in enumerate(problem.sets):
        v = support(s, blocks[i])
        if math.isinf(v):
            return math.inf
        total += v
    return total


def apg_threshold_index(L: float, eps: float, start_gap: float) -> int:
    """Smallest integer k meeting the a priori accuracy guarantee.

    After k iterations with k >= sqrt(4 L / eps) * ||x - z_0|| - 2, the
    running minimum of the dual value is within eps of h at any comparison
    point x whose distance to the start is start_gap.
    """
    if eps <= 0 or L <= 0 or start_gap < 0:
        raise ValueError("L and eps must be positive, start_gap nonnegative")
    return max(0, math.ceil(math.sqrt(4.0 * L / eps) * start_gap - 2.0))
