"""Exact projection onto an intersection of halfspaces.

The projection QP

    min ||x - z||^2 / 2   s.t.  <a_j, x> <= b_j  for all j

is solved through its dual, a nonnegativity-constrained least-squares problem
in the multipliers, with a Lawson-Hanson style primal active-set method.  The
halfspace collections handled here are small and dense (a few dozen rows) and
are re-solved repeatedly with slowly changing data, so the solver accepts a
warmstart active set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .geometry import Halfspace

FEAS_TOL = 1e-10
MERGE_COS_TOL = 1e-10
MERGE_OFFSET_TOL = 1e-10
RCOND = 1e-12


class Infeasible(Exception):
    """The halfspace intersection appears to be empty."""


class IterationLimit(Exception):
    """Active-set cycling guard tripped."""


@dataclass
class PolyhedralProjection:
    """Projection onto a halfspace intersection with KKT certificates.

    ``x = z - sum_j multipliers[j] * a_j`` holds, every multiplier is
    nonnegative, and complementarity ties positive multipliers to active
    constraints.
    """

    x: np.ndarray
    multipliers: np.ndarray
    active_set: List[int]


def _merge_duplicates(halfspaces: Sequence[Halfspace]):
    """Group near-identical rows; returns (A, b, rep) where rep[j] is the
    reduced-row index owning input row j."""
    A_rows: List[np.ndarray] = []
    b_vals: List[float] = []
    rep = np.empty(len(halfspaces), dtype=int)
    for j, h in enumerate(halfspaces):
        found = -1
        for r, (a, b) in enumerate(zip(A_rows, b_vals)):
            if float(a @ h.normal) > 1.0 - MERGE_COS_TOL and abs(b - h.offset) < MERGE_OFFSET_TOL:
                found = r
                break
        if found >= 0:
            rep[j] = found
            # keep the tighter offset of the merged pair
            b_vals[found] = min(b_vals[found], h.offset)
        else:
            rep[j] = len(A_rows)
            A_rows.append(h.normal)
            b_vals.append(h.offset)
    return np.array(A_rows), np.array(b_vals), rep


def _solve_on_support(A: np.ndarray, b: np.ndarray, z: np.ndarray, P: np.ndarray):
    """Unconstrained multipliers on the support P for the dual least-squares
    problem; minimum-norm solution with small singular values truncated.

    Returns ``(sol, descent)`` where ``descent`` is None when the normal
    equations are consistent.  A rank-deficient support whose equalities are
    mutually inconsistent makes the restricted dual unbounded below; in that
    case ``descent`` is a null-space direction of linear decrease and ``sol``
    is the least-squares point.
    """
    Ap = A[P]
    G = Ap @ Ap.T
    rhs = Ap @ z - b[P]
    sol, *_ = np.linalg.lstsq(G, rhs, rcond=RCOND)
    resid = rhs - G @ sol
    if float(np.linalg.norm(resid)) > 1e-10 * max(1.0, float(np.linalg.norm(rhs))):
        return sol, resid
    return sol, None


def project_polyhedron(
    halfspaces: Sequence[Halfspace],
    z,
    warm_active: Optional[Iterable[int]] = None,
) -> PolyhedralProjection:
    """Project z onto the intersection of the given halfspaces.

    Parameters
    ----------
    halfspaces : sequence of Halfspace
        Nonempty list of halfspaces of one common dimension.
    z : array_like
        Point to project.
    warm_active : iterable of int, optional
        Indices (into `halfspaces`) suspected active at the solution; used to
        seed the active set when the same buffer is re-solved.

    Raises
    ------
    Infeasible
        If the primal residual cannot be driven below tolerance.
    IterationLimit
        If the active-set cycling guard trips.
    """
    halfspaces = list(halfspaces)
    if not halfspaces:
        raise ValueError("halfspace list must be nonempty")
    z = np.asarray(z, dtype=float)
    dims = {h.dim for h in halfspaces}
    if len(dims) != 1 or dims.pop() != z.shape[0]:
        raise ValueError("inconsistent dimensions")

    A, b, rep = _merge_duplicates(halfspaces)
    J = A.shape[0]
    mu = np.zeros(J)
    P = np.zeros(J, dtype=bool)
    if warm_active is not None:
        for j in set(warm_active):
            if 0 <= j < len(halfspaces):
                P[rep[j]] = True

    def primal(mu_vec):
        return z - A.T @ mu_vec

    if P.any():
        sol, descent = _solve_on_support(A, b, z, P)
        if descent is None and np.all(sol >= 0):
            mu[P] = sol
        else:
            P[:] = False
            mu[:] = 0.0

    x = primal(mu)
    max_iter = 100 + 20 * J
    stall_window: List[float] = []
    for _ in range(max_iter):
        w = A @ x - b  # constraint violations; -w is the dual gradient
        cand = np.where(~P & (w > FEAS_TOL))[0]
        if cand.size == 0:
            break
        # most violated enters; np.argmax takes the lowest index on ties
        enter = cand[int(np.argmax(w[cand]))]
        P[enter] = True

        # inner loop: restore nonnegativity on the support
        for _inner in range(max_iter):
            sol, descent = _solve_on_support(A, b, z, P)
            idxP = np.where(P)[0]
            if descent is not None:
                # The support equalities are mutually inconsistent, so the
                # dual restricted to this support decreases without bound
                # along the null direction.  Walk that ray until a multiplier
                # hits zero and drop the blocking rows; if nothing blocks the
                # rows can never hold together and the intersection is empty.
                descent = descent / float(np.linalg.norm(descent))
                neg = descent < -FEAS_TOL
                if not np.any(neg):
                    raise Infeasible("inconsistent active constraints; empty intersection?")
                alpha = float(np.min(mu[idxP[neg]] / (-descent[neg])))
                mu[idxP] = np.maximum(mu[idxP] + alpha * descent, 0.0)
                dropped = idxP[neg][mu[idxP[neg]] <= FEAS_TOL]
                P[dropped] = False
                mu[dropped] = 0.0
                continue
            if np.all(sol >= -FEAS_TOL):
                mu_new = np.zeros(J)
                mu_new[P] = np.maximum(sol, 0.0)
                mu = mu_new
                break
            neg = sol < -FEAS_TOL
            ratios = mu[idxP[neg]] / (mu[idxP[neg]] - sol[neg])
            alpha = float(np.min(ratios))
            full = np.zeros(J)
            full[P] = sol
            mu = mu + alpha * (full - mu)
            dropped = idxP[mu[idxP] <= FEAS_TOL]
            P[dropped] = False
            mu[dropped] = 0.0
        else:
            raise IterationLimit("inner active-set loop failed to terminate")

        x = primal(mu)

        violation = float(np.max(A @ x - b, initial=0.0))
        stall_window.append(violation)
        if len(stall_window) > 10:
            stall_window.pop(0)
            lo, hi = min(stall_window), max(stall_window)
            if violation > 1e-8 and hi - lo < 1e-14 * max(1.0, hi):
                raise Infeasible("primal violation stalled above tolerance; empty intersection?")
    else:
        raise IterationLimit("active-set outer loop failed to terminate")

    if float(np.max(A @ x - b, initial=0.0)) > 1e-8:
        raise Infeasible("projection did not reach primal feasibility")

    multipliers = np.zeros(len(halfspaces))
    owner_taken = np.zeros(J, dtype=bool)
    for j in range(len(halfspaces)):
        r = rep[j]
        if not owner_taken[r]:
            multipliers[j] = mu[r]
            owner_taken[r] = True
    active = [j for j in range(len(halfspaces)) if multipliers[j] > 0]
    return PolyhedralProjection(x=x, multipliers=multipliers, active_set=active)


def dual_decompose(halfspaces: Sequence[Halfspace], z, warm_active=None) -> List[np.ndarray]:
    """Blocks y_j = multipliers_j * a_j with z - sum_j y_j equal to the
    projection; each block attains its halfspace's support value there."""
    proj = project_polyhedron(halfspaces, z, warm_active=warm_active)
    return [proj.multipliers[j] * halfspaces[j].normal for j in range(len(halfspaces))]
