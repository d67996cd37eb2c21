"""Simultaneous (parallel) projections via the product-space lift, and the
tree-structured generalization with optional halfspace-buffer refinement at
internal nodes.

The simultaneous variant runs all set projections from the common iterate of
the previous sweep and averages them with the block weights.  It is exactly
the cyclic two-set solver applied to the lifted problem returned by
:func:`product_lift`: the product of the (rescaled) sets on one side and the
diagonal subspace on the other, with the weighted inner product turned
Euclidean by the sqrt-weight change of coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import (
    AffineSubspace,
    CartesianProduct,
    Halfspace,
    WholeSpace,
    scale,
    support,
    supporting_halfspace,
)
from .problem import (
    DualState,
    MaxSweepsExceeded,
    Problem,
    SolveTrace,
    StoppingRule,
    max_distance,
    project_any,
    project_point_any,
)
from .dykstra import HalfspaceBuffer, _growth_flag
from .polytope_qp import project_polyhedron


def _check_weights(problem: Problem, weights) -> np.ndarray:
    if weights is None:
        return problem.uniform_weights()
    w = np.asarray(weights, dtype=float)
    if w.shape != (problem.m,):
        raise ValueError("one weight per set is required")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if abs(float(np.sum(w)) - 1.0) > 1e-12:
        raise ValueError("weights must sum to one")
    return w


def _weighted_dual_objective(problem: Problem, weights, y, extra_terms=()) -> float:
    """Dual objective of the lifted problem expressed in base coordinates.

    ``y`` holds the per-set blocks of the simultaneous iteration; the lifted
    dual evaluates the weighted blocks lambda_i * y_i against the original
    sets, plus optional (weight, support value, block) terms for internal
    tree nodes whose constraint sets exist only transiently.
    """
    agg = np.einsum("i,ij->j", weights, y)
    for w_node, _sup, y_node in extra_terms:
        agg = agg + w_node * y_node
    total = 0.5 * float(np.dot(agg - problem.d, agg - problem.d))
    for i, s in enumerate(problem.sets):
        val = support(s, y[i])
        if math.isinf(val):
            return math.inf
        total += weights[i] * val
    for w_node, sup, _y_node in extra_terms:
        total += w_node * sup
    return total


@dataclass(frozen=True)
class ProductLift:
    """Two-set lift of a weighted instance, plus the coordinate maps.

    Lifted coordinates stack sqrt(lambda_i)-scaled copies of the base space,
    which makes the weighted inner product Euclidean: the first lifted set is
    the product of the correspondingly rescaled sets, the second the diagonal
    subspace (points whose blocks agree in base coordinates).
    """

    problem: Problem
    base: Problem
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.base.n

    def lift_point(self, x) -> np.ndarray:
        """Base point -> its diagonal image in lifted coordinates."""
        x = np.asarray(x, dtype=float)
        return np.concatenate([math.sqrt(w) * x for w in self.weights])

    def unlift_point(self, u) -> np.ndarray:
        """Weighted mean of a lifted point's blocks, back in base coordinates."""
        u = np.asarray(u, dtype=float)
        n = self.n
        out = np.zeros(n)
        for i, w in enumerate(self.weights):
            out += math.sqrt(w) * u[i * n : (i + 1) * n]
        return out

    def lift_blocks(self, y) -> np.ndarray:
        """Per-set dual blocks -> warmstart rows (product set, diagonal).

        The diagonal-side row is chosen so that the lifted run starts at the
        diagonal image of d - sum(lambda_i y_i), the same common point the
        simultaneous iteration starts from; it is automatically orthogonal to
        the diagonal subspace.
        """
        y = np.asarray(y, dtype=float)
        row = np.concatenate([math.sqrt(w) * y[i] for i, w in enumerate(self.weights)])
        mean = np.einsum("i,ij->j", self.weights, y)
        corr = np.concatenate(
            [math.sqrt(w) * (mean - y[i]) for i, w in enumerate(self.weights)]
        )
        return np.stack([row, corr])

    def unlift_blocks(self, row) -> np.ndarray:
        """Product-set dual row -> per-set blocks in base coordinates."""
        row = np.asarray(row, dtype=float)
        n = self.n
        return np.stack(
            [row[i * n : (i + 1) * n] / math.sqrt(w) for i, w in enumerate(self.weights)]
        )


def product_lift(problem: Problem, weights=None) -> ProductLift:
    """Lift a weighted m-set instance to an equivalent two-set instance.

    The lifted instance is an ordinary (Euclidean) problem; solving it with
    the cyclic solver reproduces the simultaneous iteration sweep for sweep,
    and its solution restricts to the original projection on every diagonal
    block.
    """
    w = _check_weights(problem, weights)
    sw = np.sqrt(w)
    n = problem.n
    prod = CartesianProduct(tuple(scale(s, float(sw[i])) for i, s in enumerate(problem.sets)))
    basis = np.zeros((n, problem.m * n))
    for j in range(n):
        for i in range(problem.m):
            basis[j, i * n + j] = sw[i]
    diag = AffineSubspace(point=np.zeros(problem.m * n), directions=basis)
    d_lift = np.concatenate([float(sw[i]) * problem.d for i in range(problem.m)])
    lifted = Problem(d=d_lift, sets=(prod, diag))
    return ProductLift(problem=lifted, base=problem, weights=w)


def _init_sim_blocks(problem: Problem, warmstart) -> np.ndarray:
    if warmstart is None:
        return np.zeros((problem.m, problem.n))
    y = np.array(warmstart, dtype=float)
    if y.shape != (problem.m, problem.n):
        raise ValueError(f"warmstart must have shape {(problem.m, problem.n)}, got {y.shape}")
    return y


def simultaneous_dykstra_solve(
    problem: Problem,
    weights=None,
    warmstart=None,
    rule: Optional[StoppingRule] = None,
    x_star=None,
    record_blocks: bool = False,
):
    """All projections per sweep from the common iterate, then weighted mean.

    The per-sweep projections are mutually independent (they all read the
    previous iterate), which is the method's parallelism; aggregation is the
    weighted average.  Equivalent to the cyclic solver on :func:`product_lift`
    of the same instance.

    Returns ``(DualState, SolveTrace)``; the state carries the m per-set
    blocks.  Raises :class:`MaxSweepsExceeded` when the stopping rule is not
    met within the sweep budget.
    """
    w = _check_weights(problem, weights)
    rule = rule or StoppingRule()
    y = _init_sim_blocks(problem, warmstart)
    x = problem.d - np.einsum("i,ij->j", w, y)
    state = DualState(y=y, x=x, k=0, n_extra=0)
    trace = SolveTrace()
    h_prev = _weighted_dual_objective(problem, w, y)
    w_corr = problem.d - x - y  # diagonal-block corrections, one per row

    for k in range(1, rule.max_sweeps + 1):
        y_old = y.copy()
        w_old = w_corr.copy()
        xs = np.empty_like(y)
        for i, s in enumerate(problem.sets):
            z = x + y[i]
            xs[i] = project_point_any(s, z)
            y[i] = z - xs[i]
        x = np.einsum("i,ij->j", w, xs)
        w_corr = problem.d - x - y
        state.y, state.x, state.k = y, x, k

        # Norms in the lifted (weighted) geometry: sqrt(lambda)-scaled block
        # changes for the product side, one aggregated entry for the diagonal
        # side's correction change.
        dy_sets = np.sqrt(w) * np.linalg.norm(y - y_old, axis=1)
        dw = math.sqrt(float(np.sum(w * np.sum((w_corr - w_old) ** 2, axis=1))))
        dy = np.concatenate([dy_sets, [dw]])
        h = _weighted_dual_objective(problem, w, y)
        slack = (h_prev - h - 0.5 * float(np.sum(dy**2))) if math.isfinite(h_prev) else math.inf
        v = (
            h - float(problem.d @ np.asarray(x_star)) + 0.5 * float(np.asarray(x_star) @ np.asarray(x_star))
            if x_star is not None
            else math.nan
        )
        max_norm = float(np.max(np.linalg.norm(y, axis=1)))
        md = max_distance(problem, x)
        trace.append(k, h, h, dy, x, md, v, max_norm, slack)
        if record_blocks:
            trace.blocks.append(y.copy())
        h_prev = h

        dual_ok = float(np.sum(dy)) <= rule.dual_tol
        if md <= rule.primal_tol and (dual_ok or _growth_flag(trace.max_block_norm)):
            trace.converged = True
            return state, trace

    raise MaxSweepsExceeded(state, trace)


@dataclass(frozen=True)
class TreeNode:
    """Node of an aggregation tree: a leaf carries a set index, an internal
    node averages its children and may run a halfspace-buffer refinement."""

    set_index: Optional[int] = None
    children: Tuple["TreeNode", ...] = ()
    shqp: bool = False

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if (self.set_index is None) == (len(self.children) == 0):
            raise ValueError("a node is either a leaf with a set index or has children")
        if self.set_index is not None and self.shqp:
            raise ValueError("refinement steps attach to internal nodes only")

    @property
    def is_leaf(self) -> bool:
        return self.set_index is not None

    def leaves(self) -> List[int]:
        if self.is_leaf:
            return [self.set_index]
        out: List[int] = []
        for c in self.children:
            out.extend(c.leaves())
        return out


@dataclass(frozen=True)
class TreeTopology:
    """Rooted aggregation tree over the m sets with per-set weights.

    Every set index appears at exactly one leaf; node weights are the sums of
    their leaves' weights and the root's weight is one.
    """

    root: TreeNode
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w <= 0):
            raise ValueError("weights must be a vector of positive reals")
        if abs(float(np.sum(w)) - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")
        leaves = self.root.leaves()
        if sorted(leaves) != list(range(w.shape[0])):
            raise ValueError("every set index must appear at exactly one leaf")
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def flat(cls, m: int, weights=None) -> "TreeTopology":
        w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
        root = TreeNode(children=tuple(TreeNode(set_index=i) for i in range(m)))
        return cls(root=root, weights=w)

    def node_weight(self, node: TreeNode) -> float:
        return float(np.sum(self.weights[node.leaves()]))


@dataclass
class _NodeSlot:
    """Halfspace-buffer refinement state attached to one internal node."""

    y: np.ndarray
    bound: object  # Halfspace or WholeSpace
    buffer: HalfspaceBuffer
    warm: List[int] = field(default_factory=list)
    support_val: float = 0.0


def tree_dykstra_solve(
    problem: Problem,
    topology: TreeTopology,
    warmstart=None,
    rule: Optional[StoppingRule] = None,
    buffer_capacity: int = 32,
    x_star=None,
):
    """Leaf projections, bottom-up weighted averaging, optional refinement.

    Per sweep every leaf projects the common previous iterate (plus its dual
    block); internal nodes average their children's outputs by relative
    weight.  At internal nodes flagged ``shqp``, the node's running average is
    additionally projected onto the intersection of its current bounding
    halfspace with a buffer of supporting halfspaces collected from that
    node's subtree, maintaining a zero-initialized extra dual block exactly
    like the extended cyclic solver's final block.

    A flat tree with no flags reproduces :func:`simultaneous_dykstra_solve`.
    """
    if topology.m != problem.m:
        raise ValueError("topology size does not match the number of sets")
    w = _check_weights(problem, topology.weights)
    rule = rule or StoppingRule()
    y = _init_sim_blocks(problem, warmstart)
    x = problem.d - np.einsum("i,ij->j", w, y)

    slots: Dict[int, _NodeSlot] = {}

    def collect_slots(node: TreeNode):
        if node.shqp:
            slots[id(node)] = _NodeSlot(
                y=np.zeros(problem.n),
                bound=WholeSpace(),
                buffer=HalfspaceBuffer(capacity=buffer_capacity),
            )
        for c in node.children:
            collect_slots(c)

    collect_slots(topology.root)
    n_extra = len(slots)
    trace = SolveTrace()
    h_prev = _weighted_dual_objective(problem, w, y)
    state = DualState(y=np.vstack([y] + [s.y for s in slots.values()]) if slots else y.copy(),
                      x=x, k=0, n_extra=n_extra)

    for k in range(1, rule.max_sweeps + 1):
        y_old = y.copy()
        slot_y_old = {nid: s.y.copy() for nid, s in slots.items()}
        xs = np.empty_like(y)
        cuts: Dict[int, Optional[Halfspace]] = {}
        for i, s in enumerate(problem.sets):
            z = x + y[i]
            res = project_any(s, z)
            xs[i] = res.x
            y[i] = z - res.x
            cuts[i] = res.halfspace

        def evaluate(node: TreeNode) -> np.ndarray:
            if node.is_leaf:
                return xs[node.set_index]
            wn = topology.node_weight(node)
            acc = np.zeros(problem.n)
            for c in node.children:
                acc += (topology.node_weight(c) / wn) * evaluate(c)
            if node.shqp:
                slot = slots[id(node)]
                for i in node.leaves():
                    slot.buffer.add(cuts[i])
                acc = _tree_slot_step(slot, acc)
            return acc

        x = evaluate(topology.root)
        state.k = k
        state.x = x
        state.y = np.vstack([y] + [s.y for s in slots.values()]) if slots else y.copy()

        dy_sets = np.sqrt(w) * np.linalg.norm(y - y_old, axis=1)
        dy_slots = [
            math.sqrt(_slot_weight(topology, nid))
            * float(np.linalg.norm(slots[nid].y - slot_y_old[nid]))
            for nid in slots
        ]
        dy = np.concatenate([dy_sets, np.asarray(dy_slots)]) if dy_slots else dy_sets
        extras = [
            (_slot_weight(topology, nid), s.support_val, s.y) for nid, s in slots.items()
        ]
        h = _weighted_dual_objective(problem, w, y, extras)
        slack = (h_prev - h - 0.5 * float(np.sum(dy**2))) if math.isfinite(h_prev) else math.inf
        v = (
            h - float(problem.d @ np.asarray(x_star)) + 0.5 * float(np.asarray(x_star) @ np.asarray(x_star))
            if x_star is not None
            else math.nan
        )
        all_norms = [float(np.max(np.linalg.norm(y, axis=1)))] + [
            float(np.linalg.norm(s.y)) for s in slots.values()
        ]
        max_norm = max(all_norms)
        md = max_distance(problem, x)
        trace.append(k, h, h, dy, x, md, v, max_norm, slack)
        h_prev = h

        dual_ok = float(np.sum(dy)) <= rule.dual_tol
        if md <= rule.primal_tol and (dual_ok or _growth_flag(trace.max_block_norm)):
            trace.converged = True
            return state, trace

    raise MaxSweepsExceeded(state, trace)


def _slot_weight(topology: TreeTopology, node_id: int) -> float:
    for node in _walk(topology.root):
        if id(node) == node_id:
            return topology.node_weight(node)
    raise KeyError(node_id)


def _walk(node: TreeNode):
    yield node
    for c in node.children:
        yield from _walk(c)


def _tree_slot_step(slot: _NodeSlot, x_node: np.ndarray) -> np.ndarray:
    """One refinement step at an internal node, in base coordinates."""
    z = x_node + slot.y
    constraints: List[Halfspace] = []
    if isinstance(slot.bound, Halfspace):
        constraints.append(slot.bound)
    offset = len(constraints)
    constraints.extend(slot.buffer.halfspaces)
    if not constraints:
        # No cuts yet: the constraint set is the whole space.
        slot.y = np.zeros_like(slot.y)
        slot.bound = supporting_halfspace(z, z)
        slot.support_val = 0.0
        return z
    proj = project_polyhedron(constraints, z, warm_active=[j + offset for j in slot.warm])
    slot.y = z - proj.x
    slot.support_val = float(slot.y @ proj.x)
    slot.buffer.mark_active([j - offset for j in proj.active_set if j >= offset])
    slot.warm = slot.buffer.last_active
    new_bound = supporting_halfspace(z, proj.x)
    slot.bound = new_bound
    if isinstance(new_bound, Halfspace):
        slot.buffer.add(new_bound)
    return proj.x
