"""Batch interface: problem files in, traces and reports out.

Problem files are JSON documents describing the point to project, the list of
convex sets, and optional weights, tree topology, warmstart, and solver
options.  Traces are CSV with a fixed header and 17-significant-digit floats
so golden files round-trip doubles losslessly; reports are JSON summaries.

Exit codes: 0 tolerance met, 2 tolerance not met within the sweep budget,
3 input error, 4 internal solver error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .geometry import (
    AffineSubspace,
    Ball,
    Box,
    Halfspace,
    Hyperplane,
    Polyhedron,
)
from .problem import MaxSweepsExceeded, Problem, SolveTrace, StoppingRule
from .dykstra import dykstra_solve, extended_dykstra_solve
from .product_space import (
    TreeNode,
    TreeTopology,
    simultaneous_dykstra_solve,
    tree_dykstra_solve,
)
from .apg import MaxIterationsExceeded, apg_solve, apg_threshold_index
from .polytope_qp import Infeasible, IterationLimit
from .diagnostics import optimality_gap, boundedness_monitor

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_INPUT_ERROR = 3
EXIT_SOLVER_ERROR = 4

ALGORITHMS = ("dykstra", "extended", "simultaneous", "tree", "apg")


class ParseError(Exception):
    """The problem file is not readable as JSON."""


class SchemaError(Exception):
    """The problem file violates the schema; the message names the field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DimensionMismatch(SchemaError):
    """A vector field has the wrong dimension."""


@dataclass
class RunOptions:
    """Solver options resolved from the problem file and CLI flags."""

    algorithm: str = "dykstra"
    tolerance: float = 1e-8
    dual_tolerance: float = 1e-10
    max_sweeps: int = 100_000
    buffer_capacity: int = 32
    shqp_schedule: Optional[List[int]] = None
    shqp_improve: bool = False
    warmstart: Optional[np.ndarray] = None
    random_warmstart: bool = False
    seed: Optional[int] = None
    epsilon: Optional[float] = None
    oracle: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    tree: Optional[TreeTopology] = None


def _vec(obj, path: str, n: Optional[int] = None) -> np.ndarray:
    if not isinstance(obj, list) or not all(isinstance(v, (int, float)) for v in obj):
        raise SchemaError(path, "expected a list of numbers")
    a = np.asarray(obj, dtype=float)
    if n is not None and a.shape[0] != n:
        raise DimensionMismatch(path, f"expected dimension {n}, got {a.shape[0]}")
    return a


def _parse_set(obj, path: str, n: int):
    if not isinstance(obj, dict) or "type" not in obj:
        raise SchemaError(path, "expected an object with a 'type' field")
    t = obj["type"]
    try:
        if t == "halfspace":
            return Halfspace(_vec(obj["normal"], f"{path}.normal", n), float(obj["offset"]))
        if t == "hyperplane":
            return Hyperplane(_vec(obj["normal"], f"{path}.normal", n), float(obj["offset"]))
        if t == "box":
            return Box(_vec(obj["lo"], f"{path}.lo", n), _vec(obj["hi"], f"{path}.hi", n))
        if t == "ball":
            return Ball(_vec(obj["center"], f"{path}.center", n), float(obj["radius"]))
        if t == "affine":
            dirs = obj["directions"]
            if not isinstance(dirs, list):
                raise SchemaError(f"{path}.directions", "expected a list of vectors")
            D = np.asarray(
                [_vec(v, f"{path}.directions[{i}]", n) for i, v in enumerate(dirs)], dtype=float
            )
            return AffineSubspace(_vec(obj["point"], f"{path}.point", n), D)
        if t == "polyhedron":
            hs = obj["halfspaces"]
            if not isinstance(hs, list) or not hs:
                raise SchemaError(f"{path}.halfspaces", "expected a nonempty list")
            return Polyhedron(
                tuple(
                    Halfspace(
                        _vec(h["normal"], f"{path}.halfspaces[{i}].normal", n),
                        float(h["offset"]),
                    )
                    for i, h in enumerate(hs)
                )
            )
    except KeyError as e:
        raise SchemaError(path, f"missing field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise SchemaError(path, str(e)) from None
    raise SchemaError(f"{path}.type", f"unknown set type {t!r}")


def _set_to_json(s) -> dict:
    if isinstance(s, Halfspace):
        return {"type": "halfspace", "normal": list(s.normal), "offset": s.offset}
    if isinstance(s, Hyperplane):
        return {"type": "hyperplane", "normal": list(s.normal), "offset": s.offset}
    if isinstance(s, Box):
        return {"type": "box", "lo": list(s.lo), "hi": list(s.hi)}
    if isinstance(s, Ball):
        return {"type": "ball", "center": list(s.center), "radius": s.radius}
    if isinstance(s, AffineSubspace):
        return {
            "type": "affine",
            "point": list(s.point),
            "directions": [list(r) for r in s.directions],
        }
    if isinstance(s, Polyhedron):
        return {"type": "polyhedron", "halfspaces": [_set_to_json(h) for h in s.halfspaces]}
    raise TypeError(f"cannot serialize set descriptor {type(s).__name__}")


def _parse_tree_node(obj, path: str, m: int) -> TreeNode:
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if "set" in obj:
        idx = obj["set"]
        if not isinstance(idx, int) or not (0 <= idx < m):
            raise SchemaError(f"{path}.set", f"expected a set index in [0, {m})")
        return TreeNode(set_index=idx)
    if "children" in obj:
        kids = obj["children"]
        if not isinstance(kids, list) or not kids:
            raise SchemaError(f"{path}.children", "expected a nonempty list")
        return TreeNode(
            children=tuple(
                _parse_tree_node(c, f"{path}.children[{i}]", m) for i, c in enumerate(kids)
            ),
            shqp=bool(obj.get("shqp", False)),
        )
    raise SchemaError(path, "expected either a 'set' leaf or a 'children' node")


def _tree_node_to_json(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"set": node.set_index}
    out = {"children": [_tree_node_to_json(c) for c in node.children]}
    if node.shqp:
        out["shqp"] = True
    return out


def load_problem(path: str):
    """Read a problem file; returns (Problem, RunOptions).

    Raises ParseError for unreadable JSON, SchemaError (with the offending
    field path) for schema violations, DimensionMismatch for wrong-sized
    vectors.
    """
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON in {path}: {e}") from None
    return parse_problem(doc)


def parse_problem(doc: dict):
    """Validate and construct a (Problem, RunOptions) pair from a JSON dict."""
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected a JSON object")
    if "point" not in doc:
        raise SchemaError("$.point", "missing")
    d = _vec(doc["point"], "$.point")
    n = int(doc.get("dimension", d.shape[0]))
    if d.shape[0] != n:
        raise DimensionMismatch("$.point", f"expected dimension {n}, got {d.shape[0]}")
    raw_sets = doc.get("sets")
    if not isinstance(raw_sets, list) or not raw_sets:
        raise SchemaError("$.sets", "expected a nonempty list")
    sets = tuple(_parse_set(s, f"$.sets[{i}]", n) for i, s in enumerate(raw_sets))
    m = len(sets)

    opts = RunOptions()
    if "weights" in doc:
        w = _vec(doc["weights"], "$.weights", m)
        if np.any(w <= 0) or abs(float(np.sum(w)) - 1.0) > 1e-12:
            raise SchemaError("$.weights", "weights must be positive and sum to one")
        opts.weights = w

    algorithm = doc.get("algorithm", "dykstra")
    if algorithm not in ALGORITHMS:
        raise SchemaError("$.algorithm", f"expected one of {ALGORITHMS}")
    opts.algorithm = algorithm

    if "tree" in doc:
        root = _parse_tree_node(doc["tree"], "$.tree", m)
        weights = opts.weights if opts.weights is not None else np.full(m, 1.0 / m)
        try:
            opts.tree = TreeTopology(root=root, weights=weights)
        except ValueError as e:
            raise SchemaError("$.tree", str(e)) from None

    raw_opts = doc.get("options", {})
    if not isinstance(raw_opts, dict):
        raise SchemaError("$.options", "expected an object")
    if "tolerance" in raw_opts:
        opts.tolerance = float(raw_opts["tolerance"])
    if "dual_tolerance" in raw_opts:
        opts.dual_tolerance = float(raw_opts["dual_tolerance"])
    if "max_sweeps" in raw_opts:
        opts.max_sweeps = int(raw_opts["max_sweeps"])
    if "buffer_capacity" in raw_opts:
        opts.buffer_capacity = int(raw_opts["buffer_capacity"])
    if "shqp_schedule" in raw_opts:
        sched = raw_opts["shqp_schedule"]
        if not isinstance(sched, list) or not all(isinstance(v, int) for v in sched):
            raise SchemaError("$.options.shqp_schedule", "expected a list of integers")
        opts.shqp_schedule = list(sched)
    if "shqp_improve" in raw_opts:
        opts.shqp_improve = bool(raw_opts["shqp_improve"])
    if "epsilon" in raw_opts:
        opts.epsilon = float(raw_opts["epsilon"])
    if "seed" in raw_opts:
        opts.seed = int(raw_opts["seed"])
    if "warmstart" in raw_opts:
        ws = raw_opts["warmstart"]
        if ws == "random":
            opts.random_warmstart = True
        else:
            opts.warmstart = _parse_warmstart(ws, "$.options.warmstart", m, n)
    if "oracle" in doc:
        opts.oracle = _vec(doc["oracle"], "$.oracle", n)
    return Problem(d=d, sets=sets, weights=opts.weights), opts


def _parse_warmstart(ws, path: str, m: int, n: int) -> np.ndarray:
    if not isinstance(ws, list) or len(ws) != m:
        raise SchemaError(path, f"expected {m} blocks")
    rows = []
    for i, row in enumerate(ws):
        v = _vec(row, f"{path}[{i}]", None)
        if v.shape[0] != n:
            raise DimensionMismatch(f"{path}[{i}]", f"block {i} has dimension {v.shape[0]}, expected {n}")
        rows.append(v)
    return np.asarray(rows)


def save_problem(problem: Problem, opts: RunOptions, path: str):
    """Serialize an instance back to the problem-file schema (round-trips)."""
    doc: Dict[str, object] = {
        "dimension": problem.n,
        "point": list(problem.d),
        "sets": [_set_to_json(s) for s in problem.sets],
        "algorithm": opts.algorithm,
    }
    if opts.weights is not None:
        doc["weights"] = list(opts.weights)
    if opts.tree is not None:
        doc["tree"] = _tree_node_to_json(opts.tree.root)
    if opts.oracle is not None:
        doc["oracle"] = list(opts.oracle)
    options: Dict[str, object] = {
        "tolerance": opts.tolerance,
        "dual_tolerance": opts.dual_tolerance,
        "max_sweeps": opts.max_sweeps,
        "buffer_capacity": opts.buffer_capacity,
    }
    if opts.shqp_schedule is not None:
        options["shqp_schedule"] = opts.shqp_schedule
    if opts.shqp_improve:
        options["shqp_improve"] = True
    if opts.epsilon is not None:
        options["epsilon"] = opts.epsilon
    if opts.seed is not None:
        options["seed"] = opts.seed
    if opts.random_warmstart:
        options["warmstart"] = "random"
    elif opts.warmstart is not None:
        options["warmstart"] = [list(r) for r in opts.warmstart]
    doc["options"] = options
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return format(float(v), ".17g")


def write_trace(trace: SolveTrace, path: str):
    """CSV trace: fixed header, one row per sweep, 17 significant digits."""
    n_blocks = max((len(np.atleast_1d(dy)) for dy in trace.block_change_norms), default=0)
    header = ["sweep", "h", "h_k", "primal_residual", "max_dual_norm", "v_monitor"] + [
        f"block_change_norm_{i + 1}" for i in range(n_blocks)
    ]
    lines = [",".join(header)]
    for j, sweep in enumerate(trace.sweeps):
        dy = list(np.atleast_1d(trace.block_change_norms[j]))
        dy += [math.nan] * (n_blocks - len(dy))
        row = [str(int(sweep)), _fmt(trace.h[j]), _fmt(trace.h_ext[j]), _fmt(trace.max_dist[j]),
               _fmt(trace.max_block_norm[j]), _fmt(trace.v_monitor[j])] + [_fmt(v) for v in dy]
        lines.append(",".join(row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _resolve_warmstart(problem: Problem, opts: RunOptions) -> Optional[np.ndarray]:
    if opts.random_warmstart:
        rng = np.random.default_rng(opts.seed)
        return rng.standard_normal((problem.m, problem.n))
    return opts.warmstart


def run(problem: Problem, opts: RunOptions, trace_out: Optional[str] = None,
        report_out: Optional[str] = None) -> int:
    """Dispatch to the selected solver; write trace/report; return exit code."""
    rule = StoppingRule(
        primal_tol=opts.tolerance, dual_tol=opts.dual_tolerance, max_sweeps=opts.max_sweeps
    )
    warmstart = _resolve_warmstart(problem, opts)
    x_star = opts.oracle
    converged = True
    try:
        if opts.algorithm == "dykstra":
            state, trace = dykstra_solve(problem, warmstart=warmstart, rule=rule, x_star=x_star)
        elif opts.algorithm == "extended":
            state, trace = extended_dykstra_solve(
                problem,
                warmstart=warmstart,
                rule=rule,
                buffer_capacity=opts.buffer_capacity,
                insertion_points=opts.shqp_schedule,
                x_star=x_star,
            )
        elif opts.algorithm == "simultaneous":
            state, trace = simultaneous_dykstra_solve(
                problem, weights=opts.weights, warmstart=warmstart, rule=rule, x_star=x_star
            )
        elif opts.algorithm == "tree":
            topo = opts.tree or TreeTopology.flat(problem.m, opts.weights)
            state, trace = tree_dykstra_solve(
                problem, topo, warmstart=warmstart, rule=rule,
                buffer_capacity=opts.buffer_capacity, x_star=x_star,
            )
        elif opts.algorithm == "apg":
            state, trace = apg_solve(
                problem, start=warmstart, rule=rule, shqp_improve=opts.shqp_improve
            )
        else:  # pragma: no cover - schema rejects unknown names earlier
            raise ValueError(f"unknown algorithm {opts.algorithm}")
    except (MaxSweepsExceeded, MaxIterationsExceeded) as e:
        state, trace = e.state, e.trace
        converged = False
    except (Infeasible, IterationLimit, ValueError) as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_SOLVER_ERROR

    if trace_out:
        write_trace(trace, trace_out)
    if report_out:
        report: Dict[str, object] = {
            "algorithm": opts.algorithm,
            "converged": converged,
            "sweeps": int(state.k),
            "primal": list(state.x),
            "h": float(trace.h[-1]) if trace.h else math.nan,
            "h_best": float(min(trace.h_ext)) if trace.h_ext else math.nan,
            "primal_residual": float(trace.max_dist[-1]) if trace.max_dist else math.nan,
        }
        if len(trace.sweeps) >= 2:
            report["dual_growth"] = bool(boundedness_monitor(trace).growth)
        if x_star is not None:
            report["optimality_gap"] = float(optimality_gap(problem, state.y[: problem.m], x_star))
        if opts.algorithm == "apg" and opts.epsilon is not None:
            start = warmstart if warmstart is not None else np.zeros((problem.m, problem.n))
            gap0 = float(np.linalg.norm(state.y[: problem.m] - start))
            report["apg_threshold_index"] = apg_threshold_index(
                float(problem.m), opts.epsilon, gap0
            )
        with open(report_out, "w") as f:
            json.dump(report, f, indent=2)
            f.write("\n")
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bapsolve",
        description="Project a point onto an intersection of convex sets.",
    )
    parser.add_argument("problem", help="problem file (JSON)")
    parser.add_argument("--algorithm", choices=ALGORITHMS, help="override the file's algorithm")
    parser.add_argument("--tolerance", type=float, help="primal feasibility tolerance")
    parser.add_argument("--max-sweeps", type=int, help="sweep/iteration budget")
    parser.add_argument("--buffer-capacity", type=int, help="halfspace buffer capacity")
    parser.add_argument(
        "--shqp-schedule",
        help="comma-separated block positions after which the buffer step runs (extended solver)",
    )
    parser.add_argument("--warmstart-file", help="JSON file with warmstart blocks")
    parser.add_argument("--seed", type=int, help="seed for the random warmstart")
    parser.add_argument("--trace-out", help="CSV trace output path")
    parser.add_argument("--report-out", help="JSON report output path")
    args = parser.parse_args(argv)

    try:
        problem, opts = load_problem(args.problem)
        if args.algorithm:
            opts.algorithm = args.algorithm
        if args.tolerance is not None:
            opts.tolerance = args.tolerance
        if args.max_sweeps is not None:
            opts.max_sweeps = args.max_sweeps
        if args.buffer_capacity is not None:
            opts.buffer_capacity = args.buffer_capacity
        if args.shqp_schedule is not None:
            try:
                opts.shqp_schedule = [int(v) for v in args.shqp_schedule.split(",") if v]
            except ValueError:
                raise SchemaError("--shqp-schedule", "expected comma-separated integers")
        if args.seed is not None:
            opts.seed = args.seed
        if args.warmstart_file is not None:
            try:
                with open(args.warmstart_file) as f:
                    ws = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise ParseError(f"cannot read warmstart file: {e}")
            opts.warmstart = _parse_warmstart(ws, "warmstart-file", problem.m, problem.n)
            opts.random_warmstart = False
    except (ParseError, SchemaError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    return run(problem, opts, trace_out=args.trace_out, report_out=args.report_out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
