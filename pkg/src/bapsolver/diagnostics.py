"""Runtime certificates for the solvers' convergence guarantees.

Everything here is read-only analysis over solve traces: closed-form rate
bounds for sequences obeying the descent recurrence a_{k-1} >= a_k + alpha *
a_k^2, envelope checks that instantiate the recurrence with measured
constants, the dual optimality gap against a known projection, a divergence
monitor for the dual block norms, and the inner-step descent monitor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .dykstra import _growth_flag, dual_objective
from .problem import Problem, SolveTrace


class RateBound(NamedTuple):
    """A bound value plus whether the hypotheses backing it were satisfied."""

    value: float
    hypothesis_ok: bool


@dataclass
class RateCertificate:
    """Per-index audit of the descent recurrence a_{k-1} >= a_k + alpha*a_k^2.

    ``recurrence_ok[k]`` covers the step from index k-1 to k; ``bounds`` holds
    the evaluated closed-form envelope at each index (nan where undefined).
    """

    alpha: float
    values: List[float]
    recurrence_ok: List[bool]
    bounds: List[float]

    @property
    def all_ok(self) -> bool:
        return all(self.recurrence_ok)


def rate_certificate(values: Sequence[float], alpha: float, tol: float = 1e-12) -> RateCertificate:
    """Audit a nonnegative sequence against the descent recurrence."""
    vals = [float(v) for v in values]
    ok = [True]
    for k in range(1, len(vals)):
        ok.append(vals[k - 1] >= vals[k] + alpha * vals[k] ** 2 - tol)
    bounds = [math.nan] + [1.5 / (alpha * k) for k in range(1, len(vals))]
    return RateCertificate(alpha=alpha, values=vals, recurrence_ok=ok, bounds=bounds)


def rate_bound_harmonic(a1: float, a2: float, alpha: float, k: int) -> RateBound:
    """O(1/k) bound 1.5/(alpha*k) for recurrence-obeying sequences.

    Valid when the first two terms are small enough (a1 <= 1.5/alpha and
    a2 <= 1.5/(2*alpha)); the value is returned regardless, with
    ``hypothesis_ok`` recording whether those premises held.
    """
    if alpha <= 0 or k < 1:
        raise ValueError("alpha must be positive and k >= 1")
    hyp = (a1 <= 1.5 / alpha + 1e-15) and (a2 <= 1.5 / (2.0 * alpha) + 1e-15)
    return RateBound(value=1.5 / (alpha * k), hypothesis_ok=bool(hyp))


def rate_bound_mixed(a0: float, alpha: float, k: int) -> float:
    """Two-phase bound: geometric halving early, O(1/k) afterwards.

    Returns max{(1/2)^((k-1)/2) * a0, 4/(alpha*(k-1))} for k >= 2.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if k < 2:
        raise ValueError("the bound is defined for k >= 2")
    return max(0.5 ** ((k - 1) / 2.0) * a0, 4.0 / (alpha * (k - 1)))


def rate_threshold_index(a0: float, alpha: float, eps: float) -> int:
    """Smallest k guaranteeing a_k <= eps under the mixed bound.

    Evaluates max{2/ln(2) * (ln(a0) + ln(1/eps)), 4/(alpha*eps)} + 1, rounded
    up to an integer.
    """
    if alpha <= 0 or eps <= 0 or a0 <= 0:
        raise ValueError("a0, alpha, eps must be positive")
    t1 = 2.0 / math.log(2.0) * (math.log(a0) + math.log(1.0 / eps))
    t2 = 4.0 / (alpha * eps)
    return int(math.ceil(max(t1, t2) + 1.0))


@dataclass
class EnvelopeReport:
    """Result of auditing a solve trace against the measured-constant rate."""

    alpha: float
    vacuous: bool
    gaps: List[float]
    recurrence_ok: List[bool]
    envelope_ok: List[bool]

    @property
    def all_ok(self) -> bool:
        return self.vacuous or (all(self.recurrence_ok) and all(self.envelope_ok))


def am_rate_envelope(
    trace: SolveTrace,
    h_star: float,
    m: int,
    M: float,
    mu: float = 1.0,
    L: Optional[float] = None,
    extended: bool = False,
    rtol: float = 1e-9,
) -> EnvelopeReport:
    """Audit per-sweep dual gaps against the measured-constant descent rate.

    The descent constant is mu / (2*(m-1)^3 * M^2 * L^2) for the cyclic
    solver and mu / (2*m^3 * M^2 * L^2) for the extended one, with L
    defaulting to m and M the measured over-the-run radius of the dual blocks
    around a reference minimizer.  With m = 1 the cyclic constant degenerates
    and the audit is reported vacuous (a single block converges in one
    sweep).
    """
    L = float(m) if L is None else float(L)
    if not extended and m <= 1:
        return EnvelopeReport(alpha=math.inf, vacuous=True, gaps=[], recurrence_ok=[], envelope_ok=[])
    if M <= 0 or L <= 0 or mu <= 0:
        raise ValueError("mu, M, L must be positive")
    denom = (m**3 if extended else (m - 1) ** 3) * M * M * L * L
    alpha = mu / (2.0 * denom)
    hs = trace.h_ext if extended else trace.h
    gaps = [float(h) - float(h_star) for h in hs]
    scale = max(1.0, max((abs(g) for g in gaps), default=1.0))
    if any(g < -rtol * scale for g in gaps):
        raise ValueError("h_star exceeds observed dual values; inconsistent inputs")
    rec = [True]
    env = [True]
    for k in range(1, len(gaps)):
        rec.append(gaps[k - 1] >= gaps[k] + alpha * gaps[k] ** 2 - rtol * scale)
        if k >= 2:
            env.append(gaps[k] <= rate_bound_mixed(max(gaps[0], 0.0), alpha, k) + rtol * scale)
        else:
            env.append(True)
    return EnvelopeReport(alpha=alpha, vacuous=False, gaps=gaps, recurrence_ok=rec, envelope_ok=env)


def optimality_gap(problem: Problem, y, x_star) -> float:
    """Dual value minus its exact infimum for a known projection point.

    The infimum of the dual is 0.5*||d||^2 - 0.5*||d - x_star||^2, so the gap
    is nonnegative up to roundoff for any blocks y.
    """
    d = problem.d
    x_star = np.asarray(x_star, dtype=float)
    inf_h = 0.5 * float(d @ d) - 0.5 * float((d - x_star) @ (d - x_star))
    return dual_objective(problem, np.asarray(y, dtype=float)) - inf_h


@dataclass
class BoundednessReport:
    """Dual-norm series with a divergence flag.

    The flag fires only when the latest per-sweep max block norm has grown
    tenfold beyond the early-run floor and is still climbing across the
    trailing window — the signature of a run without a dual minimizer.
    """

    norms: List[float]
    growth: bool


def boundedness_monitor(trace: SolveTrace) -> BoundednessReport:
    """Audit the per-sweep max dual block norms for divergence."""
    if len(trace.sweeps) < 2:
        raise ValueError("the monitor needs at least two recorded sweeps")
    norms = [float(v) for v in trace.max_block_norm]
    return BoundednessReport(norms=norms, growth=_growth_flag(norms))


@dataclass
class InnerMonitor:
    """Per-inner-step descent monitor values and step-change magnitudes.

    ``v`` is defined from the first index with a full window of corrections;
    it is non-increasing and dominates half the squared distance to the
    target along exact arithmetic.
    """

    start: int
    v: List[float]
    half_sq_dist: List[float]
    step_changes_sq: List[float]


def inner_monitor(trace: SolveTrace, x_star, blocks_per_sweep: int) -> InnerMonitor:
    """Compute the inner-step monitor from a trace recorded with inner steps.

    Parameters
    ----------
    trace : SolveTrace
        Must carry ``inner_x``/``inner_e`` entries (solver run with
        ``record_inner=True``).
    x_star : array_like
        The true projection of d (oracle instances).
    blocks_per_sweep : int
        Number of block updates per sweep; the monitor's correction window.
    """
    if not trace.inner_x:
        raise ValueError("trace has no inner-step records")
    x_star = np.asarray(x_star, dtype=float)
    B = int(blocks_per_sweep)
    xs = trace.inner_x
    es = trace.inner_e
    half = [0.5 * float(np.sum((x - x_star) ** 2)) for x in xs]
    v: List[float] = []
    for i in range(B - 1, len(xs)):
        corr = sum(float(es[l] @ (xs[l] - x_star)) for l in range(i - B + 1, i + 1))
        v.append(half[i] + corr)
    steps = [
        float(np.sum((xs[i] - xs[i - 1]) ** 2)) for i in range(1, len(xs))
    ]
    return InnerMonitor(start=B - 1, v=v, half_sq_dist=half[B - 1 :], step_changes_sq=steps)


def dual_change_budget(h_start: float, h_min: float) -> float:
    """Total budget for the summed squared dual-block changes of a run.

    Each sweep's dual decrease dominates half the sweep's squared block
    changes, so the accumulated squared changes are bounded by twice the
    total decrease available from the starting value.
    """
    return 2.0 * (float(h_start) - float(h_min))
