from __future__ import annotations

import math

import numpy as np
import pytest

from bapsolver import (
    Ball,
    Halfspace,
    MaxIterationsExceeded,
    Problem,
    StoppingRule,
    apg_solve,
    apg_threshold_index,
    dual_objective,
    prox_support,
    theta_schedule_next,
)

from conftest import inf_dual, qp_oracle, random_halfspace_instance, two_orthogonal_halfspaces


def _run_iters(problem, iters, **kwargs):
    rule = StoppingRule(primal_tol=1e-300, dual_tol=1e-300, max_sweeps=iters)
    try:
        return apg_solve(problem, rule=rule, **kwargs)
    except MaxIterationsExceeded as e:
        return e.state, e.trace


def test_theta_schedule_first_step_and_global_bound() -> None:
    theta = theta_schedule_next(1.0)
    assert theta == pytest.approx((math.sqrt(5.0) - 1.0) / 2.0)
    t = 1.0
    for k in range(1, 1001):
        t = theta_schedule_next(t)
        assert 0.0 < t <= 2.0 / (k + 2.0) + 1e-15
        # equality recurrence: (1-t) t_prev^2-free check via the defining identity
    # the schedule solves theta_next^2 = (1 - theta_next) * theta^2
    a = 0.37
    b = theta_schedule_next(a)
    assert b * b == pytest.approx((1.0 - b) * a * a, abs=1e-14)


def test_prox_of_support_function_moreau_identity() -> None:
    s = Halfspace(np.array([1.0, 0.0]), 0.0)
    u = np.array([3.0, -2.0])
    t = 0.5
    # u = prox_{t*support}(u) + t * P(u/t) splits u across the pair
    p = prox_support(s, u, t)
    from bapsolver import project_point_any

    assert np.allclose(p + t * project_point_any(s, u / t), u, atol=1e-12)
    # for the halfspace through 0, the prox keeps the normal component only
    assert np.allclose(p, [3.0, 0.0])


def test_single_ball_converges_to_radial_projection() -> None:
    p = Problem(d=np.array([3.0, 4.0]), sets=(Ball(np.array([0.0, 0.0]), 1.0),))
    state, trace = apg_solve(p, rule=StoppingRule(primal_tol=1e-10, dual_tol=1e-8))
    assert trace.converged
    assert np.allclose(state.x, [0.6, 0.8], atol=1e-8)
    assert min(trace.h_ext) == pytest.approx(inf_dual(p, np.array([0.6, 0.8])), abs=1e-10)


def test_running_minimum_is_monotone_and_below_current(rng) -> None:
    p = random_halfspace_instance(rng, n=3, m=3)
    _, trace = _run_iters(p, 200)
    best = trace.h_ext
    assert all(best[i] <= best[i - 1] + 1e-15 for i in range(1, len(best)))
    assert all(b <= h + 1e-15 for b, h in zip(best, trace.h))


def test_two_halfspace_guarantee_at_threshold_index() -> None:
    p = two_orthogonal_halfspaces()
    y_star = np.array([[1.0, 0.0], [0.0, 1.0]])
    h_star = dual_objective(p, y_star)
    assert h_star == pytest.approx(0.0, abs=1e-15)
    gap0 = float(np.linalg.norm(y_star))  # start is zero blocks
    for eps in (1e-2, 1e-4):
        k = apg_threshold_index(2.0, eps, gap0)
        _, trace = _run_iters(p, k)
        assert min(trace.h_ext) <= h_star + eps


def test_refined_variant_matches_and_never_trails(rng) -> None:
    p = random_halfspace_instance(rng, n=3, m=3)
    iters = 150
    _, plain = _run_iters(p, iters)
    _, refined = _run_iters(p, iters, shqp_improve=True)
    assert min(refined.h_ext) <= min(plain.h_ext) + 1e-9
    x_star = qp_oracle(p)
    assert np.allclose(refined.primal[-1], x_star, atol=1e-5)


def test_start_must_be_dual_feasible() -> None:
    p = two_orthogonal_halfspaces()
    with pytest.raises(ValueError):
        apg_solve(p, start=np.array([[-1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        apg_solve(p, start=np.zeros((3, 2)))


def test_threshold_index_formula() -> None:
    assert apg_threshold_index(2.0, 1e-2, 0.0) == 0
    assert apg_threshold_index(2.0, 1e-2, math.sqrt(2.0)) == math.ceil(
        math.sqrt(800.0) * math.sqrt(2.0) - 2.0
    )
    with pytest.raises(ValueError):
        apg_threshold_index(2.0, 0.0, 1.0)
