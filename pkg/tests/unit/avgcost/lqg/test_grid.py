import numpy as np
import pytest

from avgcost.errors import LqgModelError
from avgcost.lqg import LqgModel, Query, build_variance_grid_mdp, covariance_operator, solve_riccati
from avgcost.mdp import StationaryPolicy, apply_kernel
from avgcost.oracles import optimal_average_cost_lp
from avgcost.solvers import (StopRule, difference_identity_gap, ensure_converged, rvi_anchor, rvi_min,
                             value_iteration)


def test_scalar_demo_grid(scalar_lqg):
    grid = build_variance_grid_mdp(scalar_lqg, solve_riccati(scalar_lqg))
    assert grid.mdp.n_states == 101
    assert grid.spacing == pytest.approx(0.05)
    assert grid.sigma_max == 5.0
    assert grid.sigma_star == pytest.approx(0.6180339887, rel=1e-9)
    assert grid.smallset.B == (12,)
    assert grid.mdp.action_sets[0] == ('sense',)
    assert not grid.mdp.violations
    assert grid.warnings == ()

    report = optimal_average_cost_lp(grid.mdp, nu=grid.smallset)
    assert report.beta == pytest.approx(0.1 + 0.6, abs=1e-12)
    trace = ensure_converged(rvi_min(grid.mdp, np.zeros(grid.mdp.n_states)))
    assert abs(trace.offset - report.beta) < 1e-8


def test_grid_nearest_and_interpolation(scalar_lqg):
    grid = build_variance_grid_mdp(scalar_lqg, solve_riccati(scalar_lqg), sigma_max=1.0, n_points=11)
    assert grid.nearest(0.62) == 6
    assert grid.nearest(np.array([[7.0]])) == 10
    assert grid.nearest(-0.3) == 0
    f = grid.interpolate(np.arange(11.0))
    assert f(0.25) == pytest.approx(2.5)


def test_always_lost_observations_saturate_at_the_cap():
    lqg = LqgModel(A=1.0, B=1.0, D=[[1.0, 0.0]], R=1.0, M=1.0,
                   queries=(Query(C=1.0, F=[[0.0, 1.0]], loss=1.0, cost=0.1),))
    grid = build_variance_grid_mdp(lqg, solve_riccati(lqg))
    assert grid.smallset.B == (100,)
    assert len(grid.warnings) == 2
    report = optimal_average_cost_lp(grid.mdp, nu=grid.smallset)
    assert report.beta == pytest.approx(0.1 + 5.0, abs=1e-12)


def test_two_query_schedule_is_no_worse_than_a_single_query(two_query_lqg):
    riccati = solve_riccati(two_query_lqg)
    grid = build_variance_grid_mdp(two_query_lqg, riccati)
    assert grid.mdp.action_sets[0] == ('lossy', 'reliable')
    assert grid.smallset.B == (12,)
    report = optimal_average_cost_lp(grid.mdp, nu=grid.smallset)
    reliable_only = LqgModel(A=1.0, B=1.0, D=[[1.0, 0.0]], R=1.0, M=1.0, queries=two_query_lqg.queries[1:])
    single = optimal_average_cost_lp(build_variance_grid_mdp(reliable_only, solve_riccati(reliable_only)).mdp)
    assert single.beta == pytest.approx(0.5 + 0.6, abs=1e-12)
    assert report.beta <= single.beta + 1e-12
    trace = ensure_converged(rvi_min(grid.mdp, np.zeros(grid.mdp.n_states)))
    assert abs(trace.offset - report.beta) < 1e-8


def test_grid_requires_a_scalar_plant():
    lqg = LqgModel(A=np.eye(2) * 0.5, B=np.eye(2), D=np.hstack([np.eye(2), np.zeros((2, 1))]),
                   R=np.eye(2), M=np.eye(2),
                   queries=(Query(C=[[1.0, 0.0]], F=[[0.0, 0.0, 1.0]], loss=0.0, cost=1.0),))
    with pytest.raises(LqgModelError, match="scalar"):
        build_variance_grid_mdp(lqg, solve_riccati(lqg))


def test_invalid_grid(scalar_lqg):
    with pytest.raises(ValueError):
        build_variance_grid_mdp(scalar_lqg, solve_riccati(scalar_lqg), n_points=1)


def test_covariance_operator_agrees_with_the_grid_kernel(two_query_lqg):
    riccati = solve_riccati(two_query_lqg)
    grid = build_variance_grid_mdp(two_query_lqg, riccati)
    n = grid.mdp.n_states
    pi_tilde = float(riccati.pi_tilde[0, 0])
    for k in range(2):
        # the running cost c(q) + pi_tilde.sigma, linear in sigma
        values = np.array([grid.mdp.c[i, k] for i in range(n)])
        on_grid = apply_kernel(grid.mdp, StationaryPolicy.deterministic([k] * n), values).values
        exact = np.array([covariance_operator(two_query_lqg, k, grid.interpolate(values), sigma,
                                              sigma_max=grid.sigma_max)
                          for sigma in grid.grid])
        assert np.abs(on_grid - exact).max() <= pi_tilde * grid.spacing


@pytest.mark.parametrize("lqg", ['scalar_lqg', 'two_query_lqg'])
def test_grid_vi_and_anchored_rvi_differ_by_a_constant(lqg, request):
    lqg = request.getfixturevalue(lqg)
    grid = build_variance_grid_mdp(lqg, solve_riccati(lqg))
    report = optimal_average_cost_lp(grid.mdp, nu=grid.smallset)
    stop = StopRule(max_iters=100, span_tol=0.0, snapshot_every=1)
    v0 = np.zeros(grid.mdp.n_states)
    vi = value_iteration(grid.mdp, report.beta, v0, stop)
    rvi = rvi_anchor(grid.mdp, 0, v0, stop)
    assert difference_identity_gap(vi, rvi, [1, 10, 100]) < 1e-10
