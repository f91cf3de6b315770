import numpy as np
import pytest

from avgcost.errors import InstabilityError
from avgcost.lqg import (LqgModel, Query, build_variance_grid_mdp, simulate_closed_loop, simulate_many,
                         solve_riccati)
from avgcost.oracles import optimal_average_cost_lp


@pytest.fixture
def scalar_demo(scalar_lqg):
    riccati = solve_riccati(scalar_lqg)
    grid = build_variance_grid_mdp(scalar_lqg, riccati)
    return scalar_lqg, riccati, grid, optimal_average_cost_lp(grid.mdp, nu=grid.smallset)


def test_same_seed_same_run(scalar_demo):
    lqg, riccati, grid, report = scalar_demo
    first = simulate_closed_loop(lqg, riccati, report.policy, 5000, seed=3, grid=grid)
    again = simulate_closed_loop(lqg, riccati, report.policy, 5000, seed=3, grid=grid)
    other = simulate_closed_loop(lqg, riccati, report.policy, 5000, seed=4, grid=grid)
    np.testing.assert_array_equal(first.costs, again.costs)
    assert not np.array_equal(first.costs, other.costs)


def test_scalar_and_matrix_paths_agree(two_query_lqg):
    riccati = solve_riccati(two_query_lqg)
    grid = build_variance_grid_mdp(two_query_lqg, riccati)
    policy = optimal_average_cost_lp(grid.mdp, nu=grid.smallset).policy
    fast = simulate_closed_loop(two_query_lqg, riccati, policy, 3000, seed=11, grid=grid, fast=True)
    slow = simulate_closed_loop(two_query_lqg, riccati, policy, 3000, seed=11, grid=grid, fast=False)
    np.testing.assert_array_equal(fast.queries, slow.queries)
    np.testing.assert_array_equal(fast.gammas, slow.gammas)
    np.testing.assert_allclose(fast.plant_costs, slow.plant_costs, rtol=1e-8, atol=1e-10)


def test_result_frame(scalar_demo):
    lqg, riccati, grid, report = scalar_demo
    result = simulate_closed_loop(lqg, riccati, report.policy, 1000, seed=1, grid=grid, batches=10)
    assert result.horizon == 1000
    assert result.running_average[-1] == pytest.approx(result.average)
    assert np.isfinite(result.standard_error)
    df = result.to_frame(every=100)
    assert list(df.columns) == ['t', 'query', 'gamma', 'plant_cost', 'query_cost', 'running_avg']
    assert df.t.tolist() == list(range(0, 1000, 100))
    assert set(df['query']) == {'sense'}
    assert (df.query_cost == 0.1).all()


def test_standard_error_needs_batches(scalar_demo):
    lqg, riccati, grid, report = scalar_demo
    result = simulate_closed_loop(lqg, riccati, report.policy, 10, seed=1, grid=grid, batches=100)
    assert np.isnan(result.standard_error)


def test_grid_policy_requires_the_grid(scalar_demo):
    lqg, riccati, grid, report = scalar_demo
    with pytest.raises(ValueError, match="requires the variance grid"):
        simulate_closed_loop(lqg, riccati, report.policy, 10, seed=1)


def test_unstable_open_loop_blows_up():
    lqg = LqgModel(A=2.0, B=1.0, D=[[1.0, 0.0]], R=1.0, M=1.0,
                   queries=(Query(C=1.0, F=[[0.0, 1.0]], loss=1.0, cost=1.0),))
    riccati = solve_riccati(lqg)
    with pytest.raises(InstabilityError):
        simulate_closed_loop(lqg, riccati, lambda sigma: 0, 10_000, seed=5, blowup=1e3)


def test_simulate_many_keeps_the_seed_order(scalar_demo):
    lqg, riccati, grid, report = scalar_demo
    results = simulate_many(lqg, riccati, report.policy, 500, seeds=[9, 2, 5], parallel_jobs=3, grid=grid)
    assert [r.seed for r in results] == [9, 2, 5]
    np.testing.assert_array_equal(results[1].costs,
                                  simulate_closed_loop(lqg, riccati, report.policy, 500, seed=2, grid=grid).costs)


def _within_allowance(result, riccati, grid, beta):
    target = beta + riccati.offset
    allowance = 3 * result.standard_error + float(np.trace(riccati.pi_tilde)) * grid.spacing
    return abs(result.average - target) <= allowance


def test_monte_carlo_matches_the_grid_optimum(scalar_demo):
    lqg, riccati, grid, report = scalar_demo
    result = simulate_closed_loop(lqg, riccati, report.policy, 200_000, seed=2024, grid=grid)
    assert _within_allowance(result, riccati, grid, report.beta)


@pytest.mark.slow
def test_monte_carlo_over_a_million_steps(scalar_demo):
    lqg, riccati, grid, report = scalar_demo
    result = simulate_closed_loop(lqg, riccati, report.policy, 10**6, seed=1, grid=grid)
    assert _within_allowance(result, riccati, grid, report.beta)
