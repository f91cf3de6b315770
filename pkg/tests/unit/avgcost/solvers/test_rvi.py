import numpy as np
import pytest

from avgcost.oracles import optimal_average_cost_lp
from avgcost.solvers import StopRule, ensure_converged, rvi_anchor, rvi_min, rvi_nu
from avgcost.splitchain import SmallSetSpec

from conftest import hub_smallset, random_unichain


def test_rvi_nu_on_m2(m2, m2_smallset, m2_vstar):
    trace = ensure_converged(rvi_nu(m2, m2_smallset, np.zeros(2)))
    assert trace.method == 'rvi_nu'
    assert abs(trace.offset - 4 / 3) < 1e-9
    np.testing.assert_allclose(trace.final.values, m2_vstar, atol=1e-9)
    assert trace.offsets[0] == 0.0
    assert trace.selector(len(trace) - 1).choice == (0, 0)


@pytest.mark.parametrize("solve", [
    lambda m, s: rvi_nu(m, s.nu, np.zeros(2)),
    lambda m, s: rvi_min(m, np.zeros(2)),
    lambda m, s: rvi_anchor(m, 0, np.zeros(2), small_set=s),
])
def test_rvi_variants_agree_on_m2(m2, m2_smallset, m2_vstar, solve):
    trace = ensure_converged(solve(m2, m2_smallset))
    assert trace.offset == pytest.approx(4 / 3, abs=1e-9)
    np.testing.assert_allclose(trace.final.values, m2_vstar, atol=1e-9)


def test_rvi_offsets_on_a_constant_cost_chain(constant_cost):
    trace = rvi_nu(constant_cost, [1.0], [0.0])
    assert trace.converged
    assert trace.offsets.tolist() == [0.0, 3.0]
    assert trace.offset == 3.0
    assert trace.final.values.tolist() == [3.0]


def test_rvi_anchor_rejections(m2, m2_smallset):
    with pytest.raises(ValueError, match="out of range"):
        rvi_anchor(m2, 2, np.zeros(2))
    with pytest.raises(ValueError, match="not in the small set"):
        rvi_anchor(m2, 1, np.zeros(2), small_set=m2_smallset)
    assert rvi_anchor(m2, 1, np.zeros(2)).converged


def test_rvi_nu_requires_a_probability(m2):
    with pytest.raises(ValueError):
        rvi_nu(m2, [0.5, 0.6], np.zeros(2))
    with pytest.raises(ValueError):
        rvi_nu(m2, [1.0, 0.0, 0.0], np.zeros(2))


def test_rvi_stops_at_max_iters(m2, m2_smallset):
    trace = rvi_nu(m2, m2_smallset, np.zeros(2), StopRule(max_iters=2))
    assert not trace.converged
    assert len(trace.offsets) == 2


def test_rvi_offset_matches_lp_on_random_unichains(random_unichains):
    for m, s in random_unichains:
        lp = optimal_average_cost_lp(m, nu=s)
        trace = ensure_converged(rvi_nu(m, s, np.zeros(m.n_states)))
        assert abs(trace.offset - lp.beta) < 1e-8
        np.testing.assert_allclose(trace.final.values, lp.value.values, atol=1e-7)
        assert abs(ensure_converged(rvi_min(m, np.zeros(m.n_states))).offset - lp.beta) < 1e-8


def test_rvi_on_a_wider_small_set(m2):
    s = SmallSetSpec(B=(0, 1), nu=[0.5, 0.5], delta=0.2)
    trace = ensure_converged(rvi_nu(m2, s, np.zeros(2)))
    assert trace.offset == pytest.approx(4 / 3, abs=1e-9)
    assert float(s.nu @ trace.final.values) == pytest.approx(4 / 3, abs=1e-9)


@pytest.mark.stress
def test_rvi_on_larger_random_models():
    gen = np.random.default_rng(7)
    for _ in range(20):
        m = random_unichain(gen, n_states=40, n_actions=5)
        s = hub_smallset(m)
        lp = optimal_average_cost_lp(m, nu=s)
        trace = ensure_converged(rvi_nu(m, s, np.zeros(m.n_states)))
        assert abs(trace.offset - lp.beta) < 1e-8
