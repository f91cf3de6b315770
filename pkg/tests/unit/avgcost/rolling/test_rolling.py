import numpy as np
import pytest

from avgcost.errors import RollingHorizonError
from avgcost.mdp import StationaryPolicy
from avgcost.rolling import (RollingHorizonRecord, RollingHorizonReport, evaluate_rolling_horizon, extract_policy,
                             rolling_bound, stabilization_threshold)
from avgcost.solvers import H2Certificate, StopRule, check_h2, fit_envelope, value_iteration


def cert(theta1, theta2=1.0):
    return H2Certificate(theta1=theta1, theta2=theta2, slack=np.zeros(1))


@pytest.fixture
def m2_trace(m2):
    return value_iteration(m2, 4 / 3, np.zeros(2), StopRule(snapshot_every=1))


def test_stabilization_threshold():
    assert stabilization_threshold(cert(0.5), 1.0) == 2
    assert stabilization_threshold(cert(0.999), 0.0) == 1
    assert stabilization_threshold(cert(0.9), 0.0) == 1
    assert stabilization_threshold(cert(0.1), 0.0) == 22


def test_rolling_bound():
    assert rolling_bound(4 / 3, cert(0.5), 1.0, 0) is None
    assert rolling_bound(4 / 3, cert(0.5), 1.0, 1) is None
    assert rolling_bound(4 / 3, cert(0.5), 1.0, 2) == pytest.approx(4 / 3 + 1.125 * (7 / 3) / 0.125)
    # the bound decreases towards beta + (beta + theta2) / theta1
    bounds = [rolling_bound(4 / 3, cert(0.5), 1.0, n) for n in range(2, 60)]
    assert all(a > b for a, b in zip(bounds, bounds[1:]))
    assert bounds[-1] == pytest.approx(4 / 3 + (7 / 3) / 0.5)


def test_extract_policy(m2_trace):
    assert extract_policy(m2_trace, 0).choice == (0, 1)
    assert extract_policy(m2_trace, 1).choice == (0, 0)
    with pytest.raises(RollingHorizonError):
        extract_policy(m2_trace, len(m2_trace))
    with pytest.raises(RollingHorizonError):
        extract_policy(m2_trace, -1)


def test_rolling_horizon_on_m2(m2, m2_vstar, m2_trace):
    certificate = check_h2(m2, m2_vstar)
    fit = fit_envelope(m2_trace, m2_vstar, certificate)
    report = evaluate_rolling_horizon(m2, m2_trace, None, 4 / 3, certificate, fit.c0_hat)
    assert [r.n for r in report.records] == list(range(len(m2_trace)))
    assert report.records[0].beta_n == pytest.approx(5 / 3)
    assert report.records[0].gap == pytest.approx(1 / 3)
    assert all(r.gap == pytest.approx(0.0, abs=1e-12) for r in report.records[1:])
    assert report.lock_in == 1
    assert report.bound_violations == []
    assert report.multichain == []
    assert report.n0 == stabilization_threshold(certificate, fit.c0_hat)

    df = report.to_frame(m2)
    assert list(df.columns) == ['n', 'beta_n', 'bound', 'gap', 'unichain', 'policy']
    assert df.policy.tolist()[:2] == ['a b', 'a a']


def test_rolling_horizon_subset_in_parallel(m2, m2_vstar, m2_trace):
    certificate = check_h2(m2, m2_vstar)
    report = evaluate_rolling_horizon(m2, m2_trace, [3, 0, 3], 4 / 3, certificate, 1.0, parallel_jobs=2)
    assert [r.n for r in report.records] == [0, 3]
    assert [r.policy.choice for r in report.records] == [(0, 1), (0, 0)]


def test_beta_above_a_policy_cost_is_rejected(m2, m2_vstar, m2_trace):
    with pytest.raises(RollingHorizonError, match="below the optimal"):
        evaluate_rolling_horizon(m2, m2_trace, [1], 2.0, check_h2(m2, m2_vstar), 1.0)


def _record(n, gap, unichain=True, bound=None):
    return RollingHorizonRecord(n=n, policy=StationaryPolicy.deterministic([0]), unichain=unichain,
                                beta_n=1 + gap, bound=bound, gap=gap)


def test_lock_in_skips_multichain_records():
    report = RollingHorizonReport(beta=1.0, certificate=cert(0.5), cbar0=1.0, records=[
        _record(0, 0.3), _record(1, 0.0), _record(2, 0.2), _record(3, 0.5, unichain=False), _record(4, 0.0),
    ])
    assert report.lock_in == 4
    assert report.multichain == [3]

    report.records.append(_record(5, 0.1))
    assert report.lock_in is None


def test_bound_violations():
    report = RollingHorizonReport(beta=1.0, certificate=cert(0.5), cbar0=1.0, records=[
        _record(2, 0.5, bound=1.2), _record(3, 0.5, bound=2.0), _record(4, 0.5, unichain=False, bound=1.0),
    ])
    assert report.bound_violations == [2]
