import numpy as np
import pytest

from avgcost.errors import AvgCostError, H2Error
from avgcost.oracles import optimal_average_cost_lp
from avgcost.solvers import (EnvelopeFit, StopRule, acoe_residual, check_h2, envelope_violations, fit_envelope,
                             h1_diagnostic, validate_h2, value_iteration)


def test_acoe_residual(m2, m2_vstar):
    assert acoe_residual(m2, m2_vstar, 4 / 3) < 1e-12
    assert acoe_residual(m2, [0.0, 0.0], 4 / 3) == pytest.approx(5 / 3)


def test_validate_h2_slack(m2, m2_vstar):
    cert = validate_h2(m2, m2_vstar, 0.5, 1.0)
    np.testing.assert_allclose(cert.slack, [4 / 3, 5 / 3])
    assert cert.rho == 0.5


def test_validate_h2_failures(m2, m2_vstar):
    with pytest.raises(H2Error, match="fails at state 1"):
        validate_h2(m2, m2_vstar, 0.999, 0.0)
    with pytest.raises(H2Error, match="must lie in"):
        validate_h2(m2, m2_vstar, 1.0, 5.0)


def test_check_h2_takes_the_largest_grid_value(m2, m2_vstar):
    cert = check_h2(m2, m2_vstar)
    assert cert.theta1 == 0.999
    assert cert.theta2 == pytest.approx(0.999 * 14 / 3 - 3)
    assert cert.slack.min() == pytest.approx(0.0, abs=1e-12)
    assert check_h2(m2, m2_vstar, grid=[0.2, 0.7]).theta1 == 0.7


def test_check_h2_fails_on_unbounded_fields(m2):
    with pytest.raises(H2Error):
        check_h2(m2, [np.inf, 0.0])


def test_h1_diagnostic(m2, m2_vstar, m2_optimal):
    assert h1_diagnostic(m2, m2_optimal, m2_vstar) == pytest.approx(8 / 9 * 4 / 3 + 1 / 9 * 14 / 3)


def _vi_with_snapshots(m2):
    return value_iteration(m2, 4 / 3, np.zeros(2), StopRule(snapshot_every=1))


def test_envelope_fit_on_m2(m2, m2_vstar):
    trace = _vi_with_snapshots(m2)
    cert = check_h2(m2, m2_vstar)
    fit = fit_envelope(trace, m2_vstar, cert)
    assert fit.rho == pytest.approx(0.001)
    assert fit.limit == pytest.approx(-49 / 27, abs=1e-9)
    # the first centred error is 77/27, at state 1
    assert fit.c0_hat >= 49 / 27 + 77 / 27 - 1e-9
    assert 0 < fit.decay_rate < 0.5
    assert fit.decaying
    assert envelope_violations(trace, m2_vstar, fit) == []


def test_envelope_violations_of_a_smaller_constant(m2, m2_vstar):
    trace = _vi_with_snapshots(m2)
    fit = fit_envelope(trace, m2_vstar, check_h2(m2, m2_vstar))
    # |Phi_1 - V*| = (5/3, 3), every later error stays below 2
    smaller = EnvelopeFit(c0_hat=2.9, amplitude=fit.amplitude, decay_rate=fit.decay_rate, limit=fit.limit, rho=fit.rho)
    assert envelope_violations(trace, m2_vstar, smaller) == [1]


def test_envelope_fails_for_a_wrong_relative_value(m2, m2_vstar):
    trace = _vi_with_snapshots(m2)
    wrong = m2_vstar + np.array([0.0, -6.0])
    fit = fit_envelope(trace, wrong, check_h2(m2, m2_vstar))
    # Phi_n - wrong tends to (-49/27, 113/27): not constant, so the centred error grows towards 3
    assert fit.limit == pytest.approx(32 / 27, abs=1e-9)
    assert fit.decay_rate > 1
    assert not fit.decaying
    violations = envelope_violations(trace, wrong, fit)
    assert violations[0] == 0
    assert max(trace.snapshots) in violations


def test_envelope_fit_requires_snapshots(m2, m2_vstar):
    trace = value_iteration(m2, 4 / 3, np.zeros(2))
    with pytest.raises(AvgCostError, match="snapshots"):
        fit_envelope(trace, m2_vstar, check_h2(m2, m2_vstar))


def test_h2_holds_on_random_unichains(random_unichains):
    for m, s in random_unichains[:50]:
        lp = optimal_average_cost_lp(m, nu=s)
        cert = check_h2(m, lp.value)
        assert 0 < cert.theta1 < 1
        assert cert.slack.min() >= 0
        assert np.isfinite(h1_diagnostic(m, lp.policy, lp.value))
