import filecmp
import os

import pytest

from avgcost import resources
from avgcost.defaults import default_dirs
from avgcost.mdp import load_mdp
from avgcost.oracles import optimal_average_cost_enumeration
from avgcost.results import read_csv
from avgcost.runner import (EXIT_CHECKS_FAILED, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK, Command, RunConfig,
                            run)
from avgcost.utils import Namespace, config_load, json_load


def session_dir(res, name):
    return os.path.join(res.config.output_dir, name)


@pytest.mark.use_disk
def test_solve_m2(bundled_resources):
    assert run(RunConfig(command='solve', model_path='m2')) == EXIT_OK
    out = session_dir(bundled_resources, 'solve_m2')
    summary = json_load(os.path.join(out, 'summary.json'))
    assert summary['beta'] == pytest.approx(4 / 3, abs=1e-12)
    assert summary['policy'] == ['a', 'a']
    assert summary['value']['values'] == pytest.approx([4 / 3, 14 / 3], abs=1e-10)
    assert summary['smallset'] == dict(B=[0], nu={"0": 1.0}, delta=0.4)
    checks = json_load(os.path.join(out, 'checks.json'))
    assert checks['status'] == 'PASS'
    assert {c['name'] for c in checks['checks']} >= {'acoe_residual', 'anchoring', 'occupation_balance',
                                                    'lp_vs_enumeration', 'lp_vs_policy_iteration'}


@pytest.mark.use_disk
def test_solve_queue3(bundled_resources):
    assert run(RunConfig(command='solve', model_path='queue3')) == EXIT_OK


@pytest.mark.use_disk
def test_split_m2(bundled_resources):
    assert run(RunConfig(command='split', model_path='m2')) == EXIT_OK
    out = session_dir(bundled_resources, 'split_m2')
    kernel = json_load(os.path.join(out, 'split_kernel.json'))
    assert kernel['states'] == ['0:0', '1:0', '0:1']
    assert kernel['delta_circ'] == pytest.approx(15.0)
    assert sum(kernel['kernel']['1:0,a']) == pytest.approx(1.0, abs=1e-12)
    summary = json_load(os.path.join(out, 'summary.json'))
    assert summary['visits_before_atom'] == pytest.approx([2.5, 1.5])
    checks = json_load(os.path.join(out, 'checks.json'))
    assert 'occupation_bound' in {c['name'] for c in checks['checks']}


BUNDLED_MODELS = ['m2', 'queue3', 'machine4']


def enumerated_beta(res, model):
    return optimal_average_cost_enumeration(load_mdp(res.model_path(model))).beta


def check_status(out):
    return {c['name']: c['status'] for c in json_load(os.path.join(out, 'checks.json'))['checks']}


@pytest.mark.use_disk
@pytest.mark.parametrize("model", BUNDLED_MODELS)
@pytest.mark.parametrize("variant", ['nu', 'min', 'anchor'])
def test_rvi_on_bundled_models(bundled_resources, model, variant):
    beta = enumerated_beta(bundled_resources, model)
    assert run(RunConfig(command='rvi', variant=variant, model_path=model)) == EXIT_OK
    out = session_dir(bundled_resources, f'rvi_{variant}_{model}')
    summary = json_load(os.path.join(out, 'summary.json'))
    assert abs(summary['offset'] - beta) < 1e-9
    assert summary['iterations'] <= 10**4
    trace = read_csv(os.path.join(out, 'trace.csv'))
    assert list(trace.columns) == ['n', 'offset', 'span', 'residual', 'selector']
    assert trace.offset.iloc[-1] == pytest.approx(beta, abs=1e-9)
    status = check_status(out)
    assert status['field_vs_vstar'] == 'PASS'
    assert status['vi_difference_identity'] == 'PASS'


@pytest.mark.use_disk
def test_rvi_m2_ends_on_the_optimal_selector(bundled_resources):
    assert run(RunConfig(command='rvi', variant='nu', model_path='m2')) == EXIT_OK
    trace = read_csv(os.path.join(session_dir(bundled_resources, 'rvi_nu_m2'), 'trace.csv'))
    assert trace.selector.iloc[-1] == 'a a'


@pytest.mark.use_disk
@pytest.mark.parametrize("model", BUNDLED_MODELS)
def test_rolling_on_bundled_models(bundled_resources, model):
    beta = enumerated_beta(bundled_resources, model)
    assert run(RunConfig(command='rolling', model_path=model)) == EXIT_OK
    out = session_dir(bundled_resources, f'rolling_{model}')
    summary = json_load(os.path.join(out, 'summary.json'))
    assert summary['beta'] == pytest.approx(beta, abs=1e-9)
    lock_in = summary['lock_in']
    assert lock_in is not None
    report = read_csv(os.path.join(out, 'report.csv'))
    assert (report.gap >= -1e-9).all()
    assert (report.gap[report.n >= lock_in].abs() < 1e-8).all()
    status = check_status(out)
    assert status['stabilization_bound'] == 'PASS'
    assert status['envelope'] == 'PASS'


@pytest.mark.use_disk
def test_vi_and_rolling_m2(bundled_resources):
    assert run(RunConfig(command='vi', model_path='m2')) == EXIT_OK
    assert run(RunConfig(command='rolling', model_path='m2')) == EXIT_OK
    summary = json_load(os.path.join(session_dir(bundled_resources, 'rolling_m2'), 'summary.json'))
    assert summary['lock_in'] == 1
    assert summary['envelope']['limit'] == pytest.approx(-49 / 27, abs=1e-9)
    report = read_csv(os.path.join(session_dir(bundled_resources, 'rolling_m2'), 'report.csv'))
    assert report.policy.iloc[0] == 'a b'


@pytest.mark.use_disk
def test_runs_are_deterministic(bundled_resources):
    for session in ['first', 'second']:
        assert run(RunConfig(command='rvi', variant='nu', model_path='queue3', session=session)) == EXIT_OK
    for name in ['trace.csv', 'summary.json', 'checks.json']:
        assert filecmp.cmp(os.path.join(session_dir(bundled_resources, 'first'), name),
                           os.path.join(session_dir(bundled_resources, 'second'), name), shallow=False)


@pytest.mark.use_disk
def test_invalid_inputs(bundled_resources, tmpdir):
    assert run(RunConfig(command='solve', model_path='no_such_model')) == EXIT_INVALID
    assert run(RunConfig(command='rvi', model_path='m2')) == EXIT_INVALID
    assert run(RunConfig(command='solve')) == EXIT_INVALID
    assert run(RunConfig(command='vi', model_path='m2', beta='abc')) == EXIT_INVALID
    bad = os.path.join(tmpdir, 'bad.json')
    with open(bad, 'w') as f:
        f.write('{"n_states": 1, "actions": [["a"]], "kernel": {"0,a": [0.5]}, "cost": {"0,a": 1.0}}')
    assert run(RunConfig(command='solve', model_path=bad)) == EXIT_INVALID
    assert run(RunConfig(command='rvi', variant='anchor', model_path='m2', anchor=1, smallset='auto')) == EXIT_INVALID
    smallset = os.path.join(tmpdir, 'm2.smallset.json')
    with open(smallset, 'w') as f:
        f.write('{"B": [0], "nu": {"0": 1.0}, "delta": 0.6}')
    assert run(RunConfig(command='split', model_path='m2', smallset=smallset)) == EXIT_INVALID


@pytest.mark.use_disk
def test_not_converged(bundled_resources):
    assert run(RunConfig(command='rvi', variant='nu', model_path='m2', max_iters=1)) == EXIT_NOT_CONVERGED
    assert run(RunConfig(command='vi', model_path='m2', beta='0')) == EXIT_NOT_CONVERGED


@pytest.mark.use_disk
def test_failed_checks(tmpdir):
    # a loose drift tolerance lets VI stop far from its limit
    config = config_load(os.path.join(default_dirs.root_dir, "resources", "config.yaml"))
    resources.from_configs(config, default_dirs, Namespace(output_dir=str(tmpdir), solvers=Namespace(drift_tol=1.0)))
    assert run(RunConfig(command='vi', model_path='m2', span_tol=1e-3)) == EXIT_CHECKS_FAILED
    checks = json_load(os.path.join(tmpdir, 'vi_m2', 'checks.json'))
    assert checks['status'] == 'FAIL'
    assert [c['name'] for c in checks['checks'] if c['status'] == 'FAIL'] == ['vi_limit']


@pytest.mark.use_disk
def test_lqg_demo(bundled_resources):
    assert run(RunConfig(command=Command.lqg_demo.value, seed=7, horizon=20_000)) == EXIT_OK
    out = session_dir(bundled_resources, 'lqg-demo_default')
    summary = json_load(os.path.join(out, 'summary.json'))
    assert summary['grid_beta'] == pytest.approx(0.7, abs=1e-12)
    assert summary['seed'] == 7
    simulation = read_csv(os.path.join(out, 'simulation.csv'))
    assert len(simulation) == 20
    assert set(simulation['query']) == {'sense'}
    assert check_status(out)['grid_vi_difference_identity'] == 'PASS'


def test_session_name():
    assert RunConfig(command='rvi', variant='nu', model_path='/a/b/m2.json').session_name == 'rvi_nu_m2'
    assert RunConfig(command='solve', model_path='m2', session='Mine').session_name == 'Mine'
    assert RunConfig(command='lqg-demo').session_name == 'lqg-demo_default'


def test_validate_run_config():
    with pytest.raises(ValueError):
        RunConfig(command='solve', model_path='m2', variant='nu').validate()
    with pytest.raises(ValueError):
        RunConfig(command='vi', model_path='m2', span_tol=0).validate()
    with pytest.raises(ValueError):
        RunConfig(command='unknown', model_path='m2').validate()
    assert RunConfig(command='rvi', variant='min', model_path='m2').validate().variant == 'min'
