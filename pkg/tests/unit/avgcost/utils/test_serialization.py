import os

import numpy as np
import pytest

from avgcost.mdp import StationaryPolicy, ValueField
from avgcost.results import CheckSuite, RunArtifacts, read_csv, write_csv
from avgcost.utils import Namespace as ns, json_dumps, json_load


def test_json_dumps_handles_numpy_and_custom_objects():
    o = dict(a=np.float64(0.1), b=np.arange(3), c=ValueField([1.0, 2.0]),
             d=StationaryPolicy.deterministic([1, 0]), e=np.int64(3), f=np.bool_(True))
    assert json_dumps(o, style='compact') == (
        '{"a":0.1,"b":[0,1,2],"c":{"values":[1.0,2.0],"index_space":"base"},'
        '"d":{"kind":"deterministic","choice":[1,0]},"e":3,"f":true}')


def test_json_dumps_writes_non_finite_floats_as_null():
    assert json_dumps(ns(x=float('inf'), y=[float('nan'), 1.5]), style='compact') == '{"x":null,"y":[null,1.5]}'


def test_floats_are_written_with_full_precision():
    assert json_dumps([1 / 3], style='compact') == '[0.3333333333333333]'


@pytest.mark.use_disk
def test_write_csv(tmpdir):
    path = os.path.join(tmpdir, "trace.csv")
    write_csv([dict(n=0, offset=1 / 3, selector='a b'), dict(n=1, offset=None, selector='a a')], path)
    with open(path, newline='') as f:
        content = f.read()
    assert content == "n,offset,selector\n0,0.33333333333333331,a b\n1,,a a\n"
    df = read_csv(path)
    assert df.offset.iloc[0] == 1 / 3


def test_check_suite():
    checks = CheckSuite()
    checks.add('first', True)
    checks.run('second', lambda: 1 / 0)
    assert not checks.passed
    assert [c.name for c in checks.failed] == ['second']
    assert 'ZeroDivisionError' in checks.failed[0].detail
    assert checks.__json__()['status'] == 'FAIL'


@pytest.mark.use_disk
def test_run_artifacts(tmpdir):
    artifacts = RunArtifacts(str(tmpdir))
    checks = CheckSuite()
    checks.add('ok', True, "fine")
    artifacts.save_summary(ns(beta=4 / 3, policy=['a', 'a']))
    artifacts.save_checks(checks)
    summary = artifacts.load_summary()
    assert summary.beta == 4 / 3
    assert summary.policy == ['a', 'a']
    assert json_load(artifacts.path('checks.json')) == dict(
        status='PASS', checks=[dict(name='ok', status='PASS', detail='fine')])
