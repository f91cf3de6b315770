import os

import numpy as np
import pytest

from avgcost import resources
from avgcost.defaults import default_dirs
from avgcost.lqg import LqgModel, Query
from avgcost.mdp import FiniteMdp, StationaryPolicy
from avgcost.splitchain import SmallSetSpec
from avgcost.utils import Namespace, config_load

root_dir = default_dirs.root_dir


def make_m2() -> FiniteMdp:
    return FiniteMdp(
        action_sets=[['a', 'b'], ['a', 'b']],
        kernel=[[[0.9, 0.1], [0.5, 0.5]],
                [[0.8, 0.2], [0.2, 0.8]]],
        cost=[[1.0, 2.0],
              [4.0, 3.0]],
    )


def random_unichain(rng, n_states=None, n_actions=None, hub_mass=0.2) -> FiniteMdp:
    """every (x, u) sends at least `hub_mass` to state 0, so that every policy is unichain and aperiodic."""
    n = n_states or int(rng.integers(1, 7))
    k = n_actions or int(rng.integers(1, 5))
    P = rng.dirichlet(np.ones(n), size=(n, k)) * (1 - hub_mass)
    P[:, :, 0] += hub_mass
    c = rng.uniform(1.0, 5.0, size=(n, k))
    return FiniteMdp.from_arrays(P, c)


def hub_smallset(m: FiniteMdp, hub_mass=0.2) -> SmallSetSpec:
    nu = np.zeros(m.n_states)
    nu[0] = 1.0
    return SmallSetSpec(B=(0,), nu=nu, delta=hub_mass / 2)


@pytest.fixture
def m2():
    return make_m2()


@pytest.fixture
def m2_smallset():
    return SmallSetSpec(B=(0,), nu=[1.0, 0.0], delta=0.4)


@pytest.fixture
def m2_optimal():
    return StationaryPolicy.deterministic([0, 0])


@pytest.fixture
def m2_vstar():
    return np.array([4 / 3, 14 / 3])


@pytest.fixture
def constant_cost():
    """1 state, 1 action, cost 3."""
    return FiniteMdp([['u']], [[[1.0]]], [[3.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(20241018)


@pytest.fixture
def random_unichains():
    gen = np.random.default_rng(42)
    return [(m, hub_smallset(m)) for m in (random_unichain(gen) for _ in range(200))]


@pytest.fixture
def scalar_lqg():
    return LqgModel(A=1.0, B=1.0, D=[[1.0, 0.0]], R=1.0, M=1.0,
                    queries=(Query(C=1.0, F=[[0.0, 1.0]], loss=0.0, cost=0.1, name='sense'),))


@pytest.fixture
def two_query_lqg():
    return LqgModel(A=1.0, B=1.0, D=[[1.0, 0.0]], R=1.0, M=1.0,
                    queries=(Query(C=1.0, F=[[0.0, 1.0]], loss=0.3, cost=0.1, name='lossy'),
                             Query(C=1.0, F=[[0.0, 1.0]], loss=0.0, cost=0.5, name='reliable')))


@pytest.fixture
def bundled_resources(tmpdir):
    config = config_load(os.path.join(root_dir, "resources", "config.yaml"))
    return resources.from_configs(config, default_dirs, Namespace(output_dir=str(tmpdir), seed=7))
