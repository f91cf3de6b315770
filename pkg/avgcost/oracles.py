"""
**oracles** module provides exact, non-iterative solutions on finite instances:

- stationary distributions and average costs of stationary policies,
- the occupation-measure linear program for the optimal average cost,
- brute-force enumeration of deterministic stationary policies,
- Poisson equation solves anchored by a minorizing measure,
- policy iteration, as a third independent optimum.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import itertools
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import AvgCostError, EnumerationLimitError, MultichainError
from .job import Job, run_jobs
from .mdp import (FiniteMdp, StationaryPolicy, ValueField, argmin_selector, as_values,
                  policy_cost, policy_kernel, q_values, validate_policy)
from .splitchain import SmallSetSpec
from .utils import profile

log = logging.getLogger(__name__)

UNICHAIN_TOL = 1e-10
SUPPORT_TOL = 1e-12
MAX_POLICIES = 10**6


class SolveMethod(Enum):
    lp = 'lp'
    enumeration = 'enumeration'
    policy_iteration = 'policy_iteration'


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    """zeta[x, i] is the mass of the pair (x, i-th action of x); padded actions have no mass."""
    zeta: np.ndarray

    @property
    def state_marginal(self) -> np.ndarray:
        return self.zeta.sum(axis=1)

    def balance_residual(self, m: FiniteMdp) -> float:
        inflow = np.einsum('xa,xay->y', self.zeta, m.P)
        return float(np.abs(self.state_marginal - inflow).max())

    def conditional(self, m: FiniteMdp) -> np.ndarray:
        """:return: v(u|x) = zeta(x,u)/pi(x) where pi(x) > 0, the lowest-index action elsewhere."""
        pi = self.state_marginal
        cond = np.zeros_like(self.zeta)
        for x in range(m.n_states):
            if pi[x] >= SUPPORT_TOL:
                cond[x] = self.zeta[x] / pi[x]
            else:
                cond[x, 0] = 1.0
        return cond

    def disintegrate(self, m: FiniteMdp, tol: float = 1e-9) -> StationaryPolicy:
        """:return: the policy reproducing zeta's conditional, deterministic when every conditional is a point mass."""
        cond = self.conditional(m)
        best = np.argmax(cond, axis=1)
        if np.all(cond[np.arange(m.n_states), best] >= 1 - tol):
            return StationaryPolicy.deterministic(best)
        return StationaryPolicy.randomized([cond[x, :m.n_actions(x)] for x in range(m.n_states)])

    def __json__(self):
        return dict(zeta=self.zeta.tolist())


@dataclass(frozen=True, eq=False)
class SolveReport:
    beta: float
    policy: StationaryPolicy
    occupation: OccupationMeasure
    value: Optional[ValueField]
    method: SolveMethod

    def __json__(self):
        return dict(beta=self.beta, policy=self.policy, occupation=self.occupation,
                    value=self.value, method=self.method.value)


@dataclass(frozen=True)
class PolicyEvaluation:
    policy: StationaryPolicy
    beta: float
    unichain: bool = True
    class_costs: Tuple[float, ...] = field(default=())

    def __json__(self):
        return dict(policy=self.policy, beta=self.beta, unichain=self.unichain, class_costs=list(self.class_costs))


def recurrent_classes(m: FiniteMdp, v: StationaryPolicy) -> List[np.ndarray]:
    """:return: the closed communicating classes of the chain under v, ordered by their lowest state."""
    P = policy_kernel(m, v)
    graph = csr_matrix((P > 0).astype(np.int8))
    n_comp, labels = connected_components(graph, directed=True, connection='strong')
    classes = []
    for k in range(n_comp):
        members = labels == k
        if not np.any(P[np.ix_(members, ~members)] > 0):
            classes.append(np.flatnonzero(members))
    return sorted(classes, key=lambda c: c[0])


def _stationary_solve(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    A = np.vstack([(np.eye(n) - P).T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    return pi


def stationary_distribution(m: FiniteMdp, v: StationaryPolicy, tol: float = UNICHAIN_TOL) -> np.ndarray:
    validate_policy(m, v)
    P = policy_kernel(m, v)
    null_dim = sla.null_space((np.eye(m.n_states) - P).T, rcond=tol).shape[1]
    if null_dim > 1:
        raise MultichainError(f"multichain under policy {v.choice}: {null_dim} recurrent classes.")
    return _stationary_solve(P)


def average_cost(m: FiniteMdp, v: StationaryPolicy) -> float:
    pi = stationary_distribution(m, v)
    return float(pi @ policy_cost(m, v))


def class_costs(m: FiniteMdp, v: StationaryPolicy) -> Tuple[float, ...]:
    """:return: the average cost of v restricted to each of its recurrent classes."""
    P = policy_kernel(m, v)
    cv = policy_cost(m, v)
    costs = []
    for members in recurrent_classes(m, v):
        pi = _stationary_solve(P[np.ix_(members, members)])
        costs.append(float(pi @ cv[members]))
    return tuple(costs)


def evaluate_policy(m: FiniteMdp, v: StationaryPolicy) -> PolicyEvaluation:
    """average cost of v; multichain policies are flagged and valued by their cheapest recurrent class."""
    try:
        return PolicyEvaluation(v, average_cost(m, v))
    except MultichainError:
        costs = class_costs(m, v)
        return PolicyEvaluation(v, min(costs), unichain=False, class_costs=costs)


def _anchor_measure(m: FiniteMdp, anchor, pi: np.ndarray | None = None) -> np.ndarray:
    if isinstance(anchor, SmallSetSpec):
        return np.asarray(anchor.nu)
    if anchor is not None:
        return as_values(anchor, m.n_states)
    nu = np.zeros(m.n_states)
    nu[int(np.flatnonzero(pi >= SUPPORT_TOL)[0]) if pi is not None else 0] = 1.0
    return nu


def solve_poisson(m: FiniteMdp, v: StationaryPolicy, s) -> Tuple[ValueField, float]:
    """
    solves (I - P_v)G = c_v - beta_v with the anchoring nu(G) = beta_v.
    :param s: a SmallSetSpec (its nu is used) or directly a probability vector.
    :return: (G, beta_v).
    """
    pi = stationary_distribution(m, v)
    cv = policy_cost(m, v)
    beta = float(pi @ cv)
    nu = _anchor_measure(m, s)
    n = m.n_states
    A = np.vstack([np.eye(n) - policy_kernel(m, v), nu[None, :]])
    b = np.concatenate([cv - beta, [beta]])
    G = np.linalg.lstsq(A, b, rcond=None)[0]
    residual = float(np.abs(A @ G - b).max())
    if residual > 1e-10:
        log.warning("Poisson solve residual %.3g exceeds 1e-10 for policy %s.", residual, v.choice)
    return ValueField(G), beta


def _lp_matrices(m: FiniteMdp):
    pairs = [(x, i) for x in range(m.n_states) for i in range(m.n_actions(x))]
    n = m.n_states
    A_eq = np.zeros((n + 1, len(pairs)))
    costs = np.empty(len(pairs))
    for k, (x, i) in enumerate(pairs):
        A_eq[x, k] += 1.0
        A_eq[:n, k] -= m.P[x, i]
        A_eq[n, k] = 1.0
        costs[k] = m.c[x, i]
    b_eq = np.zeros(n + 1)
    b_eq[n] = 1.0
    return pairs, costs, A_eq, b_eq


def _report(m: FiniteMdp, zeta: np.ndarray, method: SolveMethod, nu=None) -> SolveReport:
    occupation = OccupationMeasure(zeta)
    policy = occupation.disintegrate(m)
    beta = float((zeta * np.where(m.mask, m.c, 0.0)).sum())
    try:
        value, _ = solve_poisson(m, policy, _anchor_measure(m, nu, occupation.state_marginal))
    except MultichainError as e:
        log.warning("No relative value for the optimal policy: %s", e)
        value = None
    return SolveReport(beta=beta, policy=policy, occupation=occupation, value=value, method=method)


@profile(logger=log)
def optimal_average_cost_lp(m: FiniteMdp, nu=None, method: str = 'highs-ds', dump_lp: bool = False) -> SolveReport:
    """
    minimizes sum c.zeta over occupation measures: zeta >= 0, total mass 1,
    sum_u zeta(y,u) = sum_{x,u} P(y|x,u) zeta(x,u) for every y.
    The dual simplex returns a vertex, hence a deterministic disintegrated policy.
    :param nu: anchor of the reported relative value (SmallSetSpec or vector),
        the point mass at the lowest recurrent state by default.
    """
    m.ensure_valid()
    pairs, costs, A_eq, b_eq = _lp_matrices(m)
    if dump_lp:
        log.log(getattr(logging, 'TRACE', logging.DEBUG), "LP pairs: %s\ncosts: %s\nA_eq:\n%s\nb_eq: %s",
                pairs, costs, A_eq, b_eq)
    res = linprog(costs, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method=method)
    if res.status != 0:
        raise AvgCostError(f"Occupation measure LP failed: {res.message}")
    zeta = np.zeros((m.n_states, m.max_actions))
    for k, (x, i) in enumerate(pairs):
        zeta[x, i] = max(res.x[k], 0.0)
    zeta /= zeta.sum()
    report = _report(m, zeta, SolveMethod.lp, nu)
    log.info("LP optimal average cost: %.12g (policy %s).", report.beta, report.policy.choice)
    return report


def _evaluate_all(m: FiniteMdp, policies: Sequence[StationaryPolicy]) -> List[PolicyEvaluation]:
    return [evaluate_policy(m, v) for v in policies]


@profile(logger=log)
def enumerate_policies_bruteforce(m: FiniteMdp, max_policies: int = MAX_POLICIES, parallel_jobs: int = 1) -> List[PolicyEvaluation]:
    """
    :return: every deterministic stationary policy with its average cost, in lexicographic order of action indices.
    """
    m.ensure_valid()
    count = m.n_policies
    if count > max_policies:
        raise EnumerationLimitError(count, max_policies)
    policies = [StationaryPolicy.deterministic(choice)
                for choice in itertools.product(*(range(m.n_actions(x)) for x in range(m.n_states)))]
    n_jobs = max(1, min(parallel_jobs, len(policies)))
    chunk = math.ceil(len(policies) / n_jobs)
    jobs = [Job(f"enumerate_{k}", (lambda part=policies[k:k+chunk]: _evaluate_all(m, part)))
            for k in range(0, len(policies), chunk)]
    evaluations = [e for res in run_jobs(jobs, parallel_jobs=n_jobs) for e in res.result]
    multichain = sum(not e.unichain for e in evaluations)
    if multichain:
        log.info("%s of %s enumerated policies are multichain.", multichain, len(evaluations))
    return evaluations


def optimal_average_cost_enumeration(m: FiniteMdp, nu=None, **kwargs) -> SolveReport:
    """the cheapest unichain policy of the enumeration, reported like the LP solution."""
    evaluations = [e for e in enumerate_policies_bruteforce(m, **kwargs) if e.unichain]
    if not evaluations:
        raise MultichainError("Every deterministic policy is multichain.")
    best = min(evaluations, key=lambda e: e.beta)
    pi = stationary_distribution(m, best.policy)
    return _report(m, pi[:, None] * best.policy.matrix(m), SolveMethod.enumeration, nu)


def policy_iteration(m: FiniteMdp, v0: StationaryPolicy | None = None, nu=None,
                     max_iters: int = 1000, tol: float = 1e-10) -> SolveReport:
    """
    Howard policy iteration for unichain models: evaluate by the Poisson equation,
    improve greedily, keeping the current action unless another one is better by more than `tol`.
    """
    m.ensure_valid()
    v = v0 if v0 is not None else StationaryPolicy.deterministic([0] * m.n_states)
    rows = np.arange(m.n_states)
    for it in range(max_iters):
        G, beta = solve_poisson(m, v, _anchor_measure(m, nu, stationary_distribution(m, v)))
        q = q_values(m, G, beta)
        qmin, greedy = argmin_selector(q, tol)
        current = np.asarray(v.choice)
        keep = q[rows, current] <= qmin + tol
        improved = np.where(keep, current, greedy)
        if np.array_equal(improved, current):
            log.info("Policy iteration converged in %s iterations: beta=%.12g.", it + 1, beta)
            pi = stationary_distribution(m, v)
            return _report(m, pi[:, None] * v.matrix(m), SolveMethod.policy_iteration, nu)
        v = StationaryPolicy.deterministic(improved)
    raise AvgCostError(f"Policy iteration did not converge in {max_iters} iterations.")
