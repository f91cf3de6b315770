"""
**rolling** module evaluates the receding horizon policies recorded by the iterative solvers:
the selector of iterate n is evaluated exactly, compared to the optimal average cost,
and checked against the stabilization bound

    beta + (1 + C0.rho^(n+1)).(beta + theta2) / (theta1 - (1 + C0.rho).rho^n)

wherever its denominator is positive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Dict, Iterable, List, Optional, Tuple

import pandas as pd

from .errors import RollingHorizonError
from .job import Job, run_jobs
from .mdp import FiniteMdp, StationaryPolicy
from .oracles import PolicyEvaluation, evaluate_policy
from .solvers import H2Certificate, IterationTrace

log = logging.getLogger(__name__)

GAP_TOL = 1e-8
OPTIMALITY_TOL = 1e-9


def extract_policy(trace: IterationTrace, n: int) -> StationaryPolicy:
    if not 0 <= n < len(trace):
        raise RollingHorizonError(f"Iterate {n} out of range: the trace holds {len(trace)} records.")
    return trace.selector(n)


def rolling_bound(beta: float, cert: H2Certificate, cbar0: float, n: int) -> Optional[float]:
    """:return: the stabilization bound for the selector of iterate n, None when its denominator is not positive."""
    rho = cert.rho
    denominator = cert.theta1 - (1 + cbar0 * rho) * rho ** n
    if denominator <= 0:
        return None
    return beta + (1 + cbar0 * rho ** (n + 1)) * (beta + cert.theta2) / denominator


def stabilization_threshold(cert: H2Certificate, cbar0: float) -> int:
    """:return: the smallest N0 >= 0 with (1 + C0.rho).rho^N0 < theta1."""
    rho, scale = cert.rho, 1 + cbar0 * cert.rho
    if scale < cert.theta1:
        return 0
    if rho <= 0:
        return 1
    n0 = max(0, math.floor(math.log(cert.theta1 / scale) / math.log(rho)))
    while scale * rho ** n0 >= cert.theta1:
        n0 += 1
    while n0 > 0 and scale * rho ** (n0 - 1) < cert.theta1:
        n0 -= 1
    return n0


@dataclass(frozen=True)
class RollingHorizonRecord:
    n: int
    policy: StationaryPolicy
    unichain: bool
    beta_n: float
    bound: Optional[float]
    gap: float

    @property
    def bound_holds(self) -> bool:
        return self.bound is None or not self.unichain or self.beta_n <= self.bound + OPTIMALITY_TOL

    def __json__(self):
        return dict(n=self.n, policy=self.policy, unichain=self.unichain, beta_n=self.beta_n,
                    bound=self.bound, gap=self.gap)


@dataclass
class RollingHorizonReport:
    beta: float
    certificate: H2Certificate
    cbar0: float
    gap_tol: float = GAP_TOL
    records: List[RollingHorizonRecord] = field(default_factory=list)

    @property
    def n0(self) -> int:
        return stabilization_threshold(self.certificate, self.cbar0)

    @property
    def lock_in(self) -> Optional[int]:
        """
        :return: the smallest recorded n after which every unichain record has a gap below gap_tol,
            None when the last unichain record is still above it.
        """
        lock = None
        for r in reversed(self.records):
            if not r.unichain:
                continue
            if abs(r.gap) >= self.gap_tol:
                break
            lock = r.n
        return lock

    @property
    def bound_violations(self) -> List[int]:
        return [r.n for r in self.records if not r.bound_holds]

    @property
    def multichain(self) -> List[int]:
        return [r.n for r in self.records if not r.unichain]

    def to_frame(self, m: FiniteMdp | None = None) -> pd.DataFrame:
        return pd.DataFrame.from_records(
            [dict(n=r.n, beta_n=r.beta_n, bound=r.bound, gap=r.gap, unichain=r.unichain,
                  policy=' '.join(str(u) for u in (r.policy.labels(m) if m is not None else r.policy.choice)))
             for r in self.records],
            columns=['n', 'beta_n', 'bound', 'gap', 'unichain', 'policy'])

    def __json__(self):
        return dict(beta=self.beta, certificate=self.certificate, cbar0=self.cbar0, gap_tol=self.gap_tol,
                    n0=self.n0, lock_in=self.lock_in, bound_violations=self.bound_violations,
                    multichain=self.multichain, records=self.records)


def evaluate_rolling_horizon(m: FiniteMdp, trace: IterationTrace, n_list: Iterable[int] | None,
                             beta: float, cert: H2Certificate, cbar0: float,
                             gap_tol: float = GAP_TOL, parallel_jobs: int = 1) -> RollingHorizonReport:
    """
    :param n_list: the iterates to evaluate, all recorded ones if None.
    :param beta: the optimal average cost (from the LP oracle).
    :param cbar0: the envelope constant (typically ``fit_envelope(...).c0_hat``).
    """
    ns = sorted(set(range(len(trace)) if n_list is None else n_list))
    policies = {n: extract_policy(trace, n) for n in ns}
    distinct: Dict[Tuple, StationaryPolicy] = {}
    for v in policies.values():
        distinct.setdefault(v.choice, v)
    # selectors lock early, so each distinct policy is evaluated once
    jobs = [Job(f"rolling_{'_'.join(map(str, choice))}", (lambda v=v: evaluate_policy(m, v)))
            for choice, v in distinct.items()]
    evaluations: Dict[Tuple, PolicyEvaluation] = {
        choice: res.result for choice, res in zip(distinct, run_jobs(jobs, parallel_jobs=parallel_jobs))}

    report = RollingHorizonReport(beta=beta, certificate=cert, cbar0=cbar0, gap_tol=gap_tol)
    for n in ns:
        ev = evaluations[policies[n].choice]
        gap = ev.beta - beta
        if gap < -OPTIMALITY_TOL:
            raise RollingHorizonError(f"Selector {n} achieves {ev.beta:.12g} below the optimal average cost {beta:.12g}.")
        if not ev.unichain:
            log.warning("Selector %s is multichain (class costs %s): flagged.", n, ev.class_costs)
        record = RollingHorizonRecord(n=n, policy=policies[n], unichain=ev.unichain, beta_n=ev.beta,
                                      bound=rolling_bound(beta, cert, cbar0, n), gap=gap)
        if not record.bound_holds:
            log.warning("Selector %s: average cost %.12g exceeds the stabilization bound %.12g.", n, ev.beta, record.bound)
        report.records.append(record)
    log.info("Rolling horizon: %s selectors evaluated (%s distinct), lock-in at n=%s, N0=%s.",
             len(ns), len(distinct), report.lock_in, report.n0)
    return report
