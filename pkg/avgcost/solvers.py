"""
**solvers** module provides the iterative average-cost algorithms and their diagnostics:

- ``value_iteration``: Phi_{n+1} = min_u [c - beta + P_u Phi_n], beta given.
- ``split_value_iteration``: the same recursion run on the split chain (level 0, atom level), folded back on X.
- ``rvi_nu``, ``rvi_min``, ``rvi_anchor``: relative value iteration V_{n+1} = S V_n - offset(V_n)
  with S f = min_u [c + P_u f] and the offset nu(V_n), min V_n or V_n(xhat).
- ``acoe_residual``, ``check_h2`` / ``validate_h2``, ``h1_diagnostic``, ``fit_envelope`` and ``difference_identity_gap``.

Every run returns an ``IterationTrace`` whose record n describes the step from iterate n to iterate n+1:
offset of iterate n, span and sup-norm of the increment, and the minimizing selector computed from iterate n.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import AvgCostError, ConvergenceError, DivergenceError, H2Error
from .mdp import (FiniteMdp, IndexSpace, StationaryPolicy, ValueField, argmin_selector,
                  as_values, bellman_min, q_values)
from .oracles import stationary_distribution
from .splitchain import SmallSetSpec, SplitChainModel, fold_split_field

log = logging.getLogger(__name__)

H2_GRID = (0.999, 0.99, 0.9, 0.5, 0.1, 0.01, 1e-3, 1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class StopRule:
    max_iters: int = 100_000
    span_tol: float = 1e-10
    divergence_bound: float = 1e12
    drift_tol: float = 1e-8
    snapshot_every: Optional[int] = None
    log_every: int = 1000

    @classmethod
    def from_options(cls, options) -> StopRule:
        """builds a rule from a config Namespace or dict, ignoring unknown keys."""
        options = dict(options or {})
        return cls(**{k: v for k, v in options.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class IterationRecord:
    n: int
    offset: Optional[float]
    span: float
    residual: float
    selector: Tuple[int, ...]


@dataclass(eq=False)
class IterationTrace:
    method: str
    index_space: IndexSpace
    records: List[IterationRecord] = field(default_factory=list)
    snapshots: Dict[int, np.ndarray] = field(default_factory=dict)
    final: Optional[ValueField] = None
    converged: bool = False
    beta: Optional[float] = None
    offset: Optional[float] = None

    def __len__(self):
        return len(self.records)

    @property
    def iterations(self) -> int:
        return len(self.records)

    def selector(self, n: int) -> StationaryPolicy:
        return StationaryPolicy.deterministic(self.records[n].selector)

    def snapshot(self, n: int) -> np.ndarray:
        """:return: the recorded iterate n (snapshots must have been enabled for that n)."""
        if n not in self.snapshots:
            raise KeyError(f"Iterate {n} was not recorded (snapshots at {sorted(self.snapshots)[:5]}...).")
        return self.snapshots[n]

    @property
    def offsets(self) -> np.ndarray:
        return np.array([r.offset if r.offset is not None else np.nan for r in self.records])

    @property
    def spans(self) -> np.ndarray:
        return np.array([r.span for r in self.records])

    def to_frame(self, action_sets: Sequence[Sequence] | None = None) -> pd.DataFrame:
        """
        :param action_sets: when given, selectors are rendered with the action labels, else with action indices.
        :return: one row per record: n, offset, span, residual, selector (space separated, state order).
        """
        def render(selector):
            if action_sets is None:
                return ' '.join(str(a) for a in selector)
            return ' '.join(str(action_sets[x][a]) for x, a in enumerate(selector))

        return pd.DataFrame.from_records(
            [dict(n=r.n, offset=r.offset, span=r.span, residual=r.residual, selector=render(r.selector))
             for r in self.records],
            columns=['n', 'offset', 'span', 'residual', 'selector'])

    def __json__(self):
        return dict(method=self.method,
                    index_space=self.index_space.value,
                    iterations=self.iterations,
                    converged=self.converged,
                    beta=self.beta,
                    offset=self.offset,
                    final=self.final,
                    snapshots={str(n): f.tolist() for n, f in sorted(self.snapshots.items())})


Step = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray, Optional[float]]]


def _iterate(method: str, step: Step, f0: np.ndarray, stop: StopRule,
             index_space: IndexSpace = IndexSpace.base,
             compare: Callable[[np.ndarray], np.ndarray] = lambda f: f,
             drift_diverges: bool = False,
             offset_of: Optional[Callable[[np.ndarray], float]] = None,
             beta: Optional[float] = None) -> IterationTrace:
    """
    runs f_{n+1} = step(f_n) until span(compare(f_{n+1}) - compare(f_n)) < span_tol with no drift, or max_iters.
    :param compare: maps an iterate to the base field used by the stopping test (folding for split iterates).
    :param drift_diverges: when True, a settled span with a nonzero constant increment aborts the run
        (a wrong beta makes the iterates grow linearly).
    """
    trace = IterationTrace(method=method, index_space=index_space, beta=beta)
    snapshot = stop.snapshot_every
    f = np.array(f0, dtype=float)
    if snapshot:
        trace.snapshots[0] = f.copy()
    for n in range(stop.max_iters):
        f_next, selector, offset = step(f)
        diff = compare(f_next) - compare(f)
        spn = float(diff.max() - diff.min())
        trace.records.append(IterationRecord(n=n, offset=offset, span=spn,
                                             residual=float(np.abs(diff).max()),
                                             selector=tuple(int(a) for a in selector)))
        if not np.all(np.isfinite(f_next)) or np.abs(f_next).max() > stop.divergence_bound:
            raise DivergenceError(f"{method}: iterate exceeded {stop.divergence_bound:.3g} at n={n + 1}, beta likely incorrect",
                                  residual=spn, trace=trace)
        f = f_next
        if snapshot and (n + 1) % snapshot == 0:
            trace.snapshots[n + 1] = f.copy()
        if stop.log_every and (n + 1) % stop.log_every == 0:
            log.debug("%s: n=%s span=%.3g offset=%s", method, n + 1, spn, offset)
        if spn < stop.span_tol:
            drift = float(diff.mean())
            if abs(drift) <= stop.drift_tol:
                trace.converged = True
                break
            if drift_diverges:
                raise DivergenceError(f"{method}: iterates drift by {drift:.6g} per step, beta likely incorrect",
                                      residual=abs(drift), trace=trace)
    if snapshot:
        trace.snapshots[len(trace.records)] = f.copy()
    trace.final = ValueField(f, index_space)
    trace.offset = offset_of(f) if offset_of is not None else None
    if trace.converged:
        log.info("%s converged in %s iterations (offset=%s).", method, trace.iterations, trace.offset)
    else:
        log.warning("%s stopped after %s iterations without convergence (last span %.3g).",
                    method, trace.iterations, trace.records[-1].span if trace.records else float('nan'))
    return trace


def ensure_converged(trace: IterationTrace) -> IterationTrace:
    if not trace.converged:
        raise ConvergenceError(f"{trace.method} did not converge in {trace.iterations} iterations",
                               residual=trace.records[-1].span if trace.records else None, trace=trace)
    return trace


def difference_identity_gap(first: IterationTrace, second: IterationTrace, ns: Sequence[int]) -> float:
    """
    :return: max over n in ns of span(first_n - second_n), zero up to rounding for VI and RVI started from the same field.
    """
    return max(float(np.ptp(first.snapshot(n) - second.snapshot(n))) for n in ns)


def value_iteration(m: FiniteMdp, beta: float, phi0, stop: StopRule | None = None) -> IterationTrace:
    stop = stop or StopRule()
    m.ensure_valid()

    def step(f):
        qmin, selector = argmin_selector(q_values(m, f, beta))
        return qmin, selector, None

    return _iterate('value_iteration', step, as_values(phi0, m.n_states), stop, drift_diverges=True, beta=beta)


def initial_split_field(sc: SplitChainModel, v0) -> np.ndarray:
    """V0/(1-delta) on B x {0}, V0 off B, 0 on the atom."""
    v0 = as_values(v0, sc.base.n_states)
    level0 = v0.copy()
    B = list(sc.smallset.B)
    level0[B] = v0[B] / (1 - sc.delta)
    return np.concatenate([level0, np.zeros(len(B))])


def split_value_iteration(sc: SplitChainModel, beta: float, v0, stop: StopRule | None = None) -> IterationTrace:
    """
    value iteration on the split chain, with Phi_n the fold of the split iterate:
      level 0, x in B:  -beta + (min_u [c + P_u Phi_n](x) - delta.nu(Phi_n)) / (1-delta)
      level 0, x not in B:  -beta + min_u [c + P_u Phi_n](x)
      atom:  -beta + nu(Phi_n)
    """
    stop = stop or StopRule()
    m, s, delta = sc.base, sc.smallset, sc.delta
    m.ensure_valid()
    in_B = s.in_B
    n_atom = len(s.B)

    def fold(f):
        return fold_split_field(sc, f).values

    def step(f):
        phi = fold(f)
        qmin, selector = argmin_selector(q_values(m, phi, 0.0))
        nu_phi = float(s.nu @ phi)
        level0 = np.where(in_B, (qmin - delta * nu_phi) / (1 - delta), qmin) - beta
        atom = np.full(n_atom, nu_phi - beta)
        return np.concatenate([level0, atom]), selector, None

    return _iterate('split_value_iteration', step, initial_split_field(sc, v0), stop,
                    index_space=IndexSpace.split, compare=fold, drift_diverges=True, beta=beta)


def _relative_value_iteration(method: str, m: FiniteMdp, offset_of: Callable[[np.ndarray], float],
                              v0, stop: StopRule | None) -> IterationTrace:
    stop = stop or StopRule()
    m.ensure_valid()

    def step(f):
        qmin, selector = argmin_selector(q_values(m, f, 0.0))
        offset = offset_of(f)
        return qmin - offset, selector, offset

    return _iterate(method, step, as_values(v0, m.n_states), stop, offset_of=offset_of)


def rvi_nu(m: FiniteMdp, nu, v0, stop: StopRule | None = None) -> IterationTrace:
    nu = np.asarray(nu.nu if isinstance(nu, SmallSetSpec) else as_values(nu, m.n_states))
    if np.any(nu < 0) or abs(nu.sum() - 1) > 1e-12:
        raise ValueError("nu must be a probability vector.")
    return _relative_value_iteration('rvi_nu', m, lambda f: float(nu @ f), v0, stop)


def rvi_min(m: FiniteMdp, v0, stop: StopRule | None = None) -> IterationTrace:
    return _relative_value_iteration('rvi_min', m, lambda f: float(f.min()), v0, stop)


def rvi_anchor(m: FiniteMdp, xhat: int, v0, stop: StopRule | None = None,
               small_set: SmallSetSpec | None = None) -> IterationTrace:
    """
    :param small_set: when given, the anchor state must belong to its set B.
    """
    if not 0 <= xhat < m.n_states:
        raise ValueError(f"Anchor state {xhat} out of range.")
    if small_set is not None and xhat not in small_set.B:
        raise ValueError(f"Anchor state {xhat} is not in the small set B={list(small_set.B)}.")
    return _relative_value_iteration('rvi_anchor', m, lambda f: float(f[xhat]), v0, stop)


def acoe_residual(m: FiniteMdp, V, beta: float) -> float:
    values = as_values(V, m.n_states)
    field, _ = bellman_min(m, values, beta)
    return float(np.abs(values - field.values).max())


@dataclass(frozen=True, eq=False)
class H2Certificate:
    theta1: float
    theta2: float
    slack: np.ndarray

    @property
    def rho(self) -> float:
        return 1 - self.theta1

    def __json__(self):
        return dict(theta1=self.theta1, theta2=self.theta2, rho=self.rho, slack=self.slack.tolist())


def validate_h2(m: FiniteMdp, vstar, theta1: float, theta2: float, tol: float = 1e-12) -> H2Certificate:
    """
    checks min_u c(x,u) >= theta1.V*(x) - theta2 for every state.
    """
    if not 0 < theta1 < 1:
        raise H2Error(f"theta1={theta1} must lie in (0,1).")
    V = as_values(vstar, m.n_states)
    slack = m.c.min(axis=1) - theta1 * V + theta2
    if not np.all(np.isfinite(slack)):
        raise H2Error("Non finite slack, V* unbounded relative to the cost.")
    if slack.min() < -tol:
        raise H2Error(f"(theta1={theta1}, theta2={theta2}) fails at state {int(np.argmin(slack))} (slack {slack.min():.6g}).")
    return H2Certificate(theta1=float(theta1), theta2=float(theta2), slack=np.maximum(slack, 0.0))


def check_h2(m: FiniteMdp, vstar, grid: Sequence[float] = H2_GRID) -> H2Certificate:
    """
    :return: the certificate with the largest theta1 of the (decreasing) grid,
        taking theta2 = max(max_x (theta1.V*(x) - min_u c(x,u)), 0).
    """
    V = as_values(vstar, m.n_states)
    cmin = m.c.min(axis=1)
    for theta1 in sorted(grid, reverse=True):
        theta2 = max(float((theta1 * V - cmin).max()), 0.0)
        try:
            cert = validate_h2(m, V, theta1, theta2)
            log.debug("H2 certificate: theta1=%s, theta2=%.6g.", theta1, theta2)
            return cert
        except H2Error as e:
            log.debug("H2 grid value theta1=%s rejected: %s", theta1, e)
    raise H2Error(f"Degenerate H2 fit: theta1 floor {min(grid)} reached.")


def h1_diagnostic(m: FiniteMdp, policy: StationaryPolicy, vstar) -> float:
    """:return: pi*(V*), the stationary mean of V* under the optimal policy."""
    return float(stationary_distribution(m, policy) @ as_values(vstar, m.n_states))


@dataclass(frozen=True)
class EnvelopeFit:
    """
    the fitted envelope |Phi_n - V*| <= c0_hat (1 + rho^n V*), from the transient model
    max|Phi_n - V* - limit| ~ amplitude * decay_rate^n.
    """
    c0_hat: float
    amplitude: float
    decay_rate: float
    limit: float
    rho: float

    def bound(self, n: int, vstar) -> np.ndarray:
        return self.c0_hat * (1 + self.rho ** n * as_values(vstar))

    @property
    def decaying(self) -> bool:
        """False when the fitted transient does not shrink, i.e. Phi_n - V* has no constant limit."""
        return not self.decay_rate >= 1

    def __json__(self):
        return dict(c0_hat=self.c0_hat, amplitude=self.amplitude, decay_rate=self.decay_rate,
                    limit=self.limit, rho=self.rho)


def fit_envelope(trace: IterationTrace, vstar, cert: H2Certificate, floor: float = 1e-13) -> EnvelopeFit:
    """
    fits the transient max|Phi_n - V* - limit| by least squares of its log against n (points above `floor`),
    giving amplitude * decay_rate^n, and reads C0 off the fitted error |limit| + amplitude at the first iterate:
    the envelope is non-increasing in n, so a transient that grows past its start is not absorbed.
    The fit is not a certificate: check it with ``envelope_violations``.
    """
    if not trace.snapshots:
        raise AvgCostError("Envelope fit requires iterate snapshots (StopRule.snapshot_every).")
    V = as_values(vstar)
    ns = sorted(trace.snapshots)
    limit = float(np.mean(trace.snapshots[ns[-1]] - V))
    devs = np.array([np.abs(trace.snapshots[n] - V - limit).max() for n in ns])
    keep = devs > floor
    if keep.sum() >= 2:
        slope, intercept = np.polyfit(np.array(ns, dtype=float)[keep], np.log(devs[keep]), 1)
        amplitude, decay = float(np.exp(intercept)), float(np.exp(slope))
    else:
        amplitude, decay = 0.0, float('nan')
    den0 = 1 + cert.rho ** ns[0] * V
    scale = min(1.0, float(den0[den0 > 0].min())) if np.any(den0 > 0) else 1.0
    c0 = (abs(limit) + max(amplitude, float(devs[0]))) / scale
    log.info("Envelope fit: C0=%.6g, amplitude=%.6g, decay rate=%.6g, limit=%.6g.", c0, amplitude, decay, limit)
    return EnvelopeFit(c0_hat=c0, amplitude=amplitude, decay_rate=decay, limit=limit, rho=cert.rho)


def envelope_violations(trace: IterationTrace, vstar, fit: EnvelopeFit, tol: float = 1e-12) -> List[int]:
    """
    :return: the recorded n where |Phi_n - V*| exceeds the fitted envelope,
        including those where 1 + rho^n V* is not positive at a state with a nonzero error.
    """
    V = as_values(vstar)
    violations = []
    for n, f in sorted(trace.snapshots.items()):
        err = np.abs(f - V)
        bound = fit.bound(n, V)
        if np.any(err > bound + tol * (1 + np.abs(bound))) or np.any((bound <= 0) & (err > tol)):
            violations.append(n)
    return violations
