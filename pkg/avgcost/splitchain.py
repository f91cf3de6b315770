"""
**splitchain** module implements the split chain with pseudo-atom built from a small set (B, nu, delta)
satisfying the minorization P(y|x,u) >= delta.nu(y) for every x in B:

- the lifted state space is (X x {0}) followed by (B x {1}), in that order, B sorted;
- kernel rows and costs follow the splitting formulas, atom rows exit with nu split by (1-delta, delta);
- first-passage systems are solved with the atom absorbing.

The split chain itself is exposed as a ``FiniteMdp`` (``SplitChainModel.chain``),
so every one-step operator of **mdp** applies to it unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
import logging
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from .errors import MinorizationError, ModelValidationError, SingularSystemError
from .mdp import (FiniteMdp, IndexSpace, StationaryPolicy, ValueField, Violation,
                  as_values, policy_cost, policy_kernel, validate_policy)
from .utils import Namespace, json_load

log = logging.getLogger(__name__)

CLAMP_TOL = 1e-14
SINGULAR_RCOND = 1e-13
DELTA_SAFETY = 0.9


@dataclass(frozen=True, eq=False)
class SmallSetSpec:
    B: Tuple[int, ...]
    nu: np.ndarray
    delta: float

    def __post_init__(self):
        object.__setattr__(self, 'B', tuple(sorted(int(x) for x in self.B)))
        nu = np.array(self.nu, dtype=float)
        nu.setflags(write=False)
        object.__setattr__(self, 'nu', nu)
        object.__setattr__(self, 'delta', float(self.delta))

    @property
    def in_B(self) -> np.ndarray:
        mask = np.zeros(self.nu.size, dtype=bool)
        mask[list(self.B)] = True
        return mask

    @classmethod
    def from_dict(cls, d, m: FiniteMdp) -> SmallSetSpec:
        """
        :param d: dict following the json schema {"B": [states], "nu": {state: mass}, "delta": real | "auto"}
        """
        d = Namespace.dict(d) if isinstance(d, Namespace) else d
        B = [int(x) for x in d['B']]
        nu = np.zeros(m.n_states)
        raw_nu = d.get('nu')
        if raw_nu is None:
            nu[B] = 1 / len(B)
        elif isinstance(raw_nu, dict):
            for x, mass in raw_nu.items():
                nu[int(x)] = float(mass)
        else:
            nu[:] = raw_nu
        delta = d.get('delta', 'auto')
        if str(delta).lower() == 'auto':
            delta = choose_delta(m, B, nu)
        return cls(B=tuple(B), nu=nu, delta=float(delta))

    def __json__(self):
        return dict(B=list(self.B),
                    nu={str(x): float(self.nu[x]) for x in np.flatnonzero(self.nu)},
                    delta=self.delta)


def minorization_witness(m: FiniteMdp, s: SmallSetSpec, tol: float = CLAMP_TOL):
    """:return: the first (x, u, y) with P(y|x,u) < delta.nu(y) (beyond `tol`), None if the minorization holds."""
    for x in s.B:
        for i, u in enumerate(m.action_sets[x]):
            diff = m.P[x, i] - s.delta * s.nu
            bad = np.flatnonzero(diff < -tol)
            if bad.size:
                return x, u, int(bad[0])
    return None


def _min_mass_to_B(m: FiniteMdp, B: Sequence[int]) -> float:
    B = list(B)
    return min(float(m.P[x, i, B].sum()) for x in B for i in range(m.n_actions(x)))


def validate_smallset(m: FiniteMdp, s: SmallSetSpec, strict_gap: bool = True) -> List[Violation]:
    violations = []
    if len(s.B) == 0:
        violations.append(Violation("B", "empty small set"))
        return violations
    if any(not 0 <= x < m.n_states for x in s.B):
        violations.append(Violation("B", f"states out of range: {list(s.B)}"))
        return violations
    if s.nu.shape != (m.n_states,):
        violations.append(Violation("nu", f"length {s.nu.size}, expected {m.n_states}"))
        return violations
    if np.any(s.nu < 0):
        violations.append(Violation("nu", "negative mass"))
    if abs(s.nu.sum() - 1) > 1e-12:
        violations.append(Violation("nu", f"total mass {s.nu.sum():.12g}"))
    if np.any(s.nu[~s.in_B] != 0):
        violations.append(Violation("nu", "mass outside B"))
    if not 0 < s.delta < 1:
        violations.append(Violation("delta", f"{s.delta} not in (0,1)"))
        return violations
    witness = minorization_witness(m, s)
    if witness is not None:
        x, u, y = witness
        violations.append(Violation(f"({x},{u})", f"minorization violated at y={y}"))
    if strict_gap:
        gap = _min_mass_to_B(m, s.B) - s.delta
        if gap <= 0:
            violations.append(Violation("delta", f"no strict gap below min P(B|x,u) (gap {gap:.6g})"))
    return violations


def choose_delta(m: FiniteMdp, B: Sequence[int], nu, safety: float = DELTA_SAFETY) -> float:
    """
    delta = safety * min_{x in B, u, y: nu(y) > 0} P(y|x,u)/nu(y), kept strictly below min_{x in B, u} P(B|x,u).
    """
    nu = as_values(nu, m.n_states)
    support = np.flatnonzero(nu > 0)
    if support.size == 0:
        raise ModelValidationError("The minorizing measure nu has no mass.")
    ratio, witness = np.inf, None
    for x in B:
        for i, u in enumerate(m.action_sets[x]):
            r = m.P[x, i, support] / nu[support]
            j = int(np.argmin(r))
            if r[j] < ratio:
                ratio, witness = float(r[j]), (x, u, int(support[j]))
    if ratio <= 0:
        raise MinorizationError("No positive delta satisfies the minorization", witness)
    delta = safety * ratio
    min_mass = _min_mass_to_B(m, B)
    if delta >= min_mass:
        delta = safety * min_mass
    log.debug("Chose delta=%.6g for B=%s (min ratio %.6g).", delta, list(B), ratio)
    return delta


def auto_smallset(m: FiniteMdp) -> SmallSetSpec:
    """
    picks the singleton B={b} maximizing the self-return mass min_u P(b|b,u) (lowest state on ties),
    nu the point mass at b, and delta from `choose_delta`.
    """
    self_mass = np.array([min(m.P[b, i, b] for i in range(m.n_actions(b))) for b in range(m.n_states)])
    b = int(np.argmax(self_mass))
    if self_mass[b] <= 0:
        raise MinorizationError("Minorization fails for every singleton small set")
    nu = np.zeros(m.n_states)
    nu[b] = 1.0
    s = SmallSetSpec(B=(b,), nu=nu, delta=choose_delta(m, (b,), nu))
    log.info("Auto small set: B=%s, delta=%.6g.", list(s.B), s.delta)
    return s


def load_smallset(path, m: FiniteMdp) -> SmallSetSpec:
    d = json_load(path)
    return SmallSetSpec.from_dict(d.get('smallset', d), m)


def delta_circ(m: FiniteMdp, s: SmallSetSpec) -> float:
    """:return: ((1-delta)/delta) / (min_{x in B, u} P(B|x,u) - delta)."""
    gap = _min_mass_to_B(m, s.B) - s.delta
    if gap <= 0:
        raise ModelValidationError(f"delta too large for finite delta_circ (gap {gap:.6g}).")
    return (1 - s.delta) / s.delta / gap


def near_monotone_margin(m: FiniteMdp, s: SmallSetSpec, beta: float) -> float:
    """:return: min over x outside B of min_u c(x,u) - beta, +inf when B covers every state."""
    outside = [x for x in range(m.n_states) if x not in s.B]
    if not outside:
        return float('inf')
    return float(m.c[outside].min() - beta)


class SplitChainModel:

    def __init__(self, base: FiniteMdp, smallset: SmallSetSpec, chain: FiniteMdp, delta_circ: float | None):
        self.base = base
        self.smallset = smallset
        self.chain = chain
        self.delta_circ = delta_circ
        n = base.n_states
        self.split_states: Tuple[Tuple[int, int], ...] = tuple([(x, 0) for x in range(n)] + [(x, 1) for x in smallset.B])
        self._index = {st: k for k, st in enumerate(self.split_states)}

    @property
    def delta(self) -> float:
        return self.smallset.delta

    @property
    def n_split(self) -> int:
        return len(self.split_states)

    @property
    def q_kernel(self) -> np.ndarray:
        return self.chain.P

    @property
    def split_cost(self) -> np.ndarray:
        return self.chain.c

    def index(self, x: int, level: int) -> int:
        return self._index[(x, level)]

    @property
    def atom_indices(self) -> np.ndarray:
        return np.arange(self.base.n_states, self.n_split)

    @property
    def labels(self) -> List[str]:
        return [f"{x}:{i}" for x, i in self.split_states]

    def to_dict(self) -> dict:
        kernel, cost = {}, {}
        for k, (x, i) in enumerate(self.split_states):
            for a, u in enumerate(self.base.action_sets[x]):
                kernel[f"{x}:{i},{u}"] = [float(p) for p in self.chain.P[k, a]]
                cost[f"{x}:{i},{u}"] = float(self.chain.c[k, a])
        return dict(n_states=self.n_split,
                    states=self.labels,
                    actions=[list(self.base.action_sets[x]) for x, _ in self.split_states],
                    kernel=kernel,
                    cost=cost,
                    delta=self.delta,
                    delta_circ=self.delta_circ)

    def __json__(self):
        return self.to_dict()


def _clamp_row(row: np.ndarray, where: str, tol: float) -> np.ndarray:
    low = row.min()
    if low >= 0:
        return row
    if low < -tol:
        raise MinorizationError(f"Negative split kernel entry {low:.3g} in row {where}")
    row = np.where(row < 0, 0.0, row)
    return row / row.sum()


def build_split_chain(m: FiniteMdp, s: SmallSetSpec, clamp_tol: float = CLAMP_TOL) -> SplitChainModel:
    m.ensure_valid()
    violations = validate_smallset(m, s, strict_gap=False)
    if violations:
        witness = minorization_witness(m, s)
        if witness is not None:
            raise MinorizationError("Split chain construction refused: minorization violated", witness)
        raise ModelValidationError("Invalid small set:", violations)

    n, delta = m.n_states, s.delta
    in_B = s.in_B
    B = list(s.B)
    kernel, cost = [], []
    for x in range(n):
        rows, costs = [], []
        for i in range(m.n_actions(x)):
            p = m.P[x, i]
            if in_B[x]:
                residual = p - delta * s.nu
                level0 = np.where(in_B, residual, p / (1 - delta))
                level1 = delta / (1 - delta) * residual[B]
                c = m.c[x, i] / (1 - delta)
            else:
                level0 = np.where(in_B, (1 - delta) * p, p)
                level1 = delta * p[B]
                c = m.c[x, i]
            rows.append(_clamp_row(np.concatenate([level0, level1]), f"({x}:0,{m.action_sets[x][i]})", clamp_tol))
            costs.append(c)
        kernel.append(rows)
        cost.append(costs)

    atom_row = np.concatenate([(1 - delta) * s.nu, delta * s.nu[B]])
    for x in B:
        kernel.append([atom_row] * m.n_actions(x))
        cost.append([0.0] * m.n_actions(x))

    action_sets = list(m.action_sets) + [m.action_sets[x] for x in B]
    labels = [f"{x}:0" for x in range(n)] + [f"{x}:1" for x in B]
    chain = FiniteMdp(action_sets, kernel, cost, cost_floor=0.0, state_labels=labels)
    try:
        dcirc = delta_circ(m, s)
    except ModelValidationError:
        log.warning("delta=%s leaves no gap below min P(B|x,u): delta_circ is infinite.", delta)
        dcirc = None
    log.debug("Built split chain with %s states (delta=%.6g, delta_circ=%s).", len(labels), delta, dcirc)
    return SplitChainModel(m, s, chain, dcirc)


def lift_policy(sc: SplitChainModel, v: StationaryPolicy) -> StationaryPolicy:
    """the base policy acting on both copies (x,0) and (x,1) of each state."""
    validate_policy(sc.base, v)
    choice = [v.choice[x] for x, _ in sc.split_states]
    return StationaryPolicy(v.kind, tuple(choice))


def split_measure(mu, s: SmallSetSpec) -> np.ndarray:
    mu = as_values(mu)
    if abs(mu.sum() - 1) > 1e-12:
        raise ValueError(f"mu must be a probability vector (total mass {mu.sum():.12g}).")
    in_B = np.zeros(mu.size, dtype=bool)
    in_B[list(s.B)] = True
    level0 = np.where(in_B, (1 - s.delta) * mu, mu)
    return np.concatenate([level0, s.delta * mu[list(s.B)]])


def marginalize(split_mu, s: SmallSetSpec) -> np.ndarray:
    split_mu = as_values(split_mu)
    n = split_mu.size - len(s.B)
    base = split_mu[:n].copy()
    base[list(s.B)] += split_mu[n:]
    return base


def fold_split_field(sc: SplitChainModel, f) -> ValueField:
    """folds a split-indexed field: (1-delta)f(x,0) + delta.f(x,1) on B, f(x,0) off B."""
    values = as_values(f, sc.n_split)
    n = sc.base.n_states
    base = values[:n].copy()
    B = list(sc.smallset.B)
    base[B] = (1 - sc.delta) * values[B] + sc.delta * values[n:]
    return ValueField(base, IndexSpace.base)


def pushforward(kernel: np.ndarray, mu, n_steps: int) -> np.ndarray:
    """:return: array of shape (n_steps+1, n) with the laws mu, mu.P, ..., mu.P^n_steps."""
    laws = np.empty((n_steps + 1, kernel.shape[0]))
    laws[0] = as_values(mu)
    for k in range(n_steps):
        laws[k + 1] = laws[k] @ kernel
    return laws


def accumulated_cost(kernel: np.ndarray, cost: np.ndarray, mu, n_steps: int) -> float:
    """:return: expected cost accumulated over the first `n_steps` steps from initial law mu."""
    laws = pushforward(kernel, mu, max(n_steps - 1, 0))[:n_steps]
    return float((laws @ cost).sum())


def _reaching_atom(sc: SplitChainModel, Q: np.ndarray) -> np.ndarray:
    reverse = csr_matrix((Q > 0).T.astype(np.int8))
    reached = np.zeros(sc.n_split, dtype=bool)
    for a in sc.atom_indices:
        reached[breadth_first_order(reverse, int(a), directed=True, return_predecessors=False)] = True
    return reached


def _solve_stopped(sc: SplitChainModel, v: StationaryPolicy, rhs: np.ndarray) -> np.ndarray:
    """solves h = rhs + Q_v^stopped h, where transitions into the atom are absorbed."""
    Q = policy_kernel(sc.chain, lift_policy(sc, v))
    stopped = Q.copy()
    stopped[:, sc.atom_indices] = 0.0
    reached = _reaching_atom(sc, Q)
    if not reached.all():
        k = int(np.flatnonzero(~reached)[0])
        raise SingularSystemError("Singular first-passage system", sc.labels[k])
    A = np.eye(sc.n_split) - stopped
    rcond = 1 / np.linalg.cond(A, 1)
    if not np.isfinite(rcond) or rcond < SINGULAR_RCOND:
        raise SingularSystemError(f"Singular first-passage system (rcond={rcond:.3g})")
    return sla.lu_solve(sla.lu_factor(A), rhs)


def expected_visits_before_atom(sc: SplitChainModel, v: StationaryPolicy) -> ValueField:
    """:return: h(z) = expected number of visits to B x {0} before reaching the atom, from split state z."""
    indicator = np.zeros(sc.n_split)
    indicator[list(sc.smallset.B)] = 1.0
    return ValueField(_solve_stopped(sc, v, indicator), IndexSpace.split)


def first_return_cost(sc: SplitChainModel, v: StationaryPolicy, beta: float) -> ValueField:
    """:return: g(z) = expected sum of (split cost - beta) accumulated before reaching the atom, from split state z."""
    lifted = lift_policy(sc, v)
    rhs = policy_cost(sc.chain, lifted) - beta
    return ValueField(_solve_stopped(sc, v, rhs), IndexSpace.split)
