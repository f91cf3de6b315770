"""
**mdp** module provides the finite controlled Markov chain model and the one-step operators shared by all solvers:

- ``FiniteMdp``: states 0..n-1, per-state ordered action lists, kernel P(y|x,u) and cost c(x,u).
- ``StationaryPolicy``: deterministic or randomized stationary Markov policy.
- ``ValueField``: a real function over (base or split) states.
- ``validate_mdp``, ``apply_kernel`` (P_v f) and ``bellman_min`` (min_u [c - beta + P_u f] with its selector).

Internally the kernel is stored as a dense array of shape (n_states, max_actions, n_states),
padded with zeros, and the cost as (n_states, max_actions) padded with +inf,
so that every operator is a vectorized numpy expression.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from enum import Enum
import logging
from typing import Any, Hashable, Sequence, Tuple, Union

import numpy as np

from .errors import ModelValidationError
from .utils import Namespace, json_dump, json_load

log = logging.getLogger(__name__)

ROW_TOL = 1e-12
ARGMIN_TOL = 1e-12
DEFAULT_COST_FLOOR = 1.0


@dataclass(frozen=True)
class Violation:
    location: str
    message: str

    def __str__(self):
        return f"{self.location}: {self.message}"

    def __json__(self):
        return dict(location=self.location, message=self.message)


class IndexSpace(Enum):
    base = 'base'
    split = 'split'


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class FiniteMdp:
    """
    A finite MDP (X, U, U(x), P, c).
    Actions are identified by their index in the action list of their state,
    the action ids (labels) are only used for input/output.
    """

    def __init__(self,
                 action_sets: Sequence[Sequence[Hashable]],
                 kernel: Sequence[Sequence[Sequence[float]]],
                 cost: Sequence[Sequence[float]],
                 cost_floor: float = DEFAULT_COST_FLOOR,
                 state_labels: Sequence[str] | None = None):
        """
        :param action_sets: for each state, the ordered list of admissible action ids.
        :param kernel: kernel[x][i] is the probability vector P(.|x, action_sets[x][i]).
        :param cost: cost[x][i] is c(x, action_sets[x][i]).
        :param cost_floor: lower bound expected for all costs (violations are reported by `validate_mdp`).
        :param state_labels: optional display labels for the states.
        """
        self.action_sets: Tuple[Tuple[Hashable, ...], ...] = tuple(tuple(acts) for acts in action_sets)
        n = len(self.action_sets)
        if n == 0:
            raise ValueError("An MDP requires at least one state.")
        if len(kernel) != n or len(cost) != n:
            raise ValueError(f"kernel and cost must provide entries for each of the {n} states.")
        self.n_states = n
        self.max_actions = max(1, max(len(acts) for acts in self.action_sets))
        self.cost_floor = float(cost_floor)
        self.state_labels = tuple(state_labels) if state_labels is not None else tuple(str(x) for x in range(n))

        P = np.zeros((n, self.max_actions, n))
        c = np.full((n, self.max_actions), np.inf)
        mask = np.zeros((n, self.max_actions), dtype=bool)
        for x, acts in enumerate(self.action_sets):
            if len(kernel[x]) != len(acts) or len(cost[x]) != len(acts):
                raise ValueError(f"State {x} declares {len(acts)} actions but kernel/cost entries don't match.")
            for i in range(len(acts)):
                row = np.asarray(kernel[x][i], dtype=float)
                if row.shape != (n,):
                    raise ValueError(f"Kernel row ({x},{acts[i]}) has length {row.size}, expected {n}.")
                P[x, i] = row
                c[x, i] = float(cost[x][i])
                mask[x, i] = True
        self.P = _readonly(P)
        self.c = _readonly(c)
        self.mask = _readonly(mask)

    @classmethod
    def from_arrays(cls, P: np.ndarray, c: np.ndarray, action_ids=None, cost_floor=DEFAULT_COST_FLOOR):
        """
        builds a model where every state admits the same actions.
        :param P: array of shape (n_states, n_actions, n_states).
        :param c: array of shape (n_states, n_actions).
        """
        P = np.asarray(P, dtype=float)
        c = np.asarray(c, dtype=float)
        n, k, _ = P.shape
        ids = list(action_ids) if action_ids is not None else list(range(k))
        return cls([ids] * n, [list(P[x]) for x in range(n)], [list(c[x]) for x in range(n)], cost_floor=cost_floor)

    @classmethod
    def from_dict(cls, d) -> FiniteMdp:
        """
        :param d: dict following the json schema
            {"n_states": int, "actions": [[id,...],...], "kernel": {"x,u": [p0,...]}, "cost": {"x,u": c}, "cost_floor": real}
        """
        d = Namespace.dict(d) if isinstance(d, Namespace) else d
        n = int(d['n_states'])
        actions = d['actions']
        if len(actions) != n:
            raise ModelValidationError(f"`actions` lists {len(actions)} states, expected {n}.")
        kernel, cost = [], []
        for x, acts in enumerate(actions):
            rows, costs = [], []
            for u in acts:
                key = f"{x},{u}"
                if key not in d['kernel'] or key not in d['cost']:
                    raise ModelValidationError(f"Missing kernel or cost entry for `{key}`.")
                rows.append(d['kernel'][key])
                costs.append(d['cost'][key])
            kernel.append(rows)
            cost.append(costs)
        return cls(actions, kernel, cost,
                   cost_floor=d.get('cost_floor', DEFAULT_COST_FLOOR),
                   state_labels=d.get('state_labels'))

    def to_dict(self) -> dict:
        kernel, cost = {}, {}
        for x, acts in enumerate(self.action_sets):
            for i, u in enumerate(acts):
                kernel[f"{x},{u}"] = [float(p) for p in self.P[x, i]]
                cost[f"{x},{u}"] = float(self.c[x, i])
        return dict(n_states=self.n_states,
                    actions=[list(acts) for acts in self.action_sets],
                    kernel=kernel,
                    cost=cost,
                    cost_floor=self.cost_floor)

    def __json__(self):
        return self.to_dict()

    def n_actions(self, x: int) -> int:
        return len(self.action_sets[x])

    def action_index(self, x: int, u: Hashable) -> int:
        acts = self.action_sets[x]
        if u in acts:
            return acts.index(u)
        if str(u) in map(str, acts):
            return list(map(str, acts)).index(str(u))
        raise ValueError(f"Action `{u}` is not admissible in state {x}: {acts}.")

    @cached_property
    def n_policies(self) -> int:
        return int(np.prod([len(acts) for acts in self.action_sets], dtype=object))

    @cached_property
    def violations(self):
        return validate_mdp(self)

    def ensure_valid(self):
        if self.violations:
            raise ModelValidationError("Invalid MDP model:", self.violations)
        return self

    def __repr__(self):
        return f"FiniteMdp(n_states={self.n_states}, actions={[len(a) for a in self.action_sets]})"


class PolicyKind(Enum):
    deterministic = 'deterministic'
    randomized = 'randomized'


@dataclass(frozen=True)
class StationaryPolicy:
    """
    deterministic: `choice` is the tuple of action indices (one per state).
    randomized: `choice` is the tuple of per-state probability tuples over that state's action list.
    """
    kind: PolicyKind
    choice: tuple

    @classmethod
    def deterministic(cls, actions: Sequence[int]) -> StationaryPolicy:
        return cls(PolicyKind.deterministic, tuple(int(a) for a in actions))

    @classmethod
    def randomized(cls, probabilities: Sequence[Sequence[float]]) -> StationaryPolicy:
        return cls(PolicyKind.randomized, tuple(tuple(float(p) for p in row) for row in probabilities))

    @classmethod
    def from_labels(cls, m: FiniteMdp, labels: Sequence[Hashable]) -> StationaryPolicy:
        if len(labels) != m.n_states:
            raise ValueError(f"Expected {m.n_states} actions, got {len(labels)}.")
        return cls.deterministic([m.action_index(x, u) for x, u in enumerate(labels)])

    @property
    def is_deterministic(self) -> bool:
        return self.kind is PolicyKind.deterministic

    @property
    def n_states(self) -> int:
        return len(self.choice)

    def matrix(self, m: FiniteMdp) -> np.ndarray:
        """:return: the (n_states, max_actions) matrix of v(u|x), zero on padded actions."""
        if self.n_states != m.n_states:
            raise ValueError(f"Policy defined on {self.n_states} states, model has {m.n_states}.")
        probs = np.zeros((m.n_states, m.max_actions))
        if self.is_deterministic:
            probs[np.arange(m.n_states), list(self.choice)] = 1.0
        else:
            for x, row in enumerate(self.choice):
                probs[x, :len(row)] = row
        return probs

    def labels(self, m: FiniteMdp) -> tuple:
        if not self.is_deterministic:
            raise ValueError("Only deterministic policies have action labels.")
        return tuple(m.action_sets[x][a] for x, a in enumerate(self.choice))

    def __json__(self):
        return dict(kind=self.kind.value, choice=[list(c) if isinstance(c, tuple) else c for c in self.choice])


def validate_policy(m: FiniteMdp, v: StationaryPolicy):
    if v.n_states != m.n_states:
        raise ValueError(f"Policy defined on {v.n_states} states, model has {m.n_states}.")
    for x, choice in enumerate(v.choice):
        k = m.n_actions(x)
        if v.is_deterministic:
            if not 0 <= choice < k:
                raise ValueError(f"Action index {choice} is not admissible in state {x}.")
        else:
            row = np.asarray(choice)
            if row.size != k or np.any(row < 0) or abs(row.sum() - 1) > ROW_TOL:
                raise ValueError(f"Randomized choice {choice} at state {x} is not a distribution over {k} actions.")
    return v


@dataclass(frozen=True, eq=False)
class ValueField:
    values: np.ndarray
    index_space: IndexSpace = IndexSpace.base

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("A value field is a vector.")
        if not np.all(np.isfinite(values)):
            raise ValueError("Value field entries must be finite.")
        object.__setattr__(self, 'values', _readonly(values))

    def __len__(self):
        return self.values.size

    def __getitem__(self, item):
        return self.values[item]

    def __json__(self):
        return dict(values=self.values.tolist(), index_space=self.index_space.value)


FieldLike = Union[ValueField, Sequence[float], np.ndarray]


def as_values(f: FieldLike, n: int | None = None) -> np.ndarray:
    values = f.values if isinstance(f, ValueField) else np.asarray(f, dtype=float)
    if n is not None and values.shape != (n,):
        raise ValueError(f"Value field of length {values.size} doesn't match the {n} states of the model.")
    return values


def span(f: FieldLike) -> float:
    values = as_values(f)
    return float(values.max() - values.min())


def validate_mdp(m: FiniteMdp) -> list:
    """
    :return: every invariant violation of the model with its location, an empty list when valid.
    """
    violations = []
    for x, acts in enumerate(m.action_sets):
        if len(acts) == 0:
            violations.append(Violation(f"state {x}", "no admissible action"))
        for i, u in enumerate(acts):
            loc = f"({x},{u})"
            row = m.P[x, i]
            if not np.all(np.isfinite(row)):
                violations.append(Violation(loc, "non finite kernel entry"))
                continue
            if np.any(row < 0):
                violations.append(Violation(loc, f"negative kernel entry {row.min():.17g}"))
            total = row.sum()
            if abs(total - 1) > ROW_TOL:
                violations.append(Violation(loc, f"row sum {total:.12g}"))
            cost = m.c[x, i]
            if not np.isfinite(cost):
                violations.append(Violation(loc, "non finite cost"))
            elif cost < m.cost_floor:
                violations.append(Violation(loc, f"cost below floor ({cost:.12g} < {m.cost_floor:.12g})"))
    return violations


def policy_kernel(m: FiniteMdp, v: StationaryPolicy) -> np.ndarray:
    """:return: the transition matrix P_v."""
    return np.einsum('xa,xay->xy', v.matrix(m), m.P)


def policy_cost(m: FiniteMdp, v: StationaryPolicy) -> np.ndarray:
    """:return: the running cost c_v."""
    probs = v.matrix(m)
    return (probs * np.where(m.mask, m.c, 0.0)).sum(axis=1)


def apply_kernel(m: FiniteMdp, v: StationaryPolicy, f: FieldLike) -> ValueField:
    index_space = f.index_space if isinstance(f, ValueField) else IndexSpace.base
    values = as_values(f, m.n_states)
    validate_policy(m, v)
    if v.is_deterministic:
        out = m.P[np.arange(m.n_states), list(v.choice)] @ values
    else:
        out = policy_kernel(m, v) @ values
    return ValueField(out, index_space)


def q_values(m: FiniteMdp, f: FieldLike, beta: float = 0.0) -> np.ndarray:
    """:return: the (n_states, max_actions) array c(x,u) - beta + P_u f(x), +inf on padded actions."""
    values = as_values(f, m.n_states)
    cont = m.P @ values
    return np.where(m.mask, m.c - beta + cont, np.inf)


def argmin_selector(q: np.ndarray, tol: float = ARGMIN_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    :return: the row minima of q and the lowest index reaching each minimum within `tol`.
    """
    qmin = q.min(axis=1)
    selector = np.argmax(q <= qmin[:, None] + tol, axis=1)
    return qmin, selector


def bellman_min(m: FiniteMdp, f: FieldLike, beta: float) -> Tuple[ValueField, StationaryPolicy]:
    """
    one application of the operator f -> min_u [c(.,u) - beta + P_u f].
    :return: the minimized field and the minimizing deterministic selector (lowest action index on ties).
    """
    index_space = f.index_space if isinstance(f, ValueField) else IndexSpace.base
    qmin, selector = argmin_selector(q_values(m, f, beta))
    return ValueField(qmin, index_space), StationaryPolicy.deterministic(selector)


def load_mdp(path) -> FiniteMdp:
    log.debug("Loading MDP model from `%s`.", path)
    d = json_load(path)
    return FiniteMdp.from_dict(d.get('mdp', d))


def dump_mdp(m: FiniteMdp, path):
    json_dump(m.to_dict(), path, style='pretty')


def as_policy(m: FiniteMdp, policy: Any) -> StationaryPolicy:
    """accepts a StationaryPolicy or a sequence of action labels."""
    if isinstance(policy, StationaryPolicy):
        return validate_policy(m, policy)
    return StationaryPolicy.from_labels(m, policy)
