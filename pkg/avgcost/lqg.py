"""
**lqg** module implements the sensor scheduling example:
a linear quadratic Gaussian plant observed through queries q, each with its own
measurement matrices (C_q, F_q), loss rate lambda(q) and querying cost c(q).

- ``solve_riccati``: the control Riccati equation, gain K* and Pi~* = R - Pi* + A'Pi*A.
- ``xi``, ``kalman_gain``, ``t_q``: the covariance maps of the Kalman filter with lossy observations.
- ``build_variance_grid_mdp``: the covariance-state controlled chain of a scalar plant on a uniform grid,
  with running cost r(q, sigma) = c(q) + trace(Pi~* sigma).
- ``simulate_closed_loop``: seeded Monte Carlo of the plant, filter, certainty equivalent control and schedule.

Covariances are plain ``numpy`` arrays of shape (d, d); scalars are accepted wherever a covariance is expected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ConvergenceError, InstabilityError, LqgModelError, MinorizationError, RiccatiError
from .job import Job, run_jobs
from .mdp import FiniteMdp, StationaryPolicy, Violation
from .splitchain import SmallSetSpec, auto_smallset, choose_delta
from .utils import Namespace, json_load, profile

log = logging.getLogger(__name__)

SYM_TOL = 1e-10
PSD_TOL = 1e-10
STABILIZABILITY_TOL = 1e-8
ORTHOGONALITY_TOL = 1e-10
RICCATI_TOL = 1e-13
RICCATI_MAX_ITERS = 100_000
BLOWUP = 1e9


def _matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if m.ndim != 2:
        raise LqgModelError(f"`{name}` must be a matrix, got shape {m.shape}.")
    return m


@dataclass(frozen=True, eq=False)
class Query:
    C: np.ndarray
    F: np.ndarray
    loss: float
    cost: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, 'C', _matrix(self.C, 'C'))
        object.__setattr__(self, 'F', _matrix(self.F, 'F'))
        object.__setattr__(self, 'loss', float(self.loss))
        object.__setattr__(self, 'cost', float(self.cost))

    def __json__(self):
        return dict(name=self.name, C=self.C.tolist(), F=self.F.tolist(), loss=self.loss, cost=self.cost)


@dataclass(frozen=True, eq=False)
class LqgModel:
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    R: np.ndarray
    M: np.ndarray
    queries: Tuple[Query, ...]

    def __post_init__(self):
        for name in ['A', 'B', 'D', 'R', 'M']:
            object.__setattr__(self, name, _matrix(getattr(self, name), name))
        queries = tuple(q if q.name else Query(q.C, q.F, q.loss, q.cost, name=f"q{i}")
                        for i, q in enumerate(self.queries))
        object.__setattr__(self, 'queries', queries)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def d_u(self) -> int:
        return self.B.shape[1]

    @property
    def d_w(self) -> int:
        return self.D.shape[1]

    @property
    def is_scalar(self) -> bool:
        return self.d == 1 and self.d_u == 1 and all(q.C.shape[0] == 1 for q in self.queries)

    @property
    def query_names(self) -> List[str]:
        return [q.name for q in self.queries]

    @property
    def noise_covariance(self) -> np.ndarray:
        return self.D @ self.D.T

    @classmethod
    def from_dict(cls, d) -> LqgModel:
        """
        :param d: dict following the json schema {"A", "B", "D", "R", "M": dense row-major matrices (or scalars),
            "queries": [{"name", "C", "F", "loss", "cost"}]}
        """
        d = Namespace.dict(d) if isinstance(d, Namespace) else d
        missing = [k for k in ['A', 'B', 'D', 'R', 'M', 'queries'] if k not in d]
        if missing:
            raise LqgModelError(f"LQG model is missing {missing}.")
        queries = tuple(Query(C=q['C'], F=q['F'], loss=q.get('loss', 0.0), cost=q['cost'], name=q.get('name', f"q{i}"))
                        for i, q in enumerate(d['queries']))
        return cls(A=d['A'], B=d['B'], D=d['D'], R=d['R'], M=d['M'], queries=queries)

    def __json__(self):
        return dict(A=self.A.tolist(), B=self.B.tolist(), D=self.D.tolist(), R=self.R.tolist(), M=self.M.tolist(),
                    queries=list(self.queries))


def load_lqg(path) -> LqgModel:
    d = json_load(path)
    return LqgModel.from_dict(d.get('lqg', d))


def _check_spd(S: np.ndarray, name: str, violations: List[Violation]):
    if S.shape[0] != S.shape[1]:
        violations.append(Violation(name, f"not square {S.shape}"))
        return
    if np.abs(S - S.T).max() > SYM_TOL:
        violations.append(Violation(name, "not symmetric"))
    elif np.linalg.eigvalsh(S).min() <= SYM_TOL:
        violations.append(Violation(name, "not positive definite"))


def validate_lqg(lqg: LqgModel) -> List[Violation]:
    violations = []
    d, d_u, d_w = lqg.d, lqg.d_u, lqg.d_w
    if lqg.A.shape != (d, d):
        violations.append(Violation("A", f"not square {lqg.A.shape}"))
        return violations
    if lqg.B.shape[0] != d:
        violations.append(Violation("B", f"shape {lqg.B.shape}, expected ({d}, d_u)"))
    if lqg.D.shape[0] != d:
        violations.append(Violation("D", f"shape {lqg.D.shape}, expected ({d}, d_w)"))
    if lqg.R.shape != (d, d):
        violations.append(Violation("R", f"shape {lqg.R.shape}, expected ({d}, {d})"))
    if lqg.M.shape != (d_u, d_u):
        violations.append(Violation("M", f"shape {lqg.M.shape}, expected ({d_u}, {d_u})"))
    if violations:
        return violations
    _check_spd(lqg.R, "R", violations)
    _check_spd(lqg.M, "M", violations)
    for mu in np.linalg.eigvals(lqg.A):
        if abs(mu) >= 1 - STABILIZABILITY_TOL:
            pbh = np.hstack([lqg.A - mu * np.eye(d), lqg.B])
            if np.linalg.matrix_rank(pbh, tol=STABILIZABILITY_TOL) < d:
                violations.append(Violation("(A,B)", f"not stabilizable: uncontrollable mode {mu:.6g}"))
    if not lqg.queries:
        violations.append(Violation("queries", "no query"))
    for q in lqg.queries:
        loc = f"query {q.name}"
        if q.C.shape[1] != d or q.F.shape != (q.C.shape[0], d_w):
            violations.append(Violation(loc, f"C {q.C.shape} / F {q.F.shape} don't match d={d}, d_w={d_w}"))
            continue
        if np.linalg.cond(q.F @ q.F.T) > 1 / np.finfo(float).eps:
            violations.append(Violation(loc, "F F' is singular"))
        if np.abs(lqg.D @ q.F.T).max() > ORTHOGONALITY_TOL:
            violations.append(Violation(loc, "D F' != 0"))
        if not 0 <= q.loss <= 1:
            violations.append(Violation(loc, f"loss rate {q.loss} not in [0,1]"))
        if not q.cost > 0:
            violations.append(Violation(loc, f"query cost {q.cost} not positive"))
    return violations


def ensure_valid(lqg: LqgModel) -> LqgModel:
    violations = validate_lqg(lqg)
    if violations:
        raise LqgModelError("Invalid LQG model:", violations)
    return lqg


def ensure_psd(S, tol: float = PSD_TOL) -> np.ndarray:
    """symmetrizes S and clips rounding-level negative eigenvalues at 0."""
    S = _matrix(S)
    S = (S + S.T) / 2
    w, V = np.linalg.eigh(S)
    if w.min() < -tol:
        raise LqgModelError(f"Covariance is not positive semidefinite (eigenvalue {w.min():.3g}).")
    if w.min() < 0:
        S = (V * np.maximum(w, 0.0)) @ V.T
    return S


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    pi_star: np.ndarray
    pi_tilde: np.ndarray
    k_star: np.ndarray
    offset: float
    residual: float
    closed_loop_radius: float
    iterations: int

    def __json__(self):
        return dict(pi_star=self.pi_star.tolist(), pi_tilde=self.pi_tilde.tolist(), k_star=self.k_star.tolist(),
                    offset=self.offset, residual=self.residual, closed_loop_radius=self.closed_loop_radius,
                    iterations=self.iterations)


def _feedback_gain(lqg: LqgModel, Pi: np.ndarray) -> np.ndarray:
    return np.linalg.solve(lqg.M + lqg.B.T @ Pi @ lqg.B, lqg.B.T @ Pi @ lqg.A)


def riccati_map(lqg: LqgModel, Pi: np.ndarray) -> np.ndarray:
    """R + A'Pi.A - A'Pi.B (M + B'Pi.B)^-1 B'Pi.A"""
    A = lqg.A
    nxt = lqg.R + A.T @ Pi @ A - A.T @ Pi @ lqg.B @ _feedback_gain(lqg, Pi)
    return (nxt + nxt.T) / 2


def solve_riccati(lqg: LqgModel, tol: float = RICCATI_TOL, max_iters: int = RICCATI_MAX_ITERS) -> RiccatiSolution:
    ensure_valid(lqg)
    Pi = lqg.R.copy()
    diff = np.inf
    for it in range(1, max_iters + 1):
        nxt = riccati_map(lqg, Pi)
        diff = float(np.abs(nxt - Pi).max())
        Pi = nxt
        if diff < tol:
            break
    else:
        raise RiccatiError("Riccati iteration stalled", residual=diff)
    residual = float(np.abs(Pi - riccati_map(lqg, Pi)).max())
    K = _feedback_gain(lqg, Pi)
    radius = float(np.abs(np.linalg.eigvals(lqg.A - lqg.B @ K)).max())
    if radius >= 1:
        raise RiccatiError(f"Closed loop A - BK* is not stable (spectral radius {radius:.6g})", residual=residual)
    pi_tilde = lqg.R - Pi + lqg.A.T @ Pi @ lqg.A
    solution = RiccatiSolution(pi_star=Pi, pi_tilde=(pi_tilde + pi_tilde.T) / 2, k_star=K,
                               offset=float(np.trace(Pi @ lqg.noise_covariance)),
                               residual=residual, closed_loop_radius=radius, iterations=it)
    log.info("Riccati solved in %s iterations: residual %.3g, closed loop spectral radius %.6g.", it, residual, radius)
    return solution


def _query(lqg: LqgModel, q: Union[int, Query]) -> Query:
    return lqg.queries[q] if isinstance(q, (int, np.integer)) else q


def xi(lqg: LqgModel, sigma) -> np.ndarray:
    """DD' + A.sigma.A'"""
    S = _matrix(sigma)
    nxt = lqg.noise_covariance + lqg.A @ S @ lqg.A.T
    return (nxt + nxt.T) / 2


def kalman_gain(lqg: LqgModel, q: Union[int, Query], gamma: int, sigma) -> np.ndarray:
    """Xi.gamma.C' (gamma^2 C.Xi.C' + F.F')^-1, zero when the observation is lost (gamma = 0)."""
    q = _query(lqg, q)
    if not gamma:
        return np.zeros((lqg.d, q.C.shape[0]))
    X = xi(lqg, sigma)
    inner = gamma ** 2 * q.C @ X @ q.C.T + q.F @ q.F.T
    # K = X C' inner^-1, solved through the symmetric transpose
    return np.linalg.solve(inner, gamma * q.C @ X).T


def t_q(lqg: LqgModel, q: Union[int, Query], sigma) -> np.ndarray:
    """Xi - K_{q,1}.C.Xi, the posterior covariance after a received observation."""
    q = _query(lqg, q)
    X = xi(lqg, sigma)
    return ensure_psd(X - kalman_gain(lqg, q, 1, sigma) @ q.C @ X)


def query_cost(lqg: LqgModel, riccati: RiccatiSolution, q: Union[int, Query], sigma) -> float:
    """c(q) + trace(Pi~*.sigma)"""
    return _query(lqg, q).cost + float(np.trace(riccati.pi_tilde @ _matrix(sigma)))


def covariance_fixed_point(lqg: LqgModel, q: Union[int, Query], sigma0=None,
                           tol: float = 1e-13, max_iters: int = 100_000) -> np.ndarray:
    """:return: the fixed point of T_q reached from sigma0 (0 by default)."""
    S = np.zeros((lqg.d, lqg.d)) if sigma0 is None else _matrix(sigma0)
    diff = np.inf
    for _ in range(max_iters):
        nxt = t_q(lqg, q, S)
        diff = float(np.abs(nxt - S).max())
        S = nxt
        if diff < tol:
            return S
    raise ConvergenceError("Filtering covariance iteration did not converge", residual=diff)


def _capped(S: np.ndarray, sigma_max: float | None) -> np.ndarray:
    return S if sigma_max is None else np.minimum(S, sigma_max)


def covariance_operator(lqg: LqgModel, q: Union[int, Query], f: Callable[[np.ndarray], float], sigma,
                        sigma_max: float | None = None) -> float:
    """(1 - lambda(q)).f(T_q sigma) + lambda(q).f(Xi sigma), with Xi capped at sigma_max when given."""
    q = _query(lqg, q)
    return (1 - q.loss) * f(t_q(lqg, q, sigma)) + q.loss * f(_capped(xi(lqg, sigma), sigma_max))


@dataclass(frozen=True, eq=False)
class VarianceGridModel:
    mdp: FiniteMdp
    smallset: SmallSetSpec
    grid: np.ndarray
    sigma_star: float
    warnings: Tuple[str, ...] = ()

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def sigma_max(self) -> float:
        return float(self.grid[-1])

    def nearest(self, sigma) -> int:
        s = float(np.squeeze(sigma))
        return int(np.clip(np.rint(s / self.spacing), 0, self.grid.size - 1))

    def interpolate(self, values) -> Callable[[np.ndarray], float]:
        values = np.asarray(values, dtype=float)
        return lambda sigma: float(np.interp(float(np.squeeze(sigma)), self.grid, values))

    def __json__(self):
        return dict(grid=self.grid.tolist(), sigma_star=self.sigma_star, smallset=self.smallset,
                    warnings=list(self.warnings), mdp=self.mdp)


def _grid_smallset(lqg: LqgModel, mdp: FiniteMdp, b: int, warnings: List[str]) -> SmallSetSpec:
    nu = np.zeros(mdp.n_states)
    nu[b] = 1.0
    try:
        return SmallSetSpec(B=(b,), nu=nu, delta=choose_delta(mdp, (b,), nu))
    except MinorizationError as e:
        msg = f"Grid point {b} near the filtering fixed point is not a small set ({e}), falling back to the most absorbing grid point."
        log.warning(msg)
        warnings.append(msg)
    try:
        return auto_smallset(mdp)
    except MinorizationError as e:
        raise MinorizationError(f"{e}: use a denser grid or a larger small set") from e


@profile(logger=log)
def build_variance_grid_mdp(lqg: LqgModel, riccati: RiccatiSolution,
                            sigma_max: float = 5.0, n_points: int = 101) -> VarianceGridModel:
    """
    discretizes the scalar covariance chain on the uniform grid of [0, sigma_max]:
    from sigma under query q, the chain moves to the grid point nearest T_q(sigma) with probability 1 - lambda(q)
    and to the one nearest min(Xi(sigma), sigma_max) with probability lambda(q), at cost r(q, sigma).
    The small set is the grid point nearest the fixed point of T_q for the cheapest query,
    with nu its point mass.
    """
    ensure_valid(lqg)
    if lqg.d != 1:
        raise LqgModelError("The variance grid requires a scalar plant (d = 1).")
    if n_points < 2 or sigma_max <= 0:
        raise ValueError(f"Invalid grid: sigma_max={sigma_max}, n_points={n_points}.")
    a = float(lqg.A[0, 0])
    dd = float(lqg.noise_covariance[0, 0])
    losses = np.array([q.loss for q in lqg.queries])
    if abs(a) > 1 and np.all(losses >= 1):
        raise LqgModelError(f"Unstable plant (a={a}) with only lossy queries has no stationary covariance.")
    warnings: List[str] = []
    if np.any(losses > 0) and (abs(a) >= 1 or dd / (1 - a ** 2) > sigma_max):
        msg = f"Xi has no fixed point below sigma_max={sigma_max}: lost observations saturate at the cap."
        log.warning(msg)
        warnings.append(msg)

    grid = np.linspace(0.0, sigma_max, n_points)
    spacing = grid[1] - grid[0]

    def project(s: float) -> int:
        return int(np.clip(np.rint(s / spacing), 0, n_points - 1))

    kernel, cost, coarse = [], [], []
    for i, sigma in enumerate(grid):
        rows, costs, merged = [], [], []
        for q in lqg.queries:
            updated = float(t_q(lqg, q, sigma)[0, 0])
            lost = min(float(xi(lqg, sigma)[0, 0]), sigma_max)
            row = np.zeros(n_points)
            row[project(updated)] += 1 - q.loss
            row[project(lost)] += q.loss
            rows.append(row)
            costs.append(query_cost(lqg, riccati, q, sigma))
            if 0 < q.loss < 1:
                merged.append(project(updated) == project(lost) and abs(updated - lost) > 1e-12)
        kernel.append(rows)
        cost.append(costs)
        if 0 < i < n_points - 1 and merged and all(merged):
            coarse.append(i)
    if coarse:
        msg = f"Grid too coarse: distinct successors share a grid point at states {coarse[:10]}."
        log.warning(msg)
        warnings.append(msg)

    mdp = FiniteMdp([lqg.query_names] * n_points, kernel, cost, cost_floor=0.0,
                    state_labels=[f"{s:.6g}" for s in grid])
    cheapest = min(range(len(lqg.queries)), key=lambda k: (lqg.queries[k].cost, lqg.queries[k].loss, k))
    sigma_star = float(covariance_fixed_point(lqg, cheapest)[0, 0])
    smallset = _grid_smallset(lqg, mdp, project(sigma_star), warnings)
    log.info("Variance grid: %s points on [0, %s], small set B=%s (delta=%.6g), sigma*=%.10g.",
             n_points, sigma_max, list(smallset.B), smallset.delta, sigma_star)
    return VarianceGridModel(mdp=mdp, smallset=smallset, grid=grid, sigma_star=sigma_star, warnings=tuple(warnings))


Schedule = Union[StationaryPolicy, Callable[[np.ndarray], int]]


@dataclass(frozen=True, eq=False)
class SimulationResult:
    seed: Optional[int]
    queries: np.ndarray
    gammas: np.ndarray
    plant_costs: np.ndarray
    query_costs: np.ndarray
    batches: int = 100
    query_names: Tuple[str, ...] = field(default=())

    @property
    def horizon(self) -> int:
        return self.plant_costs.size

    @property
    def costs(self) -> np.ndarray:
        return self.plant_costs + self.query_costs

    @property
    def running_average(self) -> np.ndarray:
        return np.cumsum(self.costs) / np.arange(1, self.horizon + 1)

    @property
    def average(self) -> float:
        return float(self.costs.mean())

    @property
    def standard_error(self) -> float:
        """batch means standard error of the average cost."""
        size = self.horizon // self.batches
        if self.batches < 2 or size == 0:
            return float('nan')
        means = self.costs[:size * self.batches].reshape(self.batches, size).mean(axis=1)
        return float(means.std(ddof=1) / np.sqrt(self.batches))

    def to_frame(self, every: int = 1) -> pd.DataFrame:
        t = np.arange(0, self.horizon, max(1, every))
        queries = self.queries[t]
        return pd.DataFrame(dict(t=t,
                                 query=np.asarray(self.query_names)[queries] if self.query_names else queries,
                                 gamma=self.gammas[t].astype(int),
                                 plant_cost=self.plant_costs[t],
                                 query_cost=self.query_costs[t],
                                 running_avg=self.running_average[t]))

    def __json__(self):
        return dict(seed=self.seed, horizon=self.horizon, average=self.average,
                    standard_error=self.standard_error, batches=self.batches,
                    query_counts=np.bincount(self.queries).tolist())


def _scheduler(schedule: Schedule, grid: VarianceGridModel | None) -> Callable[[np.ndarray], int]:
    if not isinstance(schedule, StationaryPolicy):
        return schedule
    if grid is None:
        raise ValueError("A grid policy schedule requires the variance grid it was computed on.")
    if not schedule.is_deterministic:
        raise ValueError("Only deterministic schedules can be simulated.")
    choice = schedule.choice
    return lambda sigma: choice[grid.nearest(sigma)]


def _simulate_scalar(lqg, riccati, lookup, x, x_hat, sigma, W, U, blowup):
    a, b = float(lqg.A[0, 0]), float(lqg.B[0, 0])
    r, m, k = float(lqg.R[0, 0]), float(lqg.M[0, 0]), float(riccati.k_star[0, 0])
    dd = float(lqg.noise_covariance[0, 0])
    DW = W @ lqg.D[0]
    C = [float(q.C[0, 0]) for q in lqg.queries]
    FF = [float((q.F @ q.F.T)[0, 0]) for q in lqg.queries]
    FW = [W @ q.F[0] for q in lqg.queries]
    loss = [q.loss for q in lqg.queries]
    horizon = W.shape[0]
    queries = np.empty(horizon, dtype=np.int64)
    gammas = np.empty(horizon, dtype=bool)
    plant = np.empty(horizon)
    x, x_hat, sigma = float(x[0]), float(x_hat[0]), float(sigma[0, 0])
    for t in range(horizon):
        q = lookup(sigma)
        u = -k * x_hat
        queries[t] = q
        plant[t] = r * x * x + m * u * u
        x = a * x + b * u + DW[t]
        if abs(x) > blowup:
            raise InstabilityError(f"Closed loop state exceeded {blowup:.3g} at t={t + 1}: the schedule is not stabilizing.")
        prior = a * x_hat + b * u
        s_prior = dd + a * sigma * a
        received = U[t] < 1 - loss[q]
        gammas[t] = received
        if received:
            gain = s_prior * C[q] / (C[q] * s_prior * C[q] + FF[q])
            y = C[q] * x + FW[q][t]
            x_hat = prior + gain * (y - C[q] * prior)
            sigma = max(s_prior - gain * C[q] * s_prior, 0.0)
        else:
            x_hat, sigma = prior, s_prior
    return queries, gammas, plant


def _simulate_matrix(lqg, riccati, lookup, x, x_hat, sigma, W, U, blowup):
    A, B, K = lqg.A, lqg.B, riccati.k_star
    horizon = W.shape[0]
    queries = np.empty(horizon, dtype=np.int64)
    gammas = np.empty(horizon, dtype=bool)
    plant = np.empty(horizon)
    for t in range(horizon):
        q = lookup(sigma)
        query = lqg.queries[q]
        u = -K @ x_hat
        queries[t] = q
        plant[t] = x @ lqg.R @ x + u @ lqg.M @ u
        x = A @ x + B @ u + lqg.D @ W[t]
        if np.abs(x).max() > blowup:
            raise InstabilityError(f"Closed loop state exceeded {blowup:.3g} at t={t + 1}: the schedule is not stabilizing.")
        prior = A @ x_hat + B @ u
        received = U[t] < 1 - query.loss
        gammas[t] = received
        if received:
            gain = kalman_gain(lqg, query, 1, sigma)
            y = query.C @ x + query.F @ W[t]
            x_hat = prior + gain @ (y - query.C @ prior)
            sigma = t_q(lqg, query, sigma)
        else:
            x_hat, sigma = prior, xi(lqg, sigma)
    return queries, gammas, plant


@profile(logger=log)
def simulate_closed_loop(lqg: LqgModel, riccati: RiccatiSolution, schedule: Schedule, horizon: int, seed: int | None,
                         grid: VarianceGridModel | None = None, x0=None, sigma0=None,
                         batches: int = 100, blowup: float = BLOWUP, fast: bool = True) -> SimulationResult:
    """
    simulates the plant X' = AX + BU + DW with U = -K*.X^, the query Q = schedule(Pi^) chosen from the current
    posterior covariance, the observation Y' = C_Q X' + F_Q W received with probability 1 - lambda(Q),
    and the Kalman filter update of (X^, Pi^). The step cost is c(Q) + X'RX + U'MU.
    :param schedule: a deterministic policy of the variance grid MDP (requires `grid`),
        or a function mapping the posterior covariance to a query index
        (the covariance is passed as a float on the scalar path, as a (d, d) array otherwise).
    :param x0: the initial state estimate (0 by default); the initial state is drawn from N(x0, sigma0).
    :param sigma0: the initial error covariance (0 by default).
    :param fast: use the scalar recursion when the plant is scalar; both paths consume the same random stream.
    """
    if horizon < 1:
        raise ValueError("The simulation horizon must be positive.")
    lookup = _scheduler(schedule, grid)
    rng = np.random.default_rng(seed)
    d = lqg.d
    x_hat = np.zeros(d) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    sigma = np.zeros((d, d)) if sigma0 is None else ensure_psd(sigma0)
    x = rng.multivariate_normal(x_hat, sigma, method='eigh')
    W = rng.standard_normal((horizon, lqg.d_w))
    U = rng.random(horizon)
    simulate = _simulate_scalar if fast and lqg.is_scalar else _simulate_matrix
    queries, gammas, plant = simulate(lqg, riccati, lookup, x, x_hat.copy(), sigma, W, U, blowup)
    costs = np.array([q.cost for q in lqg.queries])
    result = SimulationResult(seed=seed, queries=queries, gammas=gammas, plant_costs=plant,
                              query_costs=costs[queries], batches=batches, query_names=tuple(lqg.query_names))
    log.info("Simulated %s steps (seed=%s): average cost %.10g +/- %.3g.",
             horizon, seed, result.average, result.standard_error)
    return result


def simulate_many(lqg: LqgModel, riccati: RiccatiSolution, schedule: Schedule, horizon: int, seeds: Sequence[int],
                  parallel_jobs: int = 1, **kwargs) -> List[SimulationResult]:
    """one simulation per seed, results in the order of `seeds`."""
    jobs = [Job(f"simulate_{seed}", (lambda seed=seed: simulate_closed_loop(lqg, riccati, schedule, horizon, seed, **kwargs)))
            for seed in seeds]
    return [res.result for res in run_jobs(jobs, parallel_jobs=parallel_jobs)]
