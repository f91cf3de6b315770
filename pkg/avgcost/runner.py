"""
**runner** module is the batch front door behind ``runsolver.py``:
a ``RunConfig`` names a command and its inputs, ``run`` executes it, writes the artifacts
(summary, trace or report, checks) in a session directory and returns the process exit code:

- 0: every selected check passed,
- 1: some check failed,
- 2: the model, small set or options are invalid,
- 3: an iterative solver did not converge (or diverged).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
import logging
import os
from typing import Optional, Tuple

import numpy as np

from . import resources
from .defaults import default_dirs
from .errors import AvgCostError, ConvergenceError
from .lqg import build_variance_grid_mdp, load_lqg, simulate_closed_loop, solve_riccati
from .mdp import FiniteMdp, load_mdp, policy_cost, policy_kernel, span
from .oracles import optimal_average_cost_enumeration, optimal_average_cost_lp, policy_iteration
from .results import CheckSuite, RunArtifacts
from .rolling import evaluate_rolling_horizon
from .solvers import (StopRule, acoe_residual, check_h2, difference_identity_gap, ensure_converged, envelope_violations,
                      fit_envelope, h1_diagnostic, rvi_anchor, rvi_min, rvi_nu, value_iteration)
from .splitchain import (SmallSetSpec, accumulated_cost, auto_smallset, build_split_chain, expected_visits_before_atom,
                         lift_policy, load_smallset, marginalize, near_monotone_margin, pushforward, split_measure)
from .utils import Namespace, config_load, str_sanitize

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3


class Command(Enum):
    solve = 'solve'
    split = 'split'
    vi = 'vi'
    rvi = 'rvi'
    rolling = 'rolling'
    lqg_demo = 'lqg-demo'


class RviVariant(Enum):
    nu = 'nu'
    min = 'min'
    anchor = 'anchor'


@dataclass
class RunConfig:
    command: str
    model_path: Optional[str] = None
    smallset: Optional[str] = None
    variant: Optional[str] = None
    beta: str = 'lp'
    anchor: Optional[int] = None
    span_tol: Optional[float] = None
    max_iters: Optional[int] = None
    output_dir: Optional[str] = None
    session: Optional[str] = None
    seed: Optional[int] = None
    horizon: Optional[int] = None
    parallel_jobs: Optional[int] = None

    @property
    def cmd(self) -> Command:
        return Command(self.command)

    def validate(self) -> RunConfig:
        """:raises ValueError: for unknown commands or variants, missing inputs or options out of range."""
        cmd = Command(self.command)
        if cmd is Command.rvi:
            RviVariant(self.variant)
        elif self.variant is not None:
            raise ValueError(f"Command `{self.command}` takes no variant.")
        if cmd is not Command.lqg_demo and not self.model_path:
            raise ValueError(f"Command `{self.command}` requires a model.")
        if self.smallset not in (None, 'auto') and not os.path.isfile(self.smallset):
            raise ValueError(f"No small set file at `{self.smallset}`.")
        if self.beta != 'lp':
            float(self.beta)
        if self.span_tol is not None and not self.span_tol > 0:
            raise ValueError("span_tol must be positive.")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be at least 1.")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be at least 1.")
        return self

    @property
    def session_name(self) -> str:
        if self.session:
            return self.session
        model = os.path.splitext(os.path.basename(self.model_path))[0] if self.model_path else 'default'
        parts = [self.command, self.variant, model]
        return str_sanitize('_'.join(p for p in parts if p)).lower()


def _resources() -> resources.Resources:
    try:
        return resources.get()
    except RuntimeError:
        config = config_load(os.path.join(default_dirs.root_dir, "resources", "config.yaml"))
        return resources.from_configs(config, default_dirs)


class Run:

    def __init__(self, config: RunConfig, res: resources.Resources):
        self.config = config
        self.res = res
        out_dir = config.output_dir or res.config.output_dir
        dirs = resources.output_dirs(out_dir, session=config.session_name, create=True)
        self.artifacts = RunArtifacts(dirs.session)
        self.checks = CheckSuite()
        self.summary = Namespace(command=config.command, variant=config.variant)

    def option(self, section: str, key: str, default=None):
        return Namespace.get(self.res.options(section), key, default)

    @property
    def parallel_jobs(self) -> int:
        return self.config.parallel_jobs or self.option('job_scheduler', 'parallel_jobs', 1)

    def stop_rule(self, **kwargs) -> StopRule:
        rule = StopRule.from_options(self.res.options('solvers'))
        overrides = dict(span_tol=self.config.span_tol, max_iters=self.config.max_iters, **kwargs)
        return replace(rule, **{k: v for k, v in overrides.items() if v is not None})

    def model(self) -> FiniteMdp:
        path = self.res.model_path(self.config.model_path)
        self.summary.model = os.path.basename(path)
        return load_mdp(path)

    def smallset(self, m: FiniteMdp, required: bool = True) -> Optional[SmallSetSpec]:
        spec = self.config.smallset
        if spec is None and self.config.model_path:
            # a small set bundled next to the model is used by default
            path = self.res.model_path(self.config.model_path)
            candidate = os.path.join(os.path.dirname(path), f"{os.path.splitext(os.path.basename(path))[0]}.smallset.json")
            spec = candidate if os.path.isfile(candidate) else ('auto' if required else None)
        if spec is None:
            return None
        s = auto_smallset(m) if spec == 'auto' else load_smallset(spec, m)
        self.summary.smallset = s
        return s

    def lp(self, m: FiniteMdp, s: SmallSetSpec | None):
        return optimal_average_cost_lp(m, nu=s,
                                       method=self.option('oracles', 'lp_method', 'highs-ds'),
                                       dump_lp=self.option('oracles', 'dump_lp', False))

    def beta(self, m: FiniteMdp, s: SmallSetSpec | None) -> Tuple[float, Optional[np.ndarray]]:
        """:return: the beta to iterate with, and V* when it comes from the LP."""
        if self.config.beta != 'lp':
            return float(self.config.beta), None
        report = self.lp(m, s)
        return report.beta, (report.value.values if report.value is not None else None)

    def identity_check(self, name: str, m: FiniteMdp, beta: float, relative):
        """runs VI at `beta` and `relative(v0, stop)` from the same field and checks they differ by a constant."""
        steps = list(self.option('solvers', 'identity_steps', [1, 10, 100]))
        stop = StopRule(max_iters=max(steps), span_tol=0.0, snapshot_every=1, log_every=0)
        v0 = np.zeros(m.n_states)
        gap = difference_identity_gap(value_iteration(m, beta, v0, stop), relative(v0, stop), steps)
        self.checks.add(name, gap <= 1e-10, f"max span {gap:.3g} at n in {steps}")

    # commands

    def solve(self):
        m = self.model()
        s = self.smallset(m, required=False)
        report = self.lp(m, s)
        self.summary += Namespace(beta=report.beta, policy=list(report.policy.labels(m)), value=report.value,
                                  occupation=report.occupation)
        if report.value is not None:
            residual = acoe_residual(m, report.value, report.beta)
            self.summary.acoe_residual = residual
            self.summary.h1_diagnostic = h1_diagnostic(m, report.policy, report.value)
            self.checks.add('acoe_residual', residual <= 1e-9, f"{residual:.3g}")
            if s is not None:
                anchored = float(s.nu @ report.value.values)
                self.checks.add('anchoring', abs(anchored - report.beta) <= 1e-10, f"nu(V*)={anchored!r}")
        self.checks.add('occupation_balance', report.occupation.balance_residual(m) <= 1e-9)
        max_policies = self.option('oracles', 'max_policies', 10**6)
        if m.n_policies <= max_policies:
            enum = optimal_average_cost_enumeration(m, max_policies=max_policies, parallel_jobs=self.parallel_jobs)
            self.summary.beta_enumeration = enum.beta
            self.checks.add('lp_vs_enumeration', abs(enum.beta - report.beta) <= 1e-8,
                            f"{enum.beta!r} vs {report.beta!r}")
        else:
            log.info("Skipping enumeration: %s policies exceed the limit of %s.", m.n_policies, max_policies)

        def policy_iteration_agrees():
            pi = policy_iteration(m, nu=s)
            self.summary.beta_policy_iteration = pi.beta
            return abs(pi.beta - report.beta) <= 1e-8

        # policy iteration assumes every visited policy is unichain
        self.checks.run('lp_vs_policy_iteration', policy_iteration_agrees)

    def split(self):
        m = self.model()
        s = self.smallset(m)
        sc = build_split_chain(m, s, clamp_tol=self.option('split', 'clamp_tol', 1e-14))
        self.artifacts.save_json('split_kernel.json', sc)
        rows = sc.chain.P.sum(axis=2)[sc.chain.mask]
        self.checks.add('split_rows_stochastic', np.abs(rows - 1).max() <= 1e-12, f"max deviation {np.abs(rows - 1).max():.3g}")

        report = self.lp(m, s)
        v = report.policy
        lifted = lift_policy(sc, v)
        horizon = self.option('split', 'equivalence_steps', 20)
        for x in range(m.n_states):
            mu = np.zeros(m.n_states)
            mu[x] = 1.0
            base_laws = pushforward(policy_kernel(m, v), mu, horizon)
            split_laws = pushforward(policy_kernel(sc.chain, lifted), split_measure(mu, s), horizon)
            dev = max(np.abs(marginalize(split_laws[k], s) - base_laws[k]).max() for k in range(horizon + 1))
            cost_dev = max(abs(accumulated_cost(policy_kernel(m, v), policy_cost(m, v), mu, k)
                               - accumulated_cost(policy_kernel(sc.chain, lifted), policy_cost(sc.chain, lifted),
                                                  split_measure(mu, s), k))
                           for k in range(1, horizon + 1))
            self.checks.add(f'split_marginals_from_{x}', dev <= 1e-12, f"{dev:.3g}")
            self.checks.add(f'split_costs_from_{x}', cost_dev <= 1e-12 * max(1.0, horizon * m.c[m.mask].max()),
                            f"{cost_dev:.3g}")
        visits = expected_visits_before_atom(sc, v).values[:m.n_states]
        self.summary += Namespace(delta=sc.delta, delta_circ=sc.delta_circ, n_split=sc.n_split,
                                  near_monotone_margin=near_monotone_margin(m, s, report.beta),
                                  visits_before_atom=visits)
        if sc.delta_circ is not None:
            self.checks.add('occupation_bound', visits.max() <= sc.delta_circ + 1e-12,
                            f"{visits.max():.6g} <= {sc.delta_circ:.6g}")

    def vi(self):
        m = self.model()
        s = self.smallset(m, required=False)
        beta, vstar = self.beta(m, s)
        trace = ensure_converged(value_iteration(m, beta, np.zeros(m.n_states), self.stop_rule()))
        self.artifacts.save_csv('trace.csv', trace.to_frame(m.action_sets))
        final = trace.final.values
        self.summary += Namespace(beta=beta, iterations=trace.iterations, converged=trace.converged, final=final,
                                  acoe_residual=acoe_residual(m, final, beta))
        if vstar is not None:
            gap = span(final - vstar)
            self.checks.add('vi_limit', gap < 1e-8, f"span(Phi - V*)={gap:.3g}")

    def rvi(self):
        m = self.model()
        variant = RviVariant(self.config.variant)
        s = self.smallset(m, required=variant is not RviVariant.min)
        report = self.lp(m, s)
        if variant is RviVariant.nu:
            relative = lambda v0, stop: rvi_nu(m, s, v0, stop)
        elif variant is RviVariant.min:
            relative = lambda v0, stop: rvi_min(m, v0, stop)
        else:
            anchor = self.config.anchor if self.config.anchor is not None else s.B[0]
            relative = lambda v0, stop: rvi_anchor(m, anchor, v0, stop, small_set=s)
        trace = ensure_converged(relative(np.zeros(m.n_states), self.stop_rule()))
        self.artifacts.save_csv('trace.csv', trace.to_frame(m.action_sets))
        self.summary += Namespace(beta=report.beta, offset=trace.offset, iterations=trace.iterations,
                                  final=trace.final)
        self.checks.add('offset_vs_beta', abs(trace.offset - report.beta) < 1e-9,
                        f"{trace.offset!r} vs {report.beta!r}")
        if report.value is not None:
            gap = span(trace.final.values - report.value.values)
            self.checks.add('field_vs_vstar', gap < 1e-8, f"span={gap:.3g}")
        self.identity_check('vi_difference_identity', m, report.beta, relative)

    def rolling(self):
        m = self.model()
        s = self.smallset(m, required=False)
        report = self.lp(m, s)
        if report.value is None:
            raise AvgCostError("The rolling horizon analysis requires the relative value of a unichain optimal policy.")
        vstar = report.value.values
        trace = ensure_converged(value_iteration(m, report.beta, np.zeros(m.n_states), self.stop_rule(snapshot_every=1)))
        cert = check_h2(m, vstar)
        fit = fit_envelope(trace, vstar, cert)
        rh = evaluate_rolling_horizon(m, trace, None, report.beta, cert, fit.c0_hat,
                                      gap_tol=self.option('rolling', 'gap_tol', 1e-8),
                                      parallel_jobs=self.parallel_jobs)
        self.artifacts.save_csv('report.csv', rh.to_frame(m))
        violations = envelope_violations(trace, vstar, fit)
        self.summary += Namespace(beta=report.beta, certificate=cert, envelope=fit, n0=rh.n0, lock_in=rh.lock_in,
                                  iterations=trace.iterations, multichain=rh.multichain)
        self.checks.add('envelope', not violations and fit.decaying,
                        f"violations at {violations[:10]}, decay rate {fit.decay_rate:.3g}")
        self.checks.add('lock_in', rh.lock_in is not None, f"lock-in at n={rh.lock_in}")
        self.checks.add('stabilization_bound', not rh.bound_violations, f"violations at {rh.bound_violations[:10]}")

    def lqg_demo(self):
        path = self.res.model_path(self.config.model_path or self.option('lqg', 'model', 'scalar_demo'), kind='lqg')
        self.summary.model = os.path.basename(path)
        lqg = load_lqg(path)
        riccati = solve_riccati(lqg, tol=self.option('lqg', 'riccati_tol', 1e-13),
                                max_iters=self.option('lqg', 'riccati_max_iters', 100_000))
        self.checks.add('riccati_residual', riccati.residual <= 1e-10, f"{riccati.residual:.3g}")
        self.checks.add('closed_loop_stable', riccati.closed_loop_radius < 1, f"{riccati.closed_loop_radius:.6g}")
        grid = build_variance_grid_mdp(lqg, riccati, sigma_max=self.option('lqg', 'sigma_max', 5.0),
                                       n_points=self.option('lqg', 'n_points', 101))
        report = self.lp(grid.mdp, grid.smallset)
        trace = ensure_converged(rvi_min(grid.mdp, np.zeros(grid.mdp.n_states), self.stop_rule()))
        self.checks.add('grid_rvi_vs_lp', abs(trace.offset - report.beta) < 1e-8, f"{trace.offset!r} vs {report.beta!r}")
        self.identity_check('grid_vi_difference_identity', grid.mdp, report.beta,
                            lambda v0, stop: rvi_anchor(grid.mdp, 0, v0, stop))

        seed = self.config.seed if self.config.seed is not None else self.res.seed
        horizon = self.config.horizon or self.option('lqg', 'horizon', 10**6)
        sim = simulate_closed_loop(lqg, riccati, report.policy, horizon, seed, grid=grid,
                                   batches=self.option('lqg', 'batches', 100), blowup=self.option('lqg', 'blowup', 1e9))
        self.artifacts.save_csv('simulation.csv', sim.to_frame(every=self.option('lqg', 'trace_every', 1000)))
        target = report.beta + riccati.offset
        allowance = 3 * sim.standard_error + float(np.trace(riccati.pi_tilde)) * grid.spacing
        self.checks.add('monte_carlo', abs(sim.average - target) <= allowance,
                        f"{sim.average!r} vs {target!r} (allowance {allowance:.3g})")
        self.summary += Namespace(riccati=riccati, sigma_star=grid.sigma_star, grid_beta=report.beta,
                                  schedule=list(report.policy.labels(grid.mdp)), grid_warnings=list(grid.warnings),
                                  smallset=grid.smallset, seed=seed, simulation=sim, target=target)

    def execute(self):
        getattr(self, self.config.cmd.name)()
        self.artifacts.save_summary(self.summary)
        self.artifacts.save_checks(self.checks)
        return self.checks


def run(config: RunConfig) -> int:
    """
    executes the command described by `config` and writes its artifacts.
    :return: the process exit code.
    """
    try:
        config.validate()
        r = Run(config, _resources())
        log.info("Running `%s` with outputs in `%s`.", config.session_name, r.artifacts.session_dir)
        checks = r.execute()
    except ConvergenceError as e:
        log.error("Solver did not converge:\n%s", e)
        return EXIT_NOT_CONVERGED
    except (AvgCostError, ValueError, KeyError, OSError) as e:
        log.error("Invalid input:\n%s", e)
        log.debug("Details:", exc_info=True)
        return EXIT_INVALID
    if not checks.passed:
        log.warning("Failed checks: %s.", [c.name for c in checks.failed])
        return EXIT_CHECKS_FAILED
    log.info("All %s checks passed.", len(checks.checks))
    return EXIT_OK
