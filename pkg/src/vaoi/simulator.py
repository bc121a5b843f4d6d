"""Ground-truth stochastic environment and Monte Carlo evaluation.

Randomness is organized around one master seed: every consumer derives an
independent generator via ``substream(seed, *key)``, which feeds the key to
numpy's SeedSequence spawn mechanism.  Monte Carlo run i draws from
``substream(seed, i)``, so runs are independent, parallelizable, and each
bit-for-bit reproducible.  Within a slot the three uniforms are consumed in
the fixed order (g, h, e).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .model import (Action, InfeasibleActionError, State, SystemParams,
                    battery_step, vaoi_step)
from . import solver as _solver

MC_RUN_CHUNK = 2048


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key) via SeedSequence spawn keys."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass
class StepOutcome:
    """One slot's draws, the resulting state, and the incurred cost."""

    g: int
    h: int
    e: int
    next_state: State
    cost: float


@dataclass
class Environment:
    """Bernoulli world with reproducible draws.

    The channel outcome h is drawn every slot, idle or not; dynamics depend
    on it only through a*h, so the law is unchanged and the draw streams stay
    aligned across policies.
    """

    true_params: SystemParams
    rng_seed: int = 0
    stream_id: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._rng = substream(self.rng_seed, self.stream_id)

    def step(self, state: State, action: Action | int) -> StepOutcome:
        p = self.true_params
        if int(action) == Action.TRANSMIT and state.b == 0:
            raise InfeasibleActionError(f"transmit infeasible at {state}")
        u = self._rng.random(3)
        g = int(u[0] < p.p_g)
        h = int(u[1] < p.p_s)
        e = int(u[2] < p.beta)
        nxt = State(vaoi_step(state.delta, g, int(action), h, p.delta_max),
                    battery_step(state.b, e, int(action), p.B))
        return StepOutcome(g=g, h=h, e=e, next_state=nxt, cost=float(nxt.delta))


@dataclass
class EpisodeTrace:
    """Counters accumulated while running one episode."""

    transmissions: int = 0
    successes: int = 0
    arrivals: int = 0
    max_battery: int = 0
    final_state: State | None = None


def run_episode(env: Environment, policy: np.ndarray, horizon: int,
                s0: State = State(0, 0)) -> tuple[float, EpisodeTrace]:
    """Step the environment under a deterministic policy for `horizon` slots.

    Returns the time-averaged cost (mean of the per-slot costs, i.e. the
    post-transition ages) and a trace of counters.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    params = env.true_params
    _solver.validate_policy(params, policy)
    trace = EpisodeTrace(max_battery=s0.b)
    state = s0
    total = 0.0
    for _ in range(horizon):
        action = int(policy[params.state_index(state)])
        out = env.step(state, action)
        total += out.cost
        if action == Action.TRANSMIT:
            trace.transmissions += 1
            trace.successes += out.h
        trace.arrivals += out.e
        state = out.next_state
        if state.b > trace.max_battery:
            trace.max_battery = state.b
    trace.final_state = state
    return total / horizon, trace


@dataclass
class EvalReport:
    """Monte Carlo estimate of a policy's long-run average cost."""

    mean_vaoi: float
    std_error: float
    runs: int
    horizon: int
    confidence_interval_99: tuple[float, float]

    def covers(self, value: float) -> bool:
        lo, hi = self.confidence_interval_99
        return lo <= value <= hi


def _simulate_batch(params: SystemParams, policy: np.ndarray, run_ids: np.ndarray,
                    horizon: int, seed: int, s0: State) -> np.ndarray:
    """Vectorized per-run average costs, bit-identical to run_episode.

    Each run pre-draws its (horizon, 3) uniforms from substream(seed, run_id),
    which consumes the stream exactly as Environment.step does one slot at a
    time.
    """
    n = len(run_ids)
    G = np.empty((n, horizon), dtype=np.int8)
    H = np.empty((n, horizon), dtype=np.int8)
    E = np.empty((n, horizon), dtype=np.int8)
    for i, rid in enumerate(run_ids):
        u = substream(seed, int(rid)).random((horizon, 3))
        G[i] = u[:, 0] < params.p_g
        H[i] = u[:, 1] < params.p_s
        E[i] = u[:, 2] < params.beta
    pol = np.asarray(policy, dtype=np.int64)
    width = params.B + 1
    delta = np.full(n, s0.delta, dtype=np.int64)
    b = np.full(n, s0.b, dtype=np.int64)
    total = np.zeros(n)
    for t in range(horizon):
        a = pol[delta * width + b]
        g = G[:, t].astype(np.int64)
        success = (a == 1) & (H[:, t] == 1)
        delta = np.where(success, g, np.minimum(delta + g, params.delta_max))
        b = np.minimum(b + E[:, t] - a, params.B)
        total += delta
    return total / horizon


def monte_carlo_eval(env: Environment, policy: np.ndarray, runs: int, horizon: int,
                     seed: int | None = None, s0: State = State(0, 0)) -> EvalReport:
    """Independent-substream Monte Carlo evaluation of a policy.

    Run i is the trajectory of Environment(params, seed, stream_id=i); the
    99% confidence interval uses the t quantile on the per-run averages.
    """
    if runs < 2:
        raise ValueError("runs must be >= 2")
    params = env.true_params
    _solver.validate_policy(params, policy)
    base_seed = env.rng_seed if seed is None else seed
    per_run = np.empty(runs)
    for lo in range(0, runs, MC_RUN_CHUNK):
        ids = np.arange(lo, min(lo + MC_RUN_CHUNK, runs))
        per_run[ids] = _simulate_batch(params, policy, ids, horizon, base_seed, s0)
    mean = float(per_run.mean())
    se = float(per_run.std(ddof=1) / np.sqrt(runs))
    halfwidth = float(scipy.stats.t.ppf(0.995, runs - 1)) * se
    return EvalReport(mean_vaoi=mean, std_error=se, runs=runs, horizon=horizon,
                      confidence_interval_99=(mean - halfwidth, mean + halfwidth))


@dataclass
class SweepPoint:
    """One grid point of a sweep; error is set and values None on failure."""

    params: SystemParams
    policy_source: str
    evaluator: str
    avg_vaoi: float | None
    iterations: int | None = None
    report: EvalReport | None = None
    error: str | None = None


def sweep(grid, policy_source: str = "optimal", evaluator: str = "exact", *,
          runs: int = 1000, horizon: int = 10_000, seed: int = 0,
          tol: float = 1e-9, max_iter: int = 100_000) -> list[SweepPoint]:
    """Solve and evaluate every parameter set in `grid` independently.

    policy_source: "optimal" (relative value iteration) or "greedy".
    evaluator: "exact" (stationary distribution) or "monte-carlo".
    Failures are recorded per point and do not abort the sweep.
    """
    if policy_source not in ("optimal", "greedy"):
        raise ValueError(f"unknown policy source {policy_source!r}")
    if evaluator not in ("exact", "monte-carlo"):
        raise ValueError(f"unknown evaluator {evaluator!r}")
    points = []
    for params in grid:
        iterations = None
        try:
            if policy_source == "optimal":
                res = _solver.rvia_solve(params, tol=tol, max_iter=max_iter)
                policy, iterations = res.policy, res.iterations
            else:
                policy = _solver.greedy_policy(params)
            if evaluator == "exact":
                value, report = _solver.exact_policy_evaluation(params, policy), None
            else:
                report = monte_carlo_eval(Environment(params, seed), policy, runs, horizon)
                value = report.mean_vaoi
            points.append(SweepPoint(params, policy_source, evaluator, value,
                                     iterations=iterations, report=report))
        except Exception as exc:  # noqa: BLE001 - per-point isolation is the contract
            points.append(SweepPoint(params, policy_source, evaluator, None,
                                     iterations=iterations, error=str(exc)))
    return points
