"""Online maximum-likelihood tracking of the generation and channel rates,
and the act / estimate / re-solve loop built on top of it.

Generation outcomes are observable every slot (the sensor samples the
source).  Channel outcomes are observable per acknowledged transmission in
the default "attempt" mode; "oracle" mode observes the channel every slot,
matching the idealized every-slot average.  Estimates fed to the solver are
add-one smoothed so the derived model never becomes degenerate; the raw
sample means are reported alongside.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .model import Action, State, SystemParams
from .simulator import Environment, EvalReport, monte_carlo_eval
from . import solver as _solver

ESTIMATOR_MODES = ("attempt", "oracle")


@dataclass
class EstimatorState:
    """Sufficient statistics for the two Bernoulli rates.

    The running sample means are exactly successes/observations, which the
    slot-recursive form p(t) = (1/t) x_t + ((t-1)/t) p(t-1) also computes.
    """

    mode: str = "attempt"
    gen_observations: int = 0
    gen_successes: int = 0
    tx_attempts: int = 0
    tx_successes: int = 0
    slot_count: int = 0

    def __post_init__(self):
        if self.mode not in ESTIMATOR_MODES:
            raise ValueError(f"mode must be one of {ESTIMATOR_MODES}, got {self.mode!r}")

    def update_generation(self, g: int) -> "EstimatorState":
        if g not in (0, 1):
            raise ValueError("g must be 0 or 1")
        self.gen_observations += 1
        self.gen_successes += g
        return self

    def update_channel(self, attempted: bool, h: int) -> "EstimatorState":
        """Record a channel observation.

        In attempt mode only acknowledged transmissions count; in oracle mode
        every slot counts regardless of the action taken.
        """
        if h not in (0, 1):
            raise ValueError("h must be 0 or 1")
        if self.mode == "attempt":
            if attempted:
                self.tx_attempts += 1
                self.tx_successes += h
        else:
            self.tx_attempts += 1
            self.tx_successes += h
        return self

    def advance_slot(self) -> "EstimatorState":
        self.slot_count += 1
        return self

    def raw_estimates(self) -> tuple[float | None, float | None]:
        """Plain sample means; None where no observation exists yet."""
        p_g = self.gen_successes / self.gen_observations if self.gen_observations else None
        p_s = self.tx_successes / self.tx_attempts if self.tx_attempts else None
        return p_g, p_s

    def smoothed_estimates(self) -> tuple[float, float]:
        """Add-one smoothed rates, strictly inside (0, 1); (0.5, 0.5) with no data."""
        p_g = (self.gen_successes + 1) / (self.gen_observations + 2)
        p_s = (self.tx_successes + 1) / (self.tx_attempts + 2)
        return p_g, p_s


def update_generation_estimate(est: EstimatorState, g: int) -> EstimatorState:
    return est.update_generation(g)


def update_channel_estimate(est: EstimatorState, attempted: bool, h: int) -> EstimatorState:
    return est.update_channel(attempted, h)


def smoothed_estimates(est: EstimatorState) -> tuple[float, float]:
    return est.smoothed_estimates()


@dataclass
class EstimationEpisode:
    """Record describing the model and policy held after an episode."""

    episode: int
    p_g_hat: float
    p_s_hat: float
    p_g_raw: float | None
    p_s_raw: float | None
    exact_avg_vaoi: float
    solver_iterations: int
    mc: EvalReport | None = None
    policy: object = field(default=None, repr=False)


def _solve_with_estimates(true_params: SystemParams, p_g_hat: float, p_s_hat: float,
                          tol: float, max_iter: int):
    model = replace(true_params, p_g=p_g_hat, p_s=p_s_hat)
    return _solver.rvia_solve(model, tol=tol, max_iter=max_iter)


def run_estimation_based_mdp(true_params: SystemParams, episodes: int, horizon: int, *,
                             mode: str = "attempt", seed: int = 0,
                             initial_estimates: tuple[float, float] | None = None,
                             freeze_estimates: bool = False,
                             tol: float = 1e-9, max_iter: int = 100_000,
                             mc_runs: int = 0, mc_horizon: int = 2000,
                             keep_policies: bool = False) -> list[EstimationEpisode]:
    """Act under the current estimated model, learn, re-solve each episode.

    Known quantities are beta, B and delta_max; only the generation and
    channel rates are estimated.  Episode 0's policy comes from the initial
    estimates (prior midpoint 0.5/0.5 unless `initial_estimates` overrides).
    The physical state persists across episode boundaries.

    Record k (k >= 1) describes the model and re-solved policy held after k
    episodes, each evaluated exactly under the true parameters; record 0 is
    the starting policy.  With `freeze_estimates` the model never moves,
    which pins the whole loop to the episode-0 policy.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    est = EstimatorState(mode=mode)
    env = Environment(true_params, seed, stream_id=0)

    def current_estimates() -> tuple[float, float]:
        if initial_estimates is not None and (freeze_estimates or est.slot_count == 0):
            return initial_estimates
        if freeze_estimates:
            return initial_estimates if initial_estimates is not None else (0.5, 0.5)
        return est.smoothed_estimates()

    def make_record(episode: int):
        p_g_hat, p_s_hat = current_estimates()
        res = _solve_with_estimates(true_params, p_g_hat, p_s_hat, tol, max_iter)
        exact = _solver.exact_policy_evaluation(true_params, res.policy)
        mc = None
        if mc_runs >= 2:
            mc = monte_carlo_eval(Environment(true_params, _mc_seed(seed, episode)),
                                  res.policy, mc_runs, mc_horizon)
        raw_g, raw_s = est.raw_estimates()
        record = EstimationEpisode(episode=episode, p_g_hat=p_g_hat, p_s_hat=p_s_hat,
                                   p_g_raw=raw_g, p_s_raw=raw_s, exact_avg_vaoi=exact,
                                   solver_iterations=res.iterations, mc=mc,
                                   policy=res.policy if keep_policies else None)
        return record, res.policy

    record, policy = make_record(0)
    records = [record]
    state = State(0, 0)
    for k in range(1, episodes + 1):
        for _ in range(horizon):
            action = int(policy[true_params.state_index(state)])
            out = env.step(state, action)
            if not freeze_estimates:
                est.update_generation(out.g)
                est.update_channel(action == Action.TRANSMIT, out.h)
            est.advance_slot()
            state = out.next_state
        record, policy = make_record(k)
        records.append(record)
    return records


def _mc_seed(seed: int, episode: int) -> int:
    # distinct per-episode master for evaluation substreams
    return (seed * 1_000_003 + episode) % (2**63)
