"""Model-free average-cost tabular Q-learning.

The learner sees only (state, action, cost, next state) tuples.  Updates
follow the one-step temporal-difference residual

    td = cost - lambda_hat + min_feasible Q(next) - Q(state, action)

applied to the visited entry with a visit-count (or global-step) learning
rate, while lambda_hat tracks the optimal average cost with its own smaller
rate, either every step or gated to visits of a reference state.  Transmit
is masked out of both action selection and the lookahead minimum wherever
the battery is empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Action, State, SystemParams
from .simulator import EvalReport, Environment, monte_carlo_eval, substream
from . import solver as _solver

LAMBDA_UPDATE_MODES = ("every-step", "ref-gated")

# substream domains carved out of the master seed
_ENV_DOMAIN = 0
_AGENT_DOMAIN = 1
_INIT_DOMAIN = 2


@dataclass(frozen=True)
class LearningSchedule:
    """Step-size sequence; both variants satisfy the usual summability
    conditions (sum of rates infinite, sum of squares finite).

    harmonic: 1/(t+1) in the global step t.
    visit-power: 1/n**omega in the per-pair visit number n, 0.5 < omega <= 1.
    """

    variant: str
    omega: float | None = None

    def __post_init__(self):
        if self.variant == "harmonic":
            if self.omega is not None:
                raise ValueError("harmonic schedule takes no omega")
        elif self.variant == "visit-power":
            if self.omega is None or not (0.5 < self.omega <= 1.0):
                raise ValueError("visit-power needs omega in (0.5, 1]")
        else:
            raise ValueError(f"unknown learning schedule {self.variant!r}")

    def rate(self, t: int, n: int) -> float:
        """Rate for global step t (0-based) at visit number n (1-based)."""
        if self.variant == "harmonic":
            return 1.0 / (t + 1)
        return 1.0 / n ** self.omega

    def to_dict(self) -> dict:
        d = {"variant": self.variant}
        if self.omega is not None:
            d["omega"] = self.omega
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LearningSchedule":
        return cls(variant=d["variant"], omega=d.get("omega"))


@dataclass(frozen=True)
class ExplorationSchedule:
    """Episode-indexed exploration probability, never below the floor.

    polynomial: eps0 / (1 + mu k); exponential: eps0 * exp(-mu k);
    inverse-sqrt: eps0 / sqrt(k + 1).
    """

    variant: str
    epsilon0: float = 1.0
    mu: float | None = None
    floor: float = 0.1

    def __post_init__(self):
        if self.variant not in ("polynomial", "exponential", "inverse-sqrt"):
            raise ValueError(f"unknown exploration schedule {self.variant!r}")
        if not 0.0 < self.epsilon0 <= 1.0:
            raise ValueError("epsilon0 must lie in (0, 1]")
        if not 0.0 <= self.floor <= self.epsilon0:
            raise ValueError("floor must lie in [0, epsilon0]")
        if self.variant in ("polynomial", "exponential"):
            if self.mu is None or self.mu <= 0:
                raise ValueError(f"{self.variant} decay needs mu > 0")
        elif self.mu is not None:
            raise ValueError("inverse-sqrt takes no mu")

    def epsilon(self, k: int) -> float:
        if self.variant == "polynomial":
            raw = self.epsilon0 / (1.0 + self.mu * k)
        elif self.variant == "exponential":
            raw = self.epsilon0 * math.exp(-self.mu * k)
        else:
            raw = self.epsilon0 / math.sqrt(k + 1)
        return max(raw, self.floor)

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "epsilon0": self.epsilon0, "floor": self.floor}
        if self.mu is not None:
            d["mu"] = self.mu
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExplorationSchedule":
        return cls(variant=d["variant"], epsilon0=d.get("epsilon0", 1.0),
                   mu=d.get("mu"), floor=d.get("floor", 0.1))


def paper_schedules() -> tuple[LearningSchedule, LearningSchedule, ExplorationSchedule]:
    """Default (q rate, average-cost rate, exploration) triple."""
    return (LearningSchedule("visit-power", 0.55),
            LearningSchedule("visit-power", 0.6),
            ExplorationSchedule("inverse-sqrt", epsilon0=1.0, floor=0.1))


@dataclass
class QTable:
    """Action-value estimates with visit counts and the running average-cost
    estimate; indexed by the canonical state order."""

    q: np.ndarray
    visits: np.ndarray
    lambda_hat: float
    ref_index: int
    delta_max: int
    B: int

    @classmethod
    def zeros(cls, params: SystemParams, ref_state: State = State(0, 0)) -> "QTable":
        n = params.n_states
        return cls(q=np.zeros((n, 2)), visits=np.zeros((n, 2), dtype=np.int64),
                   lambda_hat=0.0, ref_index=params.state_index(ref_state),
                   delta_max=params.delta_max, B=params.B)

    def state_index(self, state: State) -> int:
        return state.delta * (self.B + 1) + state.b

    def min_feasible(self, index: int) -> float:
        """Minimum q over the actions feasible at the indexed state."""
        if index % (self.B + 1) == 0:
            return float(self.q[index, 0])
        return float(min(self.q[index, 0], self.q[index, 1]))

    def to_dict(self) -> dict:
        return {"delta_max": self.delta_max, "B": self.B,
                "lambda_hat": self.lambda_hat, "ref_index": self.ref_index,
                "q": self.q.tolist(), "visits": self.visits.tolist()}


def select_action(qt: QTable, state: State, epsilon: float,
                  rng: np.random.Generator) -> Action:
    """Epsilon-greedy over the feasible actions, ties toward idle.

    Consumes exactly two uniforms per call (explore flag, then the uniform
    action pick) so draw streams stay aligned whichever branch is taken.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    u = rng.random(2)
    if state.b == 0:
        return Action.IDLE
    if u[0] < epsilon:
        return Action.TRANSMIT if u[1] < 0.5 else Action.IDLE
    s = qt.state_index(state)
    return Action.TRANSMIT if qt.q[s, 1] < qt.q[s, 0] else Action.IDLE


def td_error(qt: QTable, s: State, a: Action | int, cost: float, s_next: State) -> float:
    """cost - lambda_hat + min over feasible actions at s_next - Q(s, a)."""
    if int(a) == Action.TRANSMIT and s.b == 0:
        raise ValueError(f"infeasible action at {s}")
    si = qt.state_index(s)
    return cost - qt.lambda_hat + qt.min_feasible(qt.state_index(s_next)) - float(qt.q[si, int(a)])


def q_update(qt: QTable, s: State, a: Action | int, delta: float, alpha: float) -> QTable:
    """Apply one TD step to a single entry and count the visit."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    si = qt.state_index(s)
    qt.q[si, int(a)] += alpha * delta
    qt.visits[si, int(a)] += 1
    return qt


def avg_cost_update(qt: QTable, delta: float, gamma: float, at_ref: bool,
                    gated: bool = False) -> QTable:
    """Move lambda_hat by gamma * delta; in gated mode only at the reference
    state."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    if not gated or at_ref:
        qt.lambda_hat += gamma * delta
    return qt


def extract_policy(qt: QTable) -> np.ndarray:
    """Greedy feasible policy from the table, ties toward idle."""
    n = qt.q.shape[0]
    policy = (qt.q[:, 1] < qt.q[:, 0]).astype(np.int64)
    policy[np.arange(n) % (qt.B + 1) == 0] = Action.IDLE
    return policy


@dataclass
class QLearningEpisode:
    """Learning-curve row: the table state after an episode and how the
    extracted greedy policy performs."""

    episode: int
    epsilon: float
    lambda_hat: float
    episode_avg_cost: float
    exact_avg_vaoi: float | None
    mc: EvalReport | None = None


@dataclass
class QLearningResult:
    episodes: list[QLearningEpisode]
    qtable: QTable
    policy: np.ndarray = field(default=None)


def _episode_loop(qt: QTable, params: SystemParams, s0: State, horizon: int,
                  epsilon: float, env_uniforms: np.ndarray, agent_uniforms: np.ndarray,
                  q_rate: LearningSchedule, lam_rate: LearningSchedule,
                  gated: bool, t_start: int) -> tuple[State, float]:
    """Tight interaction loop; one slot costs O(1) regardless of grid size.

    Behaviorally identical to composing select_action / td_error / q_update /
    avg_cost_update with Environment.step (the pre-drawn uniforms are
    consumed in the same order).
    """
    p_g, p_s, beta = params.p_g, params.p_s, params.beta
    dmax, cap = params.delta_max, params.B
    width = cap + 1
    q = qt.q
    visits = qt.visits
    lam = qt.lambda_hat
    ref = qt.ref_index
    harmonic_q = q_rate.variant == "harmonic"
    harmonic_l = lam_rate.variant == "harmonic"
    om_q = q_rate.omega
    om_l = lam_rate.omega
    d, b = s0.delta, s0.b
    total = 0.0
    for t in range(horizon):
        s = d * width + b
        if b == 0:
            a = 0
        elif agent_uniforms[t, 0] < epsilon:
            a = 1 if agent_uniforms[t, 1] < 0.5 else 0
        else:
            a = 1 if q[s, 1] < q[s, 0] else 0
        g = 1 if env_uniforms[t, 0] < p_g else 0
        h = 1 if env_uniforms[t, 1] < p_s else 0
        e = 1 if env_uniforms[t, 2] < beta else 0
        if a == 1 and h == 1:
            d2 = g
        else:
            d2 = d + g
            if d2 > dmax:
                d2 = dmax
        b2 = b + e - a
        if b2 > cap:
            b2 = cap
        s2 = d2 * width + b2
        nxt_min = q[s2, 0] if b2 == 0 else min(q[s2, 0], q[s2, 1])
        td = d2 - lam + nxt_min - q[s, a]
        n = visits[s, a] + 1
        step = t_start + t
        q[s, a] += td * (1.0 / (step + 1) if harmonic_q else n ** -om_q)
        if not gated or s == ref:
            lam += td * (1.0 / (step + 1) if harmonic_l else n ** -om_l)
        visits[s, a] = n
        total += d2
        d, b = d2, b2
    qt.lambda_hat = lam
    return State(d, b), total / horizon


def run_q_learning(true_params: SystemParams, episodes: int, horizon: int, *,
                   q_rate: LearningSchedule | None = None,
                   lam_rate: LearningSchedule | None = None,
                   exploration: ExplorationSchedule | None = None,
                   seed: int = 0, lambda_update: str = "every-step",
                   ref_state: State = State(0, 0),
                   evaluate_each_episode: bool = True,
                   mc_runs: int = 0, mc_horizon: int = 2000,
                   tol: float = 1e-9) -> QLearningResult:
    """Learn from environment interaction only; the model parameters are
    never read by the update path.

    Each episode draws a fresh uniform initial state; learner state (table,
    visit counts, lambda_hat) persists across episodes.  When
    `evaluate_each_episode` is set the greedy policy is extracted and scored
    by the exact oracle after every episode (plus Monte Carlo when
    mc_runs >= 2), which is what the learning-curve reports are made of.
    """
    if lambda_update not in LAMBDA_UPDATE_MODES:
        raise ValueError(f"lambda_update must be one of {LAMBDA_UPDATE_MODES}")
    default_q, default_l, default_e = paper_schedules()
    q_rate = q_rate or default_q
    lam_rate = lam_rate or default_l
    exploration = exploration or default_e
    gated = lambda_update == "ref-gated"

    qt = QTable.zeros(true_params, ref_state)
    env_rng = substream(seed, _ENV_DOMAIN)
    agent_rng = substream(seed, _AGENT_DOMAIN)
    init_rng = substream(seed, _INIT_DOMAIN)
    rows: list[QLearningEpisode] = []
    t_start = 0
    for k in range(episodes):
        eps = exploration.epsilon(k)
        s0 = State(int(init_rng.integers(0, true_params.delta_max + 1)),
                   int(init_rng.integers(0, true_params.B + 1)))
        env_u = env_rng.random((horizon, 3))
        agent_u = agent_rng.random((horizon, 2))
        _, ep_avg = _episode_loop(qt, true_params, s0, horizon, eps, env_u, agent_u,
                                  q_rate, lam_rate, gated, t_start)
        t_start += horizon
        exact = None
        mc = None
        if evaluate_each_episode:
            policy = extract_policy(qt)
            exact = _solver.exact_policy_evaluation(true_params, policy)
            if mc_runs >= 2:
                eval_seed = (seed * 2_000_003 + k) % (2**63)
                mc = monte_carlo_eval(Environment(true_params, eval_seed),
                                      policy, mc_runs, mc_horizon)
        rows.append(QLearningEpisode(episode=k + 1, epsilon=eps,
                                     lambda_hat=qt.lambda_hat,
                                     episode_avg_cost=ep_avg,
                                     exact_avg_vaoi=exact, mc=mc))
    return QLearningResult(episodes=rows, qtable=qt, policy=extract_policy(qt))
