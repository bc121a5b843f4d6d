"""State space, one-step dynamics, and exact transition kernel.

The system couples two bounded integer coordinates: the version age at the
monitor (``delta``, truncated at ``delta_max``) and the sender's battery
level (``b``, capped at ``B``).  Each slot is driven by three independent
Bernoulli draws: version generation (prob ``p_g``), channel success
(prob ``p_s``), and energy arrival (prob ``beta``).  Transmitting costs one
battery unit and is only possible with a non-empty battery; a successful
transmission resets the age to the number of versions generated that slot.

The per-slot cost is the age *after* the transition, so minimizing long-run
average cost minimizes the time-averaged version age.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np

PROB_ATOL = 1e-12


class Action(IntEnum):
    IDLE = 0
    TRANSMIT = 1


class InfeasibleActionError(ValueError):
    """Transmit was requested with an empty battery."""


@dataclass(frozen=True)
class State:
    """Grid point (delta, b): version age and battery level."""

    delta: int
    b: int


@dataclass(frozen=True)
class SystemParams:
    """The five scalars that define the stochastic system.

    p_g: probability a new version is generated in a slot.
    p_s: probability a transmission succeeds.
    beta: probability one energy unit arrives in a slot.
    B: battery capacity (units, >= 1).
    delta_max: truncation ceiling for the version age (>= 1).
    """

    p_g: float
    p_s: float
    beta: float
    B: int
    delta_max: int

    def __post_init__(self):
        for name in ("p_g", "p_s", "beta"):
            p = getattr(self, name)
            if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {p!r}")
        if not (isinstance(self.B, int) and self.B >= 1):
            raise ValueError(f"B must be an integer >= 1, got {self.B!r}")
        if not (isinstance(self.delta_max, int) and self.delta_max >= 1):
            raise ValueError(f"delta_max must be an integer >= 1, got {self.delta_max!r}")

    @property
    def n_states(self) -> int:
        return (self.delta_max + 1) * (self.B + 1)

    def contains(self, state: State) -> bool:
        return 0 <= state.delta <= self.delta_max and 0 <= state.b <= self.B

    def state_index(self, state: State) -> int:
        """Canonical row-major index: delta major, b minor."""
        if not self.contains(state):
            raise ValueError(f"state {state} outside grid {self.delta_max}x{self.B}")
        return state.delta * (self.B + 1) + state.b

    def state_at(self, index: int) -> State:
        if not 0 <= index < self.n_states:
            raise ValueError(f"index {index} outside [0, {self.n_states})")
        return State(index // (self.B + 1), index % (self.B + 1))

    def to_dict(self) -> dict:
        return {"p_g": self.p_g, "p_s": self.p_s, "beta": self.beta,
                "B": self.B, "delta_max": self.delta_max}

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        missing = [k for k in ("p_g", "p_s", "beta", "B", "delta_max") if k not in d]
        if missing:
            raise ValueError(f"missing parameter keys: {missing}")
        return cls(p_g=float(d["p_g"]), p_s=float(d["p_s"]), beta=float(d["beta"]),
                   B=int(d["B"]), delta_max=int(d["delta_max"]))

    @classmethod
    def from_file(cls, path) -> "SystemParams":
        with open(path) as f:
            d = json.load(f)
        return cls.from_dict(d.get("params", d))


def enumerate_states(params: SystemParams) -> list[State]:
    """All states in canonical order; index i here equals state_index."""
    return [State(d, b)
            for d in range(params.delta_max + 1)
            for b in range(params.B + 1)]


def feasible_actions(state: State) -> tuple[Action, ...]:
    if state.b == 0:
        return (Action.IDLE,)
    return (Action.IDLE, Action.TRANSMIT)


def battery_step(b: int, e: int, a: int, B: int) -> int:
    """Next battery level: min(b + e - a, B)."""
    if not 0 <= b <= B:
        raise ValueError(f"battery level {b} outside [0, {B}]")
    if e not in (0, 1) or a not in (0, 1):
        raise ValueError("e and a must be 0 or 1")
    if a == 1 and b == 0:
        raise InfeasibleActionError("cannot transmit with an empty battery")
    return min(b + e - a, B)


def vaoi_step(delta: int, g: int, a: int, h: int, delta_max: int) -> int:
    """Next version age: resets to g on a successful transmission, otherwise
    grows by g; truncated at delta_max in both branches."""
    if not 0 <= delta <= delta_max:
        raise ValueError(f"delta {delta} outside [0, {delta_max}]")
    if g not in (0, 1) or a not in (0, 1) or h not in (0, 1):
        raise ValueError("g, a, h must be 0 or 1")
    if a * h == 1:
        return min(g, delta_max)
    return min(delta + g, delta_max)


@dataclass
class TransitionDist:
    """Probability-weighted successor states for one (state, action)."""

    entries: list[tuple[State, float]]

    def total(self) -> float:
        return sum(p for _, p in self.entries)

    def delta_marginal(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for s, p in self.entries:
            out[s.delta] = out.get(s.delta, 0.0) + p
        return out

    def b_marginal(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for s, p in self.entries:
            out[s.b] = out.get(s.b, 0.0) + p
        return out


def _check_feasible(state: State, action: Action | int) -> None:
    if int(action) == Action.TRANSMIT and state.b == 0:
        raise InfeasibleActionError(f"transmit infeasible at {state} (empty battery)")


def transition_dist(params: SystemParams, state: State, action: Action | int) -> TransitionDist:
    """Exact successor distribution from enumerating the joint (g, h, e) draws.

    The kernel factors as P(delta'|delta, a) * P(b'|b, a) because (g, h) are
    independent of e; duplicates arising from the min caps are merged.
    """
    if not params.contains(state):
        raise ValueError(f"state {state} outside grid")
    _check_feasible(state, action)
    a = int(action)
    acc: dict[State, float] = {}
    for g in (0, 1):
        wg = params.p_g if g else 1.0 - params.p_g
        for h in (0, 1):
            wh = params.p_s if h else 1.0 - params.p_s
            for e in (0, 1):
                we = params.beta if e else 1.0 - params.beta
                w = wg * wh * we
                if w == 0.0:
                    continue
                nxt = State(vaoi_step(state.delta, g, a, h, params.delta_max),
                            battery_step(state.b, e, a, params.B))
                acc[nxt] = acc.get(nxt, 0.0) + w
    return TransitionDist(sorted(acc.items(), key=lambda kv: (kv[0].delta, kv[0].b)))


def expected_cost(params: SystemParams, state: State, action: Action | int) -> float:
    """One-step expected cost: sum over successors of P * delta'."""
    dist = transition_dist(params, state, action)
    return sum(p * s.delta for s, p in dist.entries)


@dataclass(frozen=True)
class KernelMatrices:
    """Dense tabular form of the model over the canonical state order.

    P[a] is the N x N transition matrix for action a, C[a] the expected
    one-step cost vector, and feasible the N x 2 action mask (transmit is
    masked out wherever b = 0).
    """

    P: np.ndarray
    C: np.ndarray
    feasible: np.ndarray

    @property
    def n_states(self) -> int:
        return self.P.shape[1]


@lru_cache(maxsize=32)
def build_kernel(params: SystemParams) -> KernelMatrices:
    N = params.n_states
    P = np.zeros((2, N, N))
    C = np.zeros((2, N))
    feasible = np.zeros((N, 2), dtype=bool)
    feasible[:, 0] = True
    for state in enumerate_states(params):
        s = params.state_index(state)
        for action in feasible_actions(state):
            a = int(action)
            feasible[s, a] = True
            for nxt, w in transition_dist(params, state, action).entries:
                P[a, s, params.state_index(nxt)] += w
                C[a, s] += w * nxt.delta
    P.setflags(write=False)
    C.setflags(write=False)
    feasible.setflags(write=False)
    return KernelMatrices(P=P, C=C, feasible=feasible)
