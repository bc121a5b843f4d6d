"""Average-cost dynamic programming over the tabular model.

Relative value iteration drives the normalized backup h <- T(h) - T(h)(ref)
until the span seminorm of successive differences falls below tolerance; the
offset subtracted at the reference state converges to the optimal average
cost.  Exact policy evaluation solves the stationary distribution of the
policy-induced chain and serves as an independent oracle for that number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from .model import Action, KernelMatrices, State, SystemParams, build_kernel


class ConvergenceError(RuntimeError):
    """Relative value iteration did not reach tolerance within max_iter."""

    def __init__(self, iterations: int, span_residual: float, tol: float):
        self.iterations = iterations
        self.span_residual = span_residual
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(span residual {span_residual:.3e}, tol {tol:.3e})")


class EvaluationError(RuntimeError):
    """The policy chain has no unique recurrent class reachable from (0, 0)."""


@dataclass
class SolveResult:
    """Output of rvia_solve: optimal policy, average cost, relative values."""

    policy: np.ndarray
    avg_cost: float
    value: np.ndarray
    iterations: int
    span_residual: float


def _action_values(kernel: KernelMatrices, v: np.ndarray) -> np.ndarray:
    """Q(s, a) = C(s, a) + P(.|s, a) @ v, with infeasible actions at +inf."""
    q = np.stack([kernel.C[0] + kernel.P[0] @ v,
                  kernel.C[1] + kernel.P[1] @ v], axis=1)
    q[~kernel.feasible] = np.inf
    return q


def action_values(params: SystemParams, v: np.ndarray) -> np.ndarray:
    """Public one-step lookahead table; rows follow the canonical order."""
    return _action_values(build_kernel(params), np.asarray(v, dtype=float))


def bellman_backup(params: SystemParams, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One minimizing backup; ties broken toward idle.

    Returns the backed-up values and the greedy policy (0 = idle,
    1 = transmit) as arrays over the canonical state order.
    """
    q = action_values(params, v)
    policy = (q[:, 1] < q[:, 0]).astype(np.int64)
    return np.minimum(q[:, 0], q[:, 1]), policy


def rvia_solve(params: SystemParams, tol: float = 1e-9, max_iter: int = 100_000,
               ref_state: State = State(0, 0)) -> SolveResult:
    """Relative value iteration to the optimal average cost and policy.

    Stops when span(h_{k+1} - h_k) < tol; the returned avg_cost is the offset
    subtracted at ref_state on the final iteration, which then lies within
    tol of the optimal average cost.  Raises ConvergenceError past max_iter.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kernel = build_kernel(params)
    ref = params.state_index(ref_state)
    h = np.zeros(kernel.n_states)
    span = np.inf
    for it in range(1, max_iter + 1):
        q = _action_values(kernel, h)
        w = np.minimum(q[:, 0], q[:, 1])
        offset = w[ref]
        h_new = w - offset
        diff = h_new - h
        span = float(diff.max() - diff.min())
        h = h_new
        if span < tol:
            policy = (q[:, 1] < q[:, 0]).astype(np.int64)
            return SolveResult(policy=policy, avg_cost=float(offset), value=h,
                               iterations=it, span_residual=span)
    raise ConvergenceError(max_iter, span, tol)


def greedy_policy(params: SystemParams) -> np.ndarray:
    """Myopic baseline: transmit whenever at least one unit is stored."""
    policy = np.ones(params.n_states, dtype=np.int64)
    policy[_battery_of_index(params) == 0] = Action.IDLE
    return policy


def all_idle_policy(params: SystemParams) -> np.ndarray:
    return np.zeros(params.n_states, dtype=np.int64)


def _battery_of_index(params: SystemParams) -> np.ndarray:
    return np.arange(params.n_states) % (params.B + 1)


def validate_policy(params: SystemParams, policy: np.ndarray) -> None:
    policy = np.asarray(policy)
    if policy.shape != (params.n_states,):
        raise ValueError(f"policy length {policy.shape} != {params.n_states}")
    if not np.isin(policy, (0, 1)).all():
        raise ValueError("policy entries must be 0 or 1")
    bad = (policy == Action.TRANSMIT) & (_battery_of_index(params) == 0)
    if bad.any():
        raise ValueError(f"policy transmits at empty-battery states {np.nonzero(bad)[0]}")


@dataclass
class ThresholdProfile:
    """Per-battery-level transmit thresholds of a deterministic policy.

    thresholds[b] is the smallest age at which the policy transmits with
    battery b (None if it never does); is_up_set[b] says whether the transmit
    set at that level is upward closed in the age coordinate.
    """

    thresholds: list[int | None]
    is_up_set: list[bool]

    @property
    def threshold_everywhere(self) -> bool:
        return all(self.is_up_set)


def threshold_profile(policy: np.ndarray, params: SystemParams) -> ThresholdProfile:
    validate_policy(params, policy)
    grid = np.asarray(policy).reshape(params.delta_max + 1, params.B + 1)
    thresholds: list[int | None] = []
    flags: list[bool] = []
    for b in range(params.B + 1):
        col = grid[:, b]
        tx = np.nonzero(col == Action.TRANSMIT)[0]
        if len(tx) == 0:
            thresholds.append(None)
            flags.append(True)
        else:
            first = int(tx[0])
            thresholds.append(first)
            flags.append(bool(col[first:].all()))
    return ThresholdProfile(thresholds=thresholds, is_up_set=flags)


def _policy_chain(params: SystemParams, policy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    kernel = build_kernel(params)
    idx = np.arange(kernel.n_states)
    pol = np.asarray(policy, dtype=np.int64)
    return kernel.P[pol, idx, :], kernel.C[pol, idx]


def stationary_distribution(params: SystemParams, policy: np.ndarray,
                            start: State = State(0, 0)) -> tuple[np.ndarray, np.ndarray]:
    """Stationary distribution of the policy chain started at `start`.

    Returns (support_indices, probabilities) over the recurrent class
    reachable from the start state.  Transient reachable states carry no
    stationary mass and are excluded.  Raises EvaluationError when more than
    one recurrent class is reachable (the long-run average would then depend
    on the sample path).
    """
    validate_policy(params, policy)
    P, _ = _policy_chain(params, policy)
    adj = sp.csr_matrix(P > 0)
    s0 = params.state_index(start)
    reach = csgraph.breadth_first_order(adj, s0, return_predecessors=False)
    reach = np.sort(reach)
    sub = P[np.ix_(reach, reach)]
    n_comp, labels = csgraph.connected_components(
        sp.csr_matrix(sub > 0), directed=True, connection="strong")
    rows, cols = np.nonzero(sub > 0)
    leaves = np.zeros(n_comp, dtype=bool)
    cross = labels[rows] != labels[cols]
    leaves[np.unique(labels[rows[cross]])] = True
    recurrent = np.nonzero(~leaves)[0]
    if len(recurrent) != 1:
        raise EvaluationError(
            f"{len(recurrent)} recurrent classes reachable from {start}")
    mask = labels == recurrent[0]
    support = reach[mask]
    Pc = sub[np.ix_(mask, mask)]
    n = Pc.shape[0]
    if n == 1:
        return support, np.ones(1)
    A = (Pc - np.eye(n)).T
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    mu = np.linalg.solve(A, rhs)
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    residual = np.abs(mu @ Pc - mu).max()
    if residual > 1e-10:
        raise EvaluationError(f"stationary solve residual {residual:.3e}")
    return support, mu


def exact_policy_evaluation(params: SystemParams, policy: np.ndarray,
                            start: State = State(0, 0)) -> float:
    """Exact long-run average cost of a stationary policy.

    Computed as the stationary expectation of the one-step expected cost over
    the recurrent class reachable from `start`.
    """
    support, mu = stationary_distribution(params, policy, start)
    _, c = _policy_chain(params, policy)
    return float(mu @ c[support])
