"""Transmission policies minimizing time-averaged version age for an
energy-harvesting sender on an unreliable channel, under three knowledge
regimes: fully known model (dynamic programming), known structure with
unknown rates (online estimation + re-solving), and unknown model (tabular
average-cost Q-learning)."""

from .model import (Action, InfeasibleActionError, State, SystemParams,
                    TransitionDist, battery_step, build_kernel, enumerate_states,
                    expected_cost, feasible_actions, transition_dist, vaoi_step)
from .solver import (ConvergenceError, EvaluationError, SolveResult,
                     ThresholdProfile, all_idle_policy, bellman_backup,
                     exact_policy_evaluation, greedy_policy, rvia_solve,
                     stationary_distribution, threshold_profile, validate_policy)
from .simulator import (Environment, EvalReport, EpisodeTrace, StepOutcome,
                        SweepPoint, monte_carlo_eval, run_episode, substream, sweep)
from .estimation import (EstimatorState, EstimationEpisode, run_estimation_based_mdp,
                         smoothed_estimates, update_channel_estimate,
                         update_generation_estimate)
from .qlearning import (ExplorationSchedule, LearningSchedule, QLearningResult,
                        QTable, avg_cost_update, extract_policy, paper_schedules,
                        q_update, run_q_learning, select_action, td_error)
from .config import ConfigError, ExperimentConfig, make_manifest

__version__ = "0.1.0"
