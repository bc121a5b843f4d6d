"""Batch command-line front door.

Subcommands cover the three knowledge regimes plus reproduction sweeps:

    solve       dynamic-programming solution of the fully known model
    table-dmax  optimal average age across truncation ceilings
    sweep-beta  optimal and greedy curves across energy-arrival rates
    estimate    act / estimate / re-solve loop (unknown rates)
    qlearn      model-free tabular Q-learning (unknown model)
    compare     all three regimes plus the greedy baseline on one config

Every run is deterministic given (config, seed), writes only inside its
output directory, and drops a manifest.json sufficient to re-run it.
Failures exit nonzero with a one-line JSON error on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from .config import ConfigError, ExperimentConfig, make_manifest
from .estimation import run_estimation_based_mdp
from .model import SystemParams
from .qlearning import run_q_learning
from .simulator import Environment, monte_carlo_eval, sweep
from . import plots, reports
from . import solver as _solver

TABLE_DMAX_VALUES = (1, 2, 3, 4, 5, 10, 15, 20, 25)
SWEEP_BETAS = tuple(round(0.05 * i, 2) for i in range(1, 11))
SWEEP_BATTERIES = (1, 5, 10, 15)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vaoi",
        description="Transmission policies minimizing time-averaged version age "
                    "for an energy-harvesting sender.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("solve", "solve the fully known model and export the policy"),
            ("table-dmax", "optimal average age across truncation ceilings"),
            ("sweep-beta", "optimal vs greedy across energy-arrival rates"),
            ("estimate", "online estimation with per-episode re-solving"),
            ("qlearn", "tabular average-cost Q-learning"),
            ("compare", "all regimes on one configuration")]:
        p = sub.add_parser(name, help=help_text)
        _add_common_options(p)
        if name in ("estimate", "qlearn"):
            p.add_argument("--episodes", type=int, default=None)
            p.add_argument("--horizon", type=int, default=None)
        if name in ("table-dmax", "sweep-beta"):
            p.add_argument("--runs", type=int, default=None,
                           help="Monte Carlo runs per point (table-dmax only)")
    return parser


def _add_common_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--estimator-mode", choices=("attempt", "oracle"), default=None)
    p.add_argument("--lambda-update", choices=("every-step", "ref-gated"), default=None)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--p-g", type=float, default=None)
    p.add_argument("--p-s", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--B", type=int, default=None)
    p.add_argument("--delta-max", type=int, default=None)


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = (ExperimentConfig.from_file(args.config) if args.config
              else ExperimentConfig())
    overrides = {k: getattr(args, v) for k, v in
                 [("p_g", "p_g"), ("p_s", "p_s"), ("beta", "beta"),
                  ("B", "B"), ("delta_max", "delta_max")]
                 if getattr(args, v, None) is not None}
    if overrides:
        try:
            config.params = dataclasses.replace(config.params, **overrides)
        except ValueError as exc:
            raise ConfigError("params", str(exc)) from exc
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.out_dir = args.out
    if getattr(args, "estimator_mode", None) is not None:
        config.estimation.mode = args.estimator_mode
    if getattr(args, "lambda_update", None) is not None:
        config.qlearning.lambda_update = args.lambda_update
    if getattr(args, "no_figures", False):
        config.figures = False
    if getattr(args, "episodes", None) is not None:
        config.estimation.episodes = args.episodes
        config.qlearning.episodes = args.episodes
    if getattr(args, "horizon", None) is not None:
        config.estimation.horizon = args.horizon
        config.qlearning.horizon = args.horizon
    if getattr(args, "runs", None) is not None:
        config.evaluation.runs = args.runs
    return config.validate()


def _outdir(config: ExperimentConfig, command: str) -> Path:
    out = Path(config.out_dir) / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(config: ExperimentConfig, command: str, out: Path,
            written: list[Path], extra: dict | None = None) -> None:
    manifest = make_manifest(config, command,
                             outputs=[str(p.name) for p in written], extra=extra)
    reports.write_json(out / "manifest.json", manifest)


def cmd_solve(config: ExperimentConfig) -> int:
    out = _outdir(config, "solve")
    start = time.perf_counter()
    res = _solver.rvia_solve(config.params, tol=config.solver.tol,
                             max_iter=config.solver.max_iter,
                             ref_state=config.solver.ref_state)
    exact = _solver.exact_policy_evaluation(config.params, res.policy)
    written = []
    manifest = make_manifest(config, "solve", extra={
        "avg_cost": res.avg_cost, "exact_avg_vaoi": exact,
        "iterations": res.iterations, "span_residual": res.span_residual})
    written.append(reports.write_policy_grid_csv(out / "policy_grid.csv",
                                                 config.params, res.policy))
    written.append(reports.write_json(out / "policy.json",
                                      reports.policy_payload(config.params, res.policy, manifest)))
    written.append(reports.write_json(out / "value.json",
                                      reports.value_payload(config.params, res.value,
                                                            res.avg_cost, res.iterations,
                                                            manifest)))
    profile = _solver.threshold_profile(res.policy, config.params)
    written.append(reports.write_csv(
        out / "thresholds.csv",
        ["b", "transmit_threshold", "is_up_set"],
        [[b, profile.thresholds[b], profile.is_up_set[b]]
         for b in range(config.params.B + 1)]))
    if config.figures:
        written.append(plots.policy_grid_figure(config.params, res.policy,
                                                out / "policy_grid.png"))
    _finish(config, "solve", out, written,
            extra={"avg_cost": res.avg_cost, "exact_avg_vaoi": exact,
                   "iterations": res.iterations,
                   "wall_seconds": time.perf_counter() - start})
    print(f"optimal average VAoI: {res.avg_cost:.6f} "
          f"(exact evaluation {exact:.6f}, {res.iterations} iterations)")
    return 0


def cmd_table_dmax(config: ExperimentConfig) -> int:
    out = _outdir(config, "table-dmax")
    start = time.perf_counter()
    rows = []
    for dmax in TABLE_DMAX_VALUES:
        params = dataclasses.replace(config.params, delta_max=dmax)
        res = _solver.rvia_solve(params, tol=config.solver.tol,
                                 max_iter=config.solver.max_iter)
        exact = _solver.exact_policy_evaluation(params, res.policy)
        report = monte_carlo_eval(Environment(params, config.seed), res.policy,
                                  config.evaluation.runs, config.evaluation.horizon)
        rows.append({"delta_max": dmax, "avg_vaoi_rvia": res.avg_cost,
                     "avg_vaoi_exact": exact, "mc_mean": report.mean_vaoi,
                     "mc_std_error": report.std_error,
                     "mc_ci99_lo": report.confidence_interval_99[0],
                     "mc_ci99_hi": report.confidence_interval_99[1],
                     "iterations": res.iterations})
        print(f"delta_max={dmax:3d}: exact {exact:.4f}  "
              f"mc {report.mean_vaoi:.4f} +- {report.std_error:.4f}")
    header = list(rows[0].keys())
    written = [reports.write_csv(out / "table_dmax.csv", header,
                                 [[r[k] for k in header] for r in rows])]
    if config.figures:
        written.append(plots.dmax_table_figure(rows, out / "table_dmax.png"))
    _finish(config, "table-dmax", out, written,
            extra={"wall_seconds": time.perf_counter() - start})
    return 0


def cmd_sweep_beta(config: ExperimentConfig) -> int:
    out = _outdir(config, "sweep-beta")
    start = time.perf_counter()
    rows = []
    for B in SWEEP_BATTERIES:
        grid = [dataclasses.replace(config.params, beta=beta, B=B)
                for beta in SWEEP_BETAS]
        for source in ("optimal", "greedy"):
            for point in sweep(grid, source, "exact", seed=config.seed,
                               tol=config.solver.tol, max_iter=config.solver.max_iter):
                rows.append({"beta": point.params.beta, "B": point.params.B,
                             "delta_max": point.params.delta_max,
                             "p_g": point.params.p_g, "p_s": point.params.p_s,
                             "policy": point.policy_source,
                             "evaluator": point.evaluator,
                             "avg_vaoi": point.avg_vaoi,
                             "iterations": point.iterations,
                             "error": point.error})
    header = list(rows[0].keys())
    written = [reports.write_csv(out / "sweep_beta.csv", header,
                                 [[r[k] for k in header] for r in rows])]
    if config.figures:
        written.append(plots.beta_sweep_figure(rows, out / "sweep_beta.png"))
    _finish(config, "sweep-beta", out, written,
            extra={"wall_seconds": time.perf_counter() - start})
    failed = [r for r in rows if r["error"]]
    print(f"sweep-beta: {len(rows)} points, {len(failed)} failed")
    return 0


def _estimation_rows(records) -> list[dict]:
    return [{"episode": r.episode, "p_g_hat": r.p_g_hat, "p_s_hat": r.p_s_hat,
             "exact_avg_vaoi": r.exact_avg_vaoi,
             "mc_avg_vaoi": r.mc.mean_vaoi if r.mc else None,
             "solver_iterations": r.solver_iterations}
            for r in records]


def cmd_estimate(config: ExperimentConfig) -> int:
    out = _outdir(config, "estimate")
    start = time.perf_counter()
    est = config.estimation
    records = run_estimation_based_mdp(
        config.params, est.episodes, est.horizon, mode=est.mode, seed=config.seed,
        initial_estimates=est.initial_estimates, freeze_estimates=est.freeze_estimates,
        tol=config.solver.tol, max_iter=config.solver.max_iter,
        mc_runs=est.mc_runs, mc_horizon=est.mc_horizon)
    reference = _solver.rvia_solve(config.params, tol=config.solver.tol,
                                   max_iter=config.solver.max_iter)
    optimal = _solver.exact_policy_evaluation(config.params, reference.policy)
    rows = _estimation_rows(records)
    header = list(rows[0].keys())
    written = [reports.write_csv(out / "estimate_curve.csv", header,
                                 [[r[k] for k in header] for r in rows])]
    if config.figures:
        written.append(plots.learning_curve_figure(rows, optimal,
                                                   out / "estimate_curve.png",
                                                   label="estimation-based policy"))
    _finish(config, "estimate", out, written,
            extra={"estimator_mode": est.mode, "optimal_avg_vaoi": optimal,
                   "wall_seconds": time.perf_counter() - start})
    last = records[-1]
    print(f"estimate: after {est.episodes} episodes "
          f"p_g_hat={last.p_g_hat:.4f} p_s_hat={last.p_s_hat:.4f} "
          f"exact avg VAoI {last.exact_avg_vaoi:.4f} (optimal {optimal:.4f})")
    return 0


def cmd_qlearn(config: ExperimentConfig) -> int:
    out = _outdir(config, "qlearn")
    start = time.perf_counter()
    ql = config.qlearning
    result = run_q_learning(config.params, ql.episodes, ql.horizon,
                            q_rate=ql.q_rate, lam_rate=ql.lam_rate,
                            exploration=ql.exploration, seed=config.seed,
                            lambda_update=ql.lambda_update,
                            ref_state=config.solver.ref_state,
                            mc_runs=ql.mc_runs, mc_horizon=ql.mc_horizon,
                            tol=config.solver.tol)
    reference = _solver.rvia_solve(config.params, tol=config.solver.tol,
                                   max_iter=config.solver.max_iter)
    optimal = _solver.exact_policy_evaluation(config.params, reference.policy)
    rows = [{"episode": r.episode, "lambda_hat": r.lambda_hat,
             "exact_avg_vaoi": r.exact_avg_vaoi,
             "mc_avg_vaoi": r.mc.mean_vaoi if r.mc else None,
             "epsilon": r.epsilon}
            for r in result.episodes]
    written = []
    if rows:
        header = list(rows[0].keys())
        written.append(reports.write_csv(out / "qlearn_curve.csv", header,
                                         [[r[k] for k in header] for r in rows]))
        if config.figures:
            written.append(plots.learning_curve_figure(rows, optimal,
                                                       out / "qlearn_curve.png",
                                                       label="q-learning policy"))
    manifest = make_manifest(config, "qlearn", extra={"optimal_avg_vaoi": optimal})
    written.append(reports.write_json(out / "qtable.json",
                                      {"manifest": manifest, **result.qtable.to_dict()}))
    final = (result.episodes[-1].exact_avg_vaoi if result.episodes
             else _solver.exact_policy_evaluation(config.params, result.policy))
    _finish(config, "qlearn", out, written,
            extra={"optimal_avg_vaoi": optimal, "final_exact_avg_vaoi": final,
                   "wall_seconds": time.perf_counter() - start})
    print(f"qlearn: after {ql.episodes} episodes exact avg VAoI "
          f"{final:.4f} (optimal {optimal:.4f})")
    return 0


def cmd_compare(config: ExperimentConfig) -> int:
    out = _outdir(config, "compare")
    start = time.perf_counter()
    reference = _solver.rvia_solve(config.params, tol=config.solver.tol,
                                   max_iter=config.solver.max_iter,
                                   ref_state=config.solver.ref_state)
    known = _solver.exact_policy_evaluation(config.params, reference.policy)
    greedy = _solver.exact_policy_evaluation(config.params,
                                             _solver.greedy_policy(config.params))
    est = config.estimation
    est_records = run_estimation_based_mdp(
        config.params, est.episodes, est.horizon, mode=est.mode, seed=config.seed,
        initial_estimates=est.initial_estimates, freeze_estimates=est.freeze_estimates,
        tol=config.solver.tol, max_iter=config.solver.max_iter)
    ql = config.qlearning
    ql_result = run_q_learning(config.params, ql.episodes, ql.horizon,
                               q_rate=ql.q_rate, lam_rate=ql.lam_rate,
                               exploration=ql.exploration, seed=config.seed,
                               lambda_update=ql.lambda_update,
                               ref_state=config.solver.ref_state,
                               evaluate_each_episode=False)
    ql_final = _solver.exact_policy_evaluation(config.params, ql_result.policy)
    summary = {"known_optimal": known,
               "estimation_endpoint": est_records[-1].exact_avg_vaoi,
               "qlearning_endpoint": ql_final,
               "greedy_baseline": greedy,
               "estimation_episodes": est.episodes,
               "qlearning_episodes": ql.episodes}
    manifest = make_manifest(config, "compare", extra=summary)
    written = [reports.write_json(out / "compare.json",
                                  {"manifest": manifest, **summary})]
    if config.figures:
        written.append(plots.compare_figure(summary, out / "compare.png"))
    _finish(config, "compare", out, written,
            extra={**summary, "wall_seconds": time.perf_counter() - start})
    print(json.dumps({k: summary[k] for k in
                      ("known_optimal", "estimation_endpoint",
                       "qlearning_endpoint", "greedy_baseline")}))
    return 0


COMMANDS = {"solve": cmd_solve, "table-dmax": cmd_table_dmax,
            "sweep-beta": cmd_sweep_beta, "estimate": cmd_estimate,
            "qlearn": cmd_qlearn, "compare": cmd_compare}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](config)
    except ConfigError as exc:
        _emit_error("ConfigError", str(exc), field=exc.field_name)
        return 2
    except (_solver.ConvergenceError, _solver.EvaluationError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 3
    except OSError as exc:
        _emit_error("OSError", str(exc))
        return 4


def _emit_error(kind: str, message: str, **details) -> None:
    payload = {"error": {"type": kind, "message": message, **details}}
    print(json.dumps(payload), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
