"""Experiment configuration: parsing, validation, and run manifests.

Configs are JSON.  Every run writes a manifest that embeds the fully
resolved config plus the command and seed, which is sufficient to reproduce
the run bit for bit.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .model import State, SystemParams
from .estimation import ESTIMATOR_MODES
from .qlearning import (ExplorationSchedule, LAMBDA_UPDATE_MODES,
                        LearningSchedule, paper_schedules)

PACKAGE_VERSION = "0.1.0"


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


def _default_params() -> SystemParams:
    return SystemParams(p_g=0.3, p_s=0.8, beta=0.1, B=10, delta_max=10)


@dataclass
class SolverSettings:
    tol: float = 1e-9
    max_iter: int = 100_000
    ref_state: State = State(0, 0)

    def validate(self):
        if self.tol <= 0:
            raise ConfigError("solver.tol", "must be positive")
        if self.max_iter < 1:
            raise ConfigError("solver.max_iter", "must be >= 1")

    def to_dict(self) -> dict:
        return {"tol": self.tol, "max_iter": self.max_iter,
                "ref_state": [self.ref_state.delta, self.ref_state.b]}

    @classmethod
    def from_dict(cls, d: dict) -> "SolverSettings":
        ref = d.get("ref_state", [0, 0])
        return cls(tol=float(d.get("tol", 1e-9)), max_iter=int(d.get("max_iter", 100_000)),
                   ref_state=State(int(ref[0]), int(ref[1])))


@dataclass
class EvaluationSettings:
    runs: int = 1000
    horizon: int = 10_000

    def validate(self):
        if self.runs < 2:
            raise ConfigError("evaluation.runs", "must be >= 2")
        if self.horizon < 1:
            raise ConfigError("evaluation.horizon", "must be >= 1")

    def to_dict(self) -> dict:
        return {"runs": self.runs, "horizon": self.horizon}

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationSettings":
        return cls(runs=int(d.get("runs", 1000)), horizon=int(d.get("horizon", 10_000)))


@dataclass
class EstimationSettings:
    episodes: int = 50
    horizon: int = 2000
    mode: str = "attempt"
    initial_estimates: tuple[float, float] | None = None
    freeze_estimates: bool = False
    mc_runs: int = 200
    mc_horizon: int = 2000

    def validate(self):
        if self.episodes < 1:
            raise ConfigError("estimation.episodes", "must be >= 1")
        if self.horizon < 1:
            raise ConfigError("estimation.horizon", "must be >= 1")
        if self.mode not in ESTIMATOR_MODES:
            raise ConfigError("estimation.mode", f"must be one of {ESTIMATOR_MODES}")
        if self.initial_estimates is not None:
            pg, ps = self.initial_estimates
            if not (0 <= pg <= 1 and 0 <= ps <= 1):
                raise ConfigError("estimation.initial_estimates", "must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"episodes": self.episodes, "horizon": self.horizon, "mode": self.mode,
                "initial_estimates": list(self.initial_estimates) if self.initial_estimates else None,
                "freeze_estimates": self.freeze_estimates,
                "mc_runs": self.mc_runs, "mc_horizon": self.mc_horizon}

    @classmethod
    def from_dict(cls, d: dict) -> "EstimationSettings":
        init = d.get("initial_estimates")
        return cls(episodes=int(d.get("episodes", 50)), horizon=int(d.get("horizon", 2000)),
                   mode=d.get("mode", "attempt"),
                   initial_estimates=(float(init[0]), float(init[1])) if init else None,
                   freeze_estimates=bool(d.get("freeze_estimates", False)),
                   mc_runs=int(d.get("mc_runs", 200)), mc_horizon=int(d.get("mc_horizon", 2000)))


@dataclass
class QLearningSettings:
    episodes: int = 2000
    horizon: int = 2000
    q_rate: LearningSchedule = field(default_factory=lambda: paper_schedules()[0])
    lam_rate: LearningSchedule = field(default_factory=lambda: paper_schedules()[1])
    exploration: ExplorationSchedule = field(default_factory=lambda: paper_schedules()[2])
    lambda_update: str = "every-step"
    mc_runs: int = 0
    mc_horizon: int = 2000

    def validate(self):
        if self.episodes < 0:
            raise ConfigError("qlearning.episodes", "must be >= 0")
        if self.horizon < 1:
            raise ConfigError("qlearning.horizon", "must be >= 1")
        if self.lambda_update not in LAMBDA_UPDATE_MODES:
            raise ConfigError("qlearning.lambda_update",
                              f"must be one of {LAMBDA_UPDATE_MODES}")

    def to_dict(self) -> dict:
        return {"episodes": self.episodes, "horizon": self.horizon,
                "q_rate": self.q_rate.to_dict(), "lam_rate": self.lam_rate.to_dict(),
                "exploration": self.exploration.to_dict(),
                "lambda_update": self.lambda_update,
                "mc_runs": self.mc_runs, "mc_horizon": self.mc_horizon}

    @classmethod
    def from_dict(cls, d: dict) -> "QLearningSettings":
        dq, dl, de = paper_schedules()
        return cls(episodes=int(d.get("episodes", 2000)), horizon=int(d.get("horizon", 2000)),
                   q_rate=LearningSchedule.from_dict(d["q_rate"]) if "q_rate" in d else dq,
                   lam_rate=LearningSchedule.from_dict(d["lam_rate"]) if "lam_rate" in d else dl,
                   exploration=(ExplorationSchedule.from_dict(d["exploration"])
                                if "exploration" in d else de),
                   lambda_update=d.get("lambda_update", "every-step"),
                   mc_runs=int(d.get("mc_runs", 0)), mc_horizon=int(d.get("mc_horizon", 2000)))


@dataclass
class ExperimentConfig:
    """Everything a subcommand needs, resolved and validated."""

    params: SystemParams = field(default_factory=_default_params)
    solver: SolverSettings = field(default_factory=SolverSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)
    estimation: EstimationSettings = field(default_factory=EstimationSettings)
    qlearning: QLearningSettings = field(default_factory=QLearningSettings)
    seed: int = 12345
    out_dir: str = "runs"
    figures: bool = True

    def validate(self) -> "ExperimentConfig":
        try:
            SystemParams(**self.params.to_dict())
        except ValueError as exc:
            raise ConfigError("params", str(exc)) from exc
        self.solver.validate()
        self.evaluation.validate()
        self.estimation.validate()
        self.qlearning.validate()
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed", "must fit in an unsigned 64-bit integer")
        if self.params.contains(self.solver.ref_state) is False:
            raise ConfigError("solver.ref_state", "outside the state grid")
        return self

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "solver": self.solver.to_dict(),
                "evaluation": self.evaluation.to_dict(),
                "estimation": self.estimation.to_dict(),
                "qlearning": self.qlearning.to_dict(),
                "seed": self.seed, "out_dir": self.out_dir, "figures": self.figures}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"params", "solver", "evaluation", "estimation", "qlearning",
                 "seed", "out_dir", "figures"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration key")
        try:
            params = SystemParams.from_dict(d.get("params", _default_params().to_dict()))
        except ValueError as exc:
            raise ConfigError("params", str(exc)) from exc
        return cls(params=params,
                   solver=SolverSettings.from_dict(d.get("solver", {})),
                   evaluation=EvaluationSettings.from_dict(d.get("evaluation", {})),
                   estimation=EstimationSettings.from_dict(d.get("estimation", {})),
                   qlearning=QLearningSettings.from_dict(d.get("qlearning", {})),
                   seed=int(d.get("seed", 12345)),
                   out_dir=str(d.get("out_dir", "runs")),
                   figures=bool(d.get("figures", True)))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError("<file>", f"not valid JSON: {exc}") from exc
        return cls.from_dict(d)


def make_manifest(config: ExperimentConfig, command: str, *,
                  outputs: list[str] | None = None,
                  extra: dict | None = None) -> dict:
    manifest = {
        "command": command,
        "seed": config.seed,
        "config": config.to_dict(),
        "package_version": PACKAGE_VERSION,
        "created_unix": time.time(),
    }
    if outputs:
        manifest["outputs"] = sorted(outputs)
    if extra:
        manifest.update(extra)
    return manifest
