"""Run configuration: a nested JSON document with every default materialized on load."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, NumuonError
from .models import TaskSpec
from .optimizers import StepConfig
from .schedules import LrSchedule, RankSchedule


@dataclass
class ModelSpec:
    input_dim: int = 64
    hidden: list[int] = field(default_factory=lambda: [128, 128, 128])
    output_dim: int = 64
    activation: str = "tanh"

    @property
    def sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.output_dim]


@dataclass
class DiagnosticsSpec:
    every: int = 50
    ks: list[int] = field(default_factory=lambda: [1, 4, 16])
    subspace_k: int = 64


@dataclass
class RunConfig:
    seed: int = 0
    total_steps: int = 3000
    batch_size: int = 128
    model: ModelSpec = field(default_factory=ModelSpec)
    task: TaskSpec = field(default_factory=TaskSpec)
    optimizer: StepConfig = field(default_factory=StepConfig)
    lr_schedule: LrSchedule = field(default_factory=LrSchedule)
    rank_schedule: RankSchedule | None = None
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    output_dir: str | None = None
    log_wall_time: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"]["ns_coeffs"] = list(self.optimizer.ns_coeffs)
        d["optimizer"]["adam_betas"] = list(self.optimizer.adam_betas)
        if self.rank_schedule is not None:
            d["rank_schedule"]["breakpoints"] = [list(b) for b in self.rank_schedule.breakpoints]
        return d


_SECTIONS = {
    "model": ModelSpec,
    "task": TaskSpec,
    "optimizer": StepConfig,
    "lr_schedule": LrSchedule,
    "rank_schedule": RankSchedule,
    "diagnostics": DiagnosticsSpec,
}


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = dict(data)
    if cls is RankSchedule and "breakpoints" in kwargs:
        kwargs["breakpoints"] = tuple(tuple(b) for b in kwargs["breakpoints"])
    try:
        return cls(**kwargs)
    except (NumuonError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    data = copy.deepcopy(data)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known - {"sweep"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    data.pop("sweep", None)
    total = int(data.get("total_steps", RunConfig.total_steps))
    opt = data.setdefault("optimizer", {})
    lr = data.get("lr_schedule")
    if isinstance(lr, dict) and isinstance(opt, dict):
        lr.setdefault("total_steps", total)
        if "base_lr" in lr:
            opt.setdefault("lr", lr["base_lr"])
        else:
            lr["base_lr"] = opt.get("lr", StepConfig.lr)
    rs = data.get("rank_schedule")
    if isinstance(rs, dict):
        rs.setdefault("total_steps", total)
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            if value is None and key == "rank_schedule":
                kwargs[key] = None
            else:
                kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    if kwargs.get("lr_schedule") is None:
        kwargs["lr_schedule"] = LrSchedule(kind="constant", base_lr=kwargs["optimizer"].lr, total_steps=total)
    cfg = RunConfig(**kwargs)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.total_steps < 1 or cfg.batch_size < 1:
        raise ConfigError("total_steps and batch_size must be positive")
    if not isinstance(cfg.seed, int):
        raise ConfigError("seed must be an explicit integer")
    if cfg.lr_schedule.total_steps != cfg.total_steps:
        raise ConfigError("lr_schedule.total_steps must equal total_steps")
    if cfg.lr_schedule.base_lr != cfg.optimizer.lr:
        raise ConfigError("lr_schedule.base_lr must equal optimizer.lr")
    rs = cfg.rank_schedule
    if cfg.optimizer.mode == "numuon" and rs is not None and rs.total_steps != cfg.total_steps:
        raise ConfigError("rank_schedule.total_steps must equal total_steps")
    if cfg.diagnostics.every < 1:
        raise ConfigError("diagnostics.every must be >= 1")
    t = cfg.task
    m = cfg.model
    if t.kind == "lowrank_teacher_regression" and t.teacher_rank > min(m.input_dim, m.output_dim):
        raise ConfigError("teacher_rank exceeds min(input_dim, output_dim)")
    if t.kind == "softmax_classification" and t.num_classes != m.output_dim:
        raise ConfigError("num_classes must equal model.output_dim")
    if m.activation not in ("tanh", "relu", "identity"):
        raise ConfigError(f"unknown activation {m.activation!r}")


def load_config(path) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


def resolved_json(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
