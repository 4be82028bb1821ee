"""Flat ``key = value`` experiment configuration and seed derivation."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .distillation import DistillConfig
from .generation import GanTrainConfig


class ConfigError(ValueError):
    """Bad configuration file, key or value."""


@dataclass
class ExperimentConfig:
    # data
    num_classes: int = 4
    n_per_class: int = 500
    separation: float = 2.5
    covariance_scale: float = 1.0
    test_fraction: float = 0.2
    rho: float = 0.1
    imbalance_ratio: float = 2.0
    imbalance_profile: tuple[float, ...] = ()  # empty: geometric by imbalance_ratio
    # networks
    feature_dim: int = 32
    teacher_hidden: tuple[int, ...] = (64,)
    student_hidden: tuple[int, ...] = (32,)
    gen_hidden: tuple[int, ...] = (64, 64)
    disc_hidden: tuple[int, ...] = (64,)
    z_dim: int = 8
    embed_dim: int = 8
    # teacher pretraining
    teacher_epochs: int = 100
    teacher_lr: float = 0.05
    teacher_batch_size: int = 64
    # teacher-guided generation
    gan_epochs: int = 500
    gan_batch_size: int = 32
    lr_g: float = 1e-4
    lr_d: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    lambda_d: float = 0.1
    lambda_g: float = 0.1
    q: float = 0.7
    gamma: float = 0.5
    freq_source: str = "teacher"
    synthetic_per_class: int = 400
    # student distillation
    student_epochs: int = 240
    student_lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    student_batch_size: int = 64
    inflation: int = 0  # 0: floor(|D_s| / |D_c|)
    tvd_bins: int = 16
    run_baseline: bool = True
    # ablations
    disable_blend: bool = False
    disable_trans: bool = False
    disable_reg: bool = False
    invert_blend_gate: bool = False
    # run
    seed: int = 0
    out: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ConfigError("num_classes must be at least 2")
        if not 0 < self.rho <= 1:
            raise ConfigError(f"rho must lie in (0, 1], got {self.rho}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.imbalance_profile and len(self.imbalance_profile) != self.num_classes:
            raise ConfigError("imbalance_profile needs one weight per class")
        if self.freq_source not in ("teacher", "labels"):
            raise ConfigError("freq_source must be 'teacher' or 'labels'")
        if self.inflation < 0:
            raise ConfigError("inflation must be >= 1, or 0 for the default rule")
        try:
            self.gan_config(0)
            self.distill_config(0)
            self.teacher_config(0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- phase configs --

    def gan_config(self, seed: int) -> GanTrainConfig:
        return GanTrainConfig(
            lambda_d=self.lambda_d, lambda_g=self.lambda_g, q=self.q, gamma=self.gamma,
            lr_g=self.lr_g, lr_d=self.lr_d, beta1=self.beta1, beta2=self.beta2,
            epochs=self.gan_epochs, batch_size=self.gan_batch_size, seed=seed,
            z_dim=self.z_dim, embed_dim=self.embed_dim, gen_hidden=self.gen_hidden,
            disc_hidden=self.disc_hidden, freq_source=self.freq_source,
            disable_blend=self.disable_blend, disable_trans=self.disable_trans,
            disable_reg=self.disable_reg, invert_blend_gate=self.invert_blend_gate)

    def distill_config(self, seed: int) -> DistillConfig:
        return DistillConfig(
            epochs=self.student_epochs, lr=self.student_lr, momentum=self.momentum,
            weight_decay=self.weight_decay, batch_size=self.student_batch_size, seed=seed,
            hidden=self.student_hidden, inflation=self.inflation)

    def teacher_config(self, seed: int) -> DistillConfig:
        return DistillConfig(
            epochs=self.teacher_epochs, lr=self.teacher_lr, momentum=self.momentum,
            weight_decay=self.weight_decay, batch_size=self.teacher_batch_size, seed=seed,
            hidden=self.teacher_hidden)

    # -- serialisation --

    def to_text(self) -> str:
        lines = ["# hidfd experiment configuration"]
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {f.name: _jsonable(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
        return cls().override(values)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        return cls.from_text(p.read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    def override(self, values: dict[str, str]) -> "ExperimentConfig":
        """Return a copy with string-valued overrides parsed by field type."""
        types = {f.name: f.type for f in fields(self)}
        parsed = {}
        for key, value in values.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            parsed[key] = _parse(key, types[key], value)
        try:
            return dataclasses.replace(self, **parsed)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(v):
    return list(v) if isinstance(v, tuple) else v


def _parse(key: str, typ: str, value: str):
    value = value.strip()
    try:
        if typ == "bool":
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
        if typ == "str":
            return value
        if typ.startswith("tuple[int"):
            return tuple(int(v) for v in value.split(",") if v.strip())
        if typ.startswith("tuple[float"):
            return tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    raise ConfigError(f"unsupported type {typ} for {key}")


def phase_seed(master_seed: int, phase: str) -> int:
    """Deterministic 63-bit seed for a named phase."""
    digest = hashlib.sha256(f"{int(master_seed)}:{phase}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


PHASES = ("data", "split", "collected", "teacher", "gan", "synthetic", "mix",
          "student", "baseline")


def phase_seeds(master_seed: int) -> dict[str, int]:
    return {p: phase_seed(master_seed, p) for p in PHASES}
