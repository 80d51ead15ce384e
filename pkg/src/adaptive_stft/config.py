"""Run configuration: ``key=value`` files merged under command-line flags."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .transfer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # training (defaults mirror TrainConfig)
    batch_size: int = 20
    hop: int = 16
    support: int = 128
    max_epoch: int = 200
    seed: int = 3407
    lr_net: float = 0.001
    lr_window: float = 100.0
    lambda0: str = "on"
    lambda1: float = 1.0
    lambda2: float = 0.01
    sample_len: int = 3072
    window: str = "kaiser"
    beta: float = 8.0
    soft_width: float = 2.0
    smoothing: float = 0.1
    weight_decay: float = 0.01
    window_optimizer: str = "sgd"
    hidden: int = 64
    # signal processing and reporting
    sample_rate: float = 12800.0
    alpha: float = 3.0
    framecount: str = "strict"
    pad: str = "zero"
    mode: str = "mdstft"
    theta: float = 0.0
    iters: int = 200
    classes: int = 4
    per_class: int = 100
    figures: bool = True
    # paths
    signal: str = ""
    lengths: str = ""
    data: str = ""
    out: str = "."

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size, hop=self.hop, support=self.support,
            max_epoch=self.max_epoch, seed=self.seed, lr_net=self.lr_net,
            lr_window=self.lr_window,
            lambda0_mode="schedule" if self.lambda0 == "on" else "off",
            lambda1=self.lambda1, lambda2=self.lambda2, sample_len=self.sample_len,
            window=self.window, beta=self.beta, soft_width=self.soft_width,
            smoothing=self.smoothing, weight_decay=self.weight_decay,
            window_optimizer=self.window_optimizer, hidden=self.hidden,
            n_classes=self.classes,
        )

    def validate(self) -> "RunConfig":
        if self.lambda0 not in ("on", "off"):
            raise ConfigError(f"lambda0 must be 'on' or 'off', got {self.lambda0!r}")
        if self.framecount not in ("strict", "conventional"):
            raise ConfigError(f"framecount must be 'strict' or 'conventional', got {self.framecount!r}")
        if self.pad not in ("zero", "none"):
            raise ConfigError(f"pad must be 'zero' or 'none', got {self.pad!r}")
        if self.mode not in ("stft", "dstft", "mdstft"):
            raise ConfigError(f"mode must be stft, dstft or mdstft, got {self.mode!r}")
        if not 1 <= self.classes <= 4:
            raise ConfigError("classes must be between 1 and 4")
        if self.per_class <= 0:
            raise ConfigError("per_class must be positive")
        if self.iters < 0:
            raise ConfigError("iters must be >= 0")
        if self.support < 2 or self.hop < 1:
            raise ConfigError("support must be >= 2 and hop >= 1")
        if self.beta < 0 or self.soft_width < 0:
            raise ConfigError("beta and soft_width must be >= 0")
        if self.alpha <= 0 or self.alpha == 1:
            raise ConfigError("alpha must be positive and != 1")
        try:
            self.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def dump(self, path) -> None:
        lines = ["# resolved run configuration"]
        for key, value in asdict(self).items():
            lines.append(f"{key}={_format(value)}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def coerce(key: str, raw):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _TYPES[key]
    if not isinstance(raw, str):
        return raw
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw.strip()


def read_config_file(path) -> dict:
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key = key.strip().replace("-", "_")
        values[key] = coerce(key, value.strip())
    return values


def resolve(file_values: dict | None = None, flag_values: dict | None = None) -> RunConfig:
    """Defaults, then config-file values, then explicitly given flags."""
    merged = {}
    for source in (file_values or {}, flag_values or {}):
        for key, value in source.items():
            if value is None:
                continue
            merged[key] = coerce(key, value)
    return RunConfig(**merged).validate()
