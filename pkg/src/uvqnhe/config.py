"""Flat TOML-style experiment configuration with command-line overrides."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError

KINDS = ("vqe", "vqnhe", "uvqnhe", "shot-sweep", "divergence-demo", "variance-audit", "tfim-exact")
MODES = ("exact", "sampler")
SHOT_KINDS = ("shot-sweep", "divergence-demo", "variance-audit")
MAX_SITES = 16


@dataclass
class ExperimentConfig:
    kind: str
    n_sites: int
    layers: int = 1
    hadamard_start: bool = False
    J: float = 1.0
    h: float = 1.0
    boundary: str = "open"
    mode: str = "exact"
    shots: list[int] | None = None
    epochs: int = 200
    trials: int | None = None
    seed: int = 0
    optimizer: str = "nelder-mead"
    budget: int = 4000
    restarts: int = 1
    init_scale: float = 0.1
    lr: float = 1e-2
    hidden: int | None = None
    network: str = "vqnhe"
    regularize: bool = False
    enforce_coverage: bool = False
    coverage_target: str = "ansatz"
    max_redraws: int = 20
    compare: bool = False
    workers: int = 1
    variance_form: str = "squared"
    theta_file: str | None = None
    out: str | None = None

    @property
    def resolved_trials(self) -> int:
        if self.trials is not None:
            return self.trials
        return 200 if self.kind == "variance-audit" else 20

    @property
    def shot_count(self) -> int | None:
        """First (usually only) shot count."""
        return self.shots[0] if self.shots else None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trials"] = self.resolved_trials
        return d


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_INT = ("n_sites", "layers", "epochs", "trials", "seed", "budget", "restarts", "hidden", "max_redraws", "workers")
_FLOAT = ("J", "h", "init_scale", "lr")
_BOOL = ("hadamard_start", "regularize", "enforce_coverage", "compare")
_CHOICES = {
    "kind": KINDS,
    "mode": MODES,
    "boundary": ("open", "periodic"),
    "optimizer": ("nelder-mead", "cobyla", "param-shift"),
    "network": ("vqnhe", "uvqnhe"),
    "coverage_target": ("ansatz", "numerator"),
    "variance_form": ("squared", "printed"),
}


def _coerce(name, value):
    if name == "shots":
        items = value if isinstance(value, list) else [value]
        if not items:
            raise ConfigError("shots list is empty", name)
        out = []
        for v in items:
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"shots must be positive integers, got {v!r}", name)
            out.append(v)
        return out
    if name in _BOOL:
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false, got {value!r}", name)
        return value
    if name in _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}", name)
        return value
    if name in _FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}", name)
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{name} must be a string, got {value!r}", name)
    if name in _CHOICES and value not in _CHOICES[name]:
        raise ConfigError(f"{name} must be one of {', '.join(_CHOICES[name])}; got {value!r}", name)
    return value


def parse_override(text: str) -> tuple[str, object]:
    """``key=value`` with the value read as a TOML literal (bare words stay strings)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value", "override")
    key, raw = (part.strip() for part in text.split("=", 1))
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def load_table(path) -> dict:
    try:
        with open(path, "rb") as fh:
            table = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found", "config") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}", "config") from None
    for key, value in table.items():
        if isinstance(value, dict):
            raise ConfigError(f"{path}: nested table [{key}] not allowed in a flat config", key)
    return table


def build_config(kind: str, table: dict, overrides=()) -> ExperimentConfig:
    """Merge file values and overrides, coerce types and check per-kind requirements."""
    merged = dict(table)
    for text in overrides:
        key, value = parse_override(text)
        merged[key] = value
    file_kind = merged.pop("kind", kind)
    if file_kind != kind:
        raise ConfigError(f"config is for kind {file_kind!r} but {kind!r} was requested", "kind")
    values = {"kind": _coerce("kind", kind)}
    for key, value in merged.items():
        if key not in _FIELDS or key == "kind":
            raise ConfigError(f"unknown config field {key!r}", key)
        values[key] = _coerce(key, value)
    if "n_sites" not in values:
        raise ConfigError("missing required field n_sites", "n_sites")
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    if not 2 <= cfg.n_sites <= MAX_SITES:
        raise ConfigError(f"n_sites must lie in [2, {MAX_SITES}], got {cfg.n_sites}", "n_sites")
    for name in ("layers", "restarts", "budget", "workers"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be >= 1", name)
    if cfg.epochs < 0:
        raise ConfigError("epochs must be >= 0", "epochs")
    if cfg.max_redraws < 0:
        raise ConfigError("max_redraws must be >= 0", "max_redraws")
    if cfg.trials is not None and cfg.trials < 1:
        raise ConfigError("trials must be >= 1", "trials")
    if cfg.kind == "variance-audit" and cfg.resolved_trials < 2:
        raise ConfigError("variance audit needs trials >= 2", "trials")
    if cfg.hidden is not None and cfg.hidden < 1:
        raise ConfigError("hidden must be >= 1", "hidden")
    if cfg.lr <= 0:
        raise ConfigError("lr must be positive", "lr")
    needs_shots = cfg.kind in SHOT_KINDS or (cfg.mode == "sampler" and cfg.kind != "tfim-exact")
    if needs_shots and not cfg.shots:
        raise ConfigError(f"kind {cfg.kind} in mode {cfg.mode} needs shots > 0", "shots")
    if cfg.kind in ("vqe", "vqnhe", "uvqnhe", "divergence-demo") and cfg.shots and len(cfg.shots) > 1:
        raise ConfigError(f"kind {cfg.kind} takes a single shot count", "shots")
    if cfg.theta_file is not None and not Path(cfg.theta_file).is_file():
        raise ConfigError(f"theta file {cfg.theta_file} not found", "theta_file")
