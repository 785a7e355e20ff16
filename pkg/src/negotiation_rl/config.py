"""INI experiment configs: parsing, validation and resolved snapshots.

A config has up to three sections::

    [experiment]
    name = accept_vs_linear
    seed = 7

    [scenario]
    weights_a = 1, 2, 3
    discount = 1.0

    [train]
    opponent = time(c=1)
    epochs = 8000

Unknown sections or keys are errors, reported with their line numbers.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from typing import Optional

from .protocol import ContractViolation, Scenario
from .training.loops import TrainConfig


class ConfigError(ContractViolation):
    """A config file or override could not be applied."""


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


SCENARIO_FIELDS = {
    "weights_a": _floats, "weights_b": _floats, "discount": float,
    "deadline": int, "reserve": float, "growth": _bool,
}
TRAIN_FIELDS = {
    "learning_rate": float, "epochs": int, "head_kind": str, "opponent": str, "K": float,
    "train_accept": _bool, "train_offer": _bool, "offer_learning_rate": _opt_float,
    "early_stop_window": int, "early_stop_threshold": float, "checkpoint_every": int,
    "accept_hidden": int, "offer_hidden": int, "head_hidden": int, "out_gain": float,
    "entropy_form": str, "entropy_coef": float, "beta_offset": float,
}
EXPERIMENT_FIELDS = {
    "name": str, "kind": str, "seed": int, "output_dir": str, "repetitions": int,
    "mode": str, "variant": str, "delta": int,
}
SECTIONS = {"experiment": EXPERIMENT_FIELDS, "scenario": SCENARIO_FIELDS, "train": TRAIN_FIELDS}
KINDS = ("opponent", "selfplay", "tft")


@dataclass
class ExperimentConfig:
    name: str = "custom"
    kind: str = "opponent"
    seed: int = 0
    output_dir: Optional[str] = None
    repetitions: int = 1
    mode: str = "multivariate"
    variant: str = "relative"
    delta: int = 1
    scenario: Scenario = field(default_factory=Scenario)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"experiment kind must be one of {KINDS}, got {self.kind!r}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")

    def resolved_train(self) -> TrainConfig:
        return dataclasses.replace(self.train, scenario=self.scenario, seed=self.seed)


def _line_of(text: str, section: str, key: Optional[str] = None) -> int:
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return n
        elif current == section and key is not None and "=" in line:
            if line.split("=", 1)[0].strip().lower() == key.lower():
                return n
    return 0


def parse_config_text(text: str, base: Optional[ExperimentConfig] = None,
                      source: str = "<config>") -> ExperimentConfig:
    """Overlay an INI document onto ``base`` (defaults if omitted)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    cfg = base or ExperimentConfig()
    values = {s: {} for s in SECTIONS}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}:{_line_of(text, section)}: unknown section [{section}]")
        fields = SECTIONS[section]
        for key, raw in cp.items(section):
            if key not in fields:
                raise ConfigError(f"{source}:{_line_of(text, section, key)}: "
                                  f"unknown key {key!r} in [{section}]")
            try:
                values[section][key] = fields[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{source}:{_line_of(text, section, key)}: "
                                  f"bad value for {key}: {exc}") from exc
    return apply_values(cfg, values, source)


def apply_values(cfg: ExperimentConfig, values: dict, source: str = "<overrides>") -> ExperimentConfig:
    try:
        scenario = dataclasses.replace(cfg.scenario, **values.get("scenario", {}))
        train = dataclasses.replace(cfg.train, **values.get("train", {}))
        return dataclasses.replace(cfg, scenario=scenario, train=train,
                                   **values.get("experiment", {}))
    except (ContractViolation, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def parse_override(text: str) -> tuple:
    """``section.key=value`` → (section, key, parsed value)."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError(f"override must look like section.key=value, got {text!r}")
    lhs, raw = text.split("=", 1)
    section, key = lhs.strip().split(".", 1)
    if section not in SECTIONS or key not in SECTIONS[section]:
        raise ConfigError(f"unknown override field {lhs.strip()!r}")
    try:
        return section, key, SECTIONS[section][key](raw.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {lhs.strip()}: {exc}") from exc


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    values = {s: {} for s in SECTIONS}
    for item in overrides or ():
        s, k, v = parse_override(item)
        values[s][k] = v
    return apply_values(cfg, values)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "none"
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    """Resolved snapshot; parsing it back reproduces ``cfg`` exactly."""
    buf = io.StringIO()
    buf.write("[experiment]\n")
    for k in EXPERIMENT_FIELDS:
        v = getattr(cfg, k)
        if v is not None:
            buf.write(f"{k} = {_fmt(v)}\n")
    buf.write("\n[scenario]\n")
    for k in SCENARIO_FIELDS:
        buf.write(f"{k} = {_fmt(getattr(cfg.scenario, k))}\n")
    buf.write("\n[train]\n")
    for k in TRAIN_FIELDS:
        v = getattr(cfg.train, k)
        if k == "opponent" and v is None:
            continue
        buf.write(f"{k} = {_fmt(v)}\n")
    return buf.getvalue()
