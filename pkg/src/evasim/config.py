"""Scenario configuration files.

A config is a YAML document with the sections ``engagement``, ``noise``,
``pursuer``, ``policy``, ``mc`` and ``sweep``.  Every key is optional and
defaults to the shipped scenario.  Errors name the offending key and, where
the file is the source, its line number.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .dynamics import G0
from .harness import TrialConfig
from .policies import POLICY_NAMES
from .terminal_time import parse_pmf

__all__ = [
    "ConfigError",
    "McOptions",
    "Scenario",
    "SweepOptions",
    "config_hash",
    "default_config_path",
    "load_config",
    "parse_config",
]


class ConfigError(ValueError):
    """Invalid or unreadable scenario config."""


@dataclass(frozen=True)
class McOptions:
    trials: int = 10_000
    seed: int = 20240501
    policies: tuple[str, ...] = ("tse", "rts", "singer", "weaving")
    chunk: int = 1000


@dataclass(frozen=True)
class SweepOptions:
    step: int = 0
    grid_points: int = 201
    seed: int = 0
    policy: str = "tse"


@dataclass(frozen=True)
class Scenario:
    trial: TrialConfig
    mc: McOptions
    sweep: SweepOptions
    policy: str = "tse"

    def to_dict(self) -> dict:
        return {
            "trial": self.trial.to_dict(),
            "mc": {**self.mc.__dict__, "policies": list(self.mc.policies)},
            "sweep": dict(self.sweep.__dict__),
            "policy": self.policy,
        }


# section -> key -> (TrialConfig/option field, converter)
_ACCEL_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*g\s*$")


def _accel(v):
    if isinstance(v, str):
        m = _ACCEL_RE.match(v)
        if not m:
            raise ValueError(f"expected m/s^2 or '<x>g', got {v!r}")
        return float(m.group(1)) * G0
    return float(v)


def _bool(v):
    if not isinstance(v, bool):
        raise ValueError(f"expected true/false, got {v!r}")
    return v


def _opt_float(v):
    return None if v is None else float(v)


def _opt_accel(v):
    return None if v is None else _accel(v)


def _floats(v):
    return tuple(float(x) for x in v)


def _opt_floats(v):
    return None if v is None else _floats(v)


def _int(v):
    if isinstance(v, bool) or int(v) != v:
        raise ValueError(f"expected an integer, got {v!r}")
    return int(v)


def _policy(v):
    if v not in POLICY_NAMES:
        raise ValueError(f"unknown policy {v!r}; choose from {', '.join(POLICY_NAMES)}")
    return v


def _policies(v):
    if isinstance(v, str):
        v = [p.strip() for p in v.split(",")]
    return tuple(_policy(p) for p in v)


def _law(v):
    if str(v).upper() != "PN":
        raise ValueError(f"the Monte Carlo pursuer flies PN only, got {v!r}")
    return "PN"


_TRIAL_KEYS = {
    "engagement": {
        "dt": ("dt", float),
        "closing_speed": ("Vc", float),
        "terminal_pmf": ("pf", parse_pmf),
        "evader_accel_max": ("u_T_max", _accel),
        "pursuer_accel_max": ("u_M_max", _accel),
    },
    "noise": {
        "sigma_lambda": ("sigma_lambda", float),
        "P0_diag": ("P0_diag", _floats),
        "beta": ("beta", float),
        "process_noise": ("process_noise", _bool),
    },
    "pursuer": {
        "law": (None, _law),
        "nav_gain": ("nav_gain", float),
        "tgo_rule": ("pursuer_tgo", str),
    },
    "policy": {
        "name": (None, _policy),
        "future_input": ("future_input", str),
        "tse_modes": ("tse_modes", _opt_floats),
        "tse_belief": ("tse_belief", _opt_floats),
        "rts_rate": ("rts_rate", float),
        "singer_tau": ("singer_tau", float),
        "singer_sigma": ("singer_sigma", _opt_accel),
        "weave_amplitude": ("weave_amplitude", _opt_accel),
        "weave_omega": ("weave_omega", float),
        "weave_phase": ("weave_phase", float),
    },
    "mc": {
        "trials": ("trials", _int),
        "seed": ("seed", _int),
        "policies": ("policies", _policies),
        "chunk": ("chunk", _int),
        "sskp_radius": ("sskp_radius", float),
    },
    "sweep": {
        "step": ("step", _int),
        "grid_points": ("grid_points", _int),
        "seed": ("seed", _int),
        "policy": ("policy", _policy),
    },
}


def _to_python(node: yaml.Node, lines: dict, path: tuple = ()):
    """Convert a composed YAML node, recording the line of every key path."""
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k_node, v_node in node.value:
            key = k_node.value
            if key in out:
                raise ConfigError(f"line {k_node.start_mark.line + 1}: duplicate key {key!r}")
            out[key] = _to_python(v_node, lines, path + (key,))
            lines[path + (key,)] = k_node.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(v, lines, path + (i,)) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def parse_config(text: str, source: str = "<config>") -> Scenario:
    """Parse config text into a :class:`Scenario`."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{source}: {where}: {problem}") from None
    lines: dict = {}
    data = {} if node is None else _to_python(node, lines)
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: line 1: top level must be a mapping of sections")

    trial_kw: dict[str, Any] = {}
    mc_kw: dict[str, Any] = {}
    sweep_kw: dict[str, Any] = {}
    policy = "tse"
    for section, body in data.items():
        where = f"{source}: line {lines.get((section,), '?')}"
        if section not in _TRIAL_KEYS:
            raise ConfigError(f"{where}: unknown section {section!r}")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"{where}: section {section!r} must be a mapping")
        for key, value in body.items():
            where = f"{source}: line {lines.get((section, key), '?')}"
            spec = _TRIAL_KEYS[section].get(key)
            if spec is None:
                raise ConfigError(f"{where}: unknown key {section}.{key}")
            field_name, conv = spec
            try:
                converted = conv(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}: {section}.{key}: {exc}") from None
            if section == "policy" and key == "name":
                policy = converted
            elif field_name is None:
                continue
            elif section == "mc" and key != "sskp_radius":
                mc_kw[field_name] = converted
            elif section == "sweep":
                sweep_kw[field_name] = converted
            else:
                trial_kw[field_name] = converted
    try:
        trial = TrialConfig(**trial_kw)
        mc = McOptions(**mc_kw)
        sweep = SweepOptions(**sweep_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if mc.trials < 1 or mc.chunk < 1:
        raise ConfigError(f"{source}: mc.trials and mc.chunk must be at least 1")
    if sweep.grid_points < 2:
        raise ConfigError(f"{source}: sweep.grid_points must be at least 2")
    return Scenario(trial, mc, sweep, policy)


def load_config(path: str | Path | None = None) -> Scenario:
    """Load a scenario file; ``None`` loads the shipped default scenario."""
    if path is None:
        return parse_config(resources.files(__package__).joinpath("data/default.yaml").read_text(),
                            "default.yaml")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(p)!r}: {exc.strerror}") from None
    return parse_config(text, str(p))


def default_config_path() -> Path:
    return Path(str(resources.files(__package__).joinpath("data/default.yaml")))


def config_hash(scenario: Scenario) -> str:
    """SHA-256 of the resolved scenario in canonical JSON."""
    blob = json.dumps(scenario.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def with_overrides(scenario: Scenario, **mc_overrides) -> Scenario:
    """Copy with selected Monte Carlo options replaced (``None`` keeps a value)."""
    kw = {k: v for k, v in mc_overrides.items() if v is not None}
    return replace(scenario, mc=replace(scenario.mc, **kw))
