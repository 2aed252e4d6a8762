"""Flat ``key = value`` run configuration.

Keys are dotted by section (``adaptive.r_d``, ``generator.seed`` ...).
Unknown keys are an error. ``#`` starts a comment. Every key and its
default is listed by :func:`default_text`.
"""

from __future__ import annotations

import dataclasses
from typing import Dict, Iterable, Optional

from gridcast.adaptive import SmoothingParams
from gridcast.errors import ConfigError
from gridcast.quality import ValidityStats
from gridcast.synthgen import GeneratorConfig

_HARNESS = {
    "models": "persistence,adaptive",
    "split": 0.5,
    "n_days": 7,
    "lines": 1,
    "with_timing": False,
}
_GRID = {"origin_epoch_s": 0, "step_s": 300}
_QUALITY = {
    f.name: f.default for f in dataclasses.fields(ValidityStats) if f.name != "global_rms"
}


def _section_defaults() -> Dict[str, Dict[str, object]]:
    return {
        "adaptive": {f.name: f.default for f in dataclasses.fields(SmoothingParams)},
        "quality": dict(_QUALITY),
        "generator": {f.name: f.default for f in dataclasses.fields(GeneratorConfig)},
        "harness": dict(_HARNESS),
        "grid": dict(_GRID),
    }


DEFAULTS: Dict[str, object] = {
    f"{section}.{key}": value
    for section, values in _section_defaults().items()
    for key, value in values.items()
}

# Keys whose default is None but which take a number when set.
_OPTIONAL_NUMBER = {"adaptive.tau_w": int, "adaptive.k_s": float}


def _coerce(key: str, text: str):
    default = DEFAULTS[key]
    text = text.strip()
    try:
        if key in _OPTIONAL_NUMBER:
            return None if text.lower() in ("", "none") else _OPTIONAL_NUMBER[key](text)
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


class RunConfig:
    def __init__(self, values: Optional[Dict[str, object]] = None):
        self.values = dict(DEFAULTS)
        self.explicit = set()
        for key, value in (values or {}).items():
            self.set(key, value)

    def set(self, key: str, value) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = _coerce(key, value) if isinstance(value, str) else value
        self.explicit.add(key)

    def update_from_lines(self, lines: Iterable[str], source: str = "<config>") -> None:
        for n, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{n}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            self.set(key, value)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        cfg = cls()
        with open(path, encoding="utf-8") as fh:
            cfg.update_from_lines(fh, str(path))
        return cfg

    def section(self, name: str) -> Dict[str, object]:
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in self.values.items() if k.startswith(prefix)}

    def smoothing(self, step_s: Optional[int] = None) -> SmoothingParams:
        """Engine parameters; ``tau_d`` follows ``step_s`` unless set explicitly."""
        values = self.section("adaptive")
        if step_s and "adaptive.tau_d" not in self.explicit:
            if 86400 % step_s:
                raise ConfigError(f"grid step {step_s}s does not divide one day")
            values["tau_d"] = 86400 // step_s
        return SmoothingParams(**values)

    def generator(self) -> GeneratorConfig:
        return GeneratorConfig(**self.section("generator"))

    def quality_factors(self) -> Dict[str, object]:
        return self.section("quality")


def default_text() -> str:
    lines = ["# gridcast run configuration; every key with its default"]
    for key, value in DEFAULTS.items():
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"
