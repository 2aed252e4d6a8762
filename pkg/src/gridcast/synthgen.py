"""Seeded synthetic grid-flow series.

The generator superposes a daily and a weekly sinusoid on a bounded random
walk, then adds spikes, switches the flow off to exact zero for random
stretches, and drops samples. It is a fixture for tests and tuning, not a
model of any real grid.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import List

import numpy as np

from gridcast.errors import ConfigError
from gridcast.rng import SplitMix64
from gridcast.timeseries import Flag, SeriesWindow


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 1
    days: int = 8
    step_s: int = 900
    daily_amp: float = 1.0
    weekly_amp: float = 0.4
    offset: float = 0.2
    noise_scale: float = 0.03
    spike_prob: float = 0.005
    spike_scale: float = 2.0
    outage_prob: float = 0.004
    outage_mean_len: float = 8.0
    missing_prob: float = 0.01
    sign_flip: bool = False

    def __post_init__(self):
        for name in ("spike_prob", "outage_prob", "missing_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {p}")
        for name in ("daily_amp", "weekly_amp", "noise_scale", "spike_scale"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.days < 1:
            raise ConfigError(f"days must be >= 1, got {self.days}")
        if self.step_s <= 0 or 86400 % self.step_s:
            raise ConfigError(f"step_s must divide one day, got {self.step_s}")
        if self.outage_mean_len < 1:
            raise ConfigError("outage_mean_len must be >= 1")

    @property
    def tau_d(self) -> int:
        return 86400 // self.step_s

    @property
    def tau_w(self) -> int:
        return 7 * self.tau_d

    @property
    def n_steps(self) -> int:
        return self.days * self.tau_d

    @classmethod
    def clean(cls, **kw) -> "GeneratorConfig":
        """Config with every artifact switched off (noise kept unless overridden)."""
        base = dict(spike_prob=0.0, outage_prob=0.0, missing_prob=0.0)
        base.update(kw)
        return cls(**base)


GENERATOR_KEYS = tuple(f.name for f in fields(GeneratorConfig))


def reflect(x: np.ndarray, bound: float) -> np.ndarray:
    """Fold a free path into ``[-bound, bound]`` with reflecting walls."""
    if bound <= 0:
        return np.zeros_like(x)
    return np.abs(np.mod(x - bound, 4 * bound) - 2 * bound) - bound


def generate(cfg: GeneratorConfig, line_id: str = "line-0", return_labels: bool = False):
    """Build one series.

    With ``return_labels`` the result is ``(window, labels)`` where labels
    holds boolean masks ``spike``, ``outage`` and ``missing``.
    """
    n, tau_d, tau_w = cfg.n_steps, cfg.tau_d, cfg.tau_w
    rng = SplitMix64(cfg.seed)
    phase_d, phase_w = 2 * np.pi * rng.uniform(2)
    steps = rng.normal(n)
    u_spike, u_sign = rng.uniform(n), rng.uniform(n)
    spike_size = np.abs(rng.normal(n))
    u_outage, u_len = rng.uniform(n), rng.uniform(n)
    u_missing = rng.uniform(n)

    t = np.arange(n)
    y = (
        cfg.offset
        + cfg.daily_amp * np.sin(2 * np.pi * (t % tau_d) / tau_d + phase_d)
        + cfg.weekly_amp * np.sin(2 * np.pi * (t % tau_w) / tau_w + phase_w)
    )
    if cfg.noise_scale > 0:
        bound = 3.0 * cfg.noise_scale * np.sqrt(tau_d)
        y = y + reflect(np.cumsum(cfg.noise_scale * steps), bound)

    spikes = u_spike < cfg.spike_prob
    sign = np.where(u_sign < 0.5, -1.0, 1.0)
    y = y + np.where(spikes, sign * cfg.spike_scale * (1.0 + spike_size), 0.0)
    if cfg.sign_flip:
        y = -y

    outage = np.zeros(n, dtype=bool)
    p = 1.0 / cfg.outage_mean_len
    for s in np.flatnonzero(u_outage < cfg.outage_prob):
        if p >= 1.0:
            length = 1
        else:
            length = 1 + int(np.floor(np.log1p(-u_len[s]) / np.log1p(-p)))
        outage[s:s + length] = True
    y[outage] = 0.0

    flags = np.full(n, Flag.PRESENT, dtype=np.uint8)
    missing = u_missing < cfg.missing_prob
    y[missing] = np.nan
    flags[missing] = Flag.MISSING
    window = SeriesWindow(0, y, flags, line_id)
    if return_labels:
        return window, {"spike": spikes & ~outage & ~missing, "outage": outage, "missing": missing}
    return window


def generate_lines(cfg: GeneratorConfig, n_lines: int) -> List[SeriesWindow]:
    """``n_lines`` independent series; line ``k`` uses a seed derived from ``(seed, k)``."""
    root = SplitMix64(cfg.seed)
    out = []
    for k in range(n_lines):
        sub = replace(cfg, seed=int(root.spawn(k).seed))
        out.append(generate(sub, line_id=f"line-{k:04d}"))
    return out


def feature_counts(window: SeriesWindow) -> dict:
    """Counts of the artifact classes a fixture is expected to contain."""
    v, present = window.values, window.present
    zero = present & (v == 0)
    runs = np.diff(np.concatenate(([0], zero.astype(np.int8), [0])))
    lengths = np.flatnonzero(runs == -1) - np.flatnonzero(runs == 1)
    finite = v[present]
    return {
        "missing": int((window.flags == Flag.MISSING).sum()),
        "zero_runs": int((lengths >= 2).sum()),
        "positive": int((finite > 0).sum()),
        "negative": int((finite < 0).sum()),
    }
