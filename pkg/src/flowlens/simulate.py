"""Synthetic cohort generator: the desk-scale oracle for the analytics suite.

Per-device, per-hour Poisson arrival counts with uniform jitter inside the
hour. Hourly rate = base rate x diurnal weight (local hour) x per-device
intensity x burst multiplier (local date). Bytes are log-normal. Fully
deterministic for a fixed seed.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone

import numpy as np

from flowlens.catalog import (CHATGPT, CLAUDE, COPILOT, DEEPSEEK, GEMINI,
                              PERPLEXITY, Tool)
from flowlens.ingest import FlowLog, FlowRecord, epoch_ms

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MS_PER_HOUR = 3_600_000

# Representative hostnames per tool; all resolve through the default catalog.
TOOL_HOSTNAMES: dict[Tool, list[str]] = {
    CHATGPT: ["chatgpt.com", "ws.chatgpt.com", "api.openai.com"],
    CLAUDE: ["claude.ai", "api.anthropic.com"],
    COPILOT: ["copilot.microsoft.com", "api.githubcopilot.com"],
    DEEPSEEK: ["chat.deepseek.com", "deepseek.com"],
    GEMINI: ["gemini.google.com", "google.com"],
    PERPLEXITY: ["perplexity.ai", "suggest.perplexity.ai"],
}

DEFAULT_TOOL_WEIGHTS = {
    CHATGPT: 6.0, GEMINI: 3.0, COPILOT: 2.0,
    CLAUDE: 1.0, DEEPSEEK: 0.5, PERPLEXITY: 0.5,
}

# median flow ~ 3 KB
DEFAULT_BYTES_MU = math.log(3000.0)
DEFAULT_BYTES_SIGMA = 1.2


class InvalidConfig(ValueError):
    pass


@dataclass
class BurstWindow:
    start: date  # local dates, inclusive
    end: date
    multiplier: float

    def active(self, d: date) -> bool:
        return self.start <= d <= self.end


@dataclass
class CohortConfig:
    n_devices: int = 20
    start: datetime = datetime(2025, 4, 28, tzinfo=timezone.utc)
    end: datetime = datetime(2025, 5, 19, tzinfo=timezone.utc)
    seed: int = 0
    tz_offset_min: int = -240
    base_rate_per_hour: float = 4.0
    hour_weights: list = field(default_factory=lambda: [1.0] * 24)
    tool_weights: dict = field(default_factory=lambda: dict(DEFAULT_TOOL_WEIGHTS))
    intensity_sigma: float = 0.6
    onboard_stagger_days: int = 0  # uniform 0..N day onboarding delay
    dropout_per_day: float = 0.0
    burst_windows: list = field(default_factory=list)
    bytes_mu: float = DEFAULT_BYTES_MU
    bytes_sigma: float = DEFAULT_BYTES_SIGMA

    def validate(self):
        if self.n_devices < 0:
            raise InvalidConfig("n_devices must be >= 0")
        if self.end <= self.start and self.n_devices > 0:
            raise InvalidConfig("study window is empty")
        if len(self.hour_weights) != 24:
            raise InvalidConfig("hour_weights must have 24 entries")
        if any(w < 0 for w in self.hour_weights) or not any(self.hour_weights):
            raise InvalidConfig("hour_weights must be non-negative with one positive")
        if any(w < 0 for w in self.tool_weights.values()):
            raise InvalidConfig("tool_weights must be non-negative")
        for b in self.burst_windows:
            if b.multiplier < 1:
                raise InvalidConfig("burst multiplier must be >= 1")
        if not 0 <= self.dropout_per_day <= 1:
            raise InvalidConfig("dropout_per_day must be a probability")
        for tool in self.tool_weights:
            if tool not in TOOL_HOSTNAMES:
                raise InvalidConfig(f"no hostnames known for tool {tool!r}")


def device_address(index: int) -> str:
    """Deterministic 10.7.x.y pool address for device #index."""
    n = 0x0A070065 + index  # 10.7.0.101 upward
    return ".".join(str((n >> s) & 0xFF) for s in (24, 16, 8, 0))


def _burst_multiplier(cfg: CohortConfig, local_day: date) -> float:
    m = 1.0
    for b in cfg.burst_windows:
        if b.active(local_day):
            m *= b.multiplier
    return m


def _device_flows(cfg: CohortConfig, index: int) -> list[FlowRecord]:
    rng = np.random.default_rng([cfg.seed, index])
    ip = device_address(index)
    intensity = float(rng.lognormal(0.0, cfg.intensity_sigma)) if cfg.intensity_sigma else 1.0

    onboard_delay = int(rng.integers(0, cfg.onboard_stagger_days + 1))
    start_ms = epoch_ms(cfg.start) + onboard_delay * 24 * MS_PER_HOUR
    end_ms = epoch_ms(cfg.end)
    if cfg.dropout_per_day > 0:
        days_alive = int(rng.geometric(cfg.dropout_per_day))
        end_ms = min(end_ms, start_ms + days_alive * 24 * MS_PER_HOUR)

    tools = sorted(t for t, w in cfg.tool_weights.items() if w > 0)
    weights = np.array([cfg.tool_weights[t] for t in tools], dtype=float)
    # Per-device preference heterogeneity on top of the cohort weights.
    weights = weights * rng.dirichlet(np.ones(len(tools)) * 4.0)
    probs = weights / weights.sum()

    flows: list[FlowRecord] = []
    offset_ms = cfg.tz_offset_min * 60_000
    hour = start_ms // MS_PER_HOUR
    last_hour = (end_ms - 1) // MS_PER_HOUR
    while hour <= last_hour:
        hour_start = hour * MS_PER_HOUR
        local_hour = int(((hour_start + offset_ms) % (24 * MS_PER_HOUR)) // MS_PER_HOUR)
        local_day = date.fromordinal(
            date(1970, 1, 1).toordinal() + (hour_start + offset_ms) // (24 * MS_PER_HOUR))
        rate = (cfg.base_rate_per_hour * cfg.hour_weights[local_hour]
                * intensity * _burst_multiplier(cfg, local_day))
        count = int(rng.poisson(rate)) if rate > 0 else 0
        if count:
            jitter = np.sort(rng.integers(0, MS_PER_HOUR, size=count))
            tool_idx = rng.choice(len(tools), size=count, p=probs)
            sizes = rng.lognormal(cfg.bytes_mu, cfg.bytes_sigma, size=2 * count)
            for k in range(count):
                tool = tools[tool_idx[k]]
                hosts = TOOL_HOSTNAMES[tool]
                host = hosts[int(rng.integers(0, len(hosts)))]
                ts = datetime.fromtimestamp(
                    (hour_start + int(jitter[k])) / 1000, tz=timezone.utc)
                flows.append(FlowRecord(
                    timestamp=ts.replace(microsecond=(ts.microsecond // 1000) * 1000),
                    device_ip=ip,
                    hostname=host,
                    up_bytes=max(1, int(sizes[2 * k])),
                    down_bytes=max(1, int(sizes[2 * k + 1])),
                ))
        hour += 1
    return flows


def generate(cfg: CohortConfig) -> FlowLog:
    cfg.validate()
    records: list[FlowRecord] = []
    for i in range(cfg.n_devices):
        records.extend(_device_flows(cfg, i))
    records.sort(key=lambda r: (r.epoch_ms, r.device_ip))
    return FlowLog(records=records, source_label=f"cohortsim seed={cfg.seed}")


def load_config(path) -> CohortConfig:
    """Load a TOML config file into a CohortConfig."""
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}") from exc
    cfg = CohortConfig()
    simple = {
        "n_devices": int, "seed": int, "tz_offset_min": int,
        "base_rate_per_hour": float, "intensity_sigma": float,
        "onboard_stagger_days": int, "dropout_per_day": float,
        "bytes_mu": float, "bytes_sigma": float,
    }
    for key, cast in simple.items():
        if key in raw:
            setattr(cfg, key, cast(raw[key]))
    for key in ("start", "end"):
        if key in raw:
            value = raw[key]
            if isinstance(value, str):
                value = datetime.fromisoformat(value.replace("Z", "+00:00"))
            elif isinstance(value, date) and not isinstance(value, datetime):
                value = datetime(value.year, value.month, value.day)
            if value.tzinfo is None:
                value = value.replace(tzinfo=timezone.utc)
            setattr(cfg, key, value)
    if "hour_weights" in raw:
        cfg.hour_weights = [float(w) for w in raw["hour_weights"]]
    if "tool_weights" in raw:
        cfg.tool_weights = {str(k): float(v) for k, v in raw["tool_weights"].items()}
    def as_date(v):
        if isinstance(v, datetime):
            return v.date()
        if isinstance(v, date):
            return v
        return date.fromisoformat(v)

    for b in raw.get("burst", []):
        cfg.burst_windows.append(BurstWindow(
            start=as_date(b["start"]), end=as_date(b["end"]),
            multiplier=float(b["multiplier"]),
        ))
    cfg.validate()
    return cfg
