"""Quantitative views over classified flows and sessions.

All time-of-day and per-date computations use a fixed UTC offset per run
(default UTC-4) rather than a DST-aware timezone database: a single
deployment window gets one offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Optional, Sequence

import numpy as np

from flowlens.catalog import ExclusionPolicy, Tool, apply_policy
from flowlens.ingest import FlowLog, FlowRecord, epoch_ms
from flowlens.sessions import Session

DEFAULT_TZ_OFFSET_MIN = -240  # US Eastern daylight time
MS_PER_HOUR = 3_600_000
MS_PER_DAY = 86_400_000


class EmptyLog(ValueError):
    pass


class UnknownDevice(KeyError):
    pass


def render_percent(numerator: int, denominator: int) -> str:
    """Half-up one-decimal percentage string, e.g. 1320000/27200000 -> '4.9%'."""
    if denominator == 0:
        raise ZeroDivisionError("denominator is zero")
    pct = Decimal(numerator) * 100 / Decimal(denominator)
    return f"{pct.quantize(Decimal('0.1'), rounding=ROUND_HALF_UP)}%"


def aggregate_shares(flows: FlowLog,
                     classify: Callable[[str], Optional[Tool]]) -> dict:
    """Whole-log shares: AI flow fraction and fraction of devices with AI traffic."""
    total = len(flows.records)
    if total == 0:
        raise EmptyLog("no flows; shares are undefined")
    ai_flows = 0
    devices: set[str] = set()
    devices_with_ai: set[str] = set()
    for r in flows.records:
        devices.add(r.device_ip)
        if classify(r.hostname) is not None:
            ai_flows += 1
            devices_with_ai.add(r.device_ip)
    return {
        "total_flows": total,
        "ai_flows": ai_flows,
        "ai_share": ai_flows / total,
        "ai_share_rendered": render_percent(ai_flows, total),
        "devices_total": len(devices),
        "devices_with_ai": len(devices_with_ai),
        "device_share": len(devices_with_ai) / len(devices),
        "device_share_rendered": render_percent(len(devices_with_ai), len(devices)),
    }


def render_usage_time(ms: int) -> str:
    """Truncated 'Xd Yh' rendering of a duration."""
    hours = ms // MS_PER_HOUR
    return f"{hours // 24}d {hours % 24}h"


@dataclass
class UsageSummary:
    device_ip: str
    per_tool_flow_counts: dict[Tool, int]
    total_ai_count: int
    total_ai_time_ms: int

    @property
    def breadth(self) -> int:
        return sum(1 for n in self.per_tool_flow_counts.values() if n > 0)

    @property
    def total_ai_time_rendered(self) -> str:
        return render_usage_time(self.total_ai_time_ms)


def usage_table(sessions: Sequence[Session], flows: FlowLog,
                classify: Callable[[str], Optional[Tool]],
                policy: ExclusionPolicy = ExclusionPolicy(),
                top_k: Optional[int] = None) -> list[UsageSummary]:
    """Per-device usage summaries ranked by tool breadth.

    Ties break by policy-adjusted total descending, then device_ip
    ascending. Usage time is the sum of policy-included session durations.
    Tools dropped entirely by the policy never appear in the table.
    """
    counts: dict[str, dict[Tool, int]] = {}
    for r in flows.records:
        tool = classify(r.hostname)
        if tool is None or tool in policy.drop_entirely:
            continue
        counts.setdefault(r.device_ip, {}).setdefault(tool, 0)
        counts[r.device_ip][tool] += 1

    time_ms: dict[str, int] = {}
    for s in sessions:
        if policy.counted(s.tool):
            time_ms[s.device_ip] = time_ms.get(s.device_ip, 0) + s.duration_ms

    summaries = [
        UsageSummary(
            device_ip=ip,
            per_tool_flow_counts=dict(sorted(per_tool.items())),
            total_ai_count=apply_policy(per_tool, policy),
            total_ai_time_ms=time_ms.get(ip, 0),
        )
        for ip, per_tool in counts.items()
    ]
    summaries.sort(key=lambda u: (-u.breadth, -u.total_ai_count, u.device_ip))
    return summaries[:top_k] if top_k is not None else summaries


def check_claimed_totals(rows: Sequence[tuple[str, dict[Tool, int], int]],
                         policy: ExclusionPolicy = ExclusionPolicy()
                         ) -> list[dict]:
    """Validation mode for published usage tables.

    Each row is (device_ip, per-tool counts, claimed policy-adjusted
    total). Returns one report per row with the recomputed total and the
    residual claimed - recomputed; consistent rows have residual 0.
    """
    reports = []
    for device_ip, per_tool, claimed in rows:
        recomputed = apply_policy(per_tool, policy)
        reports.append({
            "device_ip": device_ip,
            "claimed_total": claimed,
            "recomputed_total": recomputed,
            "residual": claimed - recomputed,
            "consistent": claimed == recomputed,
        })
    return reports


# --- hourly heatmap --------------------------------------------------------

@dataclass
class HeatmapFrame:
    device_order: list[str]
    bin_start_ms: int  # first hourly bin edge, epoch ms UTC
    n_bins: int
    values: np.ndarray  # device x bin; NaN outside a device's observed span

    def bin_edge(self, k: int) -> datetime:
        return datetime.fromtimestamp(
            (self.bin_start_ms + k * MS_PER_HOUR) / 1000, tz=timezone.utc)


def heatmap(flows: FlowLog, classify: Callable[[str], Optional[Tool]]
            ) -> HeatmapFrame:
    """Device x hourly-bin matrix of row-wise z-scored AI traffic volume.

    Each device's row is normalized with the population mean/std over the
    bins between its first and last observed AI flow (zeros included for
    quiet hours inside that span); bins outside the span are NaN.
    Constant rows become all-zero.
    """
    per_device: dict[str, dict[int, int]] = {}
    for r in flows.records:
        if classify(r.hostname) is None:
            continue
        h = r.epoch_ms // MS_PER_HOUR
        per_device.setdefault(r.device_ip, {}).setdefault(h, 0)
        per_device[r.device_ip][h] += r.total_bytes
    if not per_device:
        raise EmptyLog("no classified flows to plot")

    lo = min(min(d) for d in per_device.values())
    hi = max(max(d) for d in per_device.values())
    n_bins = hi - lo + 1
    devices = sorted(per_device)
    values = np.full((len(devices), n_bins), np.nan)
    for i, ip in enumerate(devices):
        bins = per_device[ip]
        first, last = min(bins), max(bins)
        row = np.zeros(last - first + 1)
        for h, v in bins.items():
            row[h - first] = v
        mu = row.mean()
        sigma = row.std()  # population std
        z = np.zeros_like(row) if sigma == 0 else (row - mu) / sigma
        values[i, first - lo:last - lo + 1] = z
    return HeatmapFrame(devices, lo * MS_PER_HOUR, n_bins, values)


# --- daily series ----------------------------------------------------------

@dataclass
class DailySeries:
    tz_offset_min: int
    dates: list[date]
    mean_usage_ms: list[float]  # mean over devices active that date
    active_devices: list[int]
    total_usage_ms: list[int] = field(default_factory=list)


def _local_date(ms: int, tz_offset_min: int) -> date:
    local_ms = ms + tz_offset_min * 60_000
    return date.fromordinal(date(1970, 1, 1).toordinal() + local_ms // MS_PER_DAY)


def split_session_by_day(start_ms: int, end_ms: int, tz_offset_min: int
                         ) -> list[tuple[date, int]]:
    """Attribute a session's duration to local dates, cut at midnight.

    Integer-millisecond cuts: attributed pieces always sum exactly to the
    session duration. A zero-duration session yields one (date, 0) entry.
    """
    offset = tz_offset_min * 60_000
    pieces = []
    cur = start_ms
    while True:
        d = _local_date(cur, tz_offset_min)
        # epoch ms (UTC) of the next local midnight after cur; an interval
        # ending exactly at midnight belongs wholly to the earlier day
        next_midnight = ((cur + offset) // MS_PER_DAY + 1) * MS_PER_DAY - offset
        if end_ms <= next_midnight:
            pieces.append((d, end_ms - cur))
            return pieces
        pieces.append((d, next_midnight - cur))
        cur = next_midnight


def daily_series(sessions: Sequence[Session],
                 tz_offset_min: int = DEFAULT_TZ_OFFSET_MIN,
                 policy: ExclusionPolicy = ExclusionPolicy()) -> DailySeries:
    """Per-date mean usage time per active device plus active-device counts.

    A device is active on a date if any of its policy-included sessions
    overlaps that local date; sessions spanning midnight are split at the
    boundary.
    """
    per_date_ms: dict[date, int] = {}
    per_date_devices: dict[date, set[str]] = {}
    for s in sessions:
        if not policy.counted(s.tool):
            continue
        start_ms, end_ms = s.active_interval_ms
        for d, ms in split_session_by_day(start_ms, end_ms, tz_offset_min):
            per_date_ms[d] = per_date_ms.get(d, 0) + ms
            per_date_devices.setdefault(d, set()).add(s.device_ip)
    dates = sorted(per_date_devices)
    return DailySeries(
        tz_offset_min=tz_offset_min,
        dates=dates,
        mean_usage_ms=[per_date_ms[d] / len(per_date_devices[d]) for d in dates],
        active_devices=[len(per_date_devices[d]) for d in dates],
        total_usage_ms=[per_date_ms[d] for d in dates],
    )


# --- hour-of-day histograms -------------------------------------------------

@dataclass
class HourHistogram:
    tz_offset_min: int
    bins: list[int]  # 24 totals of up+down bytes

    @property
    def total_bytes(self) -> int:
        return sum(self.bins)


def _local_hour(ms: int, tz_offset_min: int) -> int:
    return ((ms + tz_offset_min * 60_000) % MS_PER_DAY) // MS_PER_HOUR


def hour_histogram(flows: FlowLog,
                   classify: Callable[[str], Optional[Tool]],
                   tz_offset_min: int = DEFAULT_TZ_OFFSET_MIN) -> HourHistogram:
    """Total AI bytes (up+down) per local hour of day across all devices."""
    if not -14 * 60 <= tz_offset_min <= 14 * 60:
        raise ValueError(f"tz offset out of range: {tz_offset_min} minutes")
    bins = [0] * 24
    for r in flows.records:
        if classify(r.hostname) is not None:
            bins[_local_hour(r.epoch_ms, tz_offset_min)] += r.total_bytes
    return HourHistogram(tz_offset_min, bins)


def device_hourly_trace(flows: FlowLog, device_ip: str, tool: Tool,
                        classify: Callable[[str], Optional[Tool]],
                        tz_offset_min: int = DEFAULT_TZ_OFFSET_MIN) -> list[int]:
    """Per-local-hour byte totals for a single device and a single tool."""
    known = {r.device_ip for r in flows.records}
    if device_ip not in known:
        raise UnknownDevice(device_ip)
    bins = [0] * 24
    for r in flows.records:
        if r.device_ip == device_ip and classify(r.hostname) == tool:
            bins[_local_hour(r.epoch_ms, tz_offset_min)] += r.total_bytes
    return bins
