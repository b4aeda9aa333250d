"""Shared fixtures and independent reference oracles.

The oracles here are deliberately naive (sort, scan, count) and never
share code with the implementation paths they check.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from flowlens.ingest import FlowRecord

T0 = datetime(2025, 5, 13, 12, 0, 0, tzinfo=timezone.utc)


def make_flow(minutes: float = 0.0, device="10.7.0.146", host="chatgpt.com",
              up=100, down=200, base=T0) -> FlowRecord:
    return FlowRecord(
        timestamp=base + timedelta(minutes=minutes),
        device_ip=device,
        hostname=host,
        up_bytes=up,
        down_bytes=down,
    )


def toy_classifier(hostname: str):
    """Tiny fixed mapping used where the real catalog would be noise."""
    table = {
        "chatgpt.com": "chatgpt",
        "ws.chatgpt.com": "chatgpt",
        "claude.ai": "claude",
        "copilot.microsoft.com": "copilot",
        "perplexity.ai": "perplexity",
        "google.com": "gemini",
        "chat.deepseek.com": "deepseek",
    }
    return table.get(hostname)


def brute_force_sessions(flows, classify, gap_minutes):
    """Independent reference partition: per (device, tool), sort all flow
    times, then split wherever the gap is >= the threshold.

    Returns a sorted list of (device, tool, start, end, flow_count,
    up_bytes, down_bytes) tuples.
    """
    streams = {}
    for f in flows:
        tool = classify(f.hostname)
        if tool is None:
            continue
        streams.setdefault((f.device_ip, tool), []).append(f)
    out = []
    for (device, tool), fs in streams.items():
        fs = sorted(fs, key=lambda f: f.timestamp)
        groups = [[fs[0]]]
        for f in fs[1:]:
            if (f.timestamp - groups[-1][-1].timestamp) >= timedelta(minutes=gap_minutes):
                groups.append([f])
            else:
                groups[-1].append(f)
        for g in groups:
            out.append((device, tool, g[0].timestamp, g[-1].timestamp, len(g),
                        sum(f.up_bytes for f in g), sum(f.down_bytes for f in g)))
    out.sort()
    return out


def as_tuples(sessions):
    return sorted((s.device_ip, s.tool, s.start, s.end, s.flow_count,
                   s.up_bytes, s.down_bytes) for s in sessions)


@pytest.fixture
def default_catalog():
    from flowlens.catalog import load_catalog

    return load_catalog()
