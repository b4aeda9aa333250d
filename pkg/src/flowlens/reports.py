"""CSV/SVG report emission. CSV is the contract; SVG is presentation only.

All files are written atomically (temp + rename) and deterministically:
identical inputs and config yield byte-identical CSVs, and SVGs carry no
embedded timestamps.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from datetime import date
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from flowlens.analytics import (DailySeries, HeatmapFrame, HourHistogram,
                                UsageSummary)
from flowlens.catalog import Tool
from flowlens.ingest import format_timestamp
from flowlens.sessions import Session, serialize_sessions

_SVG_META = {"Date": None, "Creator": None}


def write_atomic(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_text(path: Path, text: str):
    write_atomic(path, text.encode("utf-8"))


def _save_svg(fig, path: Path):
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".svg")
    os.close(fd)
    fig.savefig(tmp, format="svg", metadata=_SVG_META)
    plt.close(fig)
    os.replace(tmp, path)


def write_shares(shares: dict, path: Path):
    write_text(path, json.dumps(shares, indent=2, sort_keys=True) + "\n")


def write_usage_table(summaries: Sequence[UsageSummary], path: Path):
    tools = sorted({t for u in summaries for t in u.per_tool_flow_counts})
    header = ["device_ip"] + tools + ["breadth", "total_ai_count", "total_ai_time"]
    lines = [",".join(header)]
    for u in summaries:
        row = [u.device_ip]
        row += [str(u.per_tool_flow_counts.get(t, 0)) for t in tools]
        row += [str(u.breadth), str(u.total_ai_count), u.total_ai_time_rendered]
        lines.append(",".join(row))
    write_text(path, "\n".join(lines) + "\n")


def write_sessions(sessions: Sequence[Session], path: Path):
    write_text(path, serialize_sessions(sessions))


def write_heatmap(frame: HeatmapFrame, csv_path: Path, svg_path: Path):
    header = ["device_ip"] + [
        format_timestamp(frame.bin_edge(k)) for k in range(frame.n_bins)]
    lines = [",".join(header)]
    for i, ip in enumerate(frame.device_order):
        cells = ["" if np.isnan(v) else f"{v:.9f}" for v in frame.values[i]]
        lines.append(",".join([ip] + cells))
    write_text(csv_path, "\n".join(lines) + "\n")

    fig, ax = plt.subplots(figsize=(10, max(2, 0.25 * len(frame.device_order))))
    ax.imshow(np.nan_to_num(frame.values), aspect="auto", cmap="magma",
              interpolation="nearest")
    ax.set_xlabel("hourly bin")
    ax.set_ylabel("device")
    ax.set_yticks(range(len(frame.device_order)))
    ax.set_yticklabels(frame.device_order, fontsize=5)
    ax.set_title("AI traffic volume, row-wise z-scores")
    _save_svg(fig, svg_path)


def write_daily(series: DailySeries, csv_path: Path, svg_path: Path):
    lines = ["date,mean_usage_s,active_devices"]
    for d, ms, n in zip(series.dates, series.mean_usage_ms, series.active_devices):
        lines.append(f"{d.isoformat()},{ms / 1000:.3f},{n}")
    write_text(csv_path, "\n".join(lines) + "\n")

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    xs = [d.toordinal() for d in series.dates]
    ax1.plot(xs, [ms / 3.6e6 for ms in series.mean_usage_ms], marker="o")
    ax1.set_ylabel("mean usage (h) per active device")
    ax2.plot(xs, series.active_devices, marker="o", color="tab:orange")
    ax2.set_ylabel("active devices")
    ax2.set_xticks(xs[:: max(1, len(xs) // 10)])
    ax2.set_xticklabels([date.fromordinal(x).isoformat()
                         for x in xs[:: max(1, len(xs) // 10)]], rotation=45)
    fig.tight_layout()
    _save_svg(fig, svg_path)


def write_hours(hist: HourHistogram, csv_path: Path, svg_path: Path):
    lines = ["local_hour,total_bytes"]
    for h, b in enumerate(hist.bins):
        lines.append(f"{h},{b}")
    write_text(csv_path, "\n".join(lines) + "\n")

    fig, ax = plt.subplots(figsize=(9, 4))
    ax.bar(range(24), [b / 1e6 for b in hist.bins])
    ax.set_xlabel(f"local hour (UTC{hist.tz_offset_min / 60:+.0f})")
    ax.set_ylabel("AI traffic (MB)")
    ax.set_xticks(range(0, 24, 2))
    fig.tight_layout()
    _save_svg(fig, svg_path)


def write_duration_histogram(hist: dict[Tool, list[int]], csv_path: Path):
    lines = ["tool,bin_index,count"]
    for tool in sorted(hist):
        for k, n in enumerate(hist[tool]):
            lines.append(f"{tool},{k},{n}")
    write_text(csv_path, "\n".join(lines) + "\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(config: dict, inputs: Sequence[Path], path: Path):
    manifest = {
        "config": config,
        "inputs": [{"path": str(p), "sha256": file_digest(p)} for p in inputs],
    }
    write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
