"""Canonical metadata-only flow records and flow-log parsing.

A flow record carries exactly five fields: timestamp, device address,
hostname, and up/down byte volumes. There is deliberately no field for
packet payloads or content anywhere in the data model.
"""

from __future__ import annotations

import ipaddress
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import BinaryIO, Iterable, Optional

CSV_HEADER = "timestamp,device_ip,hostname,up_bytes,down_bytes"
_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def epoch_ms(dt: datetime) -> int:
    """Exact integer epoch milliseconds (avoids float truncation)."""
    delta = dt - _EPOCH
    return delta.days * 86_400_000 + delta.seconds * 1000 + delta.microseconds // 1000

STUDY_SUBNET = ipaddress.ip_network("10.0.0.0/8")

# Violation codes returned by validate_record.
OUTSIDE_SUBNET = "OutsidePrivateStudySubnet"
BAD_HOSTNAME = "MalformedHostname"
NEGATIVE_VOLUME = "NegativeVolume"


class MalformedHeader(ValueError):
    """CSV input whose header line does not match the canonical schema."""


class LineError(ValueError):
    """A single rejected input line; fatal only in strict mode."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True)
class FlowRecord:
    timestamp: datetime  # UTC, millisecond precision
    device_ip: str
    hostname: str
    up_bytes: int
    down_bytes: int

    @property
    def total_bytes(self) -> int:
        return self.up_bytes + self.down_bytes

    @property
    def epoch_ms(self) -> int:
        return epoch_ms(self.timestamp)


@dataclass
class FlowLog:
    records: list[FlowRecord] = field(default_factory=list)
    source_label: str = ""
    diagnostics: list[LineError] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def devices(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.device_ip, None)
        return list(seen)


def canonical_hostname(hostname: str) -> str:
    return hostname.strip().lower().rstrip(".")


def validate_record(r: FlowRecord) -> list[str]:
    """Return the list of violated invariants (empty list means Ok)."""
    violations = []
    try:
        addr = ipaddress.ip_address(r.device_ip)
        if not isinstance(addr, ipaddress.IPv4Address) or addr not in STUDY_SUBNET:
            violations.append(OUTSIDE_SUBNET)
    except ValueError:
        violations.append(OUTSIDE_SUBNET)
    host = r.hostname
    if not host or any(ch.isspace() for ch in host) or host != host.lower():
        violations.append(BAD_HOSTNAME)
    if r.up_bytes < 0 or r.down_bytes < 0:
        violations.append(NEGATIVE_VOLUME)
    return violations


_FRACTION = re.compile(r"\.(\d+)")


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp, normalizing to UTC at ms precision."""
    t = text.strip()
    if t.endswith(("Z", "z")):
        t = t[:-1] + "+00:00"
    # fromisoformat (3.10) only accepts 3- or 6-digit fractions
    t = _FRACTION.sub(lambda m: "." + m.group(1)[:6].ljust(6, "0"), t, count=1)
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp lacks timezone: {text!r}")
    dt = dt.astimezone(timezone.utc)
    return dt.replace(microsecond=(dt.microsecond // 1000) * 1000)


def format_timestamp(dt: datetime) -> str:
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def _build_record(timestamp: str, device_ip: str, hostname: str,
                  up_bytes, down_bytes) -> FlowRecord:
    rec = FlowRecord(
        timestamp=parse_timestamp(timestamp),
        device_ip=device_ip.strip(),
        hostname=canonical_hostname(hostname),
        up_bytes=int(up_bytes),
        down_bytes=int(down_bytes),
    )
    violations = validate_record(rec)
    if violations:
        raise ValueError("; ".join(violations))
    return rec


def _parse_csv_line(line: str) -> FlowRecord:
    parts = line.split(",")
    if len(parts) != 5:
        raise ValueError(f"expected 5 fields, got {len(parts)}")
    return _build_record(*parts)


JSONL_KEYS = ("timestamp", "device_ip", "hostname", "up_bytes", "down_bytes")


def _parse_jsonl_line(line: str) -> FlowRecord:
    obj = json.loads(line)
    missing = [k for k in JSONL_KEYS if k not in obj]
    if missing:
        raise ValueError(f"missing keys: {', '.join(missing)}")
    return _build_record(*(obj[k] for k in JSONL_KEYS))


def parse_flow_log(stream: BinaryIO | Iterable[bytes], format: str = "csv",
                   source_label: str = "", strict: bool = False) -> FlowLog:
    """Parse a .flows.csv or .flows.jsonl byte stream into a sorted FlowLog.

    Bad lines are collected as diagnostics; in strict mode the first bad
    line raises LineError. Output records are sorted by timestamp with
    ties preserving input order.
    """
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unknown format: {format}")
    parse_line = _parse_csv_line if format == "csv" else _parse_jsonl_line

    log = FlowLog(source_label=source_label)
    first_line = True
    for line_no, raw in enumerate(stream, start=1):
        line = raw.decode("utf-8").strip()
        if format == "csv" and first_line:
            first_line = False
            if line and line != CSV_HEADER:
                raise MalformedHeader(
                    f"expected header {CSV_HEADER!r}, got {line!r}")
            continue
        if not line:
            continue
        try:
            log.records.append(parse_line(line))
        except (ValueError, json.JSONDecodeError) as exc:
            err = LineError(line_no, str(exc))
            if strict:
                raise err from exc
            log.diagnostics.append(err)
    log.records.sort(key=lambda r: r.timestamp)  # stable: ties keep input order
    return log


def serialize_flow_log(log: FlowLog, format: str = "csv") -> bytes:
    """Render a FlowLog back to its canonical on-disk form."""
    lines: list[str] = []
    if format == "csv":
        lines.append(CSV_HEADER)
        for r in log.records:
            lines.append(",".join([
                format_timestamp(r.timestamp), r.device_ip, r.hostname,
                str(r.up_bytes), str(r.down_bytes),
            ]))
    elif format == "jsonl":
        for r in log.records:
            lines.append(json.dumps({
                "timestamp": format_timestamp(r.timestamp),
                "device_ip": r.device_ip,
                "hostname": r.hostname,
                "up_bytes": r.up_bytes,
                "down_bytes": r.down_bytes,
            }))
    else:
        raise ValueError(f"unknown format: {format}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_flow_file(path, strict: bool = False) -> FlowLog:
    """Load a flow log from disk, inferring format from the extension."""
    from pathlib import Path

    p = Path(path)
    fmt = "jsonl" if p.name.endswith(".jsonl") else "csv"
    with open(p, "rb") as fh:
        return parse_flow_log(fh, format=fmt, source_label=p.name, strict=strict)
