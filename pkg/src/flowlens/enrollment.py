"""Study enrollment registry: PID lifecycle, device registration, heartbeats.

The data model has no name/email/identity field at all: participants are
opaque regenerable tokens, devices are pool-assigned 10.0.0.0/8 addresses.
Backed by a single SQLite file with an append-only audit table for PID
lifecycle events. All operations are serialized under one lock.
"""

from __future__ import annotations

import base64
import ipaddress
import os
import sqlite3
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Optional

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

POOL_BASE = int(ipaddress.ip_address("10.8.0.2"))
POOL_NET = ipaddress.ip_network("10.0.0.0/8")
MAX_DEVICES = 2


class EnrollmentError(Exception):
    code = "EnrollmentError"


class ConsentRequired(EnrollmentError):
    code = "ConsentRequired"


class UnknownPid(EnrollmentError):
    code = "UnknownPid"


class Withdrawn(EnrollmentError):
    code = "Withdrawn"


class DeviceLimitReached(EnrollmentError):
    code = "DeviceLimitReached"


class UnknownDevice(EnrollmentError):
    code = "UnknownDevice"


class StaleHeartbeat(EnrollmentError):
    code = "StaleHeartbeat"


def new_pid() -> str:
    """128-bit random token, base32 without padding."""
    return base64.b32encode(os.urandom(16)).decode("ascii").rstrip("=").lower()


def _b64_key(raw: bytes) -> str:
    return base64.b64encode(raw).decode("ascii")


def generate_keypair() -> tuple[str, str]:
    """(private, public) Curve25519 keys, base64 as the wire format expects."""
    priv = X25519PrivateKey.generate()
    priv_raw = priv.private_bytes(
        serialization.Encoding.Raw, serialization.PrivateFormat.Raw,
        serialization.NoEncryption())
    pub_raw = priv.public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw)
    return _b64_key(priv_raw), _b64_key(pub_raw)


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


def _iso(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat()


@dataclass
class DeviceStatus:
    device_ip: str
    created_at: datetime
    last_heartbeat: Optional[datetime]
    connected: bool
    cumulative_connected_s: float


_SCHEMA = """
CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT);
CREATE TABLE IF NOT EXISTS participants (
    id INTEGER PRIMARY KEY,
    pid TEXT UNIQUE NOT NULL,
    consent_at TEXT NOT NULL,
    status TEXT NOT NULL DEFAULT 'active'
);
CREATE TABLE IF NOT EXISTS devices (
    device_ip TEXT PRIMARY KEY,
    participant_id INTEGER NOT NULL REFERENCES participants(id),
    public_key TEXT NOT NULL,
    created_at TEXT NOT NULL,
    last_heartbeat TEXT,
    last_connected INTEGER NOT NULL DEFAULT 0,
    cumulative_ms INTEGER NOT NULL DEFAULT 0,
    active INTEGER NOT NULL DEFAULT 1,
    released_at TEXT
);
CREATE TABLE IF NOT EXISTS audit (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    at TEXT NOT NULL,
    event TEXT NOT NULL,
    detail TEXT NOT NULL
);
"""


class Registry:
    def __init__(self, store_path, endpoint: str = "vpn.example.edu:51820",
                 staleness_window_s: float = 6 * 3600,
                 ip_quarantine_s: float = 7 * 86400):
        self._lock = threading.Lock()
        self._db = sqlite3.connect(str(store_path), check_same_thread=False)
        self._db.executescript(_SCHEMA)
        self.endpoint = endpoint
        self.staleness_window_s = staleness_window_s
        self.ip_quarantine_s = ip_quarantine_s
        with self._lock:
            row = self._db.execute(
                "SELECT value FROM meta WHERE key='server_public_key'").fetchone()
            if row is None:
                # Server private key is never persisted; the data plane
                # (actual tunnel) is outside this service.
                _, pub = generate_keypair()
                self._db.execute(
                    "INSERT INTO meta VALUES ('server_public_key', ?)", (pub,))
                self._db.commit()
                self.server_public_key = pub
            else:
                self.server_public_key = row[0]

    def close(self):
        self._db.close()

    def _audit(self, event: str, detail: str, now: datetime):
        self._db.execute("INSERT INTO audit (at, event, detail) VALUES (?,?,?)",
                         (_iso(now), event, detail))

    # -- participant lifecycle ------------------------------------------

    def enroll(self, consent: bool, now: Optional[datetime] = None) -> str:
        if not consent:
            raise ConsentRequired("electronic consent is required to enroll")
        now = now or _utcnow()
        with self._lock:
            pid = new_pid()
            self._db.execute(
                "INSERT INTO participants (pid, consent_at) VALUES (?, ?)",
                (pid, _iso(now)))
            self._audit("enroll", pid, now)
            self._db.commit()
            return pid

    def _participant(self, pid: str, require_active: bool = True):
        row = self._db.execute(
            "SELECT id, status FROM participants WHERE pid=?", (pid,)).fetchone()
        if row is None:
            raise UnknownPid(pid)
        if require_active and row[1] != "active":
            raise Withdrawn(pid)
        return row

    def participant_status(self, pid: str) -> dict:
        with self._lock:
            part_id, status = self._participant(pid, require_active=False)
            ips = [r[0] for r in self._db.execute(
                "SELECT device_ip FROM devices WHERE participant_id=? AND active=1 "
                "ORDER BY created_at", (part_id,))]
            return {"status": status, "devices": ips}

    def regenerate_pid(self, old_pid: str, now: Optional[datetime] = None) -> str:
        now = now or _utcnow()
        with self._lock:
            part_id, _ = self._participant(old_pid)
            pid = new_pid()
            self._db.execute("UPDATE participants SET pid=? WHERE id=?",
                             (pid, part_id))
            # Device configs stay attached and valid across regeneration.
            self._audit("regenerate", f"{old_pid} -> {pid}", now)
            self._db.commit()
            return pid

    def withdraw(self, pid: str, now: Optional[datetime] = None):
        now = now or _utcnow()
        with self._lock:
            part_id, _ = self._participant(pid, require_active=False)
            self._db.execute(
                "UPDATE participants SET status='withdrawn' WHERE id=?", (part_id,))
            self._db.execute(
                "UPDATE devices SET active=0, released_at=? WHERE participant_id=?",
                (_iso(now), part_id))
            self._audit("withdraw", pid, now)
            self._db.commit()

    # -- device registration ---------------------------------------------

    def _allocate_ip(self, now: datetime) -> str:
        taken = set()
        for ip, active, released in self._db.execute(
                "SELECT device_ip, active, released_at FROM devices"):
            if active:
                taken.add(ip)
            elif released is not None:
                age = (now - datetime.fromisoformat(released)).total_seconds()
                if age < self.ip_quarantine_s:
                    taken.add(ip)
        n = POOL_BASE
        while True:
            candidate = str(ipaddress.ip_address(n))
            if candidate not in taken:
                assert ipaddress.ip_address(candidate) in POOL_NET
                return candidate
            n += 1

    def peer_config(self, device_ip: str, private_key: Optional[str]) -> str:
        key_line = (f"PrivateKey = {private_key}" if private_key
                    else "# PrivateKey held by the client (public key supplied)")
        return (
            "[Interface]\n"
            f"Address = {device_ip}/32\n"
            f"{key_line}\n"
            "\n"
            "[Peer]\n"
            f"PublicKey = {self.server_public_key}\n"
            f"Endpoint = {self.endpoint}\n"
            "AllowedIPs = 0.0.0.0/0\n"
        )

    def register_device(self, pid: str, public_key: Optional[str] = None,
                        now: Optional[datetime] = None) -> dict:
        """Allocate an address and emit config text; QR payload == config text."""
        now = now or _utcnow()
        with self._lock:
            part_id, _ = self._participant(pid)
            n_devices = self._db.execute(
                "SELECT COUNT(*) FROM devices WHERE participant_id=? AND active=1",
                (part_id,)).fetchone()[0]
            if n_devices >= MAX_DEVICES:
                raise DeviceLimitReached(f"participant already has {n_devices} devices")
            private_key = None
            if public_key is None:
                private_key, public_key = generate_keypair()
            device_ip = self._allocate_ip(now)
            # a quarantine-expired released row may still hold this address
            self._db.execute(
                "DELETE FROM devices WHERE device_ip=? AND active=0", (device_ip,))
            self._db.execute(
                "INSERT INTO devices (device_ip, participant_id, public_key, created_at) "
                "VALUES (?,?,?,?)", (device_ip, part_id, public_key, _iso(now)))
            self._audit("register_device", f"{pid} {device_ip}", now)
            self._db.commit()
            config = self.peer_config(device_ip, private_key)
            return {"device_ip": device_ip, "peer_config": config,
                    "qr_payload": config}

    # -- heartbeats and reminders -----------------------------------------

    def _device_row(self, device_ip: str):
        row = self._db.execute(
            "SELECT device_ip, created_at, last_heartbeat, last_connected, "
            "cumulative_ms FROM devices WHERE device_ip=? AND active=1",
            (device_ip,)).fetchone()
        if row is None:
            raise UnknownDevice(device_ip)
        return row

    def heartbeat(self, device_ip: str, connected: bool,
                  at: Optional[datetime] = None) -> float:
        """Record a heartbeat; returns updated cumulative connected seconds.

        Connected time accrues over an interval only when both its
        endpoints report connected. Out-of-order timestamps are rejected.
        """
        at = at or _utcnow()
        with self._lock:
            _, _, last_hb, last_connected, cumulative_ms = self._device_row(device_ip)
            if last_hb is not None:
                prev = datetime.fromisoformat(last_hb)
                if at < prev:
                    raise StaleHeartbeat(f"{device_ip}: {at} precedes {prev}")
                if last_connected and connected:
                    cumulative_ms += int((at - prev).total_seconds() * 1000)
            self._db.execute(
                "UPDATE devices SET last_heartbeat=?, last_connected=?, cumulative_ms=? "
                "WHERE device_ip=?",
                (_iso(at), int(connected), cumulative_ms, device_ip))
            self._db.commit()
            return cumulative_ms / 1000

    def device_status(self, device_ip: str,
                      now: Optional[datetime] = None) -> DeviceStatus:
        now = now or _utcnow()
        with self._lock:
            ip, created, last_hb, last_connected, cumulative_ms = self._device_row(device_ip)
            hb = datetime.fromisoformat(last_hb) if last_hb else None
            return DeviceStatus(
                device_ip=ip,
                created_at=datetime.fromisoformat(created),
                last_heartbeat=hb,
                connected=bool(last_connected),
                cumulative_connected_s=cumulative_ms / 1000,
            )

    def is_stale(self, status: DeviceStatus, now: datetime) -> float:
        """Staleness in seconds past the window; <= 0 means fresh."""
        anchor = status.last_heartbeat or status.created_at
        return (now - anchor).total_seconds() - self.staleness_window_s

    def reminder_scan(self, now: Optional[datetime] = None) -> list[dict]:
        """Active devices with no heartbeat within the staleness window,
        ordered stalest first. Pure query: notification transport is out
        of scope."""
        now = now or _utcnow()
        out = []
        with self._lock:
            rows = self._db.execute(
                "SELECT device_ip FROM devices WHERE active=1").fetchall()
        for (ip,) in rows:
            status = self.device_status(ip, now=now)
            over = self.is_stale(status, now)
            if over > 0:
                out.append({
                    "device_ip": ip,
                    "last_heartbeat": _iso(status.last_heartbeat)
                    if status.last_heartbeat else None,
                    "staleness_s": over + self.staleness_window_s,
                })
        out.sort(key=lambda d: (-d["staleness_s"], d["device_ip"]))
        return out

    def audit_log(self) -> list[tuple[str, str, str]]:
        with self._lock:
            return [tuple(r) for r in self._db.execute(
                "SELECT at, event, detail FROM audit ORDER BY seq")]
