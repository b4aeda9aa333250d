import base64
import ipaddress
from datetime import datetime, timedelta, timezone

import pytest

from flowlens.enrollment import (MAX_DEVICES, ConsentRequired, DeviceLimitReached,
                                 Registry, StaleHeartbeat, UnknownDevice,
                                 UnknownPid, Withdrawn, new_pid)

T0 = datetime(2025, 5, 1, 12, 0, tzinfo=timezone.utc)


@pytest.fixture
def registry(tmp_path):
    reg = Registry(tmp_path / "study.db", staleness_window_s=3600)
    yield reg
    reg.close()


def test_enroll_requires_consent(registry):
    with pytest.raises(ConsentRequired):
        registry.enroll(consent=False)
    pid = registry.enroll(consent=True)
    assert registry.participant_status(pid)["status"] == "active"


def test_pids_distinct_and_opaque(registry):
    pids = {registry.enroll(consent=True) for _ in range(20)}
    assert len(pids) == 20
    for pid in pids:
        # 128-bit base32 tokens, no structure
        assert len(pid) == 26
        base64.b32decode(pid.upper() + "======")


def test_register_device_config(registry):
    pid = registry.enroll(consent=True)
    out = registry.register_device(pid)
    ip = ipaddress.ip_address(out["device_ip"])
    assert ip in ipaddress.ip_network("10.0.0.0/8")
    config = out["peer_config"]
    assert f"Address = {out['device_ip']}/32" in config
    assert "[Interface]" in config and "[Peer]" in config
    assert "PrivateKey = " in config  # server-generated keypair path
    assert f"PublicKey = {registry.server_public_key}" in config
    assert "Endpoint = " in config and "AllowedIPs = " in config
    assert out["qr_payload"] == config  # QR payload is the exact config text


def test_private_key_never_persisted(registry, tmp_path):
    pid = registry.enroll(consent=True)
    config = registry.register_device(pid)["peer_config"]
    private_key = [ln.split(" = ")[1] for ln in config.splitlines()
                   if ln.startswith("PrivateKey")][0]
    blob = (tmp_path / "study.db").read_bytes()
    assert private_key.encode() not in blob


def test_client_supplied_public_key(registry):
    pid = registry.enroll(consent=True)
    out = registry.register_device(pid, public_key="A" * 43 + "=")
    assert "PrivateKey = " not in out["peer_config"]


def test_device_limit(registry):
    pid = registry.enroll(consent=True)
    registry.register_device(pid)
    registry.register_device(pid)
    with pytest.raises(DeviceLimitReached):
        registry.register_device(pid)


def test_addresses_unique(registry):
    ips = []
    for _ in range(10):
        pid = registry.enroll(consent=True)
        for _ in range(MAX_DEVICES):
            ips.append(registry.register_device(pid)["device_ip"])
    assert len(set(ips)) == len(ips)


def test_released_address_quarantined(tmp_path):
    reg = Registry(tmp_path / "s.db", ip_quarantine_s=10**9)
    pid = reg.enroll(consent=True)
    ip = reg.register_device(pid)["device_ip"]
    reg.withdraw(pid)
    pid2 = reg.enroll(consent=True)
    assert reg.register_device(pid2)["device_ip"] != ip
    reg.close()
    # zero quarantine: the address is reusable immediately
    reg2 = Registry(tmp_path / "s2.db", ip_quarantine_s=0)
    pid = reg2.enroll(consent=True)
    ip = reg2.register_device(pid)["device_ip"]
    reg2.withdraw(pid)
    pid2 = reg2.enroll(consent=True)
    assert reg2.register_device(pid2)["device_ip"] == ip
    reg2.close()


def test_regenerate_pid_invalidates_old(registry):
    old = registry.enroll(consent=True)
    registry.register_device(old)
    new = registry.regenerate_pid(old)
    assert new != old
    with pytest.raises(UnknownPid):
        registry.register_device(old)
    with pytest.raises(UnknownPid):
        registry.regenerate_pid(old)
    # devices stay attached and valid across regeneration
    assert len(registry.participant_status(new)["devices"]) == 1


def test_regenerate_twice(registry):
    p0 = registry.enroll(consent=True)
    p1 = registry.regenerate_pid(p0)
    p2 = registry.regenerate_pid(p1)
    for stale in (p0, p1):
        with pytest.raises(UnknownPid):
            registry.regenerate_pid(stale)
    assert registry.participant_status(p2)["status"] == "active"


def test_withdrawn_participant(registry):
    pid = registry.enroll(consent=True)
    registry.withdraw(pid)
    with pytest.raises(Withdrawn):
        registry.register_device(pid)
    with pytest.raises(Withdrawn):
        registry.regenerate_pid(pid)


def test_heartbeat_accrual(registry):
    pid = registry.enroll(consent=True)
    ip = registry.register_device(pid)["device_ip"]
    assert registry.heartbeat(ip, connected=True, at=T0) == 0
    assert registry.heartbeat(ip, connected=True, at=T0 + timedelta(minutes=10)) \
        == 600
    # disconnected interval does not accrue
    assert registry.heartbeat(ip, connected=False, at=T0 + timedelta(minutes=20)) \
        == 600
    # interval starting disconnected does not accrue either
    assert registry.heartbeat(ip, connected=True, at=T0 + timedelta(minutes=30)) \
        == 600
    assert registry.heartbeat(ip, connected=True, at=T0 + timedelta(minutes=31)) \
        == 660


def test_heartbeat_monotonic(registry):
    pid = registry.enroll(consent=True)
    ip = registry.register_device(pid)["device_ip"]
    registry.heartbeat(ip, connected=True, at=T0)
    with pytest.raises(StaleHeartbeat):
        registry.heartbeat(ip, connected=True, at=T0 - timedelta(seconds=1))
    with pytest.raises(UnknownDevice):
        registry.heartbeat("10.9.9.9", connected=True, at=T0)


def test_cumulative_never_decreases(registry):
    pid = registry.enroll(consent=True)
    ip = registry.register_device(pid)["device_ip"]
    last = 0.0
    import random

    rng = random.Random(0)
    t = T0
    for _ in range(50):
        t += timedelta(seconds=rng.randrange(1, 900))
        cum = registry.heartbeat(ip, connected=rng.random() < 0.7, at=t)
        assert cum >= last
        last = cum


def test_reminder_scan(registry):
    pid = registry.enroll(consent=True)
    ip1 = registry.register_device(pid)["device_ip"]
    ip2 = registry.register_device(pid)["device_ip"]
    registry.heartbeat(ip1, connected=True, at=T0)
    registry.heartbeat(ip2, connected=True, at=T0 - timedelta(minutes=30))
    # both within the 1h window shortly after T0
    assert registry.reminder_scan(now=T0 + timedelta(minutes=5)) == []
    # only ip2 past the window
    out = registry.reminder_scan(now=T0 + timedelta(minutes=50))
    assert [d["device_ip"] for d in out] == [ip2]
    # both stale; stalest first
    out = registry.reminder_scan(now=T0 + timedelta(minutes=70))
    assert [d["device_ip"] for d in out] == [ip2, ip1]
    assert out[0]["staleness_s"] > out[1]["staleness_s"]


def test_reminder_scan_empty_registry(registry):
    assert registry.reminder_scan() == []


def test_store_restart_preserves_registry(tmp_path):
    path = tmp_path / "study.db"
    reg = Registry(path)
    pid = reg.enroll(consent=True)
    ip = reg.register_device(pid)["device_ip"]
    reg.heartbeat(ip, connected=True, at=T0)
    reg.heartbeat(ip, connected=True, at=T0 + timedelta(minutes=5))
    server_key = reg.server_public_key
    reg.close()

    reg2 = Registry(path)
    assert reg2.server_public_key == server_key
    assert reg2.participant_status(pid)["devices"] == [ip]
    status = reg2.device_status(ip)
    assert status.cumulative_connected_s == 300
    with pytest.raises(DeviceLimitReached):
        reg2.register_device(pid)
        reg2.register_device(pid)
    reg2.close()


def test_audit_trail_of_lifecycle_events(registry):
    pid = registry.enroll(consent=True)
    new = registry.regenerate_pid(pid)
    registry.withdraw(new)
    events = [e for _, e, _ in registry.audit_log()]
    assert events == ["enroll", "regenerate", "withdraw"]


def test_schema_has_no_identity_fields(registry):
    # the store's schema itself must not be able to hold personal identity
    cols = set()
    for table in ("participants", "devices"):
        for row in registry._db.execute(f"PRAGMA table_info({table})"):
            cols.add(row[1])
    forbidden = {"name", "email", "phone", "address", "netid", "username"}
    assert not (cols & forbidden)
