"""HTTP/JSON API over the enrollment registry, plus the static portal."""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from flowlens import enrollment
from flowlens.enrollment import Registry

_STATUS_CODES = {
    "ConsentRequired": 400,
    "UnknownPid": 404,
    "UnknownDevice": 404,
    "Withdrawn": 409,
    "DeviceLimitReached": 409,
    "StaleHeartbeat": 409,
}


class EnrollBody(BaseModel):
    consent: bool = False


class DeviceBody(BaseModel):
    public_key: Optional[str] = None


class HeartbeatBody(BaseModel):
    connected: bool
    at: Optional[datetime] = None


def create_app(registry: Registry, portal_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="flowlens enrollment", version="0.1.0")

    @app.exception_handler(enrollment.EnrollmentError)
    async def enrollment_error(request: Request, exc: enrollment.EnrollmentError):
        return JSONResponse(
            status_code=_STATUS_CODES.get(exc.code, 400),
            content={"error": exc.code, "detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/enroll", status_code=201)
    def enroll(body: EnrollBody):
        pid = registry.enroll(consent=body.consent)
        return {"pid": pid, "status": "active"}

    # PID travels in the path of these participant endpoints but is an
    # opaque regenerable token, never an identity.
    @app.get("/participants/{pid}")
    def participant(pid: str):
        return registry.participant_status(pid)

    @app.post("/participants/{pid}/devices", status_code=201)
    def register_device(pid: str, body: DeviceBody = DeviceBody()):
        return registry.register_device(pid, public_key=body.public_key)

    @app.post("/participants/{pid}/regenerate")
    def regenerate(pid: str):
        return {"pid": registry.regenerate_pid(pid)}

    @app.post("/participants/{pid}/withdraw")
    def withdraw(pid: str):
        registry.withdraw(pid)
        return {"status": "withdrawn"}

    @app.post("/devices/{ip}/heartbeat")
    def heartbeat(ip: str, body: HeartbeatBody):
        at = body.at
        if at is not None and at.tzinfo is None:
            at = at.replace(tzinfo=timezone.utc)
        cumulative = registry.heartbeat(ip, connected=body.connected, at=at)
        status = registry.device_status(ip)
        return {
            "cumulative_connected_s": cumulative,
            "last_heartbeat": status.last_heartbeat.isoformat(),
        }

    @app.get("/devices/{ip}/status")
    def device_status(ip: str):
        now = datetime.now(timezone.utc)
        status = registry.device_status(ip, now=now)
        return {
            "device_ip": status.device_ip,
            "created_at": status.created_at.isoformat(),
            "last_heartbeat": status.last_heartbeat.isoformat()
            if status.last_heartbeat else None,
            "connected": status.connected,
            "cumulative_connected_s": status.cumulative_connected_s,
            "stale": registry.is_stale(status, now) > 0,
        }

    @app.get("/admin/reminders")
    def reminders():
        return registry.reminder_scan()

    if portal_dir is not None and Path(portal_dir).is_dir():
        app.mount("/portal", StaticFiles(directory=str(portal_dir), html=True),
                  name="portal")

    return app
