// Typed client for the enrollment HTTP/JSON API. Every displayed value
// comes from these responses; the portal computes nothing itself.

import { z } from "zod";

export const EnrollResponse = z.object({
  pid: z.string(),
  status: z.string(),
});

export const ParticipantStatus = z.object({
  status: z.enum(["active", "withdrawn"]),
  devices: z.array(z.string()),
});

export const DeviceRegistration = z.object({
  device_ip: z.string(),
  peer_config: z.string(),
  qr_payload: z.string(),
});

export const DeviceStatus = z.object({
  device_ip: z.string(),
  created_at: z.string(),
  last_heartbeat: z.string().nullable(),
  connected: z.boolean(),
  cumulative_connected_s: z.number(),
  stale: z.boolean(),
});

export const Reminder = z.object({
  device_ip: z.string(),
  last_heartbeat: z.string().nullable(),
  staleness_s: z.number(),
});

export type ParticipantStatusT = z.infer<typeof ParticipantStatus>;
export type DeviceRegistrationT = z.infer<typeof DeviceRegistration>;
export type DeviceStatusT = z.infer<typeof DeviceStatus>;
export type ReminderT = z.infer<typeof Reminder>;

export class ApiError extends Error {
  constructor(
    public code: string,
    public status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function request<T>(
  schema: z.ZodType<T>,
  url: string,
  init?: RequestInit,
): Promise<T> {
  const res = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await res.json();
  if (!res.ok) {
    throw new ApiError(body.error ?? "HttpError", res.status, body.detail ?? "");
  }
  return schema.parse(body);
}

export class PortalApi {
  constructor(private baseUrl = "") {}

  enroll(consent: boolean) {
    return request(EnrollResponse, `${this.baseUrl}/enroll`, {
      method: "POST",
      body: JSON.stringify({ consent }),
    });
  }

  participant(pid: string) {
    return request(
      ParticipantStatus,
      `${this.baseUrl}/participants/${encodeURIComponent(pid)}`,
    );
  }

  registerDevice(pid: string) {
    return request(
      DeviceRegistration,
      `${this.baseUrl}/participants/${encodeURIComponent(pid)}/devices`,
      { method: "POST", body: "{}" },
    );
  }

  regenerate(pid: string) {
    return request(
      z.object({ pid: z.string() }),
      `${this.baseUrl}/participants/${encodeURIComponent(pid)}/regenerate`,
      { method: "POST" },
    );
  }

  withdraw(pid: string) {
    return request(
      z.object({ status: z.string() }),
      `${this.baseUrl}/participants/${encodeURIComponent(pid)}/withdraw`,
      { method: "POST" },
    );
  }

  deviceStatus(ip: string) {
    return request(DeviceStatus, `${this.baseUrl}/devices/${ip}/status`);
  }

  heartbeat(ip: string, connected: boolean, at?: string) {
    return request(
      z.object({ cumulative_connected_s: z.number() }),
      `${this.baseUrl}/devices/${ip}/heartbeat`,
      { method: "POST", body: JSON.stringify({ connected, at }) },
    );
  }

  reminders() {
    return request(z.array(Reminder), `${this.baseUrl}/admin/reminders`);
  }
}
