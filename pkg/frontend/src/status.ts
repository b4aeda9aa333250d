// Presentation of device status. Pure mapping from API responses; no
// staleness or time arithmetic happens here (single source of truth).

import type { DeviceStatusT } from "./api";

export interface Badge {
  label: "connected" | "disconnected";
  stale: boolean;
  cumulative: string;
  warning: string | null;
}

export function badgeFor(status: DeviceStatusT): Badge {
  return {
    label: status.connected ? "connected" : "disconnected",
    stale: status.stale,
    cumulative: formatDuration(status.cumulative_connected_s),
    warning: status.stale
      ? status.last_heartbeat === null
        ? "never checked in"
        : `no check-in since ${status.last_heartbeat}`
      : null,
  };
}

export function formatDuration(seconds: number): string {
  const s = Math.floor(seconds);
  const h = Math.floor(s / 3600);
  const m = Math.floor((s % 3600) / 60);
  if (h > 0) return `${h}h ${m}m`;
  if (m > 0) return `${m}m ${s % 60}s`;
  return `${s}s`;
}
