// Portal page wiring. The PID lives only in this module's closure: it is
// sent in request paths/bodies but never written to the page URL or storage.

import { ApiError, PortalApi, type DeviceStatusT } from "./api";
import { createPoller } from "./poll";
import { qrSvg } from "./qr";
import { badgeFor } from "./status";

const api = new PortalApi();
let pid: string | null = null;
let busy = false; // double-submit guard for regenerate/withdraw

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function setMessage(text: string, isError = false) {
  const el = $("message");
  el.textContent = text;
  el.className = isError ? "error" : "info";
}

function renderDevice(status: DeviceStatusT): HTMLElement {
  const badge = badgeFor(status);
  const div = document.createElement("div");
  div.className = "device";
  div.innerHTML =
    `<span class="badge ${badge.label}">${badge.label}</span>` +
    `<span class="ip">${status.device_ip}</span>` +
    `<span class="cumulative">connected ${badge.cumulative} total</span>` +
    (badge.warning ? `<span class="warning">${badge.warning}</span>` : "");
  return div;
}

async function refresh() {
  if (pid === null) return;
  try {
    const part = await api.participant(pid);
    const panel = $("devices");
    panel.replaceChildren();
    for (const ip of part.devices) {
      panel.appendChild(renderDevice(await api.deviceStatus(ip)));
    }
    const withdrawn = part.status === "withdrawn";
    ($("add-device") as HTMLButtonElement).disabled =
      withdrawn || part.devices.length >= 2;
    ($("regenerate") as HTMLButtonElement).disabled = withdrawn;
    ($("withdraw") as HTMLButtonElement).disabled = withdrawn;
    if (withdrawn) setMessage("You have withdrawn from the study.");
    if (part.devices.length === 0 && !withdrawn) {
      setMessage("No devices yet. Add one to get your QR config.");
    }
  } catch (err) {
    if (err instanceof ApiError && err.code === "UnknownPid") {
      setMessage("This PID is no longer valid.", true);
      poller.stop();
    } else {
      setMessage(String(err), true);
    }
  }
}

const poller = createPoller(refresh);

async function guarded(action: () => Promise<void>) {
  if (busy) return;
  busy = true;
  try {
    await action();
  } catch (err) {
    setMessage(err instanceof ApiError ? `${err.code}: ${err.message}` : String(err), true);
  } finally {
    busy = false;
  }
}

export function wire() {
  $("enroll-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const consent = ($("consent") as HTMLInputElement).checked;
    guarded(async () => {
      const out = await api.enroll(consent);
      pid = out.pid;
      $("pid-display").textContent = pid;
      $("enrolled").hidden = false;
      $("enroll-form").hidden = true;
      poller.start();
      await refresh();
    });
  });

  $("add-device").addEventListener("click", () =>
    guarded(async () => {
      const reg = await api.registerDevice(pid!);
      $("qr").innerHTML = qrSvg(reg.qr_payload);
      $("config-text").textContent = reg.peer_config;
      await refresh();
    }),
  );

  $("regenerate").addEventListener("click", () =>
    guarded(async () => {
      if (!confirm("Regenerate your PID? The current one stops working.")) return;
      const out = await api.regenerate(pid!);
      pid = out.pid;
      $("pid-display").textContent = pid;
      setMessage("PID regenerated. Save the new one.");
    }),
  );

  $("withdraw").addEventListener("click", () =>
    guarded(async () => {
      if (!confirm("Withdraw from the study? Logging stops for your devices.")) return;
      await api.withdraw(pid!);
      poller.stop();
      await refresh();
    }),
  );
}

if (typeof document !== "undefined" && document.getElementById("enroll-form")) {
  wire();
}
