import jsQR from "jsqr";
import { afterAll, beforeAll, expect, test } from "vitest";

import { PortalApi } from "../src/api";
import { qrMatrix, qrPixels, qrSvg } from "../src/qr";
import { startServer, type TestServer } from "./server";

let server: TestServer;
let api: PortalApi;

beforeAll(async () => {
  server = await startServer();
  api = new PortalApi(server.baseUrl);
}, 30_000);

afterAll(() => server.stop());

function decode(text: string): Uint8Array {
  const { data, width, height } = qrPixels(qrMatrix(text));
  const out = jsQR(data, width, height);
  expect(out).not.toBeNull();
  return Uint8Array.from(out!.binaryData);
}

test("QR round-trip reproduces the service's config text byte-for-byte", async () => {
  const { pid } = await api.enroll(true);
  const reg = await api.registerDevice(pid);
  expect(reg.qr_payload).toBe(reg.peer_config);

  const decoded = decode(reg.qr_payload);
  const original = new TextEncoder().encode(reg.qr_payload);
  expect(decoded).toEqual(original);
});

test("second device gets a different QR", async () => {
  const { pid } = await api.enroll(true);
  const first = await api.registerDevice(pid);
  const second = await api.registerDevice(pid);
  expect(second.qr_payload).not.toBe(first.qr_payload);
  expect(decode(second.qr_payload)).toEqual(
    new TextEncoder().encode(second.qr_payload),
  );
});

test("SVG rendering has one rect per dark module", () => {
  const text = "[Interface]\nAddress = 10.8.0.2/32\n";
  const m = qrMatrix(text);
  const dark = m.modules.filter(Boolean).length;
  const svg = qrSvg(text);
  expect(svg.split("<rect").length - 2).toBe(dark); // minus background rect
});
