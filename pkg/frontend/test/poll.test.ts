import { afterEach, beforeEach, expect, test, vi } from "vitest";

import { createPoller } from "../src/poll";

beforeEach(() => vi.useFakeTimers());
afterEach(() => vi.useRealTimers());

test("ticks repeatedly at interval plus jitter", async () => {
  let ticks = 0;
  const poller = createPoller(() => void ticks++, 30_000, 5_000, () => 0.5);
  poller.start();
  expect(ticks).toBe(0);
  await vi.advanceTimersByTimeAsync(32_500);
  expect(ticks).toBe(1);
  await vi.advanceTimersByTimeAsync(32_500);
  expect(ticks).toBe(2);
  poller.stop();
  await vi.advanceTimersByTimeAsync(100_000);
  expect(ticks).toBe(2);
});

test("start is idempotent", async () => {
  let ticks = 0;
  const poller = createPoller(() => void ticks++, 1000, 0);
  poller.start();
  poller.start();
  await vi.advanceTimersByTimeAsync(1000);
  expect(ticks).toBe(1);
  poller.stop();
});

test("a failing tick does not kill the poller", async () => {
  let ticks = 0;
  const poller = createPoller(
    () => {
      ticks++;
      throw new Error("network down");
    },
    1000,
    0,
  );
  poller.start();
  await vi.advanceTimersByTimeAsync(1000);
  await vi.advanceTimersByTimeAsync(1000);
  expect(ticks).toBe(2);
  poller.stop();
});
