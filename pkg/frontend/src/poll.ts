// Status polling with jitter so a cohort of open portals does not
// heartbeat-check in lockstep.

export interface Poller {
  start(): void;
  stop(): void;
}

export function createPoller(
  tick: () => void | Promise<void>,
  intervalMs = 30_000,
  jitterMs = 5_000,
  rand: () => number = Math.random,
): Poller {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let running = false;

  const schedule = () => {
    const delay = intervalMs + rand() * jitterMs;
    timer = setTimeout(async () => {
      if (!running) return;
      try {
        await tick();
      } catch {
        // a failed poll is retried on the next tick
      } finally {
        if (running) schedule();
      }
    }, delay);
  };

  return {
    start() {
      if (running) return;
      running = true;
      schedule();
    },
    stop() {
      running = false;
      if (timer !== null) clearTimeout(timer);
      timer = null;
    },
  };
}
