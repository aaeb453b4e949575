/**
 * Periodic refresh. The interface polls the server every few seconds
 * instead of holding a push connection; the interval is clamped to the
 * 2..5 second band so the UI stays fresh without hammering the service.
 */

export const MIN_POLL_MS = 2000;
export const MAX_POLL_MS = 5000;

export function clampPollInterval(ms: number): number {
  if (!Number.isFinite(ms)) {
    return MIN_POLL_MS;
  }
  return Math.min(MAX_POLL_MS, Math.max(MIN_POLL_MS, Math.floor(ms)));
}

export class Poller {
  private readonly tick: () => Promise<void>;
  private readonly intervalMs: number;
  private readonly onError: (err: unknown) => void;
  private timer: ReturnType<typeof setInterval> | null = null;
  private busy = false;

  constructor(tick: () => Promise<void>, intervalMs: number, onError?: (err: unknown) => void) {
    this.tick = tick;
    this.intervalMs = clampPollInterval(intervalMs);
    this.onError = onError ?? (() => undefined);
  }

  interval(): number {
    return this.intervalMs;
  }

  running(): boolean {
    return this.timer !== null;
  }

  start(): void {
    if (this.timer !== null) {
      return;
    }
    this.timer = setInterval(() => {
      void this.beat();
    }, this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private async beat(): Promise<void> {
    if (this.busy) {
      // A slow refresh is still in flight; skip this beat rather than
      // stacking overlapping requests.
      return;
    }
    this.busy = true;
    try {
      await this.tick();
    } catch (err) {
      this.onError(err);
    } finally {
      this.busy = false;
    }
  }
}
