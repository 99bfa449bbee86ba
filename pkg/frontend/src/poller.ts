import type { ApiClient } from "./api.js";

/**
 * Polls the instance event log and fires onChange when new events land.
 * One-second interval; a failed poll flips the stale flag instead of
 * throwing, and the next successful one clears it.
 */
export class EventPoller {
  private lastSeq = 0;
  private active = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly instanceId: string,
    private readonly onChange: () => void,
    private readonly onStale: (stale: boolean) => void = () => {},
    private readonly intervalMs = 1000,
  ) {}

  start(): void {
    if (this.active) return;
    this.active = true;
    void this.tick();
  }

  stop(): void {
    this.active = false;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  async tick(): Promise<void> {
    if (!this.active) return;
    try {
      const slice = await this.client.getEvents(this.instanceId, this.lastSeq);
      this.onStale(false);
      if (slice.last_seq > this.lastSeq) {
        this.lastSeq = slice.last_seq;
        this.onChange();
      }
    } catch {
      this.onStale(true);
    }
    if (this.active) {
      this.timer = setTimeout(() => void this.tick(), this.intervalMs);
    }
  }
}
