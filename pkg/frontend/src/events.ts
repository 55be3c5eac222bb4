/**
 * Long-poll event feed. The gateway parks /events requests up to `wait`
 * seconds and answers early when something happens; an empty body is a
 * keep-alive, after which we re-poll in 2 s. While events are flowing the
 * next poll fires immediately, so a board mirrors a lifecycle within one
 * poll cycle of the journal commit. At most one request is in flight.
 */

import type { Api } from "./api.js";
import type { PlatformEvent } from "./types.js";

export const KEEPALIVE_REPOLL_MS = 2000;

export interface FeedOptions {
  wait?: number;
  repollMs?: number;
  deploymentId?: string;
}

export class EventFeed {
  cursor = 0;
  private stopped = true;
  private inFlight = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly api: Api,
    private readonly onEvents: (events: PlatformEvent[]) => void,
    private readonly opts: FeedOptions = {},
  ) {}

  start(): void {
    if (!this.stopped) return;
    this.stopped = false;
    void this.poll();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  get running(): boolean {
    return !this.stopped;
  }

  private async poll(): Promise<void> {
    if (this.stopped || this.inFlight) return;
    this.inFlight = true;
    let events: PlatformEvent[] | null = null;
    try {
      const wait = this.opts.wait ?? 25;
      const body = this.opts.deploymentId
        ? await this.api.deploymentEvents(this.opts.deploymentId, this.cursor, wait)
        : await this.api.events(this.cursor, wait);
      events = body.events;
    } catch {
      events = null; // transient failure: retry on the keep-alive cadence
    }
    this.inFlight = false;
    if (this.stopped) return;
    if (events !== null && events.length > 0) {
      this.cursor = events[events.length - 1].event_id;
      this.onEvents(events);
      void this.poll();
    } else {
      this.timer = setTimeout(() => {
        this.timer = null;
        void this.poll();
      }, this.opts.repollMs ?? KEEPALIVE_REPOLL_MS);
    }
  }
}
