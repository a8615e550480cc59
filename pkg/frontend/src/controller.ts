// Connect-and-snapshot lifecycle: fetch the snapshot, subscribe to the
// event stream, apply updates in order; when the stream drops, show the
// disconnected banner and reconnect with backoff, re-snapshotting so the
// model never trusts stale increments.

import { ManagerApi, StreamHandle } from "./api.js";
import {
  Model,
  UpdateRecord,
  applyRecord,
  applySnapshot,
  emptyModel,
} from "./model.js";

export type Scheduler = (fn: () => void, ms: number) => void;

export class LiveModel {
  model: Model = emptyModel();
  private stream: StreamHandle | null = null;
  private stopped = false;
  private generation = 0;

  constructor(
    private api: ManagerApi,
    private onChange: (m: Model) => void,
    private schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
    private backoffMs = 2000
  ) {}

  async start(): Promise<void> {
    if (this.stopped) return;
    const generation = ++this.generation;
    try {
      const snapshot = await this.api.snapshot();
      const config = await this.api.config();
      if (generation !== this.generation) return; // superseded reconnect
      this.model = applySnapshot(this.model, snapshot);
      this.model = applyRecord(this.model, { ...config, kind: "config" });
      this.model = { ...this.model, streamLive: true };
      this.onChange(this.model);
      this.stream = this.api.events(
        (rec) => this.apply(generation, rec),
        () => this.down(generation)
      );
    } catch {
      this.down(generation);
    }
  }

  stop(): void {
    this.stopped = true;
    this.generation++;
    if (this.stream) this.stream.close();
  }

  private apply(generation: number, rec: UpdateRecord): void {
    if (this.stopped || generation !== this.generation) return;
    this.model = applyRecord(this.model, rec);
    this.onChange(this.model);
  }

  private down(generation: number): void {
    if (this.stopped || generation !== this.generation) return;
    this.generation++; // invalidate the dead stream's late records
    if (this.stream) {
      this.stream.close();
      this.stream = null;
    }
    this.model = { ...this.model, streamLive: false };
    this.onChange(this.model);
    this.schedule(() => void this.start(), this.backoffMs);
  }
}
