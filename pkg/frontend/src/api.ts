// Thin transport over the manager's operator API.  The stream side uses
// EventSource (the /events endpoint is server-sent events); both fetch and
// EventSource are injectable so the controller can be tested with fakes.

import type { Snapshot, ConfigRecord, ConfigValues, UpdateRecord } from "./model.js";

export interface Verdict {
  status: number;
  body: any;
}

export interface StreamHandle {
  close(): void;
}

export interface Transport {
  getJson(path: string): Promise<any>;
  getText(path: string): Promise<string>;
  send(method: string, path: string, body?: unknown): Promise<Verdict>;
  openStream(
    path: string,
    onRecord: (rec: UpdateRecord) => void,
    onDown: () => void
  ): StreamHandle;
}

export class HttpTransport implements Transport {
  constructor(private base: string = "") {}

  private url(path: string): string {
    return this.base + path;
  }

  async getJson(path: string): Promise<any> {
    const resp = await fetch(this.url(path));
    if (!resp.ok) throw new Error(`${path}: HTTP ${resp.status}`);
    return resp.json();
  }

  async getText(path: string): Promise<string> {
    const resp = await fetch(this.url(path));
    if (!resp.ok) throw new Error(`${path}: HTTP ${resp.status}`);
    return resp.text();
  }

  async send(method: string, path: string, body?: unknown): Promise<Verdict> {
    const resp = await fetch(this.url(path), {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let parsed: any = null;
    try {
      parsed = await resp.json();
    } catch {
      parsed = null;
    }
    return { status: resp.status, body: parsed };
  }

  openStream(
    path: string,
    onRecord: (rec: UpdateRecord) => void,
    onDown: () => void
  ): StreamHandle {
    const source = new EventSource(this.url(path));
    source.onmessage = (ev) => onRecord(JSON.parse(ev.data));
    source.onerror = () => {
      source.close();
      onDown();
    };
    return { close: () => source.close() };
  }
}

export class ManagerApi {
  constructor(readonly transport: Transport) {}

  snapshot(): Promise<Snapshot> {
    return this.transport.getJson("/nodes");
  }

  config(): Promise<ConfigRecord> {
    return this.transport.getJson("/config");
  }

  command(name: string): Promise<Verdict> {
    return this.transport.send("POST", "/command", { name });
  }

  nodeAction(node: string, action: "kill" | "restart"): Promise<Verdict> {
    return this.transport.send("POST", `/nodes/${encodeURIComponent(node)}/${action}`);
  }

  logTail(node: string, lines: number): Promise<string> {
    return this.transport.getText(`/nodes/${encodeURIComponent(node)}/log?lines=${lines}`);
  }

  putConfig(values: ConfigValues): Promise<Verdict> {
    return this.transport.send("PUT", "/config", values);
  }

  events(onRecord: (rec: UpdateRecord) => void, onDown: () => void): StreamHandle {
    return this.transport.openStream("/events", onRecord, onDown);
  }
}
