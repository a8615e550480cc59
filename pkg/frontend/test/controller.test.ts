import { describe, expect, it } from "vitest";

import { ManagerApi, StreamHandle, Transport, Verdict } from "../src/api.js";
import { LiveModel } from "../src/controller.js";
import { Model, NodeTile, UpdateRecord } from "../src/model.js";

function tile(name: string, state: string): NodeTile {
  return {
    kind: "node",
    name,
    state,
    class: "major",
    color: "green",
    flags: { connected: true, available: true, active: false, dead: false, unavailable: false },
  };
}

class FakeTransport implements Transport {
  snapshots: any[] = [];
  config = { kind: "config", min_nodes: 1, max_nodes: 9, max_errors: 0, timeout: 10 };
  streams: Array<{ onRecord: (r: UpdateRecord) => void; onDown: () => void; closed: boolean }> =
    [];
  sent: Array<{ method: string; path: string; body: unknown }> = [];
  failNextSnapshot = false;

  async getJson(path: string): Promise<any> {
    if (path === "/nodes") {
      if (this.failNextSnapshot) {
        this.failNextSnapshot = false;
        throw new Error("unreachable");
      }
      return this.snapshots.shift() ?? { nodes: [], aggregate: "READY", last_action: "" };
    }
    if (path === "/config") return this.config;
    throw new Error(`unexpected ${path}`);
  }

  async getText(): Promise<string> {
    return "line1\nline2\n";
  }

  async send(method: string, path: string, body?: unknown): Promise<Verdict> {
    this.sent.push({ method, path, body });
    return { status: 200, body: { ok: true } };
  }

  openStream(
    _path: string,
    onRecord: (rec: UpdateRecord) => void,
    onDown: () => void
  ): StreamHandle {
    const entry = { onRecord, onDown, closed: false };
    this.streams.push(entry);
    return { close: () => (entry.closed = true) };
  }
}

function harness() {
  const transport = new FakeTransport();
  const api = new ManagerApi(transport);
  const states: Model[] = [];
  const pending: Array<() => void> = [];
  const live = new LiveModel(
    api,
    (m) => states.push(m),
    (fn) => pending.push(fn),
    1
  );
  return { transport, live, states, pending };
}

const flush = () => new Promise((resolve) => setTimeout(resolve, 0));

describe("connect and snapshot", () => {
  it("applies snapshot before increments and reaches server state", async () => {
    const { transport, live, states } = harness();
    transport.snapshots.push({
      nodes: [tile("a", "READY"), tile("b", "READY")],
      aggregate: "READY",
      last_action: "boot",
    });
    await live.start();
    expect(states.at(-1)?.streamLive).toBe(true);
    expect(Object.keys(states.at(-1)!.nodes)).toEqual(["a", "b"]);

    const stream = transport.streams[0];
    stream.onRecord(tile("a", "ALLOCATED"));
    stream.onRecord({ kind: "aggregate", state: "ALLOCATED" });
    const final = states.at(-1)!;
    expect(final.nodes["a"].state).toBe("ALLOCATED");
    expect(final.aggregate).toBe("ALLOCATED");
    expect(final.config?.max_nodes).toBe(9);
  });

  it("stream loss: banner, reconnect, fresh snapshot, stale records ignored", async () => {
    const { transport, live, states, pending } = harness();
    transport.snapshots.push({
      nodes: [tile("a", "RUNNING")],
      aggregate: "RUNNING",
      last_action: "",
    });
    await live.start();
    const first = transport.streams[0];

    first.onDown();
    expect(states.at(-1)?.streamLive).toBe(false); // visible banner state

    transport.snapshots.push({
      nodes: [tile("a", "READY")],
      aggregate: "READY",
      last_action: "recovered",
    });
    expect(pending.length).toBe(1);
    pending.pop()!();
    await flush();

    const final = states.at(-1)!;
    expect(final.streamLive).toBe(true);
    expect(final.aggregate).toBe("READY");
    expect(final.nodes["a"].state).toBe("READY");
    expect(transport.streams.length).toBe(2);

    // a late record from the dead stream must not corrupt the model
    first.onRecord(tile("a", "GHOST"));
    expect(states.at(-1)!.nodes["a"].state).toBe("READY");
  });

  it("unreachable manager retries with backoff", async () => {
    const { transport, live, states, pending } = harness();
    transport.failNextSnapshot = true;
    await live.start();
    expect(states.at(-1)?.streamLive).toBe(false);
    transport.snapshots.push({ nodes: [], aggregate: "READY", last_action: "" });
    expect(pending.length).toBe(1);
    pending.pop()!();
    await flush();
    expect(states.at(-1)?.streamLive).toBe(true);
  });

  it("stop() silences late callbacks", async () => {
    const { transport, live, states } = harness();
    transport.snapshots.push({ nodes: [], aggregate: "READY", last_action: "" });
    await live.start();
    const n = states.length;
    live.stop();
    transport.streams[0].onRecord({ kind: "aggregate", state: "ERROR" });
    expect(states.length).toBe(n);
  });
});

describe("actions round-trip through the operator endpoints", () => {
  it("kill, restart, command, log tail, config", async () => {
    const { transport } = harness();
    const api = new ManagerApi(transport);
    await api.nodeAction("beta", "kill");
    await api.nodeAction("beta", "restart");
    await api.command("START");
    await api.putConfig({ min_nodes: 1, max_nodes: 2, max_errors: 0, timeout: 5 });
    expect(await api.logTail("beta", 2)).toContain("line1");
    expect(transport.sent).toEqual([
      { method: "POST", path: "/nodes/beta/kill", body: undefined },
      { method: "POST", path: "/nodes/beta/restart", body: undefined },
      { method: "POST", path: "/command", body: { name: "START" } },
      {
        method: "PUT",
        path: "/config",
        body: { min_nodes: 1, max_nodes: 2, max_errors: 0, timeout: 5 },
      },
    ]);
  });
});
