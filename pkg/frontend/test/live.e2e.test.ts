// End-to-end against a real manager with 50 live nodes: model-server
// equality after quiescence, kill/restart/log round-trips, and config
// verdicts mirroring the client-side validation.  Skips when the Python
// stack is unavailable.

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ManagerApi, StreamHandle, Transport, Verdict } from "../src/api.js";
import { LiveModel } from "../src/controller.js";
import { Model, configProblems, sortedTiles } from "../src/model.js";

const pythonOk =
  spawnSync("python3", ["-c", "import mnsm"], { cwd: __dirname }).status === 0;

// Node 20 has no global EventSource; read the SSE stream via fetch.
class NodeTransport implements Transport {
  constructor(private base: string) {}

  async getJson(path: string): Promise<any> {
    const resp = await fetch(this.base + path);
    if (!resp.ok) throw new Error(`${path}: HTTP ${resp.status}`);
    return resp.json();
  }

  async getText(path: string): Promise<string> {
    const resp = await fetch(this.base + path);
    if (!resp.ok) throw new Error(`${path}: HTTP ${resp.status}`);
    return resp.text();
  }

  async send(method: string, path: string, body?: unknown): Promise<Verdict> {
    const resp = await fetch(this.base + path, {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    return { status: resp.status, body: await resp.json().catch(() => null) };
  }

  openStream(path: string, onRecord: (rec: any) => void, onDown: () => void): StreamHandle {
    const controller = new AbortController();
    (async () => {
      try {
        const resp = await fetch(this.base + path, { signal: controller.signal });
        const reader = resp.body!.getReader();
        const decoder = new TextDecoder();
        let buf = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          buf += decoder.decode(value, { stream: true });
          let idx;
          while ((idx = buf.indexOf("\n\n")) >= 0) {
            const chunk = buf.slice(0, idx);
            buf = buf.slice(idx + 2);
            for (const line of chunk.split("\n")) {
              if (line.startsWith("data: ")) onRecord(JSON.parse(line.slice(6)));
            }
          }
        }
        onDown();
      } catch {
        if (!controller.signal.aborted) onDown();
      }
    })();
    return { close: () => controller.abort() };
  }
}

describe.skipIf(!pythonOk)("console against a live 50-node manager", () => {
  let stack: ChildProcess;
  let api: ManagerApi;
  let live: LiveModel;
  let current: Model;
  const N = 50;

  beforeAll(async () => {
    const logs = mkdtempSync(join(tmpdir(), "mnsm-e2e-"));
    stack = spawn("python3", [join(__dirname, "helpers", "stack.py"), String(N), logs], {
      cwd: __dirname,
      stdio: ["pipe", "pipe", "inherit"],
    });
    const port = await new Promise<number>((resolve, reject) => {
      let out = "";
      const timer = setTimeout(() => reject(new Error(`stack never ready: ${out}`)), 90_000);
      stack.stdout!.on("data", (chunk) => {
        out += String(chunk);
        const m = out.match(/PORT (\d+)/);
        if (m) {
          clearTimeout(timer);
          resolve(Number(m[1]));
        }
        if (out.includes("FAIL")) {
          clearTimeout(timer);
          reject(new Error(out));
        }
      });
    });
    api = new ManagerApi(new NodeTransport(`http://127.0.0.1:${port}`));
    live = new LiveModel(api, (m) => (current = m));
    await live.start();
  }, 120_000);

  afterAll(async () => {
    live?.stop();
    stack?.stdin?.end();
    await new Promise((resolve) => {
      stack?.on("exit", resolve);
      setTimeout(resolve, 8_000);
    });
    stack?.kill("SIGKILL");
  }, 30_000);

  async function settle(predicate: () => boolean, what: string, ms = 30_000) {
    const deadline = Date.now() + ms;
    while (Date.now() < deadline) {
      if (predicate()) return;
      await new Promise((r) => setTimeout(r, 100));
    }
    throw new Error(`timed out: ${what}`);
  }

  it("model equals the server after quiescence", { timeout: 60_000 }, async () => {
    await settle(
      () => current && Object.keys(current.nodes).length === N,
      "all tiles in the model"
    );
    await new Promise((r) => setTimeout(r, 500)); // quiescence
    const snapshot = await api.snapshot();
    const config = await api.config();

    expect(sortedTiles(current).length).toBe(N);
    expect(sortedTiles(current)).toEqual(snapshot.nodes);
    expect(current.aggregate).toBe(snapshot.aggregate);
    expect(current.lastAction).toBe(snapshot.last_action);
    expect(current.config).toEqual({ ...config, kind: "config" });
    expect(current.aggregate).toBe("ALLOCATED");
  });

  it("kill round-trips: node returns to READY, tile follows", { timeout: 60_000 }, async () => {
    const victim = "node-07";
    const verdict = await api.nodeAction(victim, "kill");
    expect(verdict.status).toBe(200);
    await settle(
      () => current.nodes[victim]?.state === "READY" && !current.nodes[victim].flags.active,
      `${victim} back to READY in the model`
    );
    const snapshot = await api.snapshot();
    const server = snapshot.nodes.find((t) => t.name === victim)!;
    expect(server.state).toBe("READY");
  });

  it("restart acknowledges and log tail matches the endpoint", { timeout: 60_000 }, async () => {
    const verdict = await api.nodeAction("node-08", "restart");
    expect(verdict.status).toBe(200);
    const viaApi = await api.logTail("node-03", 20);
    const again = await api.logTail("node-03", 20);
    expect(viaApi.length).toBeGreaterThan(0);
    expect(again).toBe(viaApi); // stable tail while the node is quiet
  });

  it("config verdicts mirror client-side validation", { timeout: 60_000 }, async () => {
    const bad = { min_nodes: 10, max_nodes: 5, max_errors: 0, timeout: 30 };
    const clientProblems = configProblems(bad);
    const verdict = await api.putConfig(bad);
    expect(verdict.status).toBe(400);
    expect(Object.keys(verdict.body.errors)).toEqual(Object.keys(clientProblems));

    const good = { min_nodes: 1, max_nodes: 50, max_errors: 2, timeout: 30 };
    expect(configProblems(good)).toEqual({});
    const accepted = await api.putConfig(good);
    expect(accepted.status).toBe(200);
    expect(accepted.body.accepted).toBe(true);
  });
});
