// DOM wiring: the node grid, summary header, per-node action menu, log
// viewer with follow-refresh, and the parameter editor.

import { HttpTransport, ManagerApi } from "./api.js";
import { LiveModel } from "./controller.js";
import {
  Model,
  NodeTile,
  badges,
  configProblems,
  connectedCount,
  sortedTiles,
  tilePaint,
} from "./model.js";

const api = new ManagerApi(
  new HttpTransport(new URLSearchParams(location.search).get("api") ?? "")
);

let selected: string | null = null;
let logTimer: number | null = null;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function byId(id: string): HTMLElement {
  return document.getElementById(id)!;
}

function render(model: Model): void {
  byId("banner").style.display = model.streamLive ? "none" : "block";

  const aggregate = byId("aggregate");
  aggregate.textContent = model.aggregate;
  const aggTile = Object.values(model.nodes).find((t) => t.state === model.aggregate);
  const paint = tilePaint(aggTile?.color ?? "");
  aggregate.style.backgroundColor = model.aggregate === "ERROR" ? "#e33" : paint.background;

  byId("last-action").textContent = model.lastAction || "—";
  byId("counts").textContent =
    `${connectedCount(model)} connected / ${Object.keys(model.nodes).length} known`;

  if (model.config) {
    byId("config-line").textContent =
      `min ${model.config.min_nodes} · max ${model.config.max_nodes} · ` +
      `max errors ${model.config.max_errors} · timeout ${model.config.timeout}s` +
      (model.config.pending ? " (pending next epoch)" : "");
  }

  const grid = byId("grid");
  grid.replaceChildren();
  for (const tile of sortedTiles(model)) {
    grid.appendChild(renderTile(tile));
  }
}

function renderTile(tile: NodeTile): HTMLElement {
  const button = el("button", "tile");
  const paint = tilePaint(tile.color);
  button.style.backgroundColor = paint.background;
  if (tile.flags.dead || tile.flags.unavailable) button.classList.add("faded");
  button.appendChild(el("div", "tile-name", tile.name));
  button.appendChild(el("div", "tile-state", tile.state || "(no report)"));
  if (paint.showColorText) {
    button.appendChild(el("div", "tile-color-text", `color: ${tile.color}`));
  }
  const badgeRow = el("div", "badges");
  for (const b of badges(tile.flags)) {
    badgeRow.appendChild(el("span", `badge badge-${b}`, b));
  }
  button.appendChild(badgeRow);
  button.onclick = () => openMenu(tile);
  return button;
}

function openMenu(tile: NodeTile): void {
  selected = tile.name;
  byId("menu-title").textContent = `${tile.name} — ${tile.state || "no report"}`;
  byId("menu-error").textContent = "";
  byId("menu").style.display = "block";
}

async function nodeAction(action: "kill" | "restart"): Promise<void> {
  if (!selected) return;
  const verdict = await api.nodeAction(selected, action);
  byId("menu-error").textContent = verdict.status === 200
    ? `${action} acknowledged`
    : `${action} failed: ${verdict.body?.error ?? verdict.status}`;
}

async function refreshLog(): Promise<void> {
  if (!selected) return;
  try {
    const text = await api.logTail(selected, 200);
    byId("log-text").textContent = text || "(empty)";
  } catch (exc) {
    byId("log-text").textContent = `log unavailable: ${exc}`;
  }
}

function openLog(): void {
  byId("log-panel").style.display = "block";
  byId("log-title").textContent = `log tail: ${selected}`;
  void refreshLog();
  if (logTimer !== null) clearInterval(logTimer);
  logTimer = window.setInterval(refreshLog, 2000);
}

function closeLog(): void {
  byId("log-panel").style.display = "none";
  if (logTimer !== null) clearInterval(logTimer);
  logTimer = null;
}

function readConfigForm() {
  return {
    min_nodes: Number((byId("cfg-min") as HTMLInputElement).value),
    max_nodes: Number((byId("cfg-max") as HTMLInputElement).value),
    max_errors: Number((byId("cfg-errors") as HTMLInputElement).value),
    timeout: Number((byId("cfg-timeout") as HTMLInputElement).value),
  };
}

async function submitConfig(): Promise<void> {
  const values = readConfigForm();
  const problems = configProblems(values);
  const out = byId("cfg-result");
  if (Object.keys(problems).length > 0) {
    out.textContent = Object.entries(problems)
      .map(([field, why]) => `${field}: ${why}`)
      .join("; ");
    out.className = "bad";
    return; // invalid per the mirrored rules: no request sent
  }
  const verdict = await api.putConfig(values);
  if (verdict.status === 200) {
    out.textContent = "accepted (applies at next START/RESET)";
    out.className = "good";
  } else {
    const errors = verdict.body?.errors ?? {};
    out.textContent = Object.entries(errors)
      .map(([field, why]) => `${field}: ${why}`)
      .join("; ");
    out.className = "bad";
  }
}

function wire(): void {
  byId("act-kill").onclick = () => void nodeAction("kill");
  byId("act-restart").onclick = () => void nodeAction("restart");
  byId("act-log").onclick = openLog;
  byId("menu-close").onclick = () => (byId("menu").style.display = "none");
  byId("log-close").onclick = closeLog;
  byId("cfg-apply").onclick = () => void submitConfig();
  for (const name of ["START", "RESET"]) {
    const button = el("button", "cmd", name);
    button.onclick = () => void api.command(name);
    byId("commands").appendChild(button);
  }
  const custom = byId("cmd-custom") as HTMLInputElement;
  byId("cmd-send").onclick = () => {
    if (custom.value.trim()) void api.command(custom.value.trim().toUpperCase());
  };
}

wire();
const live = new LiveModel(api, render);
void live.start();
