// Pure console state: the snapshot/event-stream records applied in order.
// Colors are uninterpreted pass-through from the daemons; neither the
// manager nor the console has a color table, so anything unresolvable
// falls back to a neutral tile that shows the color string as text.

export interface NodeFlags {
  connected: boolean;
  available: boolean;
  active: boolean;
  dead: boolean;
  unavailable: boolean;
}

export interface NodeTile {
  kind: "node";
  name: string;
  state: string;
  class: string;
  color: string;
  flags: NodeFlags;
}

export interface AggregateRecord {
  kind: "aggregate";
  state: string;
}

export interface ActionRecord {
  kind: "action";
  text: string;
}

export interface ConfigValues {
  min_nodes: number;
  max_nodes: number;
  max_errors: number;
  timeout: number;
}

export interface ConfigRecord extends ConfigValues {
  kind: "config";
  pending?: boolean;
}

export type UpdateRecord = NodeTile | AggregateRecord | ActionRecord | ConfigRecord;

export interface Snapshot {
  nodes: NodeTile[];
  aggregate: string;
  last_action: string;
}

export interface Model {
  nodes: Record<string, NodeTile>;
  aggregate: string;
  lastAction: string;
  config: ConfigRecord | null;
  streamLive: boolean;
}

export function emptyModel(): Model {
  return { nodes: {}, aggregate: "READY", lastAction: "", config: null, streamLive: false };
}

export function applySnapshot(model: Model, snapshot: Snapshot): Model {
  const nodes: Record<string, NodeTile> = {};
  for (const tile of snapshot.nodes) {
    nodes[tile.name] = tile;
  }
  return {
    ...model,
    nodes,
    aggregate: snapshot.aggregate,
    lastAction: snapshot.last_action,
  };
}

export function applyRecord(model: Model, rec: UpdateRecord): Model {
  switch (rec.kind) {
    case "node":
      return { ...model, nodes: { ...model.nodes, [rec.name]: rec } };
    case "aggregate":
      return { ...model, aggregate: rec.state };
    case "action":
      return { ...model, lastAction: rec.text };
    case "config":
      return { ...model, config: rec };
    default:
      return model;
  }
}

export function sortedTiles(model: Model): NodeTile[] {
  return Object.keys(model.nodes)
    .sort()
    .map((name) => model.nodes[name]);
}

export function connectedCount(model: Model): number {
  return Object.values(model.nodes).filter((t) => t.flags.connected).length;
}

export function badges(flags: NodeFlags): string[] {
  const out: string[] = [];
  if (flags.active) out.push("active");
  if (!flags.active && flags.connected) out.push("inactive");
  if (flags.dead) out.push("dead");
  if (flags.unavailable) out.push("unavailable");
  return out;
}

// Mirrors the manager's server-side config validation field by field.
export function configProblems(values: ConfigValues): Record<string, string> {
  const problems: Record<string, string> = {};
  if (!Number.isFinite(values.min_nodes) || values.min_nodes < 1) {
    problems.min_nodes = "must be a positive integer";
  }
  if (!Number.isFinite(values.max_nodes) || values.max_nodes < values.min_nodes) {
    problems.max_nodes = "must be >= min_nodes";
  }
  if (!Number.isFinite(values.max_errors) || values.max_errors < 0) {
    problems.max_errors = "must be non-negative";
  }
  if (!Number.isFinite(values.timeout) || values.timeout <= 0) {
    problems.timeout = "must be > 0";
  }
  return problems;
}

export type ColorCheck = (color: string) => boolean;

const cssColorCheck: ColorCheck = (color) =>
  typeof CSS !== "undefined" && CSS.supports ? CSS.supports("color", color) : true;

export interface TilePaint {
  background: string;
  showColorText: boolean; // unresolvable color: neutral tile, color shown as text
}

export function tilePaint(color: string, isColor: ColorCheck = cssColorCheck): TilePaint {
  if (color && isColor(color)) {
    return { background: color, showColorText: false };
  }
  return { background: "#d8d8d8", showColorText: color.length > 0 };
}
