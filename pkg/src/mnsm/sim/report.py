"""Render a scenario trace as a state-timeline figure.

One horizontal lane per node, colored with the color names the nodes
reported (unresolvable colors fall back to light gray), a top lane for the
published aggregate, command arrival markers, and an X for each disconnect.
Written to a file next to the delimited trace output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.colors import is_color_like

from mnsm.aggregator import (
    ControllerCommand,
    Display,
    NodeDisconnected,
    PublishAggregate,
)
from mnsm.sim.scenario import Trace

FALLBACK = "0.85"


def _safe_color(name: str) -> str:
    return name if name and is_color_like(name) else FALLBACK


def render_trace(trace: Trace, path: str) -> str:
    node_segments: dict[str, list[tuple[int, str, str]]] = {}
    agg_points: list[tuple[int, str]] = []
    commands: list[tuple[int, str]] = []
    disconnects: list[tuple[int, str]] = []
    state_colors: dict[str, str] = {}
    end = 1

    for rec in trace.records:
        end = max(end, rec.t + 1)
        if isinstance(rec.event, ControllerCommand):
            commands.append((rec.t, rec.event.name))
        if isinstance(rec.event, NodeDisconnected):
            disconnects.append((rec.t, rec.event.node))
        for e in rec.effects:
            if isinstance(e, PublishAggregate):
                agg_points.append((rec.t, e.state))
            elif isinstance(e, Display) and e.update.get("kind") == "node":
                u = e.update
                node_segments.setdefault(u["name"], []).append(
                    (rec.t, u["state"], u["color"])
                )
                if u["state"] and u["color"]:
                    state_colors.setdefault(u["state"], u["color"])

    nodes = sorted(node_segments)
    fig_h = max(2.5, 0.45 * (len(nodes) + 2))
    fig, ax = plt.subplots(figsize=(10, fig_h))

    lanes = {n: i for i, n in enumerate(nodes)}
    agg_lane = len(nodes) + 1

    for n in nodes:
        segs = node_segments[n]
        for i, (t, state, color) in enumerate(segs):
            t_next = segs[i + 1][0] if i + 1 < len(segs) else end
            ax.broken_barh(
                [(t, max(t_next - t, 0.2))],
                (lanes[n] - 0.38, 0.76),
                facecolors=_safe_color(color),
                edgecolor="black",
                linewidth=0.3,
            )

    prev_t, prev_s = 0, "READY"
    for t, s in agg_points + [(end, None)]:
        ax.broken_barh(
            [(prev_t, max(t - prev_t, 0.2))],
            (agg_lane - 0.38, 0.76),
            facecolors=_safe_color(state_colors.get(prev_s, "")),
            edgecolor="black",
            linewidth=0.5,
        )
        ax.text(prev_t + 0.1, agg_lane, prev_s, fontsize=7, va="center")
        if s is None:
            break
        prev_t, prev_s = t, s

    for t, name in commands:
        ax.axvline(t, color="black", linestyle=":", linewidth=0.8)
        ax.text(t, agg_lane + 0.6, name, fontsize=7, rotation=45, ha="left")
    for t, node in disconnects:
        if node in lanes:
            ax.plot(t, lanes[node], marker="x", color="red", markersize=8)

    ax.set_yticks([lanes[n] for n in nodes] + [agg_lane])
    ax.set_yticklabels(nodes + ["aggregate"], fontsize=8)
    ax.set_xlim(0, end)
    ax.set_ylim(-1, agg_lane + 1.3)
    ax.set_xlabel("virtual time (ticks)")
    ax.set_title(f"scenario {trace.name}: published {' -> '.join(trace.published()) or '(none)'}",
                 fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
