"""Scenario scripts, the virtual-time scheduler, and replayable traces.

A scenario connects every scripted node at tick 0 (each announces READY,
the way a real daemon does on connect) and then plays per-node actions and
controller commands at their scripted virtual times.  Delays are relative
to the previous item of the same source.  Simultaneous events are ordered
deterministically: controller items first, then node items by (node name,
script index), then timer firings; passing a seed replaces that rule with
a seeded shuffle, which stays reproducible for the same seed.

Timers requested by the core (SetTimer effects) are armed on the virtual
clock and fire as TimerFired events unless canceled first.

Scenario files are JSON::

    {
      "name": "happy-3",
      "config": {"min_nodes": 1, "max_nodes": 50, "max_errors": 1, "timeout": 10},
      "seed": null,
      "nodes": {
        "n1": [{"delay": 5, "report": {"state": "ALLOCATED", "class": "major",
                                        "color": "cyan"}},
               {"delay": 3, "disconnect": true},
               {"delay": 2, "reconnect": true},
               {"delay": 0, "ignore_command": true}]
      },
      "controller": [{"delay": 1, "command": "START"}]
    }

Trace files are newline-delimited JSON: a header record followed by one
record per ingested event with the effects it produced; replaying a trace
re-ingests its events through a fresh core and must reproduce the effect
stream byte for byte.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field

from mnsm.aggregator import (
    Aggregator,
    ControllerCommand,
    Effect,
    Event,
    ManagerConfig,
    NodeConnected,
    NodeDisconnected,
    PublishAggregate,
    Report,
    SetTimer,
    CancelTimer,
    TimerFired,
    check_invariants,
    effect_to_record,
    event_from_record,
    event_to_record,
)

RANK_CONTROLLER = 0
RANK_NODE = 1
RANK_TIMER = 2


class ScenarioError(ValueError):
    pass


class ReplayMismatch(AssertionError):
    pass


@dataclass
class Scenario:
    name: str
    config: ManagerConfig
    nodes: dict[str, list[dict]]
    controller: list[dict] = field(default_factory=list)
    seed: int | None = None

    @staticmethod
    def from_dict(data: dict) -> "Scenario":
        try:
            config = ManagerConfig(**data.get("config", {}))
        except TypeError as exc:
            raise ScenarioError(f"bad config: {exc}") from None
        sc = Scenario(
            name=data.get("name", "scenario"),
            config=config,
            nodes=data.get("nodes", {}),
            controller=data.get("controller", []),
            seed=data.get("seed"),
        )
        sc.validate()
        return sc

    @staticmethod
    def load(path: str) -> "Scenario":
        with open(path, "r", encoding="utf-8") as f:
            return Scenario.from_dict(json.load(f))

    def validate(self) -> None:
        problems = self.config.problems()
        if problems:
            raise ScenarioError(f"bad config: {problems}")
        for node, script in self.nodes.items():
            for i, item in enumerate(script):
                if item.get("delay", 0) < 0:
                    raise ScenarioError(f"{node}[{i}]: negative delay")
                keys = {"report", "disconnect", "reconnect", "ignore_command"} & set(item)
                if len(keys) != 1:
                    raise ScenarioError(f"{node}[{i}]: exactly one action required")
                if "report" in item and "state" not in item["report"]:
                    raise ScenarioError(f"{node}[{i}]: report needs a state")
        for i, item in enumerate(self.controller):
            if item.get("delay", 0) < 0:
                raise ScenarioError(f"controller[{i}]: negative delay")
            if "command" not in item:
                raise ScenarioError(f"controller[{i}]: missing command")


@dataclass
class TraceRecord:
    t: int
    event: Event
    effects: list[Effect]

    def to_line(self) -> str:
        rec = {
            "t": self.t,
            "event": event_to_record(self.event),
            "effects": [effect_to_record(e) for e in self.effects],
        }
        return json.dumps(rec, sort_keys=True, separators=(",", ":"))


@dataclass
class Trace:
    name: str
    config: ManagerConfig
    seed: int | None
    records: list[TraceRecord] = field(default_factory=list)

    def published(self) -> list[str]:
        out = []
        for rec in self.records:
            out += [e.state for e in rec.effects if isinstance(e, PublishAggregate)]
        return out

    def to_lines(self) -> list[str]:
        header = {
            "type": "header",
            "name": self.name,
            "config": self.config.as_dict(),
            "seed": self.seed,
        }
        return [json.dumps(header, sort_keys=True, separators=(",", ":"))] + [
            r.to_line() for r in self.records
        ]

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(self.to_lines()) + "\n")

    @staticmethod
    def load_lines(path: str) -> tuple[dict, list[dict]]:
        with open(path, "r", encoding="utf-8") as f:
            lines = [ln for ln in f.read().splitlines() if ln.strip()]
        if not lines:
            raise ReplayMismatch("empty trace file")
        header = json.loads(lines[0])
        if header.get("type") != "header":
            raise ReplayMismatch("missing trace header")
        return header, [json.loads(ln) for ln in lines[1:]]


def run_scenario(scenario: Scenario) -> Trace:
    """Execute a scenario to quiescence under virtual time and return its trace."""
    agg = Aggregator(scenario.config)
    rng = random.Random(scenario.seed) if scenario.seed is not None else None
    heap: list[tuple] = []
    counter = 0
    armed: dict[str, int] = {}

    def push(t: int, rank: int, name: str, idx: int, payload) -> None:
        nonlocal counter
        tie = (rng.random(),) if rng else (rank, name, idx)
        heapq.heappush(heap, (t, *tie, counter, payload))
        counter += 1

    for name in sorted(scenario.nodes):
        push(0, RANK_NODE, name, -2, NodeConnected(name))
        push(0, RANK_NODE, name, -1, Report(name, "READY", "major", "green"))
        t = 0
        for idx, item in enumerate(scenario.nodes[name]):
            t += item.get("delay", 0)
            if "report" in item:
                r = item["report"]
                ev = Report(
                    name,
                    r["state"],
                    r.get("class", "major"),
                    r.get("color", "gray"),
                    r.get("detail", ""),
                )
            elif item.get("disconnect"):
                ev = NodeDisconnected(name)
            elif item.get("reconnect"):
                ev = NodeConnected(name)
            else:
                continue  # ignore_command: scripted no-op
            push(t, RANK_NODE, name, idx, ev)

    t = 0
    for idx, item in enumerate(scenario.controller):
        t += item.get("delay", 0)
        push(t, RANK_CONTROLLER, "", idx, ControllerCommand(item["command"]))

    trace = Trace(name=scenario.name, config=scenario.config, seed=scenario.seed)
    while heap:
        entry = heapq.heappop(heap)
        now, payload = entry[0], entry[-1]
        if isinstance(payload, TimerFired) and armed.get(payload.kind) != payload.gen:
            continue  # canceled before it fired
        if isinstance(payload, TimerFired):
            armed.pop(payload.kind, None)
        effects = agg.ingest(payload)
        check_invariants(agg.state)
        for e in effects:
            if isinstance(e, SetTimer):
                armed[e.kind] = e.gen
                push(now + int(e.timeout), RANK_TIMER, "", e.gen, TimerFired(e.kind, e.gen))
            elif isinstance(e, CancelTimer):
                armed.pop(e.kind, None)
        trace.records.append(TraceRecord(now, payload, effects))
    return trace


def replay_trace(path: str) -> Trace:
    """Re-ingest a stored trace; raise ReplayMismatch on any effect difference."""
    header, records = Trace.load_lines(path)
    agg = Aggregator(ManagerConfig(**header["config"]))
    trace = Trace(header["name"], agg.state.config, header.get("seed"))
    for i, rec in enumerate(records):
        event = event_from_record(rec["event"])
        effects = agg.ingest(event)
        got = [effect_to_record(e) for e in effects]
        want = rec["effects"]
        if json.dumps(got, sort_keys=True) != json.dumps(want, sort_keys=True):
            raise ReplayMismatch(
                f"record {i} (t={rec['t']}, event {rec['event']}): "
                f"expected {want}, got {got}"
            )
        trace.records.append(TraceRecord(rec["t"], event, effects))
    return trace
