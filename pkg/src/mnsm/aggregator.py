"""The manager's aggregation core: a pure, deterministic event-to-effects machine.

The core adopts the states reported by the node daemons rather than defining
its own, with two exceptions: READY (the inactive state every daemon starts
in) and ERROR (entered on daemon misbehavior or disappearance).  One call to
``Aggregator.ingest`` consumes exactly one event and returns a finite ordered
effect list; there are no clocks, no I/O and no hidden outputs inside, which
makes every run replayable from its event sequence alone.

Aggregation rules, in brief:

* START (only accepted while coherent in READY) checks that at least
  ``min_nodes`` eligible nodes exist, activates the lexicographically first
  ``max_nodes`` of them, and forwards START to those nodes under a command
  timer.  Other commands are forwarded to active nodes only.
* RESET may arrive at any time: it clears an ERROR, forwards RESET to every
  connected node and then expects READY from each of them.
* Major-state reports from active nodes feed a coherence check: the first
  new state opens a transition; nodes that run ahead have their subsequent
  reports held pending; a node reporting a different state than the
  transition target puts the manager in ERROR.  The transition completes
  when every active node has reported the target, which then becomes the
  aggregate.
* A READY report always deactivates the reporting node.  Error-class
  reports and disconnects of active nodes count against ``max_errors``;
  exceeding it latches ERROR until a RESET arrives.
* Timers bound both command responses and spontaneous transitions; a
  timeout during a reset marks stragglers unavailable instead of erroring.
"""

from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, field, fields

READY = "READY"
ERROR = "ERROR"

TIMER_KINDS = ("transition", "command")

START = "START"
RESET = "RESET"


# ---------------------------------------------------------------------------
# Events


@dataclass(frozen=True)
class NodeConnected:
    node: str


@dataclass(frozen=True)
class NodeDisconnected:
    node: str


@dataclass(frozen=True)
class Report:
    node: str
    state: str
    state_class: str
    color: str = ""
    detail: str = ""


@dataclass(frozen=True)
class ControllerCommand:
    name: str


@dataclass(frozen=True)
class OperatorAction:
    kind: str  # kill | restart | clear_unavailable
    node: str


@dataclass(frozen=True)
class TimerFired:
    kind: str
    gen: int


@dataclass(frozen=True)
class ConfigChange:
    config: "ManagerConfig"


Event = (
    NodeConnected
    | NodeDisconnected
    | Report
    | ControllerCommand
    | OperatorAction
    | TimerFired
    | ConfigChange
)


# ---------------------------------------------------------------------------
# Effects


@dataclass(frozen=True)
class SendToNode:
    node: str
    command: str


@dataclass(frozen=True)
class SendToAll:
    selector: str  # active | connected
    command: str


@dataclass(frozen=True)
class SetTimer:
    kind: str
    timeout: float
    gen: int


@dataclass(frozen=True)
class CancelTimer:
    kind: str


@dataclass(frozen=True)
class PublishAggregate:
    state: str


@dataclass(frozen=True)
class Display:
    update: dict

    def __hash__(self):  # dicts are unhashable; effects must be comparable anyway
        return hash(repr(sorted(self.update.items())))


@dataclass(frozen=True)
class Log:
    line: str


Effect = SendToNode | SendToAll | SetTimer | CancelTimer | PublishAggregate | Display | Log


# ---------------------------------------------------------------------------
# State


@dataclass
class ManagerConfig:
    min_nodes: int = 1
    max_nodes: int = 1000
    max_errors: int = 0
    timeout: float = 30.0

    def problems(self) -> dict[str, str]:
        out: dict[str, str] = {}
        if self.min_nodes < 1:
            out["min_nodes"] = "must be a positive integer"
        if self.max_nodes < self.min_nodes:
            out["max_nodes"] = "must be >= min_nodes"
        if self.max_errors < 0:
            out["max_errors"] = "must be non-negative"
        if self.timeout <= 0:
            out["timeout"] = "must be > 0"
        return out

    def as_dict(self) -> dict:
        return {
            "min_nodes": self.min_nodes,
            "max_nodes": self.max_nodes,
            "max_errors": self.max_errors,
            "timeout": self.timeout,
        }


@dataclass
class NodeRecord:
    """Manager-side ledger entry for one node.

    ``available`` means the node has proven usable by reporting READY and
    may be selected at the next START.  ``unavailable`` is the sticky
    misbehavior flag: it survives reconnects and is cleared only by an
    operator action.  ``pending`` holds major-class reports that arrived
    faster than the coherence check could consume them.
    """

    name: str
    connected: bool = False
    available: bool = False
    active: bool = False
    dead: bool = False
    unavailable: bool = False
    last_major: str | None = None
    display_state: str = ""
    display_class: str = ""
    display_color: str = ""
    pending: deque = field(default_factory=deque)

    def tile(self) -> dict:
        return {
            "kind": "node",
            "name": self.name,
            "state": self.display_state,
            "class": self.display_class,
            "color": self.display_color,
            "flags": {
                "connected": self.connected,
                "available": self.available,
                "active": self.active,
                "dead": self.dead,
                "unavailable": self.unavailable,
            },
        }


COHERENT = "coherent"
IN_TRANSITION = "in_transition"
RESETTING = "resetting"
ERRORED = "errored"


@dataclass
class ManagerState:
    config: ManagerConfig = field(default_factory=ManagerConfig)
    staged_config: ManagerConfig | None = None
    aggregate: str = READY
    phase: str = COHERENT
    target: str | None = None  # in_transition only
    done: set[str] = field(default_factory=set)  # in_transition only
    awaiting: set[str] = field(default_factory=set)  # resetting only
    nodes: dict[str, NodeRecord] = field(default_factory=dict)
    error_count: int = 0
    active_timer: tuple[str, int] | None = None  # (kind, gen)
    timer_gen: dict[str, int] = field(default_factory=lambda: {k: 0 for k in TIMER_KINDS})
    last_action: str = ""

    def active_nodes(self) -> list[str]:
        return sorted(n for n, r in self.nodes.items() if r.active)

    def eligible_nodes(self) -> list[str]:
        return sorted(
            n
            for n, r in self.nodes.items()
            if r.connected and r.available and not r.unavailable
        )


class Aggregator:
    """Wraps a ManagerState and applies events to it, one at a time."""

    def __init__(self, config: ManagerConfig | None = None):
        self.state = ManagerState(config=copy.deepcopy(config) if config else ManagerConfig())

    def snapshot(self) -> ManagerState:
        return copy.deepcopy(self.state)

    # -- event dispatch ----------------------------------------------------

    def ingest(self, event: Event) -> list[Effect]:
        st = self.state
        fx: list[Effect] = []
        touched: set[str] = set()
        before_action = st.last_action
        before_aggregate = st.aggregate

        if isinstance(event, NodeConnected):
            self._on_connect(event.node, fx, touched)
        elif isinstance(event, NodeDisconnected):
            self._on_disconnect(event.node, fx, touched)
        elif isinstance(event, Report):
            self._on_report(event, fx, touched)
        elif isinstance(event, ControllerCommand):
            self._on_command(event.name, fx, touched)
        elif isinstance(event, OperatorAction):
            self._on_operator(event, fx, touched)
        elif isinstance(event, TimerFired):
            self._on_timer(event, fx, touched)
        elif isinstance(event, ConfigChange):
            self._on_config(event.config, fx)
        else:
            fx.append(Log(f"ignoring unknown event {event!r}"))

        for name in sorted(touched):
            if name in st.nodes:
                fx.append(Display(st.nodes[name].tile()))
        if st.aggregate != before_aggregate:
            fx.append(Display({"kind": "aggregate", "state": st.aggregate}))
        if st.last_action != before_action:
            fx.append(Display({"kind": "action", "text": st.last_action}))
        return fx

    # -- connection lifecycle ----------------------------------------------

    def _on_connect(self, name: str, fx: list[Effect], touched: set[str]) -> None:
        st = self.state
        old = st.nodes.get(name)
        if old is not None and old.connected:
            # A new session for a live record means the old incarnation is
            # gone without a goodbye; give it full disconnect bookkeeping.
            self._mark_disconnected(name, fx, touched)
            old = st.nodes[name]
        rec = NodeRecord(name=name, connected=True)
        if old is not None:
            rec.unavailable = old.unavailable  # sticky across reconnects
            st.done.discard(name)
            st.awaiting.discard(name)
        st.nodes[name] = rec
        st.last_action = f"node {name} connected"
        fx.append(Log(st.last_action))
        touched.add(name)

    def _on_disconnect(self, name: str, fx: list[Effect], touched: set[str]) -> None:
        if name not in self.state.nodes:
            fx.append(Log(f"disconnect from unknown node {name}; ignored"))
            return
        self._mark_disconnected(name, fx, touched)

    def _mark_disconnected(self, name: str, fx: list[Effect], touched: set[str]) -> None:
        st = self.state
        rec = st.nodes[name]
        was_active = rec.active
        rec.connected = False
        rec.dead = True
        rec.active = False
        rec.available = False
        rec.unavailable = True
        rec.pending.clear()
        st.done.discard(name)
        st.awaiting.discard(name)
        touched.add(name)
        st.last_action = f"node {name} disconnected"
        fx.append(Log(st.last_action))
        if st.phase == ERRORED:
            return
        if was_active:
            # Equivalent to an error state reported by the daemon.
            st.error_count += 1
            if st.error_count > st.config.max_errors:
                self._latch_error(
                    fx,
                    f"active node {name} disconnected "
                    f"({st.error_count} errors > max {st.config.max_errors})",
                )
                return
        self._advance(fx, touched)

    # -- reports -------------------------------------------------------------

    def _on_report(self, ev: Report, fx: list[Effect], touched: set[str]) -> None:
        st = self.state
        rec = st.nodes.get(ev.node)
        if rec is None:
            fx.append(Log(f"report from unknown node {ev.node}; ignored"))
            return
        rec.display_state = ev.state
        rec.display_class = ev.state_class
        rec.display_color = ev.color
        fx.append(Display(rec.tile()))

        if ev.state_class == "minor":
            return  # display only; never part of coherence

        if ev.state_class == "error":
            if st.phase == ERRORED:
                return  # displayed but otherwise ignored while errored
            rec.active = False
            rec.available = False
            st.done.discard(ev.node)
            st.awaiting.discard(ev.node)
            touched.add(ev.node)
            st.error_count += 1
            detail = f" ({ev.detail})" if ev.detail else ""
            fx.append(Log(f"node {ev.node} reported error state {ev.state}{detail}"))
            if st.error_count > st.config.max_errors:
                self._latch_error(
                    fx,
                    f"node {ev.node} reported {ev.state} "
                    f"({st.error_count} errors > max {st.config.max_errors})",
                )
            else:
                st.last_action = (
                    f"node {ev.node} reported {ev.state} "
                    f"({st.error_count} of {st.config.max_errors} errors tolerated)"
                )
                self._advance(fx, touched)
            return

        # major class
        if st.phase == ERRORED:
            if ev.state == READY:
                self._consume_ready(rec, touched)
            return
        if st.phase == RESETTING:
            if ev.node in st.awaiting:
                rec.pending.append(ev.state)
                self._advance(fx, touched)
            elif ev.state == READY:
                self._consume_ready(rec, touched)
            else:
                fx.append(Log(f"report {ev.state} from {ev.node} during reset; ignored"))
            return
        if rec.active:
            rec.pending.append(ev.state)
            self._advance(fx, touched)
            return
        if ev.state == READY:
            self._consume_ready(rec, touched)
            return
        # An inactive node changed state on its own: quarantine and reset it.
        rec.unavailable = True
        rec.available = False
        touched.add(ev.node)
        fx.append(SendToNode(ev.node, RESET))
        st.last_action = (
            f"inactive node {ev.node} reported {ev.state}: marked unavailable, RESET sent"
        )
        fx.append(Log(st.last_action))

    def _consume_ready(self, rec: NodeRecord, touched: set[str]) -> None:
        rec.active = False
        rec.last_major = READY
        rec.available = rec.connected and not rec.unavailable
        touched.add(rec.name)

    # -- controller commands --------------------------------------------------

    def _on_command(self, name: str, fx: list[Effect], touched: set[str]) -> None:
        if name == START:
            self._cmd_start(fx, touched)
        elif name == RESET:
            self._cmd_reset(fx, touched)
        else:
            self._cmd_generic(name, fx)

    def _cmd_start(self, fx: list[Effect], touched: set[str]) -> None:
        st = self.state
        if st.phase != COHERENT or st.aggregate != READY:
            st.last_action = f"START refused (phase={st.phase}, aggregate={st.aggregate})"
            fx.append(Log(st.last_action))
            return
        if st.active_nodes():
            st.last_action = "START refused: an epoch is already active"
            fx.append(Log(st.last_action))
            return
        self._apply_staged_config(fx)
        eligible = st.eligible_nodes()
        if len(eligible) < st.config.min_nodes:
            self._latch_error(
                fx,
                f"START with {len(eligible)} available nodes < min {st.config.min_nodes}",
            )
            return
        selected = eligible[: st.config.max_nodes]
        for n in selected:
            st.nodes[n].active = True
            touched.add(n)
        st.error_count = 0
        for n in selected:
            fx.append(SendToNode(n, START))
        self._arm_timer(fx, "command")
        st.last_action = f"START: activated {len(selected)} of {len(eligible)} available nodes"
        fx.append(Log(st.last_action))

    def _cmd_reset(self, fx: list[Effect], touched: set[str]) -> None:
        st = self.state
        self._apply_staged_config(fx)
        connected = sorted(n for n, r in st.nodes.items() if r.connected)
        st.phase = RESETTING
        st.target = None
        st.done.clear()
        st.awaiting = set(connected)
        st.error_count = 0
        for r in st.nodes.values():
            r.pending.clear()
        for n in connected:
            fx.append(SendToNode(n, RESET))
        st.last_action = f"RESET sent to {len(connected)} connected nodes"
        fx.append(Log(st.last_action))
        if connected:
            self._arm_timer(fx, "command")
        self._advance(fx, touched)  # completes immediately when nothing is awaited

    def _cmd_generic(self, name: str, fx: list[Effect]) -> None:
        st = self.state
        if st.phase != COHERENT or st.aggregate == READY:
            st.last_action = (
                f"command {name} refused (phase={st.phase}, aggregate={st.aggregate})"
            )
            fx.append(Log(st.last_action))
            return
        active = st.active_nodes()
        for n in active:
            fx.append(SendToNode(n, name))
        self._arm_timer(fx, "command")
        st.last_action = f"command {name} sent to {len(active)} active nodes"
        fx.append(Log(st.last_action))

    # -- operator actions ------------------------------------------------------

    def _on_operator(self, ev: OperatorAction, fx: list[Effect], touched: set[str]) -> None:
        st = self.state
        rec = st.nodes.get(ev.node)
        if rec is None:
            fx.append(Log(f"operator {ev.kind} on unknown node {ev.node}; ignored"))
            return
        if ev.kind == "clear_unavailable":
            rec.unavailable = False
            touched.add(ev.node)
            st.last_action = f"operator cleared unavailable flag on {ev.node}"
            fx.append(Log(st.last_action))
            return
        if ev.kind in ("kill", "restart"):
            if ev.kind == "restart":
                rec.unavailable = False
                touched.add(ev.node)
            if st.phase == ERRORED:
                # The ERROR latch forbids sends until a controller RESET.
                st.last_action = f"operator {ev.kind} {ev.node}: deferred while in ERROR"
                fx.append(Log(st.last_action))
                return
            if rec.connected:
                fx.append(SendToNode(ev.node, RESET))
                st.last_action = f"operator {ev.kind}: RESET sent to {ev.node}"
            else:
                st.last_action = f"operator {ev.kind} {ev.node}: node not connected"
            fx.append(Log(st.last_action))
            return
        fx.append(Log(f"unknown operator action {ev.kind!r}; ignored"))

    # -- timers ------------------------------------------------------------------

    def _on_timer(self, ev: TimerFired, fx: list[Effect], touched: set[str]) -> None:
        st = self.state
        if st.active_timer != (ev.kind, ev.gen):
            fx.append(Log(f"stale {ev.kind} timer (gen {ev.gen}); ignored"))
            return
        st.active_timer = None
        if st.phase == RESETTING:
            stragglers = sorted(st.awaiting)
            for n in stragglers:
                r = st.nodes[n]
                r.active = False
                r.available = False
                r.unavailable = True
                touched.add(n)
            st.awaiting.clear()
            st.last_action = (
                f"RESET timeout: marked unavailable: {', '.join(stragglers)}"
                if stragglers
                else "RESET timeout with nothing awaited"
            )
            fx.append(Log(st.last_action))
            self._advance(fx, touched)
        elif st.phase in (COHERENT, IN_TRANSITION):
            what = f"transition to {st.target}" if st.target else "response to command"
            self._latch_error(fx, f"timeout waiting for {what}")
        else:
            fx.append(Log(f"{ev.kind} timer fired while {st.phase}; ignored"))

    def _arm_timer(self, fx: list[Effect], kind: str) -> None:
        st = self.state
        if st.active_timer is not None:
            fx.append(CancelTimer(st.active_timer[0]))
        st.timer_gen[kind] += 1
        st.active_timer = (kind, st.timer_gen[kind])
        fx.append(SetTimer(kind, st.config.timeout, st.timer_gen[kind]))

    def _cancel_timer(self, fx: list[Effect]) -> None:
        st = self.state
        if st.active_timer is not None:
            fx.append(CancelTimer(st.active_timer[0]))
            st.active_timer = None

    # -- configuration --------------------------------------------------------------

    def _on_config(self, config: ManagerConfig, fx: list[Effect]) -> None:
        st = self.state
        problems = config.problems()
        if problems:
            fx.append(Log(f"config change rejected: {problems}"))
            return
        st.staged_config = copy.deepcopy(config)
        st.last_action = "config change staged; applies at next START/RESET"
        fx.append(Log(st.last_action))
        fx.append(Display({"kind": "config", **config.as_dict(), "pending": True}))

    def _apply_staged_config(self, fx: list[Effect]) -> None:
        st = self.state
        if st.staged_config is not None:
            st.config = st.staged_config
            st.staged_config = None
            fx.append(Log(f"config applied: {st.config.as_dict()}"))
            fx.append(Display({"kind": "config", **st.config.as_dict(), "pending": False}))

    # -- the coherence algorithm -----------------------------------------------------

    def _advance(self, fx: list[Effect], touched: set[str]) -> None:
        """Consume pending reports until nothing more can happen.

        Runs the held-pending coherence check: one report is popped at a
        time, in node-name order, respecting the rule that a node already
        counted towards the in-progress transition keeps its further
        reports queued until the transition completes.
        """
        st = self.state
        while True:
            if st.phase == ERRORED:
                return

            if st.phase == RESETTING:
                if not st.awaiting:
                    self._cancel_timer(fx)
                    st.phase = COHERENT
                    self._set_aggregate(fx, READY)
                    st.last_action = "RESET complete: all nodes READY"
                    fx.append(Log(st.last_action))
                    continue
                progressed = False
                for n in sorted(st.awaiting):
                    rec = st.nodes[n]
                    if not rec.pending:
                        continue
                    r = rec.pending.popleft()
                    progressed = True
                    if r == READY:
                        self._consume_ready(rec, touched)
                        st.awaiting.discard(n)
                    else:
                        rec.active = False
                        rec.available = False
                        rec.unavailable = True
                        rec.last_major = r
                        st.awaiting.discard(n)
                        touched.add(n)
                        fx.append(
                            Log(f"node {n} reported {r} instead of READY; marked unavailable")
                        )
                    break
                if progressed:
                    continue
                return

            active = st.active_nodes()

            if not active:
                # Nothing left to participate: the epoch is over.
                if st.phase == IN_TRANSITION or st.aggregate != READY or st.active_timer:
                    st.phase = COHERENT
                    st.target = None
                    st.done.clear()
                    self._cancel_timer(fx)
                    self._set_aggregate(fx, READY)
                    continue
                return

            if st.phase == COHERENT:
                popped = False
                for n in active:
                    rec = st.nodes[n]
                    if not rec.pending:
                        continue
                    r = rec.pending.popleft()
                    popped = True
                    if r == READY:
                        self._consume_ready(rec, touched)
                    elif r == st.aggregate:
                        rec.last_major = r
                        fx.append(Log(f"duplicate report {r} from {n}; no change"))
                    else:
                        rec.last_major = r
                        st.phase = IN_TRANSITION
                        st.target = r
                        st.done = {n}
                        if st.active_timer is None:
                            self._arm_timer(fx, "transition")
                    break
                if popped:
                    continue
                return

            # IN_TRANSITION
            assert st.target is not None
            if set(active) <= st.done:
                target = st.target
                st.phase = COHERENT
                st.target = None
                st.done = set()
                self._cancel_timer(fx)
                self._set_aggregate(fx, target)
                st.last_action = f"aggregate {target} ({len(active)} active nodes)"
                fx.append(Log(st.last_action))
                continue
            popped = False
            for n in active:
                if n in st.done:
                    continue  # held pending until the transition completes
                rec = st.nodes[n]
                if not rec.pending:
                    continue
                r = rec.pending.popleft()
                popped = True
                if r == st.target:
                    rec.last_major = r
                    st.done.add(n)
                elif r == READY:
                    self._consume_ready(rec, touched)
                else:
                    self._latch_error(
                        fx,
                        f"node {n} reported {r} while transition to {st.target} in progress",
                    )
                    return
                break
            if popped:
                continue
            return

    # -- aggregate bookkeeping -----------------------------------------------------------

    def _set_aggregate(self, fx: list[Effect], state: str) -> None:
        st = self.state
        if st.aggregate != state:
            st.aggregate = state
            fx.append(PublishAggregate(state))

    def _latch_error(self, fx: list[Effect], reason: str) -> None:
        st = self.state
        if st.phase == ERRORED:
            return
        self._cancel_timer(fx)
        st.phase = ERRORED
        st.target = None
        st.done.clear()
        st.awaiting.clear()
        st.last_action = f"ERROR: {reason}"
        fx.append(Log(st.last_action))
        self._set_aggregate(fx, ERROR)


# ---------------------------------------------------------------------------
# Invariant checking (used by tests and the simulation harness)


def check_invariants(st: ManagerState) -> None:
    """Assert the structural invariants of a manager state.

    A READY last_major with the active flag set is legal only in the window
    between START (which activates nodes that are, by definition, in READY)
    and the node's first report of the new epoch; READY *consumption* always
    deactivates, which is checked behaviorally in tests.
    """
    for r in st.nodes.values():
        assert not (r.unavailable and r.active), f"{r.name}: unavailable implies inactive"
        assert not (r.dead and r.connected), f"{r.name}: dead implies disconnected"
        if r.active:
            assert r.available and r.connected, f"{r.name}: active implies available+connected"
        if r.available:
            assert r.connected and not r.unavailable, f"{r.name}: available implies usable"
        if r.pending:
            assert r.active or r.name in st.awaiting, f"{r.name}: pending on passive node"
    if st.phase == ERRORED:
        assert st.aggregate == ERROR
    if st.aggregate == ERROR:
        assert st.phase in (ERRORED, RESETTING)
    if st.phase == COHERENT:
        assert st.aggregate != ERROR
        for n in st.active_nodes():
            assert st.nodes[n].last_major in (st.aggregate, None), (
                f"coherent but {n} last_major={st.nodes[n].last_major} != {st.aggregate}"
            )
    if st.phase == IN_TRANSITION:
        assert st.target is not None
    if st.active_timer is not None:
        kind, gen = st.active_timer
        assert kind in TIMER_KINDS and st.timer_gen[kind] >= gen


# ---------------------------------------------------------------------------
# Serialization of events and effects (trace files, logs, replay)


_EVENT_TYPES = {
    "node_connected": NodeConnected,
    "node_disconnected": NodeDisconnected,
    "report": Report,
    "command": ControllerCommand,
    "operator": OperatorAction,
    "timer_fired": TimerFired,
    "config_change": ConfigChange,
}
_EVENT_NAMES = {v: k for k, v in _EVENT_TYPES.items()}

_EFFECT_NAMES = {
    SendToNode: "send_to_node",
    SendToAll: "send_to_all",
    SetTimer: "set_timer",
    CancelTimer: "cancel_timer",
    PublishAggregate: "publish",
    Display: "display",
    Log: "log",
}


def event_to_record(ev: Event) -> dict:
    rec = {"type": _EVENT_NAMES[type(ev)]}
    for f in fields(ev):
        value = getattr(ev, f.name)
        if isinstance(value, ManagerConfig):
            value = value.as_dict()
        rec[f.name] = value
    return rec


def event_from_record(rec: dict) -> Event:
    kind = rec["type"]
    cls = _EVENT_TYPES[kind]
    kwargs = {k: v for k, v in rec.items() if k != "type"}
    if kind == "config_change":
        kwargs["config"] = ManagerConfig(**kwargs["config"])
    return cls(**kwargs)


def effect_to_record(fx: Effect) -> dict:
    rec = {"type": _EFFECT_NAMES[type(fx)]}
    for f in fields(fx):
        rec[f.name] = getattr(fx, f.name)
    return rec
