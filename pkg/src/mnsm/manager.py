"""The deployable manager: real I/O around the pure aggregation core.

Every input source (daemon sessions, controller sessions, operator API,
timer firings) pushes events into one queue; a single consumer applies them
to the core in arrival order and executes the returned effects, so the
core's determinism is preserved end to end.  Timers carry the core's
generation counter, which makes a firing that raced a cancellation
harmlessly stale.

Peers are classified by their first message: a daemon opens with the
STATE_REPORT announcing its current state, a controller opens with a
COMMAND (the pseudo-command WATCH attaches without issuing anything).
Controllers receive the current aggregate on attach and every published
aggregate thereafter, in order.
"""

from __future__ import annotations

import argparse
import logging
import queue
import threading
import time
import uuid

from mnsm.aggregator import (
    Aggregator,
    CancelTimer,
    ConfigChange,
    ControllerCommand,
    Display,
    Effect,
    Log,
    ManagerConfig,
    NodeConnected,
    NodeDisconnected,
    OperatorAction,
    PublishAggregate,
    Report,
    SendToAll,
    SendToNode,
    SetTimer,
    TimerFired,
)
from mnsm.wire.messages import WireMessage, state_report
from mnsm.wire.registry import RegistryClient, registry_address
from mnsm.wire.session import Session, SessionListener

log = logging.getLogger(__name__)

WATCH_COMMAND = "WATCH"
SUBSCRIBER_QUEUE = 1000


class ManagerService:
    def __init__(
        self,
        config: ManagerConfig,
        registry: str | None = None,
        name: str = "manager",
        listen_host: str = "127.0.0.1",
        listen_port: int = 0,
        liveness: float = 2.0,
        reregister_every: float = 10.0,
    ):
        self.name = name
        self.agg = Aggregator(config)
        self.lock = threading.RLock()
        self.events: queue.Queue = queue.Queue()
        self.liveness = liveness
        self.reregister_every = reregister_every
        self.registry_addr = registry or registry_address()
        self._client = RegistryClient(self.registry_addr, identity=name)

        self.node_sessions: dict[str, Session] = {}
        self.controllers: list[Session] = []
        self.last_published: str = self.agg.state.aggregate
        self._timers: dict[str, threading.Timer] = {}
        self._subscribers: dict[int, queue.Queue] = {}
        self._next_sub = 0
        self._log_waiters: dict[str, queue.Queue] = {}
        self._stop = threading.Event()

        self.listener = SessionListener(
            name,
            on_message=self._on_session_message,
            on_close=self._on_session_close,
            host=listen_host,
            port=listen_port,
            liveness_interval=liveness,
        )

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> "ManagerService":
        self.listener.start()
        threading.Thread(target=self._core_loop, daemon=True).start()
        threading.Thread(target=self._registration_loop, daemon=True).start()
        log.info("manager %s listening on %s", self.name, self.listener.address)
        return self

    def stop(self) -> None:
        self._stop.set()
        self.events.put(None)
        for t in self._timers.values():
            t.cancel()
        self._client.bye(self.name)
        self.listener.stop()

    def _registration_loop(self) -> None:
        while not self._stop.is_set():
            try:
                self._client.register(self.name, "manager", self.listener.address)
            except Exception as exc:
                log.debug("manager registration failed: %s", exc)
            if self._stop.wait(self.reregister_every):
                return

    # -- event intake ----------------------------------------------------------

    def submit(self, event) -> None:
        self.events.put(event)

    def _on_session_message(self, session: Session, msg: WireMessage) -> None:
        if msg.type == "STATE_REPORT":
            node = msg.sender
            current = self.node_sessions.get(node)
            if current is not session:
                self.node_sessions[node] = session
                if current is not None and not current.closed:
                    current.close("replaced by a newer session")
                self.submit(NodeConnected(node))
            self.submit(
                Report(node, msg["state"], msg["class"], msg.get("color", ""),
                       msg.get("detail", ""))
            )
        elif msg.type == "COMMAND":
            if session not in self.controllers:
                self.controllers.append(session)
                session.send(self._aggregate_report())
            if msg["name"] != WATCH_COMMAND:
                self.submit(ControllerCommand(msg["name"]))
        elif msg.type == "LIST_REPLY":
            waiter = self._log_waiters.get(msg.get("req", ""))
            if waiter is not None:
                waiter.put(msg["records"])
        else:
            log.warning("unexpected %s from %s", msg.type, msg.sender)

    def _on_session_close(self, session: Session, reason: str) -> None:
        node = session.peer
        if node and self.node_sessions.get(node) is session:
            del self.node_sessions[node]
            self.submit(NodeDisconnected(node))
        if session in self.controllers:
            self.controllers.remove(session)

    # -- core loop and effects ---------------------------------------------------

    def _core_loop(self) -> None:
        while True:
            event = self.events.get()
            if event is None:
                return
            with self.lock:
                effects = self.agg.ingest(event)
                for fx in effects:
                    try:
                        self._execute(fx)
                    except Exception:
                        log.exception("effect %r failed", fx)

    def _execute(self, fx: Effect) -> None:
        if isinstance(fx, SendToNode):
            session = self.node_sessions.get(fx.node)
            if session is None or session.closed:
                log.info("cannot send %s to %s: no session", fx.command, fx.node)
            else:
                session.send(WireMessage("COMMAND", self.name, 0, {"name": fx.command}))
        elif isinstance(fx, SendToAll):
            records = self.agg.state.nodes
            for node in sorted(records):
                rec = records[node]
                if fx.selector == "active" and not rec.active:
                    continue
                if fx.selector == "connected" and not rec.connected:
                    continue
                self._execute(SendToNode(node, fx.command))
        elif isinstance(fx, SetTimer):
            old = self._timers.pop(fx.kind, None)
            if old is not None:
                old.cancel()
            timer = threading.Timer(fx.timeout, self.submit, [TimerFired(fx.kind, fx.gen)])
            timer.daemon = True
            self._timers[fx.kind] = timer
            timer.start()
        elif isinstance(fx, CancelTimer):
            timer = self._timers.pop(fx.kind, None)
            if timer is not None:
                timer.cancel()
        elif isinstance(fx, PublishAggregate):
            self.last_published = fx.state
            report = self._aggregate_report()
            for controller in list(self.controllers):
                controller.send(report)
        elif isinstance(fx, Display):
            self._fan_out(fx.update)
        elif isinstance(fx, Log):
            log.info("core: %s", fx.line)

    def _aggregate_report(self) -> WireMessage:
        state = self.last_published
        cls = "error" if state == "ERROR" else "major"
        return state_report(self.name, state, cls)

    # -- display fan-out ------------------------------------------------------------

    def _fan_out(self, update: dict) -> None:
        dead = []
        for sub_id, q in self._subscribers.items():
            try:
                q.put_nowait(update)
            except queue.Full:
                dead.append(sub_id)
        for sub_id in dead:
            self._subscribers.pop(sub_id, None)

    def subscribe(self) -> tuple[int, queue.Queue]:
        """Register an event-stream consumer; its queue starts with a snapshot."""
        with self.lock:
            q: queue.Queue = queue.Queue(maxsize=SUBSCRIBER_QUEUE)
            for rec in self.snapshot_records():
                q.put_nowait(rec)
            self._next_sub += 1
            self._subscribers[self._next_sub] = q
            return self._next_sub, q

    def unsubscribe(self, sub_id: int) -> None:
        with self.lock:
            self._subscribers.pop(sub_id, None)

    # -- snapshots for the operator API ------------------------------------------------

    def snapshot_records(self) -> list[dict]:
        st = self.agg.state
        records = [st.nodes[n].tile() for n in sorted(st.nodes)]
        records.append({"kind": "aggregate", "state": st.aggregate})
        records.append({"kind": "action", "text": st.last_action})
        records.append(
            {
                "kind": "config",
                **self.effective_config().as_dict(),
                "pending": st.staged_config is not None,
            }
        )
        return records

    def snapshot(self) -> dict:
        with self.lock:
            st = self.agg.state
            return {
                "nodes": [st.nodes[n].tile() for n in sorted(st.nodes)],
                "aggregate": st.aggregate,
                "last_action": st.last_action,
            }

    def effective_config(self) -> ManagerConfig:
        st = self.agg.state
        return st.staged_config if st.staged_config is not None else st.config

    def config_view(self) -> dict:
        with self.lock:
            view = self.effective_config().as_dict()
            view["pending"] = self.agg.state.staged_config is not None
            return view

    def aggregate_view(self) -> dict:
        with self.lock:
            return {"state": self.agg.state.aggregate, "last_action": self.agg.state.last_action}

    # -- operator actions ---------------------------------------------------------------

    def apply_config_change(self, fields: dict) -> tuple[bool, dict]:
        try:
            config = ManagerConfig(
                min_nodes=int(fields["min_nodes"]),
                max_nodes=int(fields["max_nodes"]),
                max_errors=int(fields["max_errors"]),
                timeout=float(fields["timeout"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            return False, {"config": f"malformed: {exc}"}
        problems = config.problems()
        if problems:
            return False, problems
        self.submit(ConfigChange(config))
        return True, {}

    def node_action(self, node: str, action: str) -> tuple[bool, str]:
        with self.lock:
            known = node in self.agg.state.nodes
        if not known:
            return False, "unknown-node"
        if action == "kill" and node not in self.node_sessions:
            return False, "node-not-connected"
        self.submit(OperatorAction(action, node))
        return True, "ok"

    def view_log(self, node: str, lines: int, timeout: float = 5.0) -> list[str]:
        """Fetch the tail of a node's log through the daemon session."""
        session = self.node_sessions.get(node)
        if session is None or session.closed:
            raise ConnectionError("node-not-connected")
        req = uuid.uuid4().hex
        waiter: queue.Queue = queue.Queue(maxsize=1)
        self._log_waiters[req] = waiter
        try:
            session.send(
                WireMessage("COMMAND", self.name, 0,
                            {"name": "_LOGTAIL", "lines": lines, "req": req})
            )
            return waiter.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("log-tail-timeout") from None
        finally:
            self._log_waiters.pop(req, None)


# ---------------------------------------------------------------------------
# CLI entry points


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="mnsm-manager", description="multi-node state manager")
    ap.add_argument("--registry", default=None, help="host:port of the registry")
    ap.add_argument("--name", default="manager")
    ap.add_argument("--listen-host", default="127.0.0.1")
    ap.add_argument("--listen-port", type=int, default=0)
    ap.add_argument("--operator-port", type=int, default=8900)
    ap.add_argument("--min", dest="min_nodes", type=int, default=1)
    ap.add_argument("--max", dest="max_nodes", type=int, default=1000)
    ap.add_argument("--max-errors", type=int, default=0)
    ap.add_argument("--timeout", type=float, default=30.0, help="seconds")
    ap.add_argument("--liveness", type=float, default=2.0)
    ap.add_argument("--static-dir", default=None, help="console bundle to serve at /")
    args = ap.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    config = ManagerConfig(args.min_nodes, args.max_nodes, args.max_errors, args.timeout)
    problems = config.problems()
    if problems:
        print(f"fatal: bad configuration: {problems}")
        return 2

    service = ManagerService(
        config,
        registry=registry_address(args.registry),
        name=args.name,
        listen_host=args.listen_host,
        listen_port=args.listen_port,
        liveness=args.liveness,
    ).start()

    from mnsm.opserver import OperatorServer

    operator = OperatorServer(service, port=args.operator_port, static_dir=args.static_dir)
    operator.start()
    print(f"manager ready: sessions on {service.listener.address}, "
          f"operator API on http://127.0.0.1:{operator.port}/", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        operator.stop()
        service.stop()
    return 0


def ctl_main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="mnsm-ctl", description="controller stub")
    ap.add_argument("--registry", default=None)
    ap.add_argument("--manager", default="manager")
    ap.add_argument("--liveness", type=float, default=2.0,
                    help="heartbeat interval; use the manager's value")
    sub = ap.add_subparsers(dest="cmd", required=True)
    sendp = sub.add_parser("send", help="send a command to the manager")
    sendp.add_argument("name", help="START, RESET, or any daemon command")
    sub.add_parser("watch", help="print the aggregate state stream")
    args = ap.parse_args(argv)

    client = RegistryClient(registry_address(args.registry), identity="ctl")

    def on_message(session, msg):
        if msg.type == "STATE_REPORT":
            print(f"aggregate {msg['state']} ({msg['class']})", flush=True)

    def connect(on_close):
        record = client.lookup(args.manager)
        if record is None:
            raise ConnectionError(f"{args.manager} is not registered")
        host, port = record.host_port()
        return Session.connect(host, port, "ctl", on_message, on_close,
                               liveness_interval=args.liveness)

    if args.cmd == "send":
        try:
            session = connect(lambda s, r: None)
        except (ConnectionError, OSError) as exc:
            print(f"error: {exc}", flush=True)
            return 1
        session.send(WireMessage("COMMAND", "ctl", 0, {"name": args.name}))
        time.sleep(0.3)  # let the snapshot aggregate print
        session.send(WireMessage("BYE", "ctl"))
        session.close("done")
        return 0

    # watch: stay attached across manager restarts
    while True:
        lost = threading.Event()
        try:
            session = connect(lambda s, r: lost.set())
        except (ConnectionError, OSError) as exc:
            print(f"(manager unreachable: {exc}; retrying)", flush=True)
            time.sleep(1.0)
            continue
        session.send(WireMessage("COMMAND", "ctl", 0, {"name": WATCH_COMMAND}))
        try:
            lost.wait()
            print("(session lost; reconnecting)", flush=True)
        except KeyboardInterrupt:
            session.close("interrupted")
            return 0


if __name__ == "__main__":
    raise SystemExit(main())
