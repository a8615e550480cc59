"""The per-node daemon: one managed child, one machine, one manager session.

Three input sources (manager session, child stdout pipe, child exit) are
multiplexed into a single trigger queue; all machine state changes happen on
the single consumer of that queue, in arrival order.  Commands become
command triggers; child terminations always yield exactly one exit trigger
(signal deaths map to 128+signum); lines of the form "EVENT <name>" on the
child's stdout become event triggers, everything else is only logged.

Unmatched triggers are logged and ignored, with one exception: an unmatched
exit trigger forces a transition to the machine's first declared error-class
state, because a crashed child must never pass silently.

State changes are reported to the manager according to their class; while
the session is down reports are dropped, and on every (re)connect the
daemon announces its current state once so the manager can rebuild its
ledger.
"""

from __future__ import annotations

import argparse
import logging
import logging.handlers
import os
import queue
import shlex
import shutil
import signal
import socket
import subprocess
import sys
import threading
import time

from mnsm.machine import (
    MachineInstance,
    MachineSpec,
    Trigger,
    fire,
    load_spec,
    report_decision,
)
from mnsm.wire.messages import WireMessage, state_report
from mnsm.wire.registry import RegistryClient, registry_address
from mnsm.wire.session import Session

log = logging.getLogger(__name__)

LOG_ROTATE_BYTES = 10 * 1024 * 1024
EVENT_PREFIX = "EVENT "


def parse_child_line(line: str) -> str | None:
    """Return the event name for a well-formed "EVENT <name>" line, else None."""
    line = line.rstrip("\n")
    if line.startswith(EVENT_PREFIX):
        name = line[len(EVENT_PREFIX):].strip()
        if name and " " not in name:
            return name
    return None


def exit_code_of(returncode: int) -> int:
    """Map a Popen returncode to the exit-code trigger value (128+signal for kills)."""
    return returncode if returncode >= 0 else 128 - returncode


class _Child:
    """One spawned managed process with pipe readers and an exit waiter."""

    def __init__(self, keeper: "Nodekeeper", cmdline: list[str], gen: int):
        self.gen = gen
        env = dict(os.environ)
        env["MNSM_SCRATCH"] = keeper.scratch_dir
        os.makedirs(keeper.scratch_dir, exist_ok=True)
        self.proc = subprocess.Popen(
            cmdline,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            bufsize=1,
            env=env,
        )
        self._keeper = keeper
        threading.Thread(target=self._read_stdout, daemon=True).start()
        threading.Thread(target=self._read_stderr, daemon=True).start()
        threading.Thread(target=self._wait, daemon=True).start()

    @property
    def alive(self) -> bool:
        return self.proc.poll() is None

    def _read_stdout(self):
        for line in self.proc.stdout:
            self._keeper.log_line(line.rstrip("\n"))
            name = parse_child_line(line)
            if name is not None:
                self._keeper.triggers.put(("event", name, self.gen))
        self.proc.stdout.close()

    def _read_stderr(self):
        for line in self.proc.stderr:
            self._keeper.log_line(line.rstrip("\n"))
        self.proc.stderr.close()

    def _wait(self):
        code = exit_code_of(self.proc.wait())
        self._keeper.triggers.put(("exit", code, self.gen))


class Nodekeeper:
    def __init__(
        self,
        spec: MachineSpec,
        name: str,
        exec_cmd: str,
        log_dir: str,
        manager_name: str = "manager",
        registry: str | None = None,
        liveness: float = 2.0,
        kill_grace: float = 5.0,
        reregister_every: float = 10.0,
    ):
        self.spec = spec
        self.name = name
        self.machine = MachineInstance(spec)
        self.cmdline = shlex.split(exec_cmd) if exec_cmd else []
        self.manager_name = manager_name
        self.registry_addr = registry or registry_address()
        self.liveness = liveness
        self.kill_grace = kill_grace
        self.reregister_every = reregister_every

        os.makedirs(log_dir, exist_ok=True)
        self.log_path = os.path.join(log_dir, f"{name}.log")
        self.scratch_dir = os.path.join(log_dir, f"{name}.scratch")
        handler = logging.handlers.RotatingFileHandler(
            self.log_path, maxBytes=LOG_ROTATE_BYTES, backupCount=1
        )
        handler.setFormatter(logging.Formatter("%(message)s"))
        self._file_log = logging.Logger(f"mnsm.node.{name}")
        self._file_log.addHandler(handler)

        self.triggers: queue.Queue = queue.Queue()
        self.child: _Child | None = None
        self.child_gen = 0
        self._drained_gen = 0
        self.session: Session | None = None
        self.stopping = threading.Event()
        self._client = RegistryClient(self.registry_addr, identity=name)

    # -- logging ------------------------------------------------------------

    def log_line(self, line: str) -> None:
        self._file_log.info(line)

    def log_note(self, line: str) -> None:
        self._file_log.info("[mnsm] %s", line)
        log.info("%s: %s", self.name, line)

    def tail_log(self, lines: int) -> list[str]:
        try:
            with open(self.log_path, "r", encoding="utf-8", errors="replace") as f:
                return [ln.rstrip("\n") for ln in f.readlines()[-lines:]]
        except OSError:
            return []

    # -- child actions --------------------------------------------------------

    def execute_action(self, action: str) -> None:
        if action == "start_process":
            self._start_process()
        elif action == "kill_process":
            self._kill_process()
        elif action == "cleanup":
            self._cleanup()
        elif action == "shutdown":
            self._shutdown()
        else:
            self.log_note(f"unknown action {action!r} ignored")

    def _start_process(self) -> None:
        if self.child is not None and self.child.alive:
            self.log_note("start_process ignored: a child is already running")
            return
        if not self.cmdline:
            self.log_note("start_process ignored: no --exec configured")
            return
        self.child_gen += 1
        try:
            self.child = _Child(self, self.cmdline, self.child_gen)
            self.log_note(f"started child pid {self.child.proc.pid}: {self.cmdline}")
        except OSError as exc:
            self.child = None
            self.log_note(f"spawn failed: {exc}")
            self.triggers.put(("exit", 127, self.child_gen))

    def _kill_process(self) -> None:
        if self.child is None or not self.child.alive:
            return  # kill on absent child is a no-op
        proc = self.child.proc
        proc.terminate()
        try:
            proc.wait(timeout=self.kill_grace)
        except subprocess.TimeoutExpired:
            self.log_note(f"child ignored the graceful signal for {self.kill_grace}s; killing")
            proc.kill()
            proc.wait()

    def _cleanup(self) -> None:
        shutil.rmtree(self.scratch_dir, ignore_errors=True)
        if self.child is not None and not self.child.alive:
            self._drained_gen = self.child.gen  # discard buffered pipe events
            self.child = None

    def _shutdown(self) -> None:
        self.log_note("shutting down")
        self.stopping.set()
        self._client.bye(self.name)
        if self.session is not None:
            self.session.close("daemon shutdown")

    # -- reporting ----------------------------------------------------------------

    def emit_report(self, new_state: str, detail: str = "") -> None:
        decision = report_decision(self.spec, new_state)
        if decision == "suppress":
            return
        desc = self.spec.state(new_state)
        msg = state_report(self.name, new_state, desc.state_class, desc.color, detail)
        self.send_report(msg)

    def send_report(self, msg: WireMessage) -> None:
        session = self.session
        if session is None or session.closed or not session.send(msg):
            self.log_note(f"report {msg.get('state')} dropped: no manager session")

    # -- trigger processing -----------------------------------------------------------

    def process_trigger(self, trig: Trigger, detail: str = "") -> None:
        outcome = fire(self.machine, trig)
        if outcome is None:
            if trig.kind == "exit":
                err = self.spec.first_error_state()
                if err is None:
                    self.log_note(
                        f"child exit {trig.value} matched no rule and the machine "
                        "declares no error state; staying put"
                    )
                    return
                old = self.machine.current
                self.machine.current = err.name
                self.log_note(f"no rule for exit {trig.value}: forcing {old} -> {err.name}")
                self.emit_report(err.name, detail=f"exit {trig.value} (no rule)")
            else:
                self.log_note(f"no rule for {trig.kind} {trig.value!r} in {self.machine.current}")
            return
        self.log_note(
            f"{trig.kind} {trig.value!r}: {outcome.old_state} -> {outcome.new_state} "
            f"actions={list(outcome.actions)}"
        )
        for action in outcome.actions:
            self.execute_action(action)
        self.emit_report(outcome.new_state, detail=detail)

    def handle_queue_item(self, item: tuple) -> None:
        kind = item[0]
        if kind == "command":
            self.process_trigger(Trigger.command(item[1]))
        elif kind == "event":
            _, name, gen = item
            if gen != self.child_gen or gen <= self._drained_gen:
                self.log_note(f"stale pipe event {name!r} (child gen {gen}); dropped")
                return
            self.process_trigger(Trigger.event(name))
        elif kind == "exit":
            _, code, gen = item
            if gen != self.child_gen:
                self.log_note(f"late exit {code} from superseded child gen {gen}; dropped")
                return
            self.process_trigger(Trigger.exit(code), detail=f"exit {code}")
        elif kind == "disconnect":
            self.process_trigger(Trigger.disconnect())
        elif kind == "sigterm":
            self._kill_process()
            self._cleanup()
            self._shutdown()
        elif kind == "announce":
            desc = self.spec.state(self.machine.current)
            self.send_report(
                state_report(self.name, desc.name, desc.state_class, desc.color)
            )

    # -- service loop ----------------------------------------------------------------

    def run(self) -> None:
        threading.Thread(target=self._registration_loop, daemon=True).start()
        threading.Thread(target=self._connection_loop, daemon=True).start()
        while not self.stopping.is_set():
            try:
                item = self.triggers.get(timeout=0.2)
            except queue.Empty:
                continue
            self.handle_queue_item(item)
        self.log_note("daemon loop ended")

    def _registration_loop(self) -> None:
        address = f"{socket.gethostname()}:0"  # daemons dial out; no listen port
        while not self.stopping.is_set():
            try:
                self._client.register(self.name, "daemon", address)
            except Exception as exc:
                log.debug("%s: registration failed: %s", self.name, exc)
            if self.stopping.wait(self.reregister_every):
                return

    def _connection_loop(self) -> None:
        delay = 0.2
        while not self.stopping.is_set():
            session = self.session
            if session is not None and not session.closed:
                time.sleep(0.2)
                continue
            try:
                record = self._client.lookup(self.manager_name)
                if record is None:
                    raise ConnectionError(f"{self.manager_name} not registered")
                host, port = record.host_port()
                self.session = Session.connect(
                    host,
                    port,
                    self.name,
                    on_message=self._on_session_message,
                    on_close=self._on_session_close,
                    liveness_interval=self.liveness,
                )
                self.triggers.put(("announce",))
                self.log_note(f"connected to {self.manager_name} at {host}:{port}")
                delay = 0.2
            except Exception as exc:
                log.debug("%s: connect failed: %s", self.name, exc)
                time.sleep(delay)
                delay = min(delay * 2, 3.0)

    def _on_session_message(self, session: Session, msg: WireMessage) -> None:
        if msg.type != "COMMAND":
            self.log_note(f"unexpected {msg.type} from manager; ignored")
            return
        name = msg["name"]
        if name.startswith("_"):
            self._service_command(session, msg)
        else:
            self.triggers.put(("command", name))

    def _service_command(self, session: Session, msg: WireMessage) -> None:
        if msg["name"] == "_LOGTAIL":
            lines = self.tail_log(int(msg.get("lines", 200)))
            session.send(
                WireMessage(
                    "LIST_REPLY",
                    self.name,
                    0,
                    {"records": lines, "req": msg.get("req", "")},
                )
            )
        else:
            self.log_note(f"unknown service command {msg['name']!r}")

    def _on_session_close(self, session: Session, reason: str) -> None:
        if session is self.session and not self.stopping.is_set():
            self.log_note(f"manager session lost: {reason}")
            self.triggers.put(("disconnect",))


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="mnsm-daemon", description="per-node state daemon")
    ap.add_argument("--spec", required=True, help="machine spec file")
    ap.add_argument("--name", default=socket.gethostname())
    ap.add_argument("--manager", default="manager", help="manager service name")
    ap.add_argument("--log-dir", default="./logs")
    ap.add_argument("--registry", default=None, help="host:port of the registry")
    ap.add_argument("--exec", dest="exec_cmd", default="", help="managed child command line")
    ap.add_argument("--liveness", type=float, default=2.0)
    ap.add_argument("--kill-grace", type=float, default=5.0)
    args = ap.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    try:
        spec = load_spec(args.spec)
    except Exception as exc:
        print(f"fatal: bad machine spec: {exc}", file=sys.stderr)
        return 2
    for warning in spec.warnings:
        print(f"warning: {warning}", file=sys.stderr)

    keeper = Nodekeeper(
        spec,
        args.name,
        args.exec_cmd,
        args.log_dir,
        manager_name=args.manager,
        registry=registry_address(args.registry),
        liveness=args.liveness,
        kill_grace=args.kill_grace,
    )
    signal.signal(signal.SIGTERM, lambda *_: keeper.triggers.put(("sigterm",)))
    try:
        keeper.run()
    except KeyboardInterrupt:
        keeper._shutdown()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
