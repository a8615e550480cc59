"""Configurable daemon state machines: parse, execute, classify reports.

A machine is declared in a line-oriented text file ('#' starts a comment):

    machine <NAME>
    state <NAME> class=<major|minor|micro|error> color=<word> [initial]
    trans <FROM|*> on <trigger> [do <action>[,<action>]*] -> <TO>

    trigger := command <NAME> | exit <0..255|nonzero|any> | event <NAME> | disconnect
    action  := start_process | kill_process | cleanup | shutdown

The initial state must be named READY and have class major.  Rule matching
is deterministic: exact-from rules take precedence over wildcard rules, and
within equal precedence the first-declared rule wins.  Colors are free-form
strings passed through verbatim; the manager assigns them no meaning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

READY = "READY"
WILDCARD = "*"

STATE_CLASSES = ("major", "minor", "micro", "error")
ACTIONS = ("start_process", "kill_process", "cleanup", "shutdown")
TRIGGER_KINDS = ("command", "exit", "event", "disconnect")

REPORT_MAJOR = "report-major"
REPORT_MINOR = "report-minor"
SUPPRESS = "suppress"


class SpecError(ValueError):
    """Raised for an invalid machine spec; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Trigger:
    """A concrete trigger delivered to a machine instance.

    kind is one of command/exit/event/disconnect; value is the command or
    event name, the integer exit code, or None for disconnect.
    """

    kind: str
    value: str | int | None = None

    @staticmethod
    def command(name: str) -> "Trigger":
        return Trigger("command", name)

    @staticmethod
    def exit(code: int) -> "Trigger":
        return Trigger("exit", code)

    @staticmethod
    def event(name: str) -> "Trigger":
        return Trigger("event", name)

    @staticmethod
    def disconnect() -> "Trigger":
        return Trigger("disconnect")


@dataclass(frozen=True)
class StateDescriptor:
    name: str
    state_class: str
    color: str
    is_initial: bool = False


@dataclass(frozen=True)
class TransitionRule:
    from_state: str  # state name or "*"
    trigger_kind: str
    trigger_value: str | int | None  # int code, "nonzero", "any", name, or None
    actions: tuple[str, ...]
    to_state: str

    def matches(self, trigger: Trigger) -> bool:
        if self.trigger_kind != trigger.kind:
            return False
        if self.trigger_kind == "disconnect":
            return True
        if self.trigger_kind == "exit":
            if self.trigger_value == "any":
                return True
            if self.trigger_value == "nonzero":
                return trigger.value != 0
            return self.trigger_value == trigger.value
        return self.trigger_value == trigger.value

    def trigger_text(self) -> str:
        if self.trigger_kind == "disconnect":
            return "disconnect"
        return f"{self.trigger_kind} {self.trigger_value}"


@dataclass
class MachineSpec:
    name: str
    states: list[StateDescriptor]
    rules: list[TransitionRule]
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._by_name = {s.name: s for s in self.states}

    def state(self, name: str) -> StateDescriptor:
        return self._by_name[name]

    def has_state(self, name: str) -> bool:
        return name in self._by_name

    @property
    def initial(self) -> StateDescriptor:
        return next(s for s in self.states if s.is_initial)

    def first_error_state(self) -> StateDescriptor | None:
        return next((s for s in self.states if s.state_class == "error"), None)

    def state_names(self) -> list[str]:
        return [s.name for s in self.states]


@dataclass
class MachineInstance:
    """A running machine: the spec plus the current state name."""

    spec: MachineSpec
    current: str = ""

    def __post_init__(self):
        if not self.current:
            self.current = self.spec.initial.name


@dataclass(frozen=True)
class TransitionOutcome:
    actions: tuple[str, ...]
    new_state: str
    old_state: str


def fire(instance: MachineInstance, trigger: Trigger) -> TransitionOutcome | None:
    """Apply the highest-precedence rule matching (current state, trigger).

    Updates the instance's current state and returns the ordered action
    list plus the new state.  Returns None (and leaves the state unchanged)
    when no rule matches; the caller decides how to treat that.
    """
    rule = _match(instance.spec, instance.current, trigger)
    if rule is None:
        return None
    old = instance.current
    instance.current = rule.to_state
    return TransitionOutcome(actions=rule.actions, new_state=rule.to_state, old_state=old)


def _match(spec: MachineSpec, current: str, trigger: Trigger) -> TransitionRule | None:
    wildcard_hit = None
    for rule in spec.rules:
        if not rule.matches(trigger):
            continue
        if rule.from_state == current:
            return rule
        if rule.from_state == WILDCARD and wildcard_hit is None:
            wildcard_hit = rule
    return wildcard_hit


def report_decision(spec: MachineSpec, new_state: str) -> str:
    """Decide what a transition into new_state sends to the manager.

    major and error states are reported in full (error states keep their
    distinct names but carry class=error), minor states are display-only,
    micro states are suppressed entirely.
    """
    cls = spec.state(new_state).state_class
    if cls in ("major", "error"):
        return REPORT_MAJOR
    if cls == "minor":
        return REPORT_MINOR
    return SUPPRESS


def parse_spec(text: str) -> MachineSpec:
    """Parse and validate a machine spec file's contents."""
    name = None
    states: list[StateDescriptor] = []
    rules: list[tuple[int, TransitionRule]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        kw = words[0]
        if kw == "machine":
            if name is not None:
                raise SpecError("duplicate machine line", lineno)
            if len(words) != 2:
                raise SpecError("expected: machine <NAME>", lineno)
            name = words[1]
        elif kw == "state":
            states.append(_parse_state(words, lineno, states))
        elif kw == "trans":
            rules.append((lineno, _parse_trans(words, lineno)))
        else:
            raise SpecError(f"unknown keyword {kw!r}", lineno)

    if name is None:
        raise SpecError("missing machine line")
    _validate_states(states)
    _validate_rules(states, rules)
    spec = MachineSpec(name=name, states=states, rules=[r for _, r in rules])
    spec.warnings = _reachability_warnings(spec)
    return spec


def _parse_state(words: list[str], lineno: int, so_far: list[StateDescriptor]) -> StateDescriptor:
    if len(words) < 4:
        raise SpecError("expected: state <NAME> class=<c> color=<w> [initial]", lineno)
    sname = words[1]
    cls = color = None
    initial = False
    for w in words[2:]:
        if w == "initial":
            initial = True
        elif w.startswith("class="):
            cls = w[len("class="):]
        elif w.startswith("color="):
            color = w[len("color="):]
        else:
            raise SpecError(f"unexpected token {w!r} in state declaration", lineno)
    if cls not in STATE_CLASSES:
        raise SpecError(f"bad or missing class for state {sname}", lineno)
    if not color:
        raise SpecError(f"missing color for state {sname}", lineno)
    if any(s.name == sname for s in so_far):
        raise SpecError(f"duplicate state {sname}", lineno)
    return StateDescriptor(name=sname, state_class=cls, color=color, is_initial=initial)


def _parse_trans(words: list[str], lineno: int) -> TransitionRule:
    # trans <FROM|*> on <trigger...> [do a[,b]*] -> <TO>
    try:
        if words[2] != "on":
            raise SpecError("expected 'on' after the from-state", lineno)
        from_state = words[1]
        idx = 3
        tkind = words[idx]
        idx += 1
        if tkind not in TRIGGER_KINDS:
            raise SpecError(f"unknown trigger kind {tkind!r}", lineno)
        tvalue: str | int | None = None
        if tkind != "disconnect":
            tvalue = words[idx]
            idx += 1
            if tkind == "exit":
                if tvalue not in ("nonzero", "any"):
                    try:
                        tvalue = int(tvalue)
                    except ValueError:
                        raise SpecError(f"bad exit code {tvalue!r}", lineno) from None
                    if not 0 <= tvalue <= 255:
                        raise SpecError(f"exit code {tvalue} out of range 0..255", lineno)
        actions: tuple[str, ...] = ()
        if words[idx] == "do":
            idx += 1
            actions = tuple(a for a in words[idx].split(",") if a)
            idx += 1
            for a in actions:
                if a not in ACTIONS:
                    raise SpecError(f"unknown action {a!r}", lineno)
        if words[idx] != "->":
            raise SpecError("expected '->' before the target state", lineno)
        to_state = words[idx + 1]
        if idx + 2 != len(words):
            raise SpecError("trailing tokens after target state", lineno)
    except IndexError:
        raise SpecError("truncated trans line", lineno) from None
    return TransitionRule(from_state, tkind, tvalue, actions, to_state)


def _validate_states(states: list[StateDescriptor]) -> None:
    initials = [s for s in states if s.is_initial]
    if len(initials) != 1 or initials[0].name != READY or initials[0].state_class != "major":
        raise SpecError(
            "machine must declare exactly one initial state, named READY with class major"
        )


def _validate_rules(states: list[StateDescriptor], rules: list[tuple[int, TransitionRule]]) -> None:
    names = {s.name for s in states}
    seen: set[tuple] = set()
    for lineno, rule in rules:
        if rule.from_state != WILDCARD and rule.from_state not in names:
            raise SpecError(f"rule from undeclared state {rule.from_state}", lineno)
        if rule.to_state not in names:
            raise SpecError(f"rule targets undeclared state {rule.to_state}", lineno)
        key = (rule.from_state, rule.trigger_kind, rule.trigger_value)
        if key in seen:
            raise SpecError(
                f"duplicate rule for {rule.from_state} on {rule.trigger_text()}", lineno
            )
        seen.add(key)


def _reachability_warnings(spec: MachineSpec) -> list[str]:
    # Wildcard rules make their target reachable from every state.
    reachable = {READY}
    frontier = [READY]
    while frontier:
        cur = frontier.pop()
        for rule in spec.rules:
            if rule.from_state in (cur, WILDCARD) and rule.to_state not in reachable:
                reachable.add(rule.to_state)
                frontier.append(rule.to_state)
    return [
        f"state {s.name} is unreachable from READY"
        for s in spec.states
        if s.name not in reachable
    ]


def print_spec(spec: MachineSpec) -> str:
    """Render a spec canonically such that parse_spec(print_spec(s)) == s."""
    out = [f"machine {spec.name}"]
    for s in spec.states:
        line = f"state {s.name} class={s.state_class} color={s.color}"
        if s.is_initial:
            line += " initial"
        out.append(line)
    for r in spec.rules:
        line = f"trans {r.from_state} on {r.trigger_text()}"
        if r.actions:
            line += " do " + ",".join(r.actions)
        line += f" -> {r.to_state}"
        out.append(line)
    return "\n".join(out) + "\n"


def load_spec(path: str) -> MachineSpec:
    with open(path, "r", encoding="utf-8") as f:
        return parse_spec(f.read())
