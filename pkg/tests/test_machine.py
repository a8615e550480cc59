"""Machine spec parsing, rule precedence, and report classification."""

import pytest
from hypothesis import given, strategies as st

from mnsm.machine import (
    MachineInstance,
    MachineSpec,
    SpecError,
    StateDescriptor,
    TransitionRule,
    Trigger,
    fire,
    load_spec,
    parse_spec,
    print_spec,
    report_decision,
)

MINIMAL = "machine m\nstate READY class=major color=green initial\n"


def test_parse_minimal():
    spec = parse_spec(MINIMAL)
    assert spec.name == "m"
    assert [s.name for s in spec.states] == ["READY"]
    assert spec.rules == []
    assert spec.initial.name == "READY"


def test_parse_demo_trigger_farm():
    spec = load_spec("demo/trigger-farm.sm")
    assert len(spec.states) >= 6
    classes = {s.name: s.state_class for s in spec.states}
    assert classes["READY"] == "major"
    assert classes["ALLOCATED"] == "major"
    assert classes["CONFIGURED"] == "major"
    assert classes["RUNNING"] == "major"
    assert classes["CONNECTING"] == "minor"
    assert classes["MAPPED"] == "minor"
    assert classes["CRASHED"] == "error"
    assert spec.warnings == []


def test_parse_demo_fastmon():
    spec = load_spec("demo/fastmon.sm")
    majors = {s.name for s in spec.states if s.state_class == "major"}
    assert majors == {"READY", "SAMPLING", "PUBLISHING"}
    assert spec.warnings == []


def test_initial_must_be_ready():
    text = "machine m\nstate IDLE class=major color=green initial\n"
    with pytest.raises(SpecError, match="READY"):
        parse_spec(text)


def test_initial_must_be_major():
    text = "machine m\nstate READY class=minor color=green initial\n"
    with pytest.raises(SpecError):
        parse_spec(text)


def test_missing_initial():
    text = "machine m\nstate READY class=major color=green\n"
    with pytest.raises(SpecError):
        parse_spec(text)


def test_duplicate_state():
    text = MINIMAL + "state READY class=major color=red\n"
    with pytest.raises(SpecError, match="duplicate state"):
        parse_spec(text)


def test_undeclared_target():
    text = MINIMAL + "trans READY on command GO -> NOWHERE\n"
    with pytest.raises(SpecError, match="undeclared state NOWHERE"):
        parse_spec(text)


def test_duplicate_exact_rule():
    text = (
        MINIMAL
        + "state A class=major color=red\n"
        + "trans READY on command GO -> A\n"
        + "trans READY on command GO -> READY\n"
    )
    with pytest.raises(SpecError, match="duplicate rule"):
        parse_spec(text)


def test_syntax_error_carries_line_number():
    text = MINIMAL + "trans READY command GO -> READY\n"
    with pytest.raises(SpecError) as exc:
        parse_spec(text)
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


def test_bad_exit_code():
    text = MINIMAL + "trans READY on exit 999 -> READY\n"
    with pytest.raises(SpecError, match="out of range"):
        parse_spec(text)


def test_unreachable_state_is_warning_not_error():
    text = MINIMAL + "state LOST class=minor color=gray\n"
    spec = parse_spec(text)
    assert any("LOST" in w for w in spec.warnings)


def test_fire_direct_rule():
    text = (
        MINIMAL
        + "state ALLOCATING class=micro color=khaki\n"
        + "trans READY on command START do start_process -> ALLOCATING\n"
    )
    inst = MachineInstance(parse_spec(text))
    out = fire(inst, Trigger.command("START"))
    assert out.actions == ("start_process",)
    assert out.new_state == "ALLOCATING"
    assert inst.current == "ALLOCATING"


def test_fire_exit_nonzero_wildcard():
    text = (
        MINIMAL
        + "state RUNNING class=major color=green\n"
        + "state CRASHED class=error color=red\n"
        + "trans READY on command RUN -> RUNNING\n"
        + "trans * on exit nonzero do cleanup -> CRASHED\n"
    )
    inst = MachineInstance(parse_spec(text))
    fire(inst, Trigger.command("RUN"))
    out = fire(inst, Trigger.exit(9))
    assert out.actions == ("cleanup",)
    assert out.new_state == "CRASHED"
    assert parse_spec(text).state("CRASHED").state_class == "error"


def test_fire_no_rule_keeps_state():
    inst = MachineInstance(parse_spec(MINIMAL))
    assert fire(inst, Trigger.event("unknown-evt")) is None
    assert inst.current == "READY"


def test_exact_beats_wildcard_regardless_of_order():
    text = (
        MINIMAL
        + "state A class=major color=red\n"
        + "state B class=major color=blue\n"
        + "trans * on command GO -> A\n"
        + "trans READY on command GO -> B\n"
    )
    inst = MachineInstance(parse_spec(text))
    assert fire(inst, Trigger.command("GO")).new_state == "B"


def test_first_declared_wins_within_equal_precedence():
    text = (
        MINIMAL
        + "state A class=major color=red\n"
        + "state B class=major color=blue\n"
        + "trans READY on exit any -> A\n"
        + "trans READY on exit 9 -> B\n"
    )
    inst = MachineInstance(parse_spec(text))
    assert fire(inst, Trigger.exit(9)).new_state == "A"


def test_disconnect_trigger():
    text = MINIMAL + "trans * on disconnect do kill_process,cleanup -> READY\n"
    inst = MachineInstance(parse_spec(text))
    out = fire(inst, Trigger.disconnect())
    assert out.actions == ("kill_process", "cleanup")


def test_report_decision():
    spec = load_spec("demo/trigger-farm.sm")
    assert report_decision(spec, "ALLOCATED") == "report-major"
    assert report_decision(spec, "CRASHED") == "report-major"
    assert report_decision(spec, "CONNECTING") == "report-minor"
    assert report_decision(spec, "ALLOCATING") == "suppress"


def test_print_round_trip_on_demo_specs():
    for path in ("demo/trigger-farm.sm", "demo/fastmon.sm"):
        spec = load_spec(path)
        again = parse_spec(print_spec(spec))
        assert again.name == spec.name
        assert again.states == spec.states
        assert again.rules == spec.rules


# ---------------------------------------------------------------------------
# Property tests over randomly generated specs.

_names = st.sampled_from(["ALPHA", "BETA", "GAMMA", "DELTA"])


@st.composite
def _specs(draw):
    extra = draw(st.lists(_names, unique=True, min_size=1, max_size=4))
    states = [StateDescriptor("READY", "major", "green", True)] + [
        StateDescriptor(n, draw(st.sampled_from(["major", "minor", "micro", "error"])), "c")
        for n in extra
    ]
    all_names = [s.name for s in states]
    n_rules = draw(st.integers(0, 6))
    rules = []
    seen = set()
    for _ in range(n_rules):
        frm = draw(st.sampled_from(all_names + ["*"]))
        kind = draw(st.sampled_from(["command", "event", "exit", "disconnect"]))
        if kind == "disconnect":
            value = None
        elif kind == "exit":
            value = draw(st.sampled_from([0, 1, 9, "nonzero", "any"]))
        else:
            value = draw(st.sampled_from(["GO", "STOP", "ping"]))
        if (frm, kind, value) in seen:
            continue
        seen.add((frm, kind, value))
        rules.append(TransitionRule(frm, kind, value, (), draw(st.sampled_from(all_names))))
    return MachineSpec(name="gen", states=states, rules=rules)


@given(_specs())
def test_print_parse_round_trip(spec):
    again = parse_spec(print_spec(spec))
    assert again.states == spec.states
    assert again.rules == spec.rules


@given(
    _specs(),
    st.sampled_from(
        [Trigger.command("GO"), Trigger.event("ping"), Trigger.exit(9), Trigger.disconnect()]
    ),
)
def test_exact_rule_precedence_property(spec, trigger):
    inst = MachineInstance(spec)
    start = inst.current
    out = fire(inst, trigger)
    exact = [r for r in spec.rules if r.from_state == start and r.matches(trigger)]
    wild = [r for r in spec.rules if r.from_state == "*" and r.matches(trigger)]
    if exact:
        assert out is not None and out.new_state == exact[0].to_state
    elif wild:
        assert out is not None and out.new_state == wild[0].to_state
    else:
        assert out is None and inst.current == start


@given(
    _specs(),
    st.sampled_from([Trigger.command("GO"), Trigger.event("ping"), Trigger.exit(0)]),
)
def test_fire_is_deterministic(spec, trigger):
    a, b = MachineInstance(spec), MachineInstance(spec)
    assert fire(a, trigger) == fire(b, trigger)
    assert a.current == b.current
