"""Wire layer: encoding round-trips, fuzzing, registry, sessions, liveness."""

import queue
import random
import socket
import time

import pytest
from hypothesis import given, strategies as st

from mnsm.wire import (
    LivenessTracker,
    MalformedFrame,
    MissingField,
    RegistryClient,
    RegistryServer,
    RegistryUnreachable,
    Session,
    SessionListener,
    UnknownType,
    WireError,
    WireMessage,
    decode_message,
    encode_message,
)
from mnsm.wire.messages import MESSAGE_TYPES, state_report

# ---------------------------------------------------------------------------
# Encoding


def test_round_trip_state_report():
    msg = state_report("node-a", "RUNNING", "major", "green", "", seq=7)
    msg.seq = 7
    assert decode_message(encode_message(msg)) == msg


def test_round_trip_preserves_unknown_fields():
    msg = WireMessage("COMMAND", "ctl", 3, {"name": "START", "x_custom": [1, 2]})
    assert decode_message(encode_message(msg)) == msg


def test_truncated_line_is_malformed():
    frame = encode_message(WireMessage("LIST", "a", 0, {}))
    with pytest.raises(MalformedFrame):
        decode_message(frame[: len(frame) // 2])


def test_unknown_type_rejected():
    with pytest.raises(UnknownType):
        decode_message(b'{"type":"NOPE","sender":"x","seq":0}')


def test_missing_required_field_rejected():
    with pytest.raises(MissingField):
        decode_message(b'{"type":"COMMAND","sender":"x","seq":0}')
    with pytest.raises(MissingField):
        decode_message(b'{"sender":"x","seq":0}')


_payloads = st.dictionaries(
    st.text(st.characters(min_codepoint=97, max_codepoint=122), min_size=1, max_size=8),
    st.one_of(st.integers(), st.text(max_size=12), st.booleans()),
    max_size=4,
)


@given(
    mtype=st.sampled_from(sorted(MESSAGE_TYPES)),
    sender=st.text(max_size=10),
    seq=st.integers(min_value=0, max_value=2**31),
    extra=_payloads,
)
def test_round_trip_property(mtype, sender, seq, extra):
    fields = {k: v for k, v in extra.items() if k not in ("type", "sender", "seq")}
    for key in MESSAGE_TYPES[mtype]:
        fields.setdefault(key, "v")
    msg = WireMessage(mtype, sender, seq, fields)
    assert decode_message(encode_message(msg)) == msg


def test_reserved_payload_fields_rejected():
    from mnsm.wire.messages import MalformedFrame as MF

    with pytest.raises(MF):
        encode_message(WireMessage("COMMAND", "a", 0, {"name": "GO", "seq": 9}))


def _corpus():
    return [
        encode_message(state_report("n1", "RUNNING", "major", "green")),
        encode_message(WireMessage("REGISTER", "n1", 0,
                                   {"name": "n1", "kind": "daemon", "address": "h:1"})),
        encode_message(WireMessage("COMMAND", "ctl", 5, {"name": "START"})),
        encode_message(WireMessage("LOOKUP", "m", 1, {"name": "manager"})),
        encode_message(WireMessage("LIST_REPLY", "registry", 0, {"records": []})),
        encode_message(WireMessage("HEARTBEAT", "n1", 12)),
        encode_message(WireMessage("BYE", "n1", 13)),
    ]


def test_fuzz_mutations_never_crash():
    rng = random.Random(20308)
    corpus = _corpus()
    outcomes = {"ok": 0, "error": 0}
    for _ in range(10_000):
        frame = bytearray(rng.choice(corpus))
        for _ in range(rng.randint(1, 4)):
            op = rng.randrange(3)
            pos = rng.randrange(len(frame)) if frame else 0
            if op == 0 and frame:
                frame[pos] = rng.randrange(256)
            elif op == 1:
                frame.insert(pos, rng.randrange(256))
            elif op == 2 and frame:
                del frame[pos]
        try:
            decode_message(bytes(frame))
            outcomes["ok"] += 1
        except WireError:
            outcomes["error"] += 1
        # anything else propagates and fails the test
    assert outcomes["ok"] + outcomes["error"] == 10_000


# ---------------------------------------------------------------------------
# Registry


@pytest.fixture()
def registry():
    server = RegistryServer(port=0).start()
    yield server
    server.stop()


def test_register_and_lookup(registry):
    client = RegistryClient(registry.address)
    gen = client.register("node-a", "daemon", "10.0.0.1:7001")
    assert gen == 1
    rec = client.lookup("node-a")
    assert rec.address == "10.0.0.1:7001" and rec.kind == "daemon"


def test_reregistration_replaces_and_bumps_generation(registry):
    client = RegistryClient(registry.address)
    assert client.register("node-a", "daemon", "10.0.0.1:7001") == 1
    assert client.register("node-a", "daemon", "10.0.0.1:7002") == 2
    rec = client.lookup("node-a")
    assert rec.address == "10.0.0.1:7002" and rec.generation == 2
    assert len([r for r in client.list() if r.name == "node-a"]) == 1


def test_lookup_missing_is_none(registry):
    assert RegistryClient(registry.address).lookup("nonexistent") is None


def test_register_fifty_then_list(registry):
    client = RegistryClient(registry.address)
    names = [f"node-{i:02d}" for i in range(50)]
    for n in names:
        client.register(n, "daemon", f"127.0.0.1:{7000 + int(n[-2:])}")
    client.register("manager", "manager", "127.0.0.1:7999")
    daemons = client.list(kind="daemon")
    assert [r.name for r in daemons] == names
    assert len(client.list()) == 51


def test_malformed_name_and_kind(registry):
    client = RegistryClient(registry.address)
    with pytest.raises(ValueError):
        client.register("", "daemon", "h:1")
    with pytest.raises(ValueError):
        client.register("x", "sorcerer", "h:1")


def test_bye_deregisters(registry):
    client = RegistryClient(registry.address)
    client.register("node-a", "daemon", "h:1")
    client.bye("node-a")
    deadline = time.monotonic() + 2
    while client.lookup("node-a") is not None and time.monotonic() < deadline:
        time.sleep(0.02)
    assert client.lookup("node-a") is None


def test_registry_restart_recovery():
    server = RegistryServer(port=0).start()
    port = server.port
    client = RegistryClient(server.address)
    client.register("svc", "manager", "h:1")
    server.stop()
    with pytest.raises(RegistryUnreachable):
        client.lookup("svc")
    server2 = RegistryServer(port=port).start()
    try:
        # fresh registry is empty until the re-register sweep
        assert client.lookup("svc") is None
        client.register("svc", "manager", "h:2")
        assert client.lookup("svc").address == "h:2"
    finally:
        server2.stop()


# ---------------------------------------------------------------------------
# Liveness tracking under virtual time


def test_liveness_bound_three_to_four_intervals():
    interval = 4
    cut = 17
    sides = {}
    for name, other in (("a", "b"), ("b", "a")):
        sides[name] = {"tracker": LivenessTracker(interval, 0, 0), "dead_at": None,
                       "other": other}
    for t in range(1, 200):
        for name, side in sides.items():
            tr = side["tracker"]
            if side["dead_at"] is None and tr.dead(t):
                side["dead_at"] = t
            if tr.heartbeat_due(t):
                tr.on_tx(t)
                if t < cut:
                    sides[side["other"]]["tracker"].on_rx(t)
    for name, side in sides.items():
        dead_at = side["dead_at"]
        last_rx = side["tracker"].last_rx
        assert dead_at is not None, f"{name} never declared death"
        assert 3 * interval <= dead_at - last_rx <= 4 * interval


def test_heartbeat_due_cadence():
    tr = LivenessTracker(interval=5, last_rx=0, last_tx=0)
    assert not tr.heartbeat_due(4)
    assert tr.heartbeat_due(5)
    tr.on_tx(5)
    assert not tr.heartbeat_due(9)
    assert tr.heartbeat_due(10)


# ---------------------------------------------------------------------------
# Real TCP sessions


def _collector():
    q = queue.Queue()

    def on_message(session, msg):
        q.put(("msg", session, msg))

    def on_close(session, reason):
        q.put(("close", session, reason))

    return q, on_message, on_close


def test_session_ordered_delivery():
    server_q, on_msg, on_close = _collector()
    listener = SessionListener("manager", on_msg, on_close, liveness_interval=0.5).start()
    client_q, c_on_msg, c_on_close = _collector()
    client = Session.connect(
        "127.0.0.1", listener.port, "node-a", c_on_msg, c_on_close, liveness_interval=0.5
    )
    try:
        for i in range(200):
            assert client.send(state_report("node-a", f"S{i}", "major"))
        got = [server_q.get(timeout=5) for _ in range(200)]
        states = [m.fields["state"] for kind, _, m in got if kind == "msg"]
        assert states == [f"S{i}" for i in range(200)]
        seqs = [m.seq for kind, _, m in got if kind == "msg"]
        assert seqs == sorted(seqs)
    finally:
        client.close()
        listener.stop()


def test_session_heartbeats_keep_quiet_link_alive():
    server_q, on_msg, on_close = _collector()
    listener = SessionListener("manager", on_msg, on_close, liveness_interval=0.15).start()
    client_q, c_on_msg, c_on_close = _collector()
    client = Session.connect(
        "127.0.0.1", listener.port, "node-a", c_on_msg, c_on_close, liveness_interval=0.15
    )
    try:
        time.sleep(1.2)  # 8 intervals of silence, bridged by heartbeats
        assert not client.closed
        assert client.send(state_report("node-a", "STILL", "major"))
        kind, _, msg = server_q.get(timeout=5)
        assert kind == "msg" and msg.fields["state"] == "STILL"
    finally:
        client.close()
        listener.stop()


def test_session_death_detected_without_transport_close():
    # A raw socket that never heartbeats simulates a hung peer.
    server_q, on_msg, on_close = _collector()
    listener = SessionListener("manager", on_msg, on_close, liveness_interval=0.1).start()
    raw = socket.create_connection(("127.0.0.1", listener.port))
    try:
        raw.sendall(encode_message(state_report("hung-node", "RUNNING", "major")))
        kind, _, msg = server_q.get(timeout=5)
        assert kind == "msg"
        kind, _, reason = server_q.get(timeout=5)
        assert kind == "close" and "liveness" in reason
    finally:
        raw.close()
        listener.stop()


def test_session_close_notification_fires_once():
    server_q, on_msg, on_close = _collector()
    listener = SessionListener("manager", on_msg, on_close, liveness_interval=0.2).start()
    client_q, c_on_msg, c_on_close = _collector()
    client = Session.connect(
        "127.0.0.1", listener.port, "node-a", c_on_msg, c_on_close, liveness_interval=0.2
    )
    client.send(state_report("node-a", "READY", "major"))
    server_q.get(timeout=5)
    client.close("test over")
    kind, _, reason = client_q.get(timeout=5)
    assert kind == "close" and reason == "test over"
    assert client_q.empty()
    kind, _, _ = server_q.get(timeout=5)
    assert kind == "close"
    listener.stop()


def test_bye_closes_cleanly():
    server_q, on_msg, on_close = _collector()
    listener = SessionListener("manager", on_msg, on_close, liveness_interval=0.2).start()
    client_q, c_on_msg, c_on_close = _collector()
    client = Session.connect(
        "127.0.0.1", listener.port, "node-a", c_on_msg, c_on_close, liveness_interval=0.2
    )
    client.send(WireMessage("BYE", "node-a"))
    kind, _, reason = server_q.get(timeout=5)
    assert kind == "close" and "BYE" in reason
    client.close()
    listener.stop()
