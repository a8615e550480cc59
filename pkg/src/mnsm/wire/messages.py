"""Wire message encoding: one JSON object per UTF-8 line.

Every message carries "type", "sender" and a per-sender sequence number
"seq" (strictly increasing within one connection; reconnects restart at 0).
Unknown fields are preserved on decode and ignored by consumers, so
encode/decode round-trips exactly.  Unknown types and missing required
fields are typed errors; so is a non-parsable line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


class WireError(ValueError):
    pass


class MalformedFrame(WireError):
    pass


class UnknownType(WireError):
    pass


class MissingField(WireError):
    pass


# required payload fields per message type
MESSAGE_TYPES: dict[str, tuple[str, ...]] = {
    "REGISTER": ("name", "kind", "address"),
    "LOOKUP": ("name",),
    "LOOKUP_REPLY": ("found",),
    "LIST": (),
    "LIST_REPLY": ("records",),
    "COMMAND": ("name",),
    "STATE_REPORT": ("state", "class"),
    "HEARTBEAT": (),
    "BYE": (),
}

SERVICE_KINDS = ("manager", "daemon", "controller")


@dataclass
class WireMessage:
    type: str
    sender: str = ""
    seq: int = 0
    fields: dict = field(default_factory=dict)

    def get(self, key: str, default=None):
        return self.fields.get(key, default)

    def __getitem__(self, key: str):
        return self.fields[key]


RESERVED_FIELDS = ("type", "sender", "seq")


def validate_message(msg: WireMessage) -> None:
    required = MESSAGE_TYPES.get(msg.type)
    if required is None:
        raise UnknownType(f"unknown message type {msg.type!r}")
    for key in required:
        if key not in msg.fields:
            raise MissingField(f"{msg.type} requires field {key!r}")
    for key in RESERVED_FIELDS:
        if key in msg.fields:
            raise MalformedFrame(f"payload may not use the reserved field {key!r}")


def encode_message(msg: WireMessage) -> bytes:
    validate_message(msg)
    obj = {"type": msg.type, "sender": msg.sender, "seq": msg.seq, **msg.fields}
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"


def decode_message(data: bytes | str) -> WireMessage:
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    data = data.strip()
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedFrame(f"non-parsable frame: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedFrame("frame is not an object")
    if "type" not in obj:
        raise MissingField("frame lacks a type field")
    msg = WireMessage(
        type=obj["type"],
        sender=obj.get("sender", ""),
        seq=obj.get("seq", 0),
        fields={k: v for k, v in obj.items() if k not in ("type", "sender", "seq")},
    )
    validate_message(msg)
    return msg


def state_report(
    sender: str, state: str, state_class: str, color: str = "", detail: str = "", seq: int = 0
) -> WireMessage:
    return WireMessage(
        "STATE_REPORT",
        sender,
        seq,
        {"state": state, "class": state_class, "color": color, "detail": detail},
    )


def command(sender: str, name: str, seq: int = 0, **extra) -> WireMessage:
    return WireMessage("COMMAND", sender, seq, {"name": name, **extra})
