"""Wire protocol for live sensor clients.

Every message is a UTF-8 JSON object with a ``"type"`` discriminator. Two
transports carry the same bodies:

* raw TCP — each body is prefixed with a 4-byte big-endian length;
* WebSocket — each body travels as one text frame (no prefix).

Clock negotiation is a four-timestamp exchange per connection: the client
sends ClockProbe{t0} on its own clock, the server answers
ClockReply{t0, t1, t2} on the session clock, the client closes with
ClockDone{t0, t3}. From (t0, t1, t2, t3) the server derives an offset and a
round-trip time; across several probes the estimate with the smallest rtt
wins.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Any, Iterable

from .model import (
    ContextSnapshot,
    DomainError,
    StreamDescriptor,
    _context_from_dict,
    _context_to_dict,
    descriptor_from_dict,
    descriptor_to_dict,
    sample_from_dict,
    sample_to_dict,
)

PROTOCOL_VERSION = "1"
MAX_FRAME_BYTES = 1 << 20  # 1 MiB default cap on a frame body
MAX_BATCH_SAMPLES = 4096   # ~4.6 s of the fastest stream (mouse at 895 Hz)

_LEN = struct.Struct(">I")


class ProtocolError(DomainError):
    """Framing or message-shape failure; ``code`` tells the classes apart."""

    def __init__(self, code: str, detail: str):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


@dataclass(frozen=True, slots=True)
class Hello:
    stream: StreamDescriptor
    protocol_version: str = PROTOCOL_VERSION


@dataclass(frozen=True, slots=True)
class ClockProbe:
    t0: int  # client raw clock at send


@dataclass(frozen=True, slots=True)
class ClockReply:
    t0: int
    t1: int  # session clock at server receive
    t2: int  # session clock at server send


@dataclass(frozen=True, slots=True)
class ClockDone:
    t0: int
    t3: int  # client raw clock at reply receipt


@dataclass(frozen=True, slots=True)
class SampleBatch:
    stream_id: str
    samples: tuple[Any, ...]
    batch_seq: int  # strictly increasing per stream, starting at 1


@dataclass(frozen=True, slots=True)
class ContextUpdate:
    context: ContextSnapshot


@dataclass(frozen=True, slots=True)
class TaskEvent:
    """Task completion as seen by the client; times are on its raw clock."""
    stream_id: str  # whose clock the times are on
    task_id: str
    group: str
    start: int
    end: int
    accuracy: float = 1.0
    answer: str | None = None


@dataclass(frozen=True, slots=True)
class Bye:
    stream_id: str


@dataclass(frozen=True, slots=True)
class Ack:
    batch_seq: int


@dataclass(frozen=True, slots=True)
class Err:
    code: str
    detail: str


Message = (Hello | ClockProbe | ClockReply | ClockDone | SampleBatch
           | ContextUpdate | TaskEvent | Bye | Ack | Err)


def encode_message(msg: Message) -> dict[str, Any]:
    """Message -> JSON-ready body with a ``type`` discriminator."""
    if isinstance(msg, Hello):
        return {"type": "hello", "stream": descriptor_to_dict(msg.stream),
                "protocol_version": msg.protocol_version}
    if isinstance(msg, ClockProbe):
        return {"type": "clock_probe", "t0": msg.t0}
    if isinstance(msg, ClockReply):
        return {"type": "clock_reply", "t0": msg.t0, "t1": msg.t1, "t2": msg.t2}
    if isinstance(msg, ClockDone):
        return {"type": "clock_done", "t0": msg.t0, "t3": msg.t3}
    if isinstance(msg, SampleBatch):
        return {"type": "sample_batch", "stream_id": msg.stream_id,
                "batch_seq": msg.batch_seq,
                "samples": [sample_to_dict(s) for s in msg.samples]}
    if isinstance(msg, ContextUpdate):
        return {"type": "context", "context": _context_to_dict(msg.context)}
    if isinstance(msg, TaskEvent):
        return {"type": "task_event", "stream_id": msg.stream_id,
                "task_id": msg.task_id, "group": msg.group, "start": msg.start,
                "end": msg.end, "accuracy": msg.accuracy, "answer": msg.answer}
    if isinstance(msg, Bye):
        return {"type": "bye", "stream_id": msg.stream_id}
    if isinstance(msg, Ack):
        return {"type": "ack", "batch_seq": msg.batch_seq}
    if isinstance(msg, Err):
        return {"type": "err", "code": msg.code, "detail": msg.detail}
    raise ProtocolError("unknown_type", f"cannot encode {type(msg).__name__}")


def decode_message(body: dict[str, Any],
                   kind_of_stream: dict[str, str] | None = None) -> Message:
    """JSON body -> Message.

    ``kind_of_stream`` maps stream_id -> stream kind so SampleBatch sample
    records can be reconstructed into their concrete types; batches for
    unknown streams keep their samples as plain dicts (the gateway rejects
    them with an unknown-stream error anyway).
    """
    try:
        mtype = body["type"]
    except (TypeError, KeyError):
        raise ProtocolError("malformed", "body has no 'type' field") from None
    try:
        if mtype == "hello":
            return Hello(stream=descriptor_from_dict(body["stream"]),
                         protocol_version=body["protocol_version"])
        if mtype == "clock_probe":
            return ClockProbe(t0=int(body["t0"]))
        if mtype == "clock_reply":
            return ClockReply(t0=int(body["t0"]), t1=int(body["t1"]),
                              t2=int(body["t2"]))
        if mtype == "clock_done":
            return ClockDone(t0=int(body["t0"]), t3=int(body["t3"]))
        if mtype == "sample_batch":
            sid = body["stream_id"]
            kind = (kind_of_stream or {}).get(sid)
            raw = body["samples"]
            samples = (tuple(sample_from_dict(kind, s) for s in raw)
                       if kind is not None else tuple(raw))
            return SampleBatch(stream_id=sid, samples=samples,
                               batch_seq=int(body["batch_seq"]))
        if mtype == "context":
            return ContextUpdate(context=_context_from_dict(body["context"]))
        if mtype == "task_event":
            return TaskEvent(stream_id=body["stream_id"], task_id=body["task_id"],
                             group=body["group"], start=int(body["start"]),
                             end=int(body["end"]),
                             accuracy=float(body.get("accuracy", 1.0)),
                             answer=body.get("answer"))
        if mtype == "bye":
            return Bye(stream_id=body["stream_id"])
        if mtype == "ack":
            return Ack(batch_seq=int(body["batch_seq"]))
        if mtype == "err":
            return Err(code=body["code"], detail=body.get("detail", ""))
    except ProtocolError:
        raise
    except (KeyError, TypeError, ValueError, DomainError) as exc:
        raise ProtocolError("malformed", f"bad {mtype} body: {exc}") from None
    raise ProtocolError("unknown_type", f"unknown message type {mtype!r}")


def encode_frame(msg: Message) -> bytes:
    """4-byte big-endian length prefix + UTF-8 JSON body (TCP transport)."""
    body = json.dumps(encode_message(msg), separators=(",", ":"),
                      sort_keys=True).encode("utf-8")
    return _LEN.pack(len(body)) + body


def decode_frame(data: bytes, *, max_frame: int = MAX_FRAME_BYTES,
                 kind_of_stream: dict[str, str] | None = None) -> Message:
    """Inverse of encode_frame over one complete frame.

    Distinct failures: ``truncated`` (prefix or body short), ``too_large``
    (declared length above ``max_frame``), ``unknown_type``, ``malformed``.
    """
    if len(data) < _LEN.size:
        raise ProtocolError("truncated", f"{len(data)} bytes is shorter than the "
                                         "4-byte length prefix")
    (length,) = _LEN.unpack_from(data)
    if length > max_frame:
        raise ProtocolError("too_large", f"declared body of {length} bytes exceeds "
                                         f"the {max_frame}-byte cap")
    body = data[_LEN.size:_LEN.size + length]
    if len(body) < length:
        raise ProtocolError("truncated", f"frame declares {length} body bytes, "
                                         f"got {len(body)}")
    try:
        parsed = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError("malformed", f"body is not valid JSON: {exc}") from None
    return decode_message(parsed, kind_of_stream)


# ---------------------------------------------------------------------------
# Clock offset estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ClockEstimate:
    offset_micros: int  # session = raw + offset
    rtt_micros: int
    n_probes: int = 1


class ProbeError(DomainError):
    """Probe timestamps are inconsistent (negative round trip)."""


def estimate_clock_offset(t0: int, t1: int, t2: int, t3: int) -> ClockEstimate:
    """Four-timestamp offset: ((t1 - t0) + (t2 - t3)) / 2, rounded toward zero.

    Under symmetric network delay the estimate is exact; in general the error
    is bounded by half the round trip. A negative computed rtt means the
    timestamps cannot have come from one probe and the probe is discarded.
    """
    rtt = (t3 - t0) - (t2 - t1)
    if rtt < 0:
        raise ProbeError(f"negative round trip ({rtt} us): probe discarded")
    twice_offset = (t1 - t0) + (t2 - t3)
    offset = -((-twice_offset) // 2) if twice_offset < 0 else twice_offset // 2
    return ClockEstimate(offset_micros=offset, rtt_micros=rtt)


def best_estimate(estimates: Iterable[ClockEstimate]) -> ClockEstimate:
    """Minimum-rtt selection across completed probes."""
    pool = list(estimates)
    if not pool:
        raise ProbeError("no completed clock probes")
    best = min(pool, key=lambda e: e.rtt_micros)
    return ClockEstimate(best.offset_micros, best.rtt_micros, n_probes=len(pool))
