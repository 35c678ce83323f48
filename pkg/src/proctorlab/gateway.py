"""Live ingest gateway: accepts sensor clients, negotiates clocks, and
appends ordered sample batches to an in-progress session.

Two transports, one message set: raw TCP with 4-byte length-prefixed JSON
frames, and WebSocket with the same JSON bodies as text frames (browser
clients). Each stream is owned by the connection that said Hello for it and
batches on one connection are processed in arrival order, so appends are
serialized per stream while different streams interleave freely.

Delivery contract per stream: batch_seq starts at 1 and increments by one.
A duplicate batch is re-acknowledged without re-appending; a gap is refused
(the client must retransmit); a batch that violates a sample invariant is
rejected atomically, leaving the stored stream untouched. The gateway may
delay acks (configurable, used to exercise client buffering) and sheds load
by closing, never by silently dropping samples.
"""

from __future__ import annotations

import asyncio
import json
import logging
import random
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from aiohttp import WSMsgType, web

from .model import (
    SAMPLE_TYPE_BY_KIND,
    ContextSnapshot,
    Session,
    SessionManifest,
    StreamDescriptor,
    TaskRecord,
)
from .protocol import (
    MAX_BATCH_SAMPLES,
    MAX_FRAME_BYTES,
    PROTOCOL_VERSION,
    Ack,
    Bye,
    ClockDone,
    ClockProbe,
    ClockReply,
    ContextUpdate,
    Err,
    Hello,
    Message,
    ProbeError,
    ProtocolError,
    SampleBatch,
    TaskEvent,
    best_estimate,
    decode_message,
    encode_message,
    estimate_clock_offset,
)

logger = logging.getLogger(__name__)

_LEN_BYTES = 4


@dataclass
class GatewayConfig:
    session_id: str = "live-session"
    host: str = "127.0.0.1"
    tcp_port: int | None = 9401
    ws_port: int | None = 9402
    out_dir: str | None = None
    max_frame_bytes: int = MAX_FRAME_BYTES
    max_batch_samples: int = MAX_BATCH_SAMPLES
    ack_delay_s: tuple[float, float] = (0.0, 0.0)  # uniform jitter before acks
    ack_delay_seed: int | None = None


@dataclass
class _StreamState:
    descriptor: StreamDescriptor
    conn_id: int
    samples: list = field(default_factory=list)
    last_seq: int = 0
    last_ts: int | None = None
    closed: bool = False
    offset_micros: int = 0


@dataclass
class _ConnState:
    conn_id: int
    pending_probes: dict[int, tuple[int, int]] = field(default_factory=dict)
    estimates: list = field(default_factory=list)
    estimate: Any = None
    stream_ids: set[str] = field(default_factory=set)


def _check_batch_samples(kind: str, samples: tuple) -> str | None:
    """Cheap per-batch invariant screen; full validation happens at save."""
    expected = SAMPLE_TYPE_BY_KIND.get(kind)
    last_ts = None
    for s in samples:
        if expected is not None and not isinstance(s, expected):
            return f"sample type {type(s).__name__} does not match kind {kind}"
        if last_ts is not None and s.ts < last_ts:
            return "timestamps decrease within the batch"
        last_ts = s.ts
        if kind == "eeg_band" and not (0.0 <= s.attention <= 100.0
                                       and 0.0 <= s.meditation <= 100.0):
            return "attention/meditation out of [0,100]"
        if kind == "smartwatch" and s.heart_rate_bpm is not None \
                and not (20.0 < s.heart_rate_bpm < 250.0):
            return "heart_rate_bpm out of (20,250)"
    return None


class GatewayCore:
    """Transport-independent protocol state machine for one session."""

    def __init__(self, config: GatewayConfig | None = None):
        self.config = config or GatewayConfig()
        self._epoch_ns = time.monotonic_ns()
        self.streams: dict[str, _StreamState] = {}
        self.conns: dict[int, _ConnState] = {}
        self.context: ContextSnapshot | None = None
        self.tasks: dict[str, TaskRecord] = {}
        self._next_conn = 1

    # -- session clock -----------------------------------------------------

    def now_us(self) -> int:
        return (time.monotonic_ns() - self._epoch_ns) // 1000

    # -- connection lifecycle ----------------------------------------------

    def open_conn(self) -> int:
        conn_id = self._next_conn
        self._next_conn += 1
        self.conns[conn_id] = _ConnState(conn_id)
        return conn_id

    def close_conn(self, conn_id: int) -> None:
        conn = self.conns.get(conn_id)
        if conn is None:
            return
        for sid in conn.stream_ids:
            self._close_stream(sid, conn)
        del self.conns[conn_id]

    def _close_stream(self, stream_id: str, conn: _ConnState) -> None:
        state = self.streams.get(stream_id)
        if state is not None and not state.closed:
            state.closed = True
            if conn.estimate is not None:
                state.offset_micros = conn.estimate.offset_micros

    def kind_of_stream(self) -> dict[str, str]:
        return {sid: st.descriptor.kind for sid, st in self.streams.items()}

    # -- message handling ----------------------------------------------------

    def handle(self, conn_id: int, msg: Message) -> list[Message]:
        conn = self.conns[conn_id]
        if isinstance(msg, Hello):
            return self._on_hello(conn, msg)
        if isinstance(msg, ClockProbe):
            t1 = self.now_us()
            t2 = self.now_us()
            conn.pending_probes[msg.t0] = (t1, t2)
            return [ClockReply(msg.t0, t1, t2)]
        if isinstance(msg, ClockDone):
            return self._on_clock_done(conn, msg)
        if isinstance(msg, SampleBatch):
            return self._on_batch(conn, msg)
        if isinstance(msg, ContextUpdate):
            self.context = msg.context
            return [Ack(0)]
        if isinstance(msg, TaskEvent):
            return self._on_task(conn, msg)
        if isinstance(msg, Bye):
            if msg.stream_id not in conn.stream_ids:
                return [Err("unknown_stream",
                            f"bye for unowned stream {msg.stream_id!r}")]
            self._close_stream(msg.stream_id, conn)
            return [Ack(self.streams[msg.stream_id].last_seq)]
        return [Err("unexpected", f"gateway cannot accept "
                                  f"{type(msg).__name__} messages")]

    def _on_hello(self, conn: _ConnState, msg: Hello) -> list[Message]:
        if msg.protocol_version != PROTOCOL_VERSION:
            return [Err("bad_version",
                        f"protocol_version {msg.protocol_version!r} "
                        f"unsupported; need {PROTOCOL_VERSION!r}")]
        d = msg.stream
        existing = self.streams.get(d.stream_id)
        if existing is not None:
            # resumption: a client whose connection dropped re-Hellos the
            # same stream; the ack tells it the last sequence stored so it
            # can replay everything after it with the original timestamps
            if existing.conn_id in self.conns:
                return [Err("duplicate_stream",
                            f"stream {d.stream_id!r} already registered on a "
                            "live connection")]
            if existing.descriptor.kind != d.kind:
                return [Err("duplicate_stream",
                            f"stream {d.stream_id!r} exists with kind "
                            f"{existing.descriptor.kind!r}")]
            existing.conn_id = conn.conn_id
            existing.closed = False
            conn.stream_ids.add(d.stream_id)
            return [Ack(existing.last_seq)]
        self.streams[d.stream_id] = _StreamState(d, conn.conn_id)
        conn.stream_ids.add(d.stream_id)
        return [Ack(0)]

    def _on_clock_done(self, conn: _ConnState, msg: ClockDone) -> list[Message]:
        pending = conn.pending_probes.pop(msg.t0, None)
        if pending is None:
            return [Err("unknown_probe", f"no pending probe for t0={msg.t0}")]
        t1, t2 = pending
        try:
            est = estimate_clock_offset(msg.t0, t1, t2, msg.t3)
        except ProbeError as exc:
            return [Err("bad_probe", str(exc))]
        conn.estimates.append(est)
        conn.estimate = best_estimate(conn.estimates)
        return [Ack(0)]

    def _on_batch(self, conn: _ConnState, msg: SampleBatch) -> list[Message]:
        state = self.streams.get(msg.stream_id)
        if state is None or msg.stream_id not in conn.stream_ids:
            return [Err("unknown_stream",
                        f"stream {msg.stream_id!r} not registered on this "
                        "connection")]
        if state.closed:
            return [Err("stream_closed", f"stream {msg.stream_id!r} got Bye")]
        if conn.estimate is None:
            return [Err("no_clock", "complete clock probes before sending "
                                    "samples")]
        if len(msg.samples) > self.config.max_batch_samples:
            return [Err("batch_too_large",
                        f"{len(msg.samples)} samples exceeds the "
                        f"{self.config.max_batch_samples} cap")]
        if msg.batch_seq <= state.last_seq:
            return [Ack(msg.batch_seq)]  # duplicate: re-ack, do not re-append
        if msg.batch_seq != state.last_seq + 1:
            return [Err("seq_gap", f"expected seq {state.last_seq + 1}, got "
                                   f"{msg.batch_seq}; retransmit")]
        problem = _check_batch_samples(state.descriptor.kind, msg.samples)
        if problem is None and msg.samples and state.last_ts is not None \
                and msg.samples[0].ts < state.last_ts:
            problem = "batch starts before the stream's last stored sample"
        if problem is not None:
            return [Err("invalid_batch", problem)]  # rejected atomically
        state.samples.extend(msg.samples)
        if msg.samples:
            state.last_ts = msg.samples[-1].ts
        state.last_seq = msg.batch_seq
        return [Ack(msg.batch_seq)]

    def _on_task(self, conn: _ConnState, msg: TaskEvent) -> list[Message]:
        if conn.estimate is None:
            return [Err("no_clock", "complete clock probes before task events")]
        offset = conn.estimate.offset_micros
        start = max(0, msg.start + offset)
        end = max(0, msg.end + offset)
        if end <= start:
            return [Err("invalid_task", "task end must be after start")]
        self.tasks[msg.task_id] = TaskRecord(
            msg.task_id, msg.group, start, end,
            min(max(msg.accuracy, 0.0), 1.0), (end - start) / 1e6)
        return [Ack(0)]

    # -- session assembly -----------------------------------------------------

    def build_session(self) -> Session:
        """Freeze the accumulated state into a raw (unsynchronized) session."""
        descriptors = []
        samples: dict[str, tuple] = {}
        for sid, state in self.streams.items():
            conn = self.conns.get(state.conn_id)
            offset = state.offset_micros
            if conn is not None and conn.estimate is not None:
                offset = conn.estimate.offset_micros
            descriptors.append(replace(state.descriptor,
                                       clock_offset_micros=offset))
            samples[sid] = tuple(state.samples)
        tasks = tuple(sorted(self.tasks.values(), key=lambda t: t.start))
        manifest = SessionManifest(
            session_id=self.config.session_id,
            user_id=None,
            demographics=None,
            context=self.context,
            streams=tuple(descriptors),
            tasks=tasks,
        )
        return Session(manifest, samples)


class Gateway:
    """Runs a GatewayCore behind TCP and/or WebSocket listeners."""

    def __init__(self, config: GatewayConfig | None = None):
        self.config = config or GatewayConfig()
        self.core = GatewayCore(self.config)
        self._tcp_server: asyncio.AbstractServer | None = None
        self._ws_runner: web.AppRunner | None = None
        self._rng = random.Random(self.config.ack_delay_seed)

    # -- shared reply path ---------------------------------------------------

    async def _ack_delay(self) -> None:
        lo, hi = self.config.ack_delay_s
        if hi > 0:
            await asyncio.sleep(self._rng.uniform(lo, hi))

    # -- TCP transport ---------------------------------------------------------

    async def _serve_tcp_conn(self, reader: asyncio.StreamReader,
                              writer: asyncio.StreamWriter) -> None:
        conn_id = self.core.open_conn()
        try:
            while True:
                try:
                    prefix = await reader.readexactly(_LEN_BYTES)
                except (asyncio.IncompleteReadError, ConnectionResetError):
                    break
                length = int.from_bytes(prefix, "big")
                if length > self.config.max_frame_bytes:
                    writer.write(_frame(Err("too_large",
                                            f"{length} byte frame refused")))
                    await writer.drain()
                    break
                try:
                    body = await reader.readexactly(length)
                except (asyncio.IncompleteReadError, ConnectionResetError):
                    break
                replies = self._dispatch_bytes(conn_id, body)
                for reply in replies:
                    if isinstance(reply, Ack):
                        await self._ack_delay()
                    writer.write(_frame(reply))
                await writer.drain()
        finally:
            self.core.close_conn(conn_id)
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    def _dispatch_bytes(self, conn_id: int, body: bytes) -> list[Message]:
        try:
            parsed = json.loads(body.decode("utf-8"))
            msg = decode_message(parsed, self.core.kind_of_stream())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return [Err("malformed", f"body is not valid JSON: {exc}")]
        except ProtocolError as exc:
            return [Err(exc.code, exc.detail)]
        return self.core.handle(conn_id, msg)

    # -- WebSocket transport -----------------------------------------------------

    async def _ws_handler(self, request: web.Request) -> web.WebSocketResponse:
        ws = web.WebSocketResponse(max_msg_size=self.config.max_frame_bytes)
        await ws.prepare(request)
        conn_id = self.core.open_conn()
        try:
            async for wsmsg in ws:
                if wsmsg.type == WSMsgType.TEXT:
                    replies = self._dispatch_bytes(conn_id,
                                                   wsmsg.data.encode("utf-8"))
                elif wsmsg.type == WSMsgType.BINARY:
                    replies = [Err("malformed",
                                   "text frames only on the WebSocket "
                                   "transport")]
                else:
                    continue
                for reply in replies:
                    if isinstance(reply, Ack):
                        await self._ack_delay()
                    await ws.send_str(json.dumps(encode_message(reply),
                                                 sort_keys=True,
                                                 separators=(",", ":")))
        finally:
            self.core.close_conn(conn_id)
        return ws

    # -- lifecycle -----------------------------------------------------------

    async def start(self) -> None:
        if self.config.tcp_port is not None:
            self._tcp_server = await asyncio.start_server(
                self._serve_tcp_conn, self.config.host, self.config.tcp_port)
        if self.config.ws_port is not None:
            app = web.Application()
            app.router.add_get("/ws", self._ws_handler)
            self._ws_runner = web.AppRunner(app)
            await self._ws_runner.setup()
            site = web.TCPSite(self._ws_runner, self.config.host,
                               self.config.ws_port)
            await site.start()
        logger.info("gateway listening on %s (tcp=%s ws=%s)", self.config.host,
                    self.config.tcp_port, self.config.ws_port)

    @property
    def tcp_port(self) -> int | None:
        if self._tcp_server is None or not self._tcp_server.sockets:
            return None
        return self._tcp_server.sockets[0].getsockname()[1]

    @property
    def ws_port(self) -> int | None:
        if self._ws_runner is None or not self._ws_runner.addresses:
            return None
        return self._ws_runner.addresses[0][1]

    async def stop(self) -> Session:
        """Shut listeners down and freeze the session; saves it when
        ``out_dir`` is configured."""
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_runner is not None:
            await self._ws_runner.cleanup()
        session = self.core.build_session()
        if self.config.out_dir is not None:
            from .store import save_session
            save_session(session, Path(self.config.out_dir)
                         / session.manifest.session_id)
        return session


def _frame(msg: Message) -> bytes:
    body = json.dumps(encode_message(msg), sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    return len(body).to_bytes(_LEN_BYTES, "big") + body


# ---------------------------------------------------------------------------
# In-process test client (also used by the demos)
# ---------------------------------------------------------------------------

class TcpSensorClient:
    """Minimal TCP client speaking the gateway protocol.

    The client's raw clock is simulated: ``clock()`` returns device-time
    micros with a configurable true offset from the session clock, so tests
    can check the estimator against known ground truth.
    """

    def __init__(self, host: str, port: int,
                 max_frame_bytes: int = MAX_FRAME_BYTES):
        self.host = host
        self.port = port
        self.max_frame_bytes = max_frame_bytes
        self.reader: asyncio.StreamReader | None = None
        self.writer: asyncio.StreamWriter | None = None

    async def connect(self) -> None:
        self.reader, self.writer = await asyncio.open_connection(self.host,
                                                                 self.port)

    async def close(self) -> None:
        if self.writer is not None:
            self.writer.close()
            try:
                await self.writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    async def send(self, msg: Message) -> None:
        assert self.writer is not None
        self.writer.write(_frame(msg))
        await self.writer.drain()

    async def recv(self, kind_of_stream: dict[str, str] | None = None
                   ) -> Message:
        assert self.reader is not None
        prefix = await self.reader.readexactly(_LEN_BYTES)
        length = int.from_bytes(prefix, "big")
        if length > self.max_frame_bytes:
            raise ProtocolError("too_large", f"{length} byte reply")
        body = await self.reader.readexactly(length)
        return decode_message(json.loads(body.decode("utf-8")), kind_of_stream)

    async def request(self, msg: Message,
                      kind_of_stream: dict[str, str] | None = None) -> Message:
        await self.send(msg)
        return await self.recv(kind_of_stream)

    async def run_clock_probes(self, clock, n_probes: int = 8,
                               network=None) -> None:
        """Run the four-timestamp exchange ``n_probes`` times.

        ``clock()`` yields the client's raw micros; ``network`` (optional)
        is an async callable awaited before send and after receive to
        simulate symmetric path delay.
        """
        for _ in range(n_probes):
            t0 = clock()
            if network is not None:
                await network()
            reply = await self.request(ClockProbe(t0))
            if not isinstance(reply, ClockReply):
                raise ProtocolError("unexpected", f"wanted ClockReply, got "
                                                  f"{type(reply).__name__}")
            if network is not None:
                await network()
            t3 = clock()
            done = await self.request(ClockDone(reply.t0, t3))
            if isinstance(done, Err):
                raise ProtocolError(done.code, done.detail)
