"""Virtual edge nodes and the device wire protocol.

Two node types mirror the simulated hardware: an attendance node whose
pushbutton stands in for the RFID reader (raw level samples are debounced,
each clean rising edge emits a tag scan) and an eco node that reports scripted
sensor values at its poll period and mirrors actuator commands. Everything
runs on virtual time taken from the script, so transcripts are deterministic.

Wire format: newline-delimited JSON frames, one message per line, fields
exactly ``type``, ``node_id``, ``seq``, ``body``. Frames are capped at 64 KiB.
Every non-Ack message receives exactly one Ack carrying the originator's seq.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol, Sequence

MAX_FRAME_BYTES = 64 * 1024
DISPLAY_LINES = 4
DISPLAY_COLS = 21

DEFAULT_SAMPLE_PERIOD_MS = 10
DEFAULT_STABLE_SAMPLES = 5


class DeviceError(Exception):
    pass


class DecodeError(DeviceError):
    pass


class FrameTooLong(DeviceError):
    pass


class ScriptError(DeviceError):
    pass


class ConnectionLost(DeviceError):
    def __init__(self, transcript: list["TranscriptEntry"]):
        self.transcript = transcript
        super().__init__("connection lost")


class MsgType(str, Enum):
    HELLO = "hello"
    RFID_SCAN = "rfid_scan"
    WIFI_JOIN = "wifi_join"
    SENSOR_REPORT = "sensor_report"
    ACTUATOR_CMD = "actuator_cmd"
    DISPLAY_TEXT = "display_text"
    ACK = "ack"


class NodeType(str, Enum):
    ATTENDANCE = "attendance"
    ECO = "eco"


@dataclass(frozen=True)
class NodeDescriptor:
    node_id: str
    node_type: NodeType
    room_id: str
    tag_uid: str = ""  # attendance nodes: the scripted tag emitted per press
    sample_period_ms: int = DEFAULT_SAMPLE_PERIOD_MS
    stable_samples: int = DEFAULT_STABLE_SAMPLES
    poll_ms: int = 1000  # eco nodes


@dataclass(frozen=True)
class WireMessage:
    type: MsgType
    node_id: str
    seq: int
    body: dict


def encode_message(msg: WireMessage) -> bytes:
    """One JSON object per line; raises FrameTooLong past 64 KiB."""
    frame = (
        json.dumps(
            {"type": msg.type.value, "node_id": msg.node_id, "seq": msg.seq, "body": msg.body},
            sort_keys=True,
            ensure_ascii=False,
        )
        + "\n"
    ).encode("utf-8")
    if len(frame) > MAX_FRAME_BYTES:
        raise FrameTooLong(f"{len(frame)} bytes")
    return frame


def decode_message(data: bytes | str) -> WireMessage:
    """Total over arbitrary input: returns a WireMessage or raises DecodeError."""
    if isinstance(data, bytes):
        if len(data) > MAX_FRAME_BYTES:
            raise FrameTooLong(f"{len(data)} bytes")
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"not utf-8: {exc}") from exc
    else:
        text = data
    text = text.strip("\n")
    if not text or "\n" in text:
        raise DecodeError("expected exactly one frame per line")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or set(obj.keys()) != {"type", "node_id", "seq", "body"}:
        raise DecodeError("frame must have exactly the fields type, node_id, seq, body")
    try:
        mtype = MsgType(obj["type"])
    except (ValueError, TypeError):
        raise DecodeError(f"unknown message type: {obj['type']!r}") from None
    if not isinstance(obj["node_id"], str):
        raise DecodeError("node_id must be a string")
    if not isinstance(obj["seq"], int) or isinstance(obj["seq"], bool) or obj["seq"] < 0:
        raise DecodeError("seq must be a non-negative integer")
    if not isinstance(obj["body"], dict):
        raise DecodeError("body must be an object")
    return WireMessage(mtype, obj["node_id"], obj["seq"], obj["body"])


class FrameBuffer:
    """Accumulates bytes off a stream and yields complete frames."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[WireMessage]:
        self._buf.extend(data)
        if len(self._buf) > MAX_FRAME_BYTES and b"\n" not in self._buf:
            raise FrameTooLong(f"{len(self._buf)} buffered bytes without a newline")
        out = []
        while True:
            nl = self._buf.find(b"\n")
            if nl == -1:
                return out
            line = bytes(self._buf[: nl + 1])
            del self._buf[: nl + 1]
            out.append(decode_message(line))


# -- debounce -----------------------------------------------------------------


class EdgeKind(str, Enum):
    RISING = "rising"
    FALLING = "falling"


@dataclass(frozen=True)
class Edge:
    timestamp: int
    kind: EdgeKind


@dataclass(frozen=True)
class ButtonSampleStream:
    samples: tuple[tuple[int, int], ...]  # (timestamp_ms, level 0|1)
    sample_period_ms: int = DEFAULT_SAMPLE_PERIOD_MS

    def __post_init__(self):
        if self.sample_period_ms <= 0:
            raise DeviceError("sample_period_ms must be positive")
        for (t0, _), (t1, _) in zip(self.samples, self.samples[1:]):
            if t1 - t0 != self.sample_period_ms:
                raise DeviceError(f"samples must advance by {self.sample_period_ms} ms, got {t1 - t0}")


def debounce(stream: ButtonSampleStream | Sequence[tuple[int, int]], stable_samples_n: int) -> list[Edge]:
    """Report a level change only after it persists for n consecutive samples.

    The edge timestamp is the first sample of the stable run; the very first
    sample sets the baseline without emitting an edge.
    """
    if stable_samples_n < 1:
        raise DeviceError("stable_samples_n must be >= 1")
    samples = stream.samples if isinstance(stream, ButtonSampleStream) else tuple(stream)
    if not samples:
        return []
    edges: list[Edge] = []
    settled = samples[0][1]
    run_level: Optional[int] = None
    run_start = 0
    run_len = 0
    for ts, level in samples:
        if level == settled:
            run_level = None
            run_len = 0
            continue
        if run_level == level:
            run_len += 1
        else:
            run_level = level
            run_start = ts
            run_len = 1
        if run_len >= stable_samples_n:
            edges.append(Edge(run_start, EdgeKind.RISING if level == 1 else EdgeKind.FALLING))
            settled = level
            run_level = None
            run_len = 0
    return edges


# -- display ------------------------------------------------------------------


def render_display(lines: Optional[Sequence[str]]) -> list[str]:
    """Clamp text to the 4x21 OLED budget; None renders the ready screen."""
    if lines is None or not list(lines):
        lines = ["System Ready"]
    return [str(ln)[:DISPLAY_COLS] for ln in list(lines)[:DISPLAY_LINES]]


# -- scripts ------------------------------------------------------------------


@dataclass(frozen=True)
class ScriptAction:
    timestamp: int
    node_id: str
    action: str
    args: tuple[str, ...]


@dataclass
class ScenarioScript:
    nodes: list[NodeDescriptor]
    actions: list[ScriptAction]

    def actions_for(self, node_id: str) -> list[ScriptAction]:
        return [a for a in self.actions if a.node_id == node_id]


def parse_script(text: str) -> ScenarioScript:
    """Parse a scenario script.

    Two line forms (blank lines and '#' comments skipped):
      node <node_id> <attendance|eco> room=<room> [tag=<uid>] [poll_ms=<n>]
      at <ts_ms> <node_id> <action> [args...]
    Actions: press <duration_ms>; button <0|1>; wifi <mac> <network>;
    rfid [tag]; sensors <temp_c> <humidity> <lux_raw> <air_raw>; end.
    Timestamps must be non-decreasing per node.
    """
    nodes: list[NodeDescriptor] = []
    actions: list[ScriptAction] = []
    known = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "node":
            if len(parts) < 3:
                raise ScriptError(f"line {lineno}: node declaration needs id and type")
            node_id, type_name = parts[1], parts[2]
            if node_id in known:
                raise ScriptError(f"line {lineno}: duplicate node id {node_id!r}")
            try:
                node_type = NodeType(type_name)
            except ValueError:
                raise ScriptError(f"line {lineno}: unknown node type {type_name!r}") from None
            kv = {}
            for opt in parts[3:]:
                if "=" not in opt:
                    raise ScriptError(f"line {lineno}: expected key=value, got {opt!r}")
                k, v = opt.split("=", 1)
                kv[k] = v
            nodes.append(
                NodeDescriptor(
                    node_id=node_id,
                    node_type=node_type,
                    room_id=kv.get("room", ""),
                    tag_uid=kv.get("tag", ""),
                    poll_ms=int(kv.get("poll_ms", 1000)),
                    sample_period_ms=int(kv.get("sample_period_ms", DEFAULT_SAMPLE_PERIOD_MS)),
                    stable_samples=int(kv.get("stable_samples", DEFAULT_STABLE_SAMPLES)),
                )
            )
            known.add(node_id)
        elif parts[0] == "at":
            if len(parts) < 4:
                raise ScriptError(f"line {lineno}: expected 'at <ts> <node> <action> ...'")
            try:
                ts = int(parts[1])
            except ValueError:
                raise ScriptError(f"line {lineno}: bad timestamp {parts[1]!r}") from None
            node_id, action = parts[2], parts[3]
            if node_id not in known:
                raise ScriptError(f"line {lineno}: undeclared node {node_id!r}")
            actions.append(ScriptAction(ts, node_id, action, tuple(parts[4:])))
        else:
            raise ScriptError(f"line {lineno}: unrecognized directive {parts[0]!r}")
    last: dict[str, int] = {}
    for a in actions:
        if a.timestamp < last.get(a.node_id, 0):
            raise ScriptError(f"timestamps must be non-decreasing per node ({a.node_id} at {a.timestamp})")
        last[a.node_id] = a.timestamp
    return ScenarioScript(nodes, actions)


def load_script(path: str | Path) -> ScenarioScript:
    return parse_script(Path(path).read_text(encoding="utf-8"))


# -- node planning and running -------------------------------------------------


class Connection(Protocol):
    """Synchronous exchange: deliver one message, receive ordered responses."""

    def exchange(self, msg: WireMessage) -> list[WireMessage]: ...


@dataclass(frozen=True)
class PlannedMessage:
    timestamp: int
    type: MsgType
    body: dict


@dataclass(frozen=True)
class TranscriptEntry:
    direction: str  # "sent" | "recv"
    message: WireMessage


def _button_stream(
    descriptor: NodeDescriptor, actions: Sequence[ScriptAction]
) -> ButtonSampleStream:
    """Synthesize raw button samples from press/button actions over the script span."""
    period = descriptor.sample_period_ms
    changes: list[tuple[int, int]] = []
    horizon = 0
    for a in actions:
        horizon = max(horizon, a.timestamp)
        if a.action == "press":
            if len(a.args) != 1:
                raise ScriptError(f"press needs a duration, got {a.args}")
            duration = int(a.args[0])
            if duration <= 0:
                raise ScriptError(f"press duration must be positive, got {duration}")
            changes.append((a.timestamp, 1))
            changes.append((a.timestamp + duration, 0))
            horizon = max(horizon, a.timestamp + duration)
        elif a.action == "button":
            if len(a.args) != 1 or a.args[0] not in ("0", "1"):
                raise ScriptError(f"button needs a 0/1 level, got {a.args}")
            changes.append((a.timestamp, int(a.args[0])))
    changes.sort(key=lambda c: c[0])
    horizon += period * (descriptor.stable_samples + 1)
    samples = []
    level = 0
    ci = 0
    t = 0
    while t <= horizon:
        while ci < len(changes) and changes[ci][0] <= t:
            level = changes[ci][1]
            ci += 1
        samples.append((t, level))
        t += period
    return ButtonSampleStream(tuple(samples), period)


def plan_node_messages(descriptor: NodeDescriptor, actions: Sequence[ScriptAction]) -> list[PlannedMessage]:
    """Pure function of the script: the node's outgoing messages on virtual time."""
    planned: list[PlannedMessage] = [PlannedMessage(0, MsgType.HELLO, {
        "node_type": descriptor.node_type.value,
        "room_id": descriptor.room_id,
    })]

    if descriptor.node_type is NodeType.ATTENDANCE:
        button_actions = [a for a in actions if a.action in ("press", "button")]
        if button_actions:
            stream = _button_stream(descriptor, button_actions)
            for edge in debounce(stream, descriptor.stable_samples):
                if edge.kind is EdgeKind.RISING:
                    planned.append(
                        PlannedMessage(
                            edge.timestamp,
                            MsgType.RFID_SCAN,
                            {"tag_uid": descriptor.tag_uid, "timestamp": edge.timestamp},
                        )
                    )
        for a in actions:
            if a.action == "rfid":
                tag = a.args[0] if a.args else descriptor.tag_uid
                planned.append(
                    PlannedMessage(a.timestamp, MsgType.RFID_SCAN, {"tag_uid": tag, "timestamp": a.timestamp})
                )
            elif a.action == "wifi":
                if len(a.args) != 2:
                    raise ScriptError(f"wifi needs <mac> <network>, got {a.args}")
                planned.append(
                    PlannedMessage(
                        a.timestamp,
                        MsgType.WIFI_JOIN,
                        {"mac": a.args[0], "network_id": a.args[1], "timestamp": a.timestamp},
                    )
                )
            elif a.action in ("press", "button", "end"):
                pass
            else:
                raise ScriptError(f"unknown attendance action {a.action!r}")
    else:
        sensor_actions = [a for a in actions if a.action == "sensors"]
        for a in actions:
            if a.action not in ("sensors", "end"):
                raise ScriptError(f"unknown eco action {a.action!r}")
            if a.action == "sensors" and len(a.args) != 4:
                raise ScriptError(f"sensors needs <temp> <hum> <lux_raw> <air_raw>, got {a.args}")
        if sensor_actions:
            end = max(a.timestamp for a in actions)
            t = sensor_actions[0].timestamp
            si = 0
            current = None
            while t <= end:
                while si < len(sensor_actions) and sensor_actions[si].timestamp <= t:
                    current = sensor_actions[si].args
                    si += 1
                if current is not None:
                    planned.append(
                        PlannedMessage(
                            t,
                            MsgType.SENSOR_REPORT,
                            {
                                "room_id": descriptor.room_id,
                                "timestamp": t,
                                "temp_c": float(current[0]),
                                "humidity_pct": float(current[1]),
                                "lux_raw": float(current[2]),
                                "air_raw": float(current[3]),
                            },
                        )
                    )
                t += descriptor.poll_ms

    planned.sort(key=lambda p: p.timestamp)
    return planned


@dataclass
class NodeState:
    """Local mirror updated from server responses while a node runs."""

    display: list[str] = field(default_factory=lambda: render_display(None))
    actuators: dict[str, bool] = field(default_factory=dict)


@dataclass
class NodeRunResult:
    transcript: list[TranscriptEntry]
    state: NodeState

    @property
    def sent(self) -> list[WireMessage]:
        return [e.message for e in self.transcript if e.direction == "sent"]

    @property
    def received(self) -> list[WireMessage]:
        return [e.message for e in self.transcript if e.direction == "recv"]


def run_node(
    descriptor: NodeDescriptor,
    actions: Sequence[ScriptAction],
    connection: Connection,
) -> NodeRunResult:
    """Run one node's planned timeline against a connection.

    Returns the ordered transcript of sent and received messages plus the
    node's final local state (display lines, actuator mirror). On
    ConnectionLost the partial transcript rides on the exception.
    """
    transcript: list[TranscriptEntry] = []
    state = NodeState()
    seq = 0
    for planned in plan_node_messages(descriptor, actions):
        seq += 1
        msg = WireMessage(planned.type, descriptor.node_id, seq, planned.body)
        try:
            responses = connection.exchange(msg)
        except ConnectionLost:
            raise
        except Exception as exc:
            raise ConnectionLost(transcript) from exc
        transcript.append(TranscriptEntry("sent", msg))
        for resp in responses:
            transcript.append(TranscriptEntry("recv", resp))
            if resp.type is MsgType.DISPLAY_TEXT:
                state.display = render_display(resp.body.get("lines"))
            elif resp.type is MsgType.ACTUATOR_CMD:
                state.actuators[str(resp.body.get("actuator"))] = bool(resp.body.get("new_state"))
    return NodeRunResult(transcript, state)
