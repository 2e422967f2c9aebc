"""Server side of the device wire protocol.

A DeviceGateway handles one logical connection: it validates node seq
ordering, routes attendance events to every open session, feeds sensor
reports through the environment pipeline, and answers each non-Ack message
with exactly one Ack (plus any triggered DisplayText / ActuatorCmd pushes,
which are sent before the Ack). A small threaded TCP server and a matching
client-side Connection carry the same frames over a real byte stream.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
from .. import attendance as att
from .. import ecosmart as eco
from ..devicesim import (
    DecodeError,
    FrameTooLong,
    MsgType,
    WireMessage,
    decode_message,
    encode_message,
)
from ..retrieval import RetrievalError
from .platform import Platform

logger = logging.getLogger(__name__)

ATTENDANCE_TAKEN = "Attendance Taken!"
SYSTEM_READY = "System Ready"


class DeviceGateway:
    """Per-connection protocol handler over a shared Platform."""

    def __init__(self, platform: Platform):
        self.platform = platform
        self._last_node_seq = 0
        self._server_seq = 0
        self.node_types: dict[str, str] = {}
        self.push_acks_received: list[int] = []  # ack_seqs the node sent back for our pushes

    def _next_seq(self) -> int:
        self._server_seq += 1
        return self._server_seq

    def _ack(self, msg: WireMessage, status: str, detail: str = "", **extra) -> WireMessage:
        body = {"ack_seq": msg.seq, "status": status}
        if detail:
            body["detail"] = detail
        body.update(extra)
        return WireMessage(MsgType.ACK, msg.node_id, self._next_seq(), body)

    def _display(self, node_id: str, lines: list[str]) -> WireMessage:
        return WireMessage(MsgType.DISPLAY_TEXT, node_id, self._next_seq(), {"lines": lines})

    def exchange(self, msg: WireMessage) -> list[WireMessage]:
        """Process one node message; responses end with this message's Ack."""
        if msg.type is MsgType.ACK:
            ack_seq = msg.body.get("ack_seq")
            if isinstance(ack_seq, int):
                self.push_acks_received.append(ack_seq)
            return []
        if msg.seq <= self._last_node_seq:
            return [self._ack(msg, "error", f"seq must increase (last was {self._last_node_seq})")]
        self._last_node_seq = msg.seq

        try:
            if msg.type is MsgType.HELLO:
                return self._handle_hello(msg)
            if msg.type is MsgType.RFID_SCAN:
                return self._handle_auth(msg, att.EventKind.RFID_SCAN, {"tag_uid": msg.body.get("tag_uid")})
            if msg.type is MsgType.WIFI_JOIN:
                return self._handle_auth(
                    msg,
                    att.EventKind.WIFI_PRESENCE,
                    {"mac": msg.body.get("mac"), "network_id": msg.body.get("network_id")},
                )
            if msg.type is MsgType.SENSOR_REPORT:
                return self._handle_sensor(msg)
            return [self._ack(msg, "error", f"server does not accept {msg.type.value} messages")]
        except (att.AttendanceError, eco.EcoError, RetrievalError) as exc:
            return [self._ack(msg, "error", str(exc))]

    def _handle_hello(self, msg: WireMessage) -> list[WireMessage]:
        node_type = str(msg.body.get("node_type", ""))
        self.node_types[msg.node_id] = node_type
        responses = []
        if node_type == "attendance":
            responses.append(self._display(msg.node_id, [SYSTEM_READY]))
        responses.append(self._ack(msg, "ok"))
        return responses

    def _handle_auth(self, msg: WireMessage, kind: att.EventKind, payload: dict) -> list[WireMessage]:
        ts = msg.body.get("timestamp")
        if not isinstance(ts, (int, float)):
            return [self._ack(msg, "error", "timestamp required")]
        acks, _seq = self.platform.broadcast_auth_event(kind, int(ts), msg.node_id, payload)
        if not acks:
            return [self._ack(msg, "error", "no open session")]
        completed = [(sid, a) for sid, a in acks if a.completes]
        responses: list[WireMessage] = []
        if completed:
            responses.append(self._display(msg.node_id, [ATTENDANCE_TAKEN]))
        best = completed[0][1] if completed else acks[0][1]
        responses.append(
            self._ack(
                msg,
                "ok",
                completes=best.completes,
                reason=best.reason.value,
                student_id=best.student_id,
            )
        )
        return responses

    def _handle_sensor(self, msg: WireMessage) -> list[WireMessage]:
        body = msg.body
        required = ("room_id", "timestamp", "temp_c", "humidity_pct", "lux_raw", "air_raw")
        if any(k not in body for k in required):
            missing = [k for k in required if k not in body]
            return [self._ack(msg, "error", f"missing fields: {', '.join(missing)}")]
        _room, commands, _seq = self.platform.report_environment(
            str(body["room_id"]),
            int(body["timestamp"]),
            float(body["temp_c"]),
            float(body["humidity_pct"]),
            float(body["lux_raw"]),
            float(body["air_raw"]),
        )
        responses = [
            WireMessage(
                MsgType.ACTUATOR_CMD,
                msg.node_id,
                self._next_seq(),
                {"actuator": c.actuator, "new_state": c.new_state, "cause": c.cause},
            )
            for c in commands
        ]
        responses.append(self._ack(msg, "ok", commands=len(commands)))
        return responses


class LoopbackConnection:
    """In-process Connection: exchanges directly with a gateway.

    Acks every received push on the node's behalf, keeping the one-Ack-per-
    message rule symmetric without polluting node transcripts.
    """

    def __init__(self, gateway: DeviceGateway, node_id: str = ""):
        self.gateway = gateway
        self.node_id = node_id
        self._ack_seq = 0

    def exchange(self, msg: WireMessage) -> list[WireMessage]:
        responses = self.gateway.exchange(msg)
        for resp in responses:
            if resp.type is not MsgType.ACK:
                self._ack_seq += 1
                self.gateway.exchange(
                    WireMessage(
                        MsgType.ACK,
                        msg.node_id or self.node_id,
                        msg.seq,  # seq namespace is per direction; reuse is harmless for acks
                        {"ack_seq": resp.seq, "status": "ok"},
                    )
                )
        return responses


# -- TCP bridge ----------------------------------------------------------------


class SocketConnection:
    """Client-side Connection speaking newline-delimited frames over a socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._rfile = sock.makefile("rb")

    def exchange(self, msg: WireMessage) -> list[WireMessage]:
        self._sock.sendall(encode_message(msg))
        responses: list[WireMessage] = []
        while True:
            line = self._rfile.readline()
            if not line:
                raise ConnectionError("server closed the connection")
            resp = decode_message(line)
            responses.append(resp)
            if resp.type is MsgType.ACK and resp.body.get("ack_seq") == msg.seq:
                break
        for resp in responses:
            if resp.type is not MsgType.ACK:
                self._sock.sendall(
                    encode_message(
                        WireMessage(MsgType.ACK, msg.node_id, msg.seq, {"ack_seq": resp.seq, "status": "ok"})
                    )
                )
        return responses

    def close(self) -> None:
        self._rfile.close()
        self._sock.close()


class DeviceTCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], platform: Platform):
        self.platform = platform
        super().__init__(address, _DeviceHandler)


class _DeviceHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        gateway = DeviceGateway(self.server.platform)  # type: ignore[attr-defined]
        while True:
            line = self.rfile.readline(64 * 1024 + 2)
            if not line:
                return
            try:
                msg = decode_message(line)
            except (DecodeError, FrameTooLong) as exc:
                error = WireMessage(MsgType.ACK, "", 0, {"ack_seq": -1, "status": "error", "detail": str(exc)})
                self.wfile.write(encode_message(error))
                continue
            for resp in gateway.exchange(msg):
                self.wfile.write(encode_message(resp))
            self.wfile.flush()


def start_device_server(platform: Platform, host: str, port: int) -> DeviceTCPServer:
    """Start the device port in a daemon thread; returns the server handle."""
    server = DeviceTCPServer((host, port), platform)
    thread = threading.Thread(target=server.serve_forever, name="device-port", daemon=True)
    thread.start()
    logger.info("device port listening on %s:%d", host, server.server_address[1])
    return server
