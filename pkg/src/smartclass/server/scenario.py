"""Scripted end-to-end runs: virtual devices against an in-process platform.

A scenario file extends the device script grammar with setup directives
(quotes allowed via shell-style splitting):

    student <student_id> <display_name> <tag_uid> <mac>
    session <class_id> <window_start> <window_end> <pairing_ms> <network> [room]
    document <doc_id> <title> <path-relative-to-script>
    node <node_id> <attendance|eco> room=.. tag=.. poll_ms=..
    at <ts_ms> <node_id> <action> [args...]

All nodes' planned messages are merged on virtual time and exchanged in that
order, so a run is fully deterministic and its event log replays to the same
digest.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..devicesim import (
    NodeDescriptor,
    NodeRunResult,
    NodeState,
    ScenarioScript,
    ScriptError,
    TranscriptEntry,
    WireMessage,
    MsgType,
    parse_script,
    plan_node_messages,
    render_display,
)
from .config import PlatformConfig
from .eventlog import EventLog
from .gateway import DeviceGateway, LoopbackConnection
from .platform import Platform

_SETUP_DIRECTIVES = ("student", "session", "document")


@dataclass
class ScenarioSetup:
    students: list[tuple[str, str, str, str]] = field(default_factory=list)
    sessions: list[tuple[str, int, int, int, str, str]] = field(default_factory=list)
    documents: list[tuple[str, str, str]] = field(default_factory=list)  # (doc_id, title, path)


@dataclass
class ScenarioOutcome:
    platform: Platform
    script: ScenarioScript
    node_results: dict[str, NodeRunResult]
    session_ids: list[str]
    digest: str


def split_scenario_text(text: str) -> tuple[ScenarioSetup, str]:
    """Separate setup directives from the device-script lines."""
    setup = ScenarioSetup()
    device_lines: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        word = stripped.split()[0]
        if word not in _SETUP_DIRECTIVES:
            device_lines.append(raw)
            continue
        parts = shlex.split(stripped)
        if word == "student":
            if len(parts) != 5:
                raise ScriptError(f"line {lineno}: student needs <id> <name> <tag> <mac>")
            setup.students.append((parts[1], parts[2], parts[3], parts[4]))
        elif word == "session":
            if len(parts) not in (6, 7):
                raise ScriptError(
                    f"line {lineno}: session needs <class> <start> <end> <pairing> <network> [room]"
                )
            room = parts[6] if len(parts) == 7 else ""
            setup.sessions.append(
                (parts[1], int(parts[2]), int(parts[3]), int(parts[4]), parts[5], room)
            )
        else:
            if len(parts) != 4:
                raise ScriptError(f"line {lineno}: document needs <doc_id> <title> <path>")
            setup.documents.append((parts[1], parts[2], parts[3]))
    return setup, "\n".join(device_lines)


def run_scenario_script(
    text: str,
    config: Optional[PlatformConfig] = None,
    base_dir: Optional[Path] = None,
    event_log: Optional[EventLog] = None,
) -> ScenarioOutcome:
    setup, device_text = split_scenario_text(text)
    script = parse_script(device_text)
    platform = Platform(config, event_log if event_log is not None else EventLog())

    for student in setup.students:
        platform.register_student(*student)
    session_ids = []
    for class_id, start, end, pairing, network, room in setup.sessions:
        session, _ = platform.open_session(class_id, start, end, pairing, network, room)
        session_ids.append(session.session_id)
    for doc_id, title, rel_path in setup.documents:
        doc_path = (base_dir or Path.cwd()) / rel_path
        platform.ingest_document(doc_id, title, doc_path.read_text(encoding="utf-8"))

    # One gateway + connection per node; planned messages merged on virtual time.
    connections: dict[str, LoopbackConnection] = {}
    node_seq: dict[str, int] = {}
    results: dict[str, NodeRunResult] = {}
    merged: list[tuple[int, int, int, NodeDescriptor, object]] = []
    for order, descriptor in enumerate(script.nodes):
        connections[descriptor.node_id] = LoopbackConnection(DeviceGateway(platform), descriptor.node_id)
        node_seq[descriptor.node_id] = 0
        results[descriptor.node_id] = NodeRunResult([], NodeState())
        for idx, planned in enumerate(plan_node_messages(descriptor, script.actions_for(descriptor.node_id))):
            merged.append((planned.timestamp, order, idx, descriptor, planned))
    merged.sort(key=lambda item: (item[0], item[1], item[2]))

    for _ts, _order, _idx, descriptor, planned in merged:
        node_id = descriptor.node_id
        node_seq[node_id] += 1
        msg = WireMessage(planned.type, node_id, node_seq[node_id], planned.body)
        responses = connections[node_id].exchange(msg)
        result = results[node_id]
        result.transcript.append(TranscriptEntry("sent", msg))
        for resp in responses:
            result.transcript.append(TranscriptEntry("recv", resp))
            if resp.type is MsgType.DISPLAY_TEXT:
                result.state.display = render_display(resp.body.get("lines"))
            elif resp.type is MsgType.ACTUATOR_CMD:
                result.state.actuators[str(resp.body.get("actuator"))] = bool(resp.body.get("new_state"))

    return ScenarioOutcome(platform, script, results, session_ids, platform.state_digest())


def run_scenario_file(
    path: str | Path, config: Optional[PlatformConfig] = None, event_log: Optional[EventLog] = None
) -> ScenarioOutcome:
    p = Path(path)
    return run_scenario_script(
        p.read_text(encoding="utf-8"), config, base_dir=p.parent, event_log=event_log
    )


def attendance_table(platform: Platform, session_id: str) -> str:
    """Plain-text attendance table for scenario output."""
    names = {r.student_id: r.display_name for r in platform.registry.students()}
    lines = [f"session {session_id}", f"{'student':<12} {'name':<20} {'status':<8} reason"]
    for r in platform.attendance_results(session_id):
        lines.append(
            f"{r.student_id:<12} {names.get(r.student_id, ''):<20} {r.status.value:<8} {r.reason.value}"
        )
    return "\n".join(lines)
