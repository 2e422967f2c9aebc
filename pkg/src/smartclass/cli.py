"""Command line entry points.

``serve`` runs the HTTP API (and optional device TCP port); ``replay``
rebuilds state from an event log and prints the digest; ``scenario`` runs a
scripted device run against a fresh in-process server. ``quiz`` is the local
quiz generator: document path plus optional topic and question count, then an
interactive loop reading topics from stdin until end-of-input. Everything
under ``client`` is a thin HTTP client over the API.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .quizgen import (
    DEFAULT_NUM_QUESTIONS,
    InsufficientMaterial,
    NoContext,
    QuizRequest,
    generate_quiz,
    serialize_quiz,
)
from .retrieval import EmptyDocument, IndexCache, make_document

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INGEST = 3


# -- quiz (local pipeline) ----------------------------------------------------


def _quiz_once(document, cache, topic: str, num_questions: int) -> int:
    try:
        quiz = generate_quiz(
            QuizRequest(doc_id=document.doc_id, topic=topic, num_questions=num_questions),
            document=document,
            cache=cache,
        )
    except (NoContext, InsufficientMaterial) as exc:
        print(f"no quiz for topic {topic!r}: {exc}", file=sys.stderr)
        return EXIT_OK
    sys.stdout.write(serialize_quiz(quiz.questions))
    sys.stdout.flush()
    return EXIT_OK


def cmd_quiz(args: argparse.Namespace) -> int:
    path = Path(args.document)
    try:
        text = path.read_text(encoding="utf-8")
        document = make_document(path.stem, path.name, text)
    except (OSError, UnicodeDecodeError, EmptyDocument) as exc:
        print(f"cannot ingest {path}: {exc}", file=sys.stderr)
        return EXIT_INGEST
    cache = IndexCache()

    if args.topic:
        _quiz_once(document, cache, args.topic, args.num_questions)
    if args.no_loop:
        return EXIT_OK
    if sys.stdin.isatty():
        print("enter a topic per line (ctrl-d to finish):", file=sys.stderr)
    for line in sys.stdin:
        topic = line.strip()
        if not topic:
            continue
        _quiz_once(document, cache, topic, args.num_questions)
    return EXIT_OK


# -- serve / replay / scenario --------------------------------------------------


def _load_config(path: Optional[str]):
    from .server.config import PlatformConfig, load_config

    return load_config(path) if path else PlatformConfig()


def bootstrap_registry(platform, path: str) -> int:
    """Register students from a JSONL bootstrap file as normal commands, so
    they land in the event log and replay stays exact. Existing ids are
    skipped (idempotent across restarts)."""
    import json as _json

    registered = 0
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        row = _json.loads(line)
        if row["student_id"] in platform.registry:
            continue
        platform.register_student(row["student_id"], row["display_name"], row["tag_uid"], row["mac"])
        registered += 1
    return registered


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server.api import create_app
    from .server.eventlog import EventLog
    from .server.gateway import start_device_server
    from .server.platform import Platform

    from .server.config import ConfigInvalid

    try:
        config = _load_config(args.config)
    except ConfigInvalid as exc:
        print(exc, file=sys.stderr)
        return 1
    log_path = args.log or config.server.event_log
    platform = Platform(config, EventLog(log_path))
    if args.registry:
        count = bootstrap_registry(platform, args.registry)
        print(f"registered {count} students from {args.registry}", file=sys.stderr)
    if config.server.device_port:
        start_device_server(platform, config.server.host, config.server.device_port)
    app = create_app(platform)
    uvicorn.run(app, host=config.server.host, port=args.port or config.server.port)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    from .server.config import ConfigInvalid
    from .server.eventlog import CorruptRecord, read_log
    from .server.platform import Platform
    from .server.scenario import attendance_table

    try:
        config = _load_config(args.config)
    except ConfigInvalid as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        records = read_log(args.log)
    except CorruptRecord as exc:
        print(f"log corrupt: {exc}", file=sys.stderr)
        return 1
    platform = Platform.replay(records, config)
    print(f"replayed {len(records)} records")
    print(f"digest {platform.state_digest()}")
    for session_id in platform.sessions:
        print(attendance_table(platform, session_id))
    return EXIT_OK


def cmd_scenario(args: argparse.Namespace) -> int:
    from .server.config import ConfigInvalid
    from .server.eventlog import EventLog
    from .server.scenario import attendance_table, run_scenario_file

    try:
        config = _load_config(args.config)
    except ConfigInvalid as exc:
        print(exc, file=sys.stderr)
        return 1
    outcome = run_scenario_file(args.script, config, EventLog(args.log) if args.log else None)
    for node_id, result in outcome.node_results.items():
        sent = len(result.sent)
        print(f"node {node_id}: {sent} messages sent, display: {' / '.join(result.state.display)}")
    for session_id in outcome.session_ids:
        print(attendance_table(outcome.platform, session_id))
    print(f"digest {outcome.digest}")
    return EXIT_OK


# -- thin HTTP client -------------------------------------------------------------


def _client_request(args: argparse.Namespace, method: str, route: str, body: Optional[dict] = None) -> int:
    import httpx

    headers = {}
    if args.admin_token:
        headers["X-Admin-Token"] = args.admin_token
    url = args.base_url.rstrip("/") + route
    resp = httpx.request(method, url, json=body, headers=headers, timeout=args.timeout)
    try:
        payload = resp.json()
    except ValueError:
        payload = {"raw": resp.text}
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK if resp.is_success else 1


def cmd_client(args: argparse.Namespace) -> int:
    c = args.client_command
    if c == "register-student":
        return _client_request(
            args,
            "POST",
            "/api/students",
            {
                "student_id": args.student_id,
                "display_name": args.display_name,
                "tag_uid": args.tag_uid,
                "mac": args.mac,
            },
        )
    if c == "students":
        return _client_request(args, "GET", "/api/students")
    if c == "open-session":
        return _client_request(
            args,
            "POST",
            "/api/sessions",
            {
                "class_id": args.class_id,
                "window_start": args.window_start,
                "window_end": args.window_end,
                "pairing_window_ms": args.pairing_window_ms,
                "network_id": args.network_id,
                "room_id": args.room_id,
            },
        )
    if c == "close-session":
        return _client_request(args, "POST", f"/api/sessions/{args.session_id}/close")
    if c == "attendance":
        return _client_request(args, "GET", f"/api/sessions/{args.session_id}/attendance")
    if c == "ingest":
        text = Path(args.path).read_text(encoding="utf-8")
        return _client_request(
            args, "POST", "/api/documents", {"doc_id": args.doc_id, "title": args.title, "text": text}
        )
    if c == "chat":
        return _client_request(
            args,
            "POST",
            "/api/chat",
            {
                "student_id": args.student_id,
                "session_id": args.session_id,
                "doc_id": args.doc_id,
                "text": args.text,
                "k": args.k,
            },
        )
    if c == "quiz":
        return _client_request(
            args,
            "POST",
            "/api/quiz",
            {"doc_id": args.doc_id, "topic": args.topic, "num_questions": args.num_questions},
        )
    if c == "environment":
        return _client_request(args, "GET", f"/api/rooms/{args.room_id}/environment")
    if c == "digest":
        return _client_request(args, "GET", "/api/state/digest")
    if c == "inject":
        return _client_request(
            args,
            "POST",
            "/api/devices/events",
            {
                "kind": args.kind,
                "node_id": args.node_id,
                "timestamp": args.timestamp,
                "session_id": args.session_id,
                "payload": json.loads(args.payload),
            },
        )
    raise AssertionError(f"unhandled client command {c!r}")


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smartclass", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP API server")
    p.add_argument("--config", help="path to YAML config")
    p.add_argument("--log", help="event log path (overrides config)")
    p.add_argument("--port", type=int, help="listen port (overrides config)")
    p.add_argument("--registry", help="JSONL registry bootstrap (student_id, display_name, tag_uid, mac)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="rebuild state from an event log")
    p.add_argument("--log", required=True)
    p.add_argument("--config", help="config to replay under (must match the recording)")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("scenario", help="run a scripted device scenario in-process")
    p.add_argument("--script", required=True)
    p.add_argument("--config")
    p.add_argument("--log", help="also persist the event log to this path")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("quiz", help="generate quizzes from a document")
    p.add_argument("document", help="path to a plain-text document")
    p.add_argument("--topic", help="generate for this topic before reading stdin")
    p.add_argument(
        "-n",
        "--num-questions",
        type=int,
        default=DEFAULT_NUM_QUESTIONS,
        help=f"questions per quiz (default {DEFAULT_NUM_QUESTIONS})",
    )
    p.add_argument("--no-loop", action="store_true", help="skip the interactive topic loop")
    p.set_defaults(func=cmd_quiz)

    p = sub.add_parser("client", help="thin client for the HTTP API")
    p.add_argument("--base-url", default="http://127.0.0.1:8000")
    p.add_argument("--admin-token", default=None)
    p.add_argument("--timeout", type=float, default=30.0)
    csub = p.add_subparsers(dest="client_command", required=True)

    c = csub.add_parser("register-student")
    c.add_argument("student_id")
    c.add_argument("display_name")
    c.add_argument("tag_uid")
    c.add_argument("mac")

    csub.add_parser("students")

    c = csub.add_parser("open-session")
    c.add_argument("class_id")
    c.add_argument("window_start", type=int)
    c.add_argument("window_end", type=int)
    c.add_argument("--pairing-window-ms", type=int, default=None)
    c.add_argument("--network-id", default="")
    c.add_argument("--room-id", default="")

    c = csub.add_parser("close-session")
    c.add_argument("session_id")

    c = csub.add_parser("attendance")
    c.add_argument("session_id")

    c = csub.add_parser("ingest")
    c.add_argument("doc_id")
    c.add_argument("path")
    c.add_argument("--title", default="")

    c = csub.add_parser("chat")
    c.add_argument("student_id")
    c.add_argument("session_id")
    c.add_argument("doc_id")
    c.add_argument("text")
    c.add_argument("-k", type=int, default=None)

    c = csub.add_parser("quiz")
    c.add_argument("doc_id")
    c.add_argument("topic")
    c.add_argument("-n", "--num-questions", type=int, default=None)

    c = csub.add_parser("environment")
    c.add_argument("room_id")

    csub.add_parser("digest")

    c = csub.add_parser("inject")
    c.add_argument("kind", choices=["rfid_scan", "wifi_presence"])
    c.add_argument("payload", help="JSON payload, e.g. '{\"tag_uid\": \"04a3b2c1\"}'")
    c.add_argument("--node-id", default="injected")
    c.add_argument("--timestamp", type=int, default=0)
    c.add_argument("--session-id", default=None)

    p.set_defaults(func=cmd_client)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
