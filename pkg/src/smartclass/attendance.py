"""Dual-factor attendance state machine.

A student is marked present only when an RFID scan of their tag and a WiFi
presence observation of their registered device MAC both fall inside the
session window and within ``pairing_window_ms`` of each other. Events arrive
in ingest order (the ``seq`` counter), timestamps come from the event payloads
(never the wall clock), and evaluation is a pure function of the event list so
every determination is replayable.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

TAG_UID_RE = re.compile(r"^(?:[0-9a-f]{2}){4,10}$")
MAC_RE = re.compile(r"^(?:[0-9a-f]{2}:){5}[0-9a-f]{2}$")

DEFAULT_PAIRING_WINDOW_MS = 300_000


class AttendanceError(Exception):
    """Base class for attendance failures."""


class DuplicateStudentId(AttendanceError):
    pass


class DuplicateTag(AttendanceError):
    pass


class DuplicateMac(AttendanceError):
    pass


class InvalidCredential(AttendanceError):
    """Syntactically invalid tag UID or MAC at registration time."""


class InvalidWindow(AttendanceError):
    pass


class SessionClosed(AttendanceError):
    pass


class UnknownStudent(AttendanceError):
    pass


class EventKind(str, Enum):
    RFID_SCAN = "rfid_scan"
    WIFI_PRESENCE = "wifi_presence"


class Status(str, Enum):
    PRESENT = "present"
    ABSENT = "absent"
    FLAGGED = "flagged"


class Reason(str, Enum):
    OK = "ok"
    NO_RFID = "no_rfid"
    NO_WIFI = "no_wifi"
    OUTSIDE_WINDOW = "outside_window"
    PAIRING_TOO_FAR = "pairing_too_far"
    WRONG_NETWORK = "wrong_network"
    TAG_MAC_MISMATCH = "tag_mac_mismatch"
    DUPLICATE_TAG_USE = "duplicate_tag_use"
    # Ack/failure-log only; never appears on an AttendanceResult.
    MALFORMED = "malformed"


class FraudKind(str, Enum):
    PROXY_SCAN = "proxy_scan"
    DUPLICATE_TAG_USE = "duplicate_tag_use"
    SHARED_MAC_EVIDENCE = "shared_mac_evidence"


# Reason shown on a Flagged result, per fraud kind. Checked in priority order
# when a student carries more than one flag.
_FLAG_REASON = {
    FraudKind.DUPLICATE_TAG_USE: Reason.DUPLICATE_TAG_USE,
    FraudKind.PROXY_SCAN: Reason.TAG_MAC_MISMATCH,
    FraudKind.SHARED_MAC_EVIDENCE: Reason.TAG_MAC_MISMATCH,
}
_FLAG_PRIORITY = (
    FraudKind.DUPLICATE_TAG_USE,
    FraudKind.PROXY_SCAN,
    FraudKind.SHARED_MAC_EVIDENCE,
)


def normalize_tag_uid(tag_uid: str) -> str:
    """Lowercase a tag UID; raises InvalidCredential unless 4-10 hex bytes."""
    tag = str(tag_uid).strip().lower()
    if not TAG_UID_RE.match(tag):
        raise InvalidCredential(f"invalid tag_uid: {tag_uid!r}")
    return tag


def normalize_mac(mac: str) -> str:
    """Canonical lowercase colon form, e.g. aa:bb:cc:dd:ee:01."""
    m = str(mac).strip().lower().replace("-", ":")
    if not MAC_RE.match(m):
        raise InvalidCredential(f"invalid mac: {mac!r}")
    return m


@dataclass(frozen=True)
class StudentRecord:
    student_id: str
    display_name: str
    tag_uid: str
    mac: str


class Registry:
    """Student registry binding identities to the two auth factors.

    tag_uid, mac and student_id are each unique across the registry. The
    registry is treated as immutable while a session is open; mutation happens
    only through :meth:`register`.
    """

    def __init__(self) -> None:
        self._by_id: dict[str, StudentRecord] = {}
        self._by_tag: dict[str, str] = {}
        self._by_mac: dict[str, str] = {}

    def register(self, student_id: str, display_name: str, tag_uid: str, mac: str) -> StudentRecord:
        if not student_id or not display_name:
            raise InvalidCredential("student_id and display_name must be non-empty")
        tag = normalize_tag_uid(tag_uid)
        mac_c = normalize_mac(mac)
        if student_id in self._by_id:
            raise DuplicateStudentId(student_id)
        if tag in self._by_tag:
            raise DuplicateTag(tag)
        if mac_c in self._by_mac:
            raise DuplicateMac(mac_c)
        record = StudentRecord(student_id, display_name, tag, mac_c)
        self._by_id[student_id] = record
        self._by_tag[tag] = student_id
        self._by_mac[mac_c] = student_id
        return record

    def students(self) -> list[StudentRecord]:
        return list(self._by_id.values())

    def get(self, student_id: str) -> StudentRecord:
        try:
            return self._by_id[student_id]
        except KeyError:
            raise UnknownStudent(student_id) from None

    def __contains__(self, student_id: str) -> bool:
        return student_id in self._by_id

    def __len__(self) -> int:
        return len(self._by_id)

    def by_tag(self, tag_uid: str) -> Optional[StudentRecord]:
        sid = self._by_tag.get(tag_uid)
        return self._by_id[sid] if sid else None

    def by_mac(self, mac: str) -> Optional[StudentRecord]:
        sid = self._by_mac.get(mac)
        return self._by_id[sid] if sid else None

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "Registry":
        """Bootstrap registry from a line-delimited file.

        Each line is a JSON object with fields student_id, display_name,
        tag_uid, mac. Blank lines and '#' comments are skipped.
        """
        reg = cls()
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidCredential(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            reg.register(row["student_id"], row["display_name"], row["tag_uid"], row["mac"])
        return reg


def register_student(
    registry: Registry, student_id: str, display_name: str, tag_uid: str, mac: str
) -> Registry:
    """Functional-style wrapper over Registry.register; returns the registry."""
    registry.register(student_id, display_name, tag_uid, mac)
    return registry


@dataclass(frozen=True)
class AuthEvent:
    seq: int
    kind: EventKind
    timestamp: int
    node_id: str
    payload: dict


@dataclass(frozen=True)
class Ack:
    """Immediate feedback for a recorded event.

    ``completes`` is true when this event, combined with prior events, turned
    some student's status to Present. ``student_id`` names that student (or
    the owner of the credential when identifiable).
    """

    seq: int
    completes: bool
    reason: Reason
    student_id: Optional[str] = None


@dataclass(frozen=True)
class FailureLogEntry:
    timestamp: int
    student_id: Optional[str]
    event_seq: int
    reason: Reason
    retry_count: int


@dataclass(frozen=True)
class AttendanceResult:
    student_id: str
    status: Status
    reason: Reason
    evidence: Optional[tuple[int, int]] = None  # (rfid_event_seq, wifi_event_seq)


@dataclass(frozen=True)
class FraudFlag:
    kind: FraudKind
    student_id: str
    event_seqs: tuple[int, ...]
    detail: str = ""


@dataclass(frozen=True)
class FraudConfig:
    """Per-rule toggles; each rule can be disabled independently."""

    proxy_scan: bool = True
    duplicate_tag: bool = True
    shared_mac: bool = True

    @classmethod
    def disabled(cls) -> "FraudConfig":
        return cls(proxy_scan=False, duplicate_tag=False, shared_mac=False)


DEFAULT_FRAUD = FraudConfig()


class ClassSession:
    """A time-windowed session accumulating auth events.

    Events are appended through :meth:`record_event` only, which assigns the
    strictly increasing ``seq``. Failure log is append-only.
    """

    def __init__(
        self,
        class_id: str,
        window_start: int,
        window_end: int,
        pairing_window_ms: int = DEFAULT_PAIRING_WINDOW_MS,
        network_id: str = "",
        session_id: Optional[str] = None,
    ) -> None:
        if window_start >= window_end:
            raise InvalidWindow(f"window_start {window_start} must precede window_end {window_end}")
        if pairing_window_ms <= 0:
            raise InvalidWindow(f"pairing_window_ms must be positive, got {pairing_window_ms}")
        self.session_id = session_id or uuid.uuid4().hex
        self.class_id = class_id
        self.window_start = window_start
        self.window_end = window_end
        self.pairing_window_ms = pairing_window_ms
        self.network_id = network_id
        self.events: list[AuthEvent] = []
        self.failure_log: list[FailureLogEntry] = []
        self.closed = False
        self._seq = 0

    @property
    def state(self) -> str:
        return "closed" if self.closed else "open"

    def in_window(self, timestamp: int) -> bool:
        return self.window_start <= timestamp <= self.window_end

    # -- ingest ----------------------------------------------------------

    def record_event(
        self,
        registry: Registry,
        kind: EventKind,
        timestamp: int,
        node_id: str,
        payload: dict,
    ) -> Ack:
        if self.closed:
            raise SessionClosed(self.session_id)
        self._seq += 1
        event = AuthEvent(self._seq, EventKind(kind), int(timestamp), node_id, dict(payload))
        self.events.append(event)
        ack = self._classify(registry, event)
        if ack.reason in (
            Reason.MALFORMED,
            Reason.TAG_MAC_MISMATCH,
            Reason.WRONG_NETWORK,
            Reason.OUTSIDE_WINDOW,
        ):
            self._log_failure(event, ack)
        return ack

    def _log_failure(self, event: AuthEvent, ack: Ack) -> None:
        prior = sum(1 for e in self.failure_log if e.student_id == ack.student_id)
        self.failure_log.append(
            FailureLogEntry(
                timestamp=event.timestamp,
                student_id=ack.student_id,
                event_seq=event.seq,
                reason=ack.reason,
                retry_count=prior,
            )
        )

    def _classify(self, registry: Registry, event: AuthEvent) -> Ack:
        """Ack for a just-appended event: waiting state, failure, or completion."""
        seq = event.seq
        if event.timestamp < 0:
            return Ack(seq, False, Reason.MALFORMED)
        if event.kind is EventKind.RFID_SCAN:
            raw = event.payload.get("tag_uid")
            try:
                tag = normalize_tag_uid(raw) if isinstance(raw, str) else None
            except InvalidCredential:
                tag = None
            if tag is None:
                return Ack(seq, False, Reason.MALFORMED)
            record = registry.by_tag(tag)
            if record is None:
                return Ack(seq, False, Reason.TAG_MAC_MISMATCH)
            if not self.in_window(event.timestamp):
                return Ack(seq, False, Reason.OUTSIDE_WINDOW, record.student_id)
            waiting = Reason.NO_WIFI
        else:
            raw_mac = event.payload.get("mac")
            network = event.payload.get("network_id")
            try:
                mac = normalize_mac(raw_mac) if isinstance(raw_mac, str) else None
            except InvalidCredential:
                mac = None
            if mac is None or not isinstance(network, str):
                return Ack(seq, False, Reason.MALFORMED)
            record = registry.by_mac(mac)
            if record is None:
                return Ack(seq, False, Reason.TAG_MAC_MISMATCH)
            if network != self.network_id:
                return Ack(seq, False, Reason.WRONG_NETWORK, record.student_id)
            if not self.in_window(event.timestamp):
                return Ack(seq, False, Reason.OUTSIDE_WINDOW, record.student_id)
            waiting = Reason.NO_RFID
        # Registered credential inside the window: did it complete the pair?
        before = best_pair(self, record, exclude_seq=seq)
        after = best_pair(self, record)
        if before is None and after is not None:
            return Ack(seq, True, Reason.OK, record.student_id)
        return Ack(seq, False, waiting if after is None else Reason.OK, record.student_id)

    # -- lifecycle -------------------------------------------------------

    def close(self) -> bool:
        """Close the session. Second close is a no-op; returns False then."""
        if self.closed:
            return False
        self.closed = True
        return True


def open_session(
    class_id: str,
    window_start: int,
    window_end: int,
    pairing_window_ms: int = DEFAULT_PAIRING_WINDOW_MS,
    network_id: str = "",
    session_id: Optional[str] = None,
) -> ClassSession:
    return ClassSession(class_id, window_start, window_end, pairing_window_ms, network_id, session_id)


def close_session(session: ClassSession) -> ClassSession:
    session.close()
    return session


# -- evaluation ------------------------------------------------------------


def _rfid_events(session: ClassSession, tag_uid: str, in_window_only: bool = True) -> list[AuthEvent]:
    out = []
    for e in session.events:
        if e.kind is not EventKind.RFID_SCAN:
            continue
        raw = e.payload.get("tag_uid")
        if not isinstance(raw, str) or raw.strip().lower() != tag_uid:
            continue
        if in_window_only and not session.in_window(e.timestamp):
            continue
        out.append(e)
    return out


def _wifi_events(
    session: ClassSession,
    mac: str,
    *,
    expected_network_only: bool = True,
    in_window_only: bool = True,
) -> list[AuthEvent]:
    out = []
    for e in session.events:
        if e.kind is not EventKind.WIFI_PRESENCE:
            continue
        raw = e.payload.get("mac")
        if not isinstance(raw, str) or raw.strip().lower().replace("-", ":") != mac:
            continue
        if expected_network_only and e.payload.get("network_id") != session.network_id:
            continue
        if in_window_only and not session.in_window(e.timestamp):
            continue
        out.append(e)
    return out


def best_pair(
    session: ClassSession, record: StudentRecord, exclude_seq: Optional[int] = None
) -> Optional[tuple[AuthEvent, AuthEvent]]:
    """Earliest qualifying (rfid, wifi) pair ordered by (t_r, t_w, seqs).

    ``exclude_seq`` evaluates the session as if that event were absent, used
    for completion detection on ingest.
    """
    best: Optional[tuple[AuthEvent, AuthEvent]] = None
    best_key: Optional[tuple[int, int, int, int]] = None
    for r in _rfid_events(session, record.tag_uid):
        if r.seq == exclude_seq:
            continue
        for w in _wifi_events(session, record.mac):
            if w.seq == exclude_seq:
                continue
            if abs(r.timestamp - w.timestamp) > session.pairing_window_ms:
                continue
            key = (r.timestamp, w.timestamp, r.seq, w.seq)
            if best_key is None or key < best_key:
                best_key = key
                best = (r, w)
    return best


class _EventView:
    """One-pass partition of a session's events, keyed by normalized credential.

    evaluate_attendance over many students would otherwise rescan the full
    event list per student; this keeps the evaluation linear in the event
    count. The normalization here must match _rfid_events/_wifi_events.
    """

    def __init__(self, session: ClassSession):
        self.rfid_any: dict[str, list[AuthEvent]] = {}
        self.rfid_in: dict[str, list[AuthEvent]] = {}
        self.wifi_any: dict[str, list[AuthEvent]] = {}
        self.wifi_net: dict[str, list[AuthEvent]] = {}
        self.wifi_in: dict[str, list[AuthEvent]] = {}
        for e in session.events:
            if e.kind is EventKind.RFID_SCAN:
                raw = e.payload.get("tag_uid")
                if not isinstance(raw, str):
                    continue
                tag = raw.strip().lower()
                self.rfid_any.setdefault(tag, []).append(e)
                if session.in_window(e.timestamp):
                    self.rfid_in.setdefault(tag, []).append(e)
            else:
                raw = e.payload.get("mac")
                if not isinstance(raw, str):
                    continue
                mac = raw.strip().lower().replace("-", ":")
                self.wifi_any.setdefault(mac, []).append(e)
                if e.payload.get("network_id") == session.network_id:
                    self.wifi_net.setdefault(mac, []).append(e)
                    if session.in_window(e.timestamp):
                        self.wifi_in.setdefault(mac, []).append(e)

    def best_pair(self, session: ClassSession, record: StudentRecord):
        best = None
        best_key = None
        for r in self.rfid_in.get(record.tag_uid, ()):
            for w in self.wifi_in.get(record.mac, ()):
                if abs(r.timestamp - w.timestamp) > session.pairing_window_ms:
                    continue
                key = (r.timestamp, w.timestamp, r.seq, w.seq)
                if best_key is None or key < best_key:
                    best_key = key
                    best = (r, w)
        return best

    def absence_reason(self, record: StudentRecord) -> Reason:
        if not self.rfid_any.get(record.tag_uid):
            return Reason.NO_RFID
        if not self.rfid_in.get(record.tag_uid):
            return Reason.OUTSIDE_WINDOW
        if not self.wifi_any.get(record.mac):
            return Reason.NO_WIFI
        if not self.wifi_net.get(record.mac):
            return Reason.WRONG_NETWORK
        if not self.wifi_in.get(record.mac):
            return Reason.OUTSIDE_WINDOW
        return Reason.PAIRING_TOO_FAR


def _absence_reason(session: ClassSession, record: StudentRecord) -> Reason:
    """Deterministic reason ladder for a student that has no qualifying pair."""
    rfid_any = _rfid_events(session, record.tag_uid, in_window_only=False)
    if not rfid_any:
        return Reason.NO_RFID
    rfid_in = _rfid_events(session, record.tag_uid)
    if not rfid_in:
        return Reason.OUTSIDE_WINDOW
    wifi_any = _wifi_events(session, record.mac, expected_network_only=False, in_window_only=False)
    if not wifi_any:
        return Reason.NO_WIFI
    wifi_net = _wifi_events(session, record.mac, in_window_only=False)
    if not wifi_net:
        return Reason.WRONG_NETWORK
    wifi_in = _wifi_events(session, record.mac)
    if not wifi_in:
        return Reason.OUTSIDE_WINDOW
    return Reason.PAIRING_TOO_FAR


def detect_fraud(
    session: ClassSession, registry: Registry, config: FraudConfig = DEFAULT_FRAUD
) -> list[FraudFlag]:
    """Fraud flags over the session's in-window events.

    Rules: (a) proxy scan, a student's tag scanned while the only in-window
    WiFi MACs belong to other registered students; (b) the same tag scanned
    twice within one pairing window; (c) one MAC appearing as Present evidence
    for two different students (cannot happen while registry MACs are unique;
    kept as a defensive check).
    """
    flags: list[FraudFlag] = []

    in_window_wifi = [
        e
        for e in session.events
        if e.kind is EventKind.WIFI_PRESENCE
        and session.in_window(e.timestamp)
        and e.payload.get("network_id") == session.network_id
        and isinstance(e.payload.get("mac"), str)
    ]

    if config.duplicate_tag:
        for record in registry.students():
            scans = _rfid_events(session, record.tag_uid)
            hit = None
            for i in range(len(scans)):
                for j in range(i + 1, len(scans)):
                    if abs(scans[i].timestamp - scans[j].timestamp) <= session.pairing_window_ms:
                        hit = (scans[i].seq, scans[j].seq)
                        break
                if hit:
                    break
            if hit:
                flags.append(
                    FraudFlag(
                        FraudKind.DUPLICATE_TAG_USE,
                        record.student_id,
                        hit,
                        f"tag {record.tag_uid} scanned twice within pairing window",
                    )
                )

    if config.proxy_scan:
        for record in registry.students():
            scans = _rfid_events(session, record.tag_uid)
            if not scans or not in_window_wifi:
                continue
            owners = set()
            foreign_only = True
            for e in in_window_wifi:
                mac = str(e.payload["mac"]).strip().lower().replace("-", ":")
                owner = registry.by_mac(mac)
                if owner is None or owner.student_id == record.student_id:
                    foreign_only = False
                    break
                owners.add(owner.student_id)
            if foreign_only and owners:
                flags.append(
                    FraudFlag(
                        FraudKind.PROXY_SCAN,
                        record.student_id,
                        tuple(e.seq for e in scans[:1]),
                        f"tag scanned but only other students' devices present ({', '.join(sorted(owners))})",
                    )
                )

    if config.shared_mac:
        by_mac: dict[str, list[tuple[str, int]]] = {}
        for record in registry.students():
            pair = best_pair(session, record)
            if pair is None:
                continue
            mac = str(pair[1].payload["mac"]).strip().lower().replace("-", ":")
            by_mac.setdefault(mac, []).append((record.student_id, pair[1].seq))
        for mac, users in by_mac.items():
            if len(users) > 1:
                for sid, seq in users:
                    flags.append(
                        FraudFlag(
                            FraudKind.SHARED_MAC_EVIDENCE,
                            sid,
                            (seq,),
                            f"mac {mac} used as evidence for {len(users)} students",
                        )
                    )

    return flags


def evaluate_attendance(
    session: ClassSession, registry: Registry, fraud: FraudConfig = DEFAULT_FRAUD
) -> list[AttendanceResult]:
    """One AttendanceResult per registered student, in registration order.

    Pure over the event list: callable on open or closed sessions, and two
    calls over the same events return identical results.
    """
    flags = detect_fraud(session, registry, fraud)
    flagged: dict[str, list[FraudFlag]] = {}
    for f in flags:
        flagged.setdefault(f.student_id, []).append(f)

    view = _EventView(session)
    results = []
    for record in registry.students():
        if record.student_id in flagged:
            student_flags = flagged[record.student_id]
            kind = next(k for k in _FLAG_PRIORITY if any(f.kind is k for f in student_flags))
            results.append(
                AttendanceResult(record.student_id, Status.FLAGGED, _FLAG_REASON[kind])
            )
            continue
        pair = view.best_pair(session, record)
        if pair is not None:
            r, w = pair
            results.append(
                AttendanceResult(record.student_id, Status.PRESENT, Reason.OK, (r.seq, w.seq))
            )
        else:
            results.append(
                AttendanceResult(record.student_id, Status.ABSENT, view.absence_reason(record))
            )
    return results
