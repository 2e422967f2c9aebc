"""Attendance state machine tests.

The key oracle here is an exhaustive pair enumeration written against plain
tuples: it re-applies the dual-factor predicate to every (rfid, wifi) event
pair directly, independent of the session/evaluation code paths.
"""

from __future__ import annotations

import random

import pytest

from smartclass.attendance import (
    Ack,
    ClassSession,
    DuplicateMac,
    DuplicateStudentId,
    DuplicateTag,
    EventKind,
    FraudConfig,
    FraudKind,
    InvalidCredential,
    InvalidWindow,
    Reason,
    Registry,
    SessionClosed,
    Status,
    close_session,
    detect_fraud,
    evaluate_attendance,
    open_session,
    register_student,
)

NO_FRAUD = FraudConfig.disabled()


# -- oracle -------------------------------------------------------------------


def oracle_present(students, events, window_start, window_end, pairing_ms, network_id):
    """Brute force over all event pairs; students is [(sid, tag, mac)], events
    is [(kind, ts, payload)] with kind 'rfid' or 'wifi'."""
    present = set()
    for sid, tag, mac in students:
        for kind_r, t_r, payload_r in events:
            if kind_r != "rfid" or payload_r.get("tag_uid") != tag:
                continue
            if not (window_start <= t_r <= window_end):
                continue
            for kind_w, t_w, payload_w in events:
                if kind_w != "wifi" or payload_w.get("mac") != mac:
                    continue
                if payload_w.get("network_id") != network_id:
                    continue
                if not (window_start <= t_w <= window_end):
                    continue
                if abs(t_r - t_w) <= pairing_ms:
                    present.add(sid)
    return present


def make_session(**kwargs) -> ClassSession:
    defaults = dict(
        class_id="c1",
        window_start=0,
        window_end=3_600_000,
        pairing_window_ms=300_000,
        network_id="campus-wifi",
    )
    defaults.update(kwargs)
    return open_session(**defaults)


def rfid(session, registry, tag, ts, node="door-1") -> Ack:
    return session.record_event(registry, EventKind.RFID_SCAN, ts, node, {"tag_uid": tag})


def wifi(session, registry, mac, ts, network="campus-wifi", node="ap-1") -> Ack:
    return session.record_event(
        registry, EventKind.WIFI_PRESENCE, ts, node, {"mac": mac, "network_id": network}
    )


@pytest.fixture
def registry():
    reg = Registry()
    reg.register("s1", "Ada", "04a3b2c1", "aa:bb:cc:dd:ee:01")
    reg.register("s2", "Grace", "05b4c3d2", "aa:bb:cc:dd:ee:02")
    return reg


def result_for(session, registry, student_id, fraud=NO_FRAUD):
    return next(
        r for r in evaluate_attendance(session, registry, fraud) if r.student_id == student_id
    )


# -- registry -----------------------------------------------------------------


class TestRegistry:
    def test_base_case(self):
        reg = Registry()
        register_student(reg, "s1", "Ada", "04a3b2c1", "aa:bb:cc:dd:ee:01")
        assert len(reg) == 1
        assert reg.by_tag("04a3b2c1").student_id == "s1"
        assert reg.by_mac("aa:bb:cc:dd:ee:01").student_id == "s1"

    def test_duplicate_tag(self):
        reg = Registry()
        reg.register("s1", "Ada", "04a3b2c1", "aa:bb:cc:dd:ee:01")
        with pytest.raises(DuplicateTag):
            reg.register("s2", "Grace", "04a3b2c1", "aa:bb:cc:dd:ee:02")

    def test_duplicate_mac_and_id(self):
        reg = Registry()
        reg.register("s1", "Ada", "04a3b2c1", "aa:bb:cc:dd:ee:01")
        with pytest.raises(DuplicateMac):
            reg.register("s2", "Grace", "05b4c3d2", "aa:bb:cc:dd:ee:01")
        with pytest.raises(DuplicateStudentId):
            reg.register("s1", "Twin", "06c5d4e3", "aa:bb:cc:dd:ee:03")

    def test_hundred_students_resolve(self):
        # Loop oracle: re-derive the expected map from the insert list.
        reg = Registry()
        inserts = []
        for i in range(100):
            sid = f"s{i}"
            tag = f"{i:08x}"
            mac = f"aa:bb:cc:dd:{i // 256:02x}:{i % 256:02x}"
            inserts.append((sid, tag, mac))
            reg.register(sid, f"Student {i}", tag, mac)
        expected = {tag: sid for sid, tag, _ in inserts}
        for tag, sid in expected.items():
            assert reg.by_tag(tag).student_id == sid

    def test_syntax_validation(self):
        reg = Registry()
        with pytest.raises(InvalidCredential):
            reg.register("s1", "Ada", "xyz", "aa:bb:cc:dd:ee:01")  # not hex
        with pytest.raises(InvalidCredential):
            reg.register("s1", "Ada", "04a3b2", "aa:bb:cc:dd:ee:01")  # 3 bytes
        with pytest.raises(InvalidCredential):
            reg.register("s1", "Ada", "04a3b2c1", "aa:bb:cc:dd:ee")  # short mac

    def test_normalization(self):
        reg = Registry()
        rec = reg.register("s1", "Ada", "04A3B2C1", "AA-BB-CC-DD-EE-01")
        assert rec.tag_uid == "04a3b2c1"
        assert rec.mac == "aa:bb:cc:dd:ee:01"

    def test_load_jsonl(self, tmp_path):
        path = tmp_path / "registry.jsonl"
        path.write_text(
            '{"student_id": "s1", "display_name": "Ada", "tag_uid": "04a3b2c1", "mac": "aa:bb:cc:dd:ee:01"}\n'
            "# comment\n"
            '{"student_id": "s2", "display_name": "Grace", "tag_uid": "05b4c3d2", "mac": "aa:bb:cc:dd:ee:02"}\n'
        )
        reg = Registry.load_jsonl(path)
        assert len(reg) == 2
        assert reg.by_tag("05b4c3d2").student_id == "s2"


# -- sessions ------------------------------------------------------------------


class TestSession:
    def test_open(self):
        session = make_session()
        assert session.state == "open"
        assert session.events == []

    def test_degenerate_window(self):
        with pytest.raises(InvalidWindow):
            make_session(window_start=100, window_end=100)

    def test_nonpositive_pairing(self):
        with pytest.raises(InvalidWindow):
            make_session(pairing_window_ms=0)

    def test_distinct_ids(self):
        assert make_session().session_id != make_session().session_id

    def test_close_idempotent(self, registry):
        session = make_session()
        assert session.close() is True
        assert session.state == "closed"
        assert session.close() is False  # no-op second close
        with pytest.raises(SessionClosed):
            rfid(session, registry, "04a3b2c1", 1000)

    def test_evaluate_same_before_and_after_close(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 130_000)
        before = evaluate_attendance(session, registry)
        close_session(session)
        after = evaluate_attendance(session, registry)
        assert before == after


# -- record_event acks -----------------------------------------------------------


class TestRecordEvent:
    def test_single_factor_waiting(self, registry):
        session = make_session()
        ack = rfid(session, registry, "04a3b2c1", 100_000)
        assert ack.completes is False
        assert ack.reason is Reason.NO_WIFI
        assert session.failure_log == []  # waiting is not a failure

    def test_completion(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        ack = wifi(session, registry, "aa:bb:cc:dd:ee:01", 130_000)
        assert ack.completes is True
        assert ack.reason is Reason.OK
        assert ack.student_id == "s1"

    def test_completion_only_fires_once(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        assert wifi(session, registry, "aa:bb:cc:dd:ee:01", 130_000).completes is True
        again = wifi(session, registry, "aa:bb:cc:dd:ee:01", 140_000)
        assert again.completes is False
        assert again.reason is Reason.OK  # already present

    def test_unknown_tag_logged(self, registry):
        session = make_session()
        ack = rfid(session, registry, "ffffffff", 100_000)
        assert ack.completes is False
        assert ack.reason is Reason.TAG_MAC_MISMATCH
        assert len(session.failure_log) == 1
        assert session.failure_log[0].reason is Reason.TAG_MAC_MISMATCH

    def test_malformed_payload_logged_not_fatal(self, registry):
        session = make_session()
        ack = session.record_event(registry, EventKind.RFID_SCAN, 1000, "door-1", {"oops": 1})
        assert ack.reason is Reason.MALFORMED
        ack2 = session.record_event(registry, EventKind.WIFI_PRESENCE, 1000, "ap-1", {"mac": "junk"})
        assert ack2.reason is Reason.MALFORMED
        assert len(session.failure_log) == 2

    def test_negative_timestamp_malformed(self, registry):
        session = make_session()
        ack = rfid(session, registry, "04a3b2c1", -5)
        assert ack.reason is Reason.MALFORMED
        assert len(session.failure_log) == 1

    def test_wrong_network_logged(self, registry):
        session = make_session()
        ack = wifi(session, registry, "aa:bb:cc:dd:ee:01", 1000, network="other")
        assert ack.reason is Reason.WRONG_NETWORK
        assert len(session.failure_log) == 1

    def test_outside_window_logged(self, registry):
        session = make_session()
        ack = rfid(session, registry, "04a3b2c1", 5_000_000)
        assert ack.reason is Reason.OUTSIDE_WINDOW
        assert len(session.failure_log) == 1

    def test_retry_count_increments_per_student(self, registry):
        session = make_session()
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 1000, network="other")
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 2000, network="other")
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 3000, network="other")
        counts = [e.retry_count for e in session.failure_log]
        assert counts == [0, 1, 2]

    def test_seq_strictly_increasing(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 1000)
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 2000)
        assert [e.seq for e in session.events] == [1, 2]


# -- evaluation -----------------------------------------------------------------


class TestEvaluate:
    def test_paper_example_present(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 130_000)
        r = result_for(session, registry, "s1")
        assert r.status is Status.PRESENT
        assert r.reason is Reason.OK
        assert r.evidence == (1, 2)

    def test_rfid_only_absent_no_wifi(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        r = result_for(session, registry, "s1")
        assert r.status is Status.ABSENT
        assert r.reason is Reason.NO_WIFI
        assert r.evidence is None

    def test_pairing_too_far(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 500_000)
        # Oracle check: enumerate all pairs, apply the predicate directly.
        students = [("s1", "04a3b2c1", "aa:bb:cc:dd:ee:01")]
        events = [
            ("rfid", 100_000, {"tag_uid": "04a3b2c1"}),
            ("wifi", 500_000, {"mac": "aa:bb:cc:dd:ee:01", "network_id": "campus-wifi"}),
        ]
        assert oracle_present(students, events, 0, 3_600_000, 300_000, "campus-wifi") == set()
        r = result_for(session, registry, "s1")
        assert r.status is Status.ABSENT
        assert r.reason is Reason.PAIRING_TOO_FAR

    def test_boundary_pairing_exactly_window(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 400_000)  # gap exactly 300 000
        assert result_for(session, registry, "s1").status is Status.PRESENT

    def test_wrong_network_reason(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 130_000, network="cafe")
        assert result_for(session, registry, "s1").reason is Reason.WRONG_NETWORK

    def test_no_rfid_reason(self, registry):
        session = make_session()
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 130_000)
        assert result_for(session, registry, "s1").reason is Reason.NO_RFID

    def test_outside_window_reason(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 4_000_000)
        assert result_for(session, registry, "s1").reason is Reason.OUTSIDE_WINDOW

    def test_evidence_is_earliest_pair(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 200_000)  # seq 1
        rfid(session, registry, "04a3b2c1", 100_000)  # seq 2, earlier timestamp
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 150_000)  # seq 3
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 120_000)  # seq 4
        r = result_for(session, registry, "s1")
        # earliest (t_r, t_w) = (100_000, 120_000) -> seqs (2, 4)
        assert r.evidence == (2, 4)

    def test_one_result_per_registered_student(self, registry):
        session = make_session()
        results = evaluate_attendance(session, registry)
        assert [r.student_id for r in results] == ["s1", "s2"]
        assert all(r.status is Status.ABSENT for r in results)


# -- fraud ----------------------------------------------------------------------


class TestFraud:
    def test_no_events_no_flags(self, registry):
        assert detect_fraud(make_session(), registry) == []

    def test_proxy_scan(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)  # s1's tag
        wifi(session, registry, "aa:bb:cc:dd:ee:02", 110_000)  # only s2's device present
        flags = detect_fraud(session, registry)
        assert any(f.kind is FraudKind.PROXY_SCAN and f.student_id == "s1" for f in flags)
        assert result_for(session, registry, "s1", fraud=FraudConfig()).status is Status.FLAGGED

    def test_proxy_scan_oracle_cross_product(self, registry):
        # Oracle: enumerate tag/mac ownership cross products over scripted cases.
        cases = []
        for scanned_owner in ("s1", "s2"):
            for wifi_owner in ("s1", "s2"):
                session = make_session()
                tag = registry.get(scanned_owner).tag_uid
                mac = registry.get(wifi_owner).mac
                rfid(session, registry, tag, 100_000)
                wifi(session, registry, mac, 110_000)
                flags = detect_fraud(session, registry)
                flagged = {f.student_id for f in flags if f.kind is FraudKind.PROXY_SCAN}
                expected = {scanned_owner} if scanned_owner != wifi_owner else set()
                cases.append((scanned_owner, wifi_owner, flagged, expected))
        for scanned, owner, got, expected in cases:
            assert got == expected, f"tag={scanned} wifi={owner}"

    def test_own_device_present_not_proxy(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        wifi(session, registry, "aa:bb:cc:dd:ee:01", 110_000)  # own device
        wifi(session, registry, "aa:bb:cc:dd:ee:02", 120_000)  # someone else's too
        assert not [f for f in detect_fraud(session, registry) if f.kind is FraudKind.PROXY_SCAN]

    def test_duplicate_tag_use(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        rfid(session, registry, "04a3b2c1", 101_000)  # 1 s apart
        flags = detect_fraud(session, registry)
        assert any(f.kind is FraudKind.DUPLICATE_TAG_USE and f.student_id == "s1" for f in flags)
        r = result_for(session, registry, "s1", fraud=FraudConfig())
        assert r.status is Status.FLAGGED
        assert r.reason is Reason.DUPLICATE_TAG_USE

    def test_duplicate_tag_outside_pairing_window_ok(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        rfid(session, registry, "04a3b2c1", 500_000)  # beyond pairing window
        assert not [f for f in detect_fraud(session, registry) if f.kind is FraudKind.DUPLICATE_TAG_USE]

    def test_toggles_disable_rules(self, registry):
        session = make_session()
        rfid(session, registry, "04a3b2c1", 100_000)
        rfid(session, registry, "04a3b2c1", 101_000)
        assert detect_fraud(session, registry, FraudConfig.disabled()) == []


# -- properties -----------------------------------------------------------------


TAG_POOL = [f"{i:08x}" for i in range(8)] + ["deadbeef", "ffffffff"]
MAC_POOL = [f"aa:bb:cc:dd:ee:{i:02x}" for i in range(8)] + ["11:22:33:44:55:66"]


def fuzz_session(rng: random.Random, n_students=None, n_events=None):
    reg = Registry()
    n_students = n_students if n_students is not None else rng.randint(0, 6)
    for i in range(n_students):
        reg.register(f"s{i}", f"Student {i}", TAG_POOL[i], MAC_POOL[i])
    window_start = rng.randint(0, 1000)
    window_end = window_start + rng.randint(1, 600_000)
    pairing = rng.randint(1, 200_000)
    session = ClassSession("c1", window_start, window_end, pairing, "net-a")
    students = [(f"s{i}", TAG_POOL[i], MAC_POOL[i]) for i in range(n_students)]
    plain_events = []
    n_events = n_events if n_events is not None else rng.randint(0, 60)
    for _ in range(n_events):
        ts = rng.randint(0, window_end + 100_000)
        if rng.random() < 0.5:
            payload = {"tag_uid": rng.choice(TAG_POOL)}
            session.record_event(reg, EventKind.RFID_SCAN, ts, "n", payload)
            plain_events.append(("rfid", ts, payload))
        else:
            payload = {
                "mac": rng.choice(MAC_POOL),
                "network_id": rng.choice(["net-a", "net-a", "net-b"]),
            }
            session.record_event(reg, EventKind.WIFI_PRESENCE, ts, "n", payload)
            plain_events.append(("wifi", ts, payload))
    return reg, session, students, plain_events


class TestProperties:
    def test_soundness_vs_oracle(self):
        rng = random.Random(1234)
        for _ in range(150):
            reg, session, students, events = fuzz_session(rng)
            expected = oracle_present(
                students,
                events,
                session.window_start,
                session.window_end,
                session.pairing_window_ms,
                session.network_id,
            )
            got = {
                r.student_id
                for r in evaluate_attendance(session, reg, NO_FRAUD)
                if r.status is Status.PRESENT
            }
            assert got == expected

    def test_flags_only_remove_from_present(self):
        rng = random.Random(99)
        for _ in range(80):
            reg, session, students, events = fuzz_session(rng)
            base = {
                r.student_id: r.status for r in evaluate_attendance(session, reg, NO_FRAUD)
            }
            for r in evaluate_attendance(session, reg, FraudConfig()):
                if r.status is Status.PRESENT:
                    assert base[r.student_id] is Status.PRESENT

    def test_single_factor_insufficiency(self):
        rng = random.Random(77)
        for _ in range(40):
            reg, _, students, events = fuzz_session(rng)
            for keep in ("rfid", "wifi"):
                session = ClassSession("c1", 0, 600_000, 100_000, "net-a")
                for kind, ts, payload in events:
                    if kind != keep:
                        continue
                    ek = EventKind.RFID_SCAN if kind == "rfid" else EventKind.WIFI_PRESENCE
                    session.record_event(reg, ek, ts, "n", payload)
                present = [
                    r for r in evaluate_attendance(session, reg, NO_FRAUD) if r.status is Status.PRESENT
                ]
                assert present == []

    def test_order_independence(self):
        rng = random.Random(42)
        for _ in range(40):
            reg, session, students, events = fuzz_session(rng)
            statuses = {
                r.student_id: r.status for r in evaluate_attendance(session, reg, NO_FRAUD)
            }
            shuffled = events[:]
            rng.shuffle(shuffled)
            session2 = ClassSession(
                "c1",
                session.window_start,
                session.window_end,
                session.pairing_window_ms,
                session.network_id,
            )
            for kind, ts, payload in shuffled:
                ek = EventKind.RFID_SCAN if kind == "rfid" else EventKind.WIFI_PRESENCE
                session2.record_event(reg, ek, ts, "n", payload)
            statuses2 = {
                r.student_id: r.status for r in evaluate_attendance(session2, reg, NO_FRAUD)
            }
            assert statuses == statuses2

    def test_monotonicity_appends_never_unmark(self):
        rng = random.Random(7)
        for _ in range(40):
            reg, session, students, events = fuzz_session(rng)
            present_before = {
                r.student_id
                for r in evaluate_attendance(session, reg, NO_FRAUD)
                if r.status is Status.PRESENT
            }
            for _ in range(10):
                ts = rng.randint(0, session.window_end)
                if rng.random() < 0.5:
                    session.record_event(
                        reg, EventKind.RFID_SCAN, ts, "n", {"tag_uid": rng.choice(TAG_POOL)}
                    )
                else:
                    session.record_event(
                        reg,
                        EventKind.WIFI_PRESENCE,
                        ts,
                        "n",
                        {"mac": rng.choice(MAC_POOL), "network_id": "net-a"},
                    )
            present_after = {
                r.student_id
                for r in evaluate_attendance(session, reg, NO_FRAUD)
                if r.status is Status.PRESENT
            }
            assert present_before <= present_after

    def test_failure_log_append_only(self):
        rng = random.Random(5)
        reg, session, _, _ = fuzz_session(rng, n_students=2, n_events=0)
        lengths = [0]
        for _ in range(50):
            ts = rng.randint(0, 700_000)
            if rng.random() < 0.5:
                session.record_event(reg, EventKind.RFID_SCAN, ts, "n", {"tag_uid": rng.choice(TAG_POOL)})
            else:
                session.record_event(
                    reg,
                    EventKind.WIFI_PRESENCE,
                    ts,
                    "n",
                    {"mac": rng.choice(MAC_POOL), "network_id": rng.choice(["net-a", "net-b"])},
                )
            lengths.append(len(session.failure_log))
        assert all(b >= a for a, b in zip(lengths, lengths[1:]))

    def test_present_iff_ok_iff_evidence(self):
        rng = random.Random(3)
        for _ in range(60):
            reg, session, _, _ = fuzz_session(rng)
            for r in evaluate_attendance(session, reg, FraudConfig()):
                assert (r.status is Status.PRESENT) == (r.reason is Reason.OK) == (r.evidence is not None)
