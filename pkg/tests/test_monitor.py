"""Trace replay state machine and trace wire format."""

import pytest
from hypothesis import given, settings, strategies as st

from leastpriv.events import KIND_CAPABILITY, KIND_SYSCALL
from leastpriv.monitor import (
    TRACE_HEADER,
    TraceFormatError,
    TraceOrderError,
    TraceRecord,
    TraceReplayer,
    UnknownNamespaceError,
    event_set_for,
    format_trace,
    ingest_trace,
    parse_trace,
    replay_trace,
)


def sys(ts, ns, name):
    return TraceRecord(ts, ns, KIND_SYSCALL, name)


def cap(ts, ns, name):
    return TraceRecord(ts, ns, KIND_CAPABILITY, name)


class TestReplayExamples:
    def test_syscalls_recorded_only_after_seccomp_marker(self):
        events = ingest_trace([
            sys(1, 1, "unshare"),
            sys(2, 1, "write"),
            sys(3, 1, "prctl"),
            sys(4, 1, "read"),
        ])
        assert set(events[1].syscalls) == {"read"}
        assert not events[1].capabilities

    def test_capset_marks_capability_confinement(self):
        events = ingest_trace([
            sys(1, 1, "unshare"),
            sys(2, 1, "prctl"),
            sys(3, 1, "capset"),
            cap(4, 1, "CAP_NET_RAW"),
        ])
        # capset lands after the seccomp marker, so it is itself recorded
        assert set(events[1].syscalls) == {"capset"}
        assert set(events[1].capabilities) == {"CAP_NET_RAW"}

    def test_seccomp_syscall_is_alternate_marker(self):
        events = ingest_trace([
            sys(1, 1, "unshare"),
            sys(2, 1, "seccomp"),
            sys(3, 1, "read"),
        ])
        assert set(events[1].syscalls) == {"read"}

    def test_creation_record_is_not_an_event(self):
        events = ingest_trace([sys(1, 1, "unshare")])
        assert 1 in events
        assert not events[1]

    def test_capability_before_capset_dropped(self):
        events = ingest_trace([
            sys(1, 1, "unshare"),
            sys(2, 1, "prctl"),
            cap(3, 1, "CAP_CHOWN"),
            sys(4, 1, "capset"),
            cap(5, 1, "CAP_NET_RAW"),
        ])
        assert set(events[1].capabilities) == {"CAP_NET_RAW"}

    def test_marker_records_become_ordinary_events_once_flagged(self):
        states = replay_trace([
            sys(1, 1, "unshare"),
            sys(2, 1, "prctl"),
            sys(3, 1, "prctl"),
            sys(4, 1, "unshare"),
            sys(5, 1, "capset"),
        ])
        state = states[1]
        assert state.syscalls == {"prctl", "unshare", "capset"}
        # the first prctl flipped the flag and was itself not recorded
        assert state.syscall_counts["prctl"] == 1

    def test_second_unshare_does_not_reset_state(self):
        states = replay_trace([
            sys(1, 1, "unshare"),
            sys(2, 1, "prctl"),
            sys(3, 1, "read"),
            sys(4, 1, "unshare"),
            sys(5, 1, "write"),
        ])
        assert states[1].syscalls == {"read", "unshare", "write"}
        assert states[1].seccomp_flag

    def test_records_for_unknown_namespace_dropped(self):
        events = ingest_trace([
            sys(1, 1, "unshare"),
            sys(2, 2, "read"),
            sys(3, 1, "prctl"),
            sys(4, 1, "read"),
        ])
        assert set(events) == {1}
        assert set(events[1].syscalls) == {"read"}

    def test_counts_reflect_only_recorded_occurrences(self):
        states = replay_trace([
            sys(1, 1, "unshare"),
            sys(2, 1, "read"),
            sys(3, 1, "prctl"),
            sys(4, 1, "read"),
            sys(5, 1, "read"),
            sys(6, 1, "capset"),
            cap(7, 1, "CAP_CHOWN"),
            cap(8, 1, "CAP_CHOWN"),
        ])
        assert states[1].syscall_counts == {"read": 2, "capset": 1}
        assert states[1].capability_counts == {"CAP_CHOWN": 2}


class TestOrdering:
    def test_backwards_timestamp_rejected_with_index(self):
        with pytest.raises(TraceOrderError) as err:
            replay_trace([sys(5, 1, "unshare"), sys(4, 1, "read")])
        assert err.value.record_index == 1

    def test_equal_timestamps_allowed(self):
        replay_trace([sys(5, 1, "unshare"), sys(5, 1, "read")])

    def test_order_checked_per_namespace(self):
        # interleaved namespaces may have globally unsorted timestamps
        replay_trace([
            sys(10, 1, "unshare"),
            sys(3, 2, "unshare"),
            sys(11, 1, "read"),
            sys(4, 2, "read"),
        ])

    def test_order_checked_even_for_untracked_namespace(self):
        with pytest.raises(TraceOrderError):
            replay_trace([sys(9, 7, "read"), sys(8, 7, "read")])


class TestWireFormat:
    def make(self):
        return [sys(1, 1, "unshare"), sys(2, 1, "prctl"), sys(3, 1, "read"), cap(4, 1, "CAP_CHOWN")]

    def test_round_trip(self):
        text = format_trace(self.make())
        assert text.splitlines()[0] == TRACE_HEADER
        assert parse_trace(text.splitlines()) == self.make()

    def test_header_required(self):
        with pytest.raises(TraceFormatError):
            parse_trace(["1\t1\tSYS\tread"])

    def test_field_count_enforced(self):
        with pytest.raises(TraceFormatError):
            parse_trace([TRACE_HEADER, "1\t1\tSYS"])

    def test_unknown_kind_rejected(self):
        with pytest.raises(TraceFormatError):
            parse_trace([TRACE_HEADER, "1\t1\tNET\tread"])

    def test_names_are_canonicalized(self):
        records = parse_trace([TRACE_HEADER, "1\t1\tSYS\t READ ", "2\t1\tCAP\tnet_raw"])
        assert records[0].name == "read"
        assert records[1].name == "CAP_NET_RAW"

    def test_negative_fields_rejected(self):
        with pytest.raises(TraceFormatError):
            parse_trace([TRACE_HEADER, "-1\t1\tSYS\tread"])
        with pytest.raises(TraceFormatError):
            parse_trace([TRACE_HEADER, "1\t-1\tSYS\tread"])

    def test_blank_lines_skipped(self):
        records = parse_trace([TRACE_HEADER, "", "   ", "1\t1\tSYS\tunshare"])
        assert len(records) == 1


def test_observation_labels_namespace():
    states = replay_trace([sys(1, 3, "unshare"), sys(2, 3, "prctl"), sys(3, 3, "read")])
    obs = event_set_for("env-a", states, 3)
    assert obs.environment_id == "env-a"
    assert obs.syscall_counts == (("read", 1),)
    with pytest.raises(UnknownNamespaceError):
        event_set_for("env-a", states, 9)


# --- randomized state machine properties -----------------------------------

_SYSCALL_POOL = ("read", "write", "openat", "prctl", "seccomp", "capset", "unshare", "close")
_CAP_POOL = ("CAP_NET_RAW", "CAP_CHOWN", "CAP_SYS_ADMIN")


@st.composite
def namespace_trace(draw, ns):
    """One namespace's records: an unshare followed by random activity."""
    start = draw(st.integers(min_value=0, max_value=50))
    records = [sys(start, ns, "unshare")]
    t = start
    for _ in range(draw(st.integers(min_value=0, max_value=14))):
        t += draw(st.integers(min_value=0, max_value=4))
        if draw(st.booleans()):
            records.append(sys(t, ns, draw(st.sampled_from(_SYSCALL_POOL))))
        else:
            records.append(cap(t, ns, draw(st.sampled_from(_CAP_POOL))))
    return records


@settings(max_examples=150, deadline=None)
@given(records=namespace_trace(ns=1), cut=st.integers(min_value=0, max_value=20))
def test_replay_grows_monotonically_with_trace_prefix(records, cut):
    cut = min(cut, len(records))
    partial = replay_trace(records[:cut])
    full = replay_trace(records)
    for ns, state in partial.items():
        assert state.syscalls <= full[ns].syscalls
        assert state.capabilities <= full[ns].capabilities
        if state.seccomp_flag:
            assert full[ns].seccomp_flag
        if state.capability_flag:
            assert full[ns].capability_flag


@settings(max_examples=150, deadline=None)
@given(records=namespace_trace(ns=1))
def test_no_event_predates_its_confinement_marker(records):
    state = replay_trace(records)[1]
    body = records[1:]
    first_seccomp = next(
        (i for i, r in enumerate(body) if r.kind == KIND_SYSCALL and r.name in ("prctl", "seccomp")),
        None,
    )
    first_capset = next(
        (i for i, r in enumerate(body) if r.kind == KIND_SYSCALL and r.name == "capset"),
        None,
    )
    sys_after = set() if first_seccomp is None else {
        r.name for r in body[first_seccomp + 1:] if r.kind == KIND_SYSCALL
    }
    cap_after = set() if first_capset is None else {
        r.name for r in body[first_capset + 1:] if r.kind == KIND_CAPABILITY
    }
    assert state.syscalls <= sys_after
    assert state.capabilities <= cap_after


@settings(max_examples=150, deadline=None)
@given(
    first=namespace_trace(ns=1),
    second=namespace_trace(ns=2),
    choices=st.lists(st.booleans(), max_size=40),
)
def test_namespace_interleaving_does_not_change_replay(first, second, choices):
    merged, a, b = [], list(first), list(second)
    picks = iter(choices)
    while a or b:
        take_first = bool(a) and (not b or next(picks, True))
        merged.append(a.pop(0) if take_first else b.pop(0))
    combined = replay_trace(merged)
    alone = {**replay_trace(first), **replay_trace(second)}
    assert set(combined) == {1, 2}
    for ns in (1, 2):
        assert combined[ns] == alone[ns]


@settings(max_examples=100, deadline=None)
@given(records=namespace_trace(ns=1))
def test_stepwise_and_batch_replay_agree(records):
    replayer = TraceReplayer()
    for record in records:
        replayer.step(record)
    assert replayer.states == replay_trace(records)
