"""Trace ingestion: replay collector streams into per-namespace event sets.

A trace is the wire format any event collector must produce:

    beacon-trace v1
    <timestamp_ns> <namespace_id> <kind> <name>

with kind SYS or CAP and timestamps non-decreasing within each namespace.

Replay tracks one entry per mount namespace and mirrors how a container
comes up: the runtime first calls unshare to create the namespace, then
installs its syscall filter (prctl or seccomp) and drops capabilities
(capset).  Only behavior after confinement belongs to the application, so
an entry starts recording syscalls once its seccomp flag is set and
capability checks once its capability flag is set.  The flag-setting
record itself arrives before confinement and is not recorded, but any
later occurrence of a marker is an ordinary event like any other.
Records for namespaces that never saw an unshare are dropped.  A second
unshare inside a tracked namespace does not reset the entry.  Per-event
occurrence counts are kept as metadata next to the sets.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .events import (
    KIND_CAPABILITY,
    KIND_SYSCALL,
    EventSet,
    canonical_capability,
    canonical_syscall,
)

__all__ = [
    "TRACE_HEADER",
    "TraceRecord",
    "TraceFormatError",
    "TraceOrderError",
    "MonitorError",
    "UnknownNamespaceError",
    "NamespaceState",
    "TraceReplayer",
    "parse_trace",
    "read_trace",
    "format_trace",
    "write_trace",
    "replay_trace",
    "ingest_trace",
    "Observation",
    "event_set_for",
]

TRACE_HEADER = "beacon-trace v1"

# Syscalls that arm an entry's flags when they arrive pre-confinement.
_SECCOMP_MARKERS = frozenset({"prctl", "seccomp"})
_CAPABILITY_MARKER = "capset"
_NAMESPACE_MARKER = "unshare"


class TraceFormatError(ValueError):
    pass


class TraceOrderError(TraceFormatError):
    def __init__(self, message: str, record_index: int):
        super().__init__(message)
        self.record_index = record_index


class MonitorError(ValueError):
    pass


class UnknownNamespaceError(MonitorError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    timestamp_ns: int
    namespace_id: int
    kind: str
    name: str

    def __post_init__(self):
        if self.kind not in (KIND_SYSCALL, KIND_CAPABILITY):
            raise TraceFormatError(f"unknown event kind {self.kind!r}")
        if self.timestamp_ns < 0:
            raise TraceFormatError(f"negative timestamp {self.timestamp_ns}")
        if self.namespace_id < 0:
            raise TraceFormatError(f"negative namespace id {self.namespace_id}")


def parse_trace(lines: Iterable[str], source: str = "<memory>") -> list[TraceRecord]:
    iterator = iter(lines)
    try:
        header = next(iterator).rstrip("\n")
    except StopIteration:
        raise TraceFormatError(f"{source}: empty input, expected {TRACE_HEADER!r}") from None
    if header != TRACE_HEADER:
        raise TraceFormatError(
            f"{source}: bad header {header!r}, expected {TRACE_HEADER!r}"
        )
    records: list[TraceRecord] = []
    for lineno, raw in enumerate(iterator, start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise TraceFormatError(
                f"{source}:{lineno}: expected 4 fields, got {len(parts)}"
            )
        ts_text, ns_text, kind, name = parts
        try:
            timestamp = int(ts_text)
            namespace = int(ns_text)
        except ValueError:
            raise TraceFormatError(
                f"{source}:{lineno}: timestamp and namespace must be integers"
            ) from None
        if kind == KIND_SYSCALL:
            name = canonical_syscall(name)
        elif kind == KIND_CAPABILITY:
            name = canonical_capability(name)
        else:
            raise TraceFormatError(f"{source}:{lineno}: unknown kind {kind!r}")
        records.append(TraceRecord(timestamp, namespace, kind, name))
    return records


def read_trace(path) -> list[TraceRecord]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_trace(handle, source=str(path))


def format_trace(records: Iterable[TraceRecord]) -> str:
    lines = [TRACE_HEADER]
    for record in records:
        lines.append(
            f"{record.timestamp_ns} {record.namespace_id} {record.kind} {record.name}"
        )
    return "\n".join(lines) + "\n"


def write_trace(records: Iterable[TraceRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_trace(records))


@dataclass
class NamespaceState:
    seccomp_flag: bool = False
    capability_flag: bool = False
    syscalls: set[str] = field(default_factory=set)
    capabilities: set[str] = field(default_factory=set)
    syscall_counts: Counter = field(default_factory=Counter)
    capability_counts: Counter = field(default_factory=Counter)

    def event_set(self) -> EventSet:
        return EventSet(frozenset(self.syscalls), frozenset(self.capabilities))


class TraceReplayer:
    """Incremental replay; feed records one at a time with step()."""

    def __init__(self):
        self.states: dict[int, NamespaceState] = {}
        self._last_timestamp: dict[int, int] = {}
        self._index = 0

    def step(self, record: TraceRecord) -> None:
        index = self._index
        self._index += 1
        last = self._last_timestamp.get(record.namespace_id)
        if last is not None and record.timestamp_ns < last:
            raise TraceOrderError(
                f"record {index}: timestamp {record.timestamp_ns} goes backwards "
                f"in namespace {record.namespace_id}",
                record_index=index,
            )
        self._last_timestamp[record.namespace_id] = record.timestamp_ns

        state = self.states.get(record.namespace_id)
        if state is None:
            if record.kind == KIND_SYSCALL and record.name == _NAMESPACE_MARKER:
                self.states[record.namespace_id] = NamespaceState()
            return

        if record.kind == KIND_SYSCALL:
            if state.seccomp_flag:
                state.syscalls.add(record.name)
                state.syscall_counts[record.name] += 1
            if record.name in _SECCOMP_MARKERS:
                state.seccomp_flag = True
            elif record.name == _CAPABILITY_MARKER:
                state.capability_flag = True
        else:
            if state.capability_flag:
                state.capabilities.add(record.name)
                state.capability_counts[record.name] += 1

    def run(self, records: Iterable[TraceRecord]) -> "TraceReplayer":
        for record in records:
            self.step(record)
        return self

    def event_sets(self) -> dict[int, EventSet]:
        return {ns: state.event_set() for ns, state in self.states.items()}


def replay_trace(records: Iterable[TraceRecord]) -> dict[int, NamespaceState]:
    return TraceReplayer().run(records).states


def ingest_trace(records: Iterable[TraceRecord]) -> dict[int, EventSet]:
    """Replay a record stream into namespace_id -> EventSet."""
    return TraceReplayer().run(records).event_sets()


@dataclass(frozen=True)
class Observation:
    """One environment's recorded behavior, ready for scoring."""

    environment_id: str
    events: EventSet
    syscall_counts: tuple[tuple[str, int], ...] = ()
    capability_counts: tuple[tuple[str, int], ...] = ()


def event_set_for(
    environment_id: str,
    states: dict[int, NamespaceState],
    namespace_id: int,
) -> Observation:
    """Label one namespace's replayed state with its environment."""
    state = states.get(namespace_id)
    if state is None:
        known = ", ".join(str(ns) for ns in sorted(states)) or "none"
        raise UnknownNamespaceError(
            f"namespace {namespace_id} not present in trace (tracked: {known})"
        )
    return Observation(
        environment_id,
        state.event_set(),
        tuple(sorted(state.syscall_counts.items())),
        tuple(sorted(state.capability_counts.items())),
    )
