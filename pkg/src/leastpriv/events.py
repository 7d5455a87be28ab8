"""Event identities shared by every stage of the pipeline.

Two kinds of security-relevant events exist: system calls and capability
exercises.  Syscall names are lower-case; capability names are upper-case
and carry the CAP_ prefix.  Every module canonicalizes names through the
helpers here so that set algebra downstream never has to worry about case
or prefix variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

KIND_SYSCALL = "SYS"
KIND_CAPABILITY = "CAP"

CAP_PREFIX = "CAP_"

# The 38 capabilities of the kernel generation this tool targets, in
# numbering order (CAP_CHOWN = 0 .. CAP_AUDIT_READ = 37).
CANONICAL_CAPABILITIES: frozenset[str] = frozenset(
    {
        "CAP_CHOWN",
        "CAP_DAC_OVERRIDE",
        "CAP_DAC_READ_SEARCH",
        "CAP_FOWNER",
        "CAP_FSETID",
        "CAP_KILL",
        "CAP_SETGID",
        "CAP_SETUID",
        "CAP_SETPCAP",
        "CAP_LINUX_IMMUTABLE",
        "CAP_NET_BIND_SERVICE",
        "CAP_NET_BROADCAST",
        "CAP_NET_ADMIN",
        "CAP_NET_RAW",
        "CAP_IPC_LOCK",
        "CAP_IPC_OWNER",
        "CAP_SYS_MODULE",
        "CAP_SYS_RAWIO",
        "CAP_SYS_CHROOT",
        "CAP_SYS_PTRACE",
        "CAP_SYS_PACCT",
        "CAP_SYS_ADMIN",
        "CAP_SYS_BOOT",
        "CAP_SYS_NICE",
        "CAP_SYS_RESOURCE",
        "CAP_SYS_TIME",
        "CAP_SYS_TTY_CONFIG",
        "CAP_MKNOD",
        "CAP_LEASE",
        "CAP_AUDIT_WRITE",
        "CAP_AUDIT_CONTROL",
        "CAP_SETFCAP",
        "CAP_MAC_OVERRIDE",
        "CAP_MAC_ADMIN",
        "CAP_SYSLOG",
        "CAP_WAKE_ALARM",
        "CAP_BLOCK_SUSPEND",
        "CAP_AUDIT_READ",
    }
)


class EventNameError(ValueError):
    """Raised for event names that cannot be canonicalized."""


def canonical_syscall(name: str) -> str:
    """Return the canonical (lower-case) form of a syscall name."""
    cleaned = name.strip().lower()
    if not cleaned or any(ch.isspace() for ch in cleaned):
        raise EventNameError(f"invalid syscall name {name!r}")
    return cleaned


def canonical_capability(name: str) -> str:
    """Return the canonical CAP_-prefixed upper-case capability name.

    Accepts both "NET_RAW" and "CAP_NET_RAW" spellings.  Unknown
    capability names are canonicalized but not rejected here; the policy
    emitter enforces membership in CANONICAL_CAPABILITIES.
    """
    cleaned = name.strip().upper()
    if not cleaned or any(ch.isspace() for ch in cleaned):
        raise EventNameError(f"invalid capability name {name!r}")
    if not cleaned.startswith(CAP_PREFIX):
        cleaned = CAP_PREFIX + cleaned
    if cleaned == CAP_PREFIX:
        raise EventNameError(f"invalid capability name {name!r}")
    return cleaned


@dataclass(frozen=True)
class EventSet:
    """Immutable pair of syscall and capability name sets.

    All comparisons and set operations work componentwise.  len() counts
    events of both kinds, which is the cardinality every score and
    threshold in the pipeline is defined over.
    """

    syscalls: frozenset[str] = field(default_factory=frozenset)
    capabilities: frozenset[str] = field(default_factory=frozenset)

    @classmethod
    def empty(cls) -> "EventSet":
        return cls()

    @classmethod
    def of(
        cls,
        syscalls: Iterable[str] = (),
        capabilities: Iterable[str] = (),
    ) -> "EventSet":
        return cls(
            frozenset(canonical_syscall(s) for s in syscalls),
            frozenset(canonical_capability(c) for c in capabilities),
        )

    @classmethod
    def from_events(cls, events: Iterable[tuple[str, str]]) -> "EventSet":
        """Build from (kind, name) pairs as produced by events()."""
        syscalls = []
        capabilities = []
        for kind, name in events:
            if kind == KIND_SYSCALL:
                syscalls.append(name)
            elif kind == KIND_CAPABILITY:
                capabilities.append(name)
            else:
                raise EventNameError(f"unknown event kind {kind!r}")
        return cls.of(syscalls, capabilities)

    def union(self, other: "EventSet") -> "EventSet":
        return EventSet(
            self.syscalls | other.syscalls,
            self.capabilities | other.capabilities,
        )

    __or__ = union

    def difference(self, other: "EventSet") -> "EventSet":
        return EventSet(
            self.syscalls - other.syscalls,
            self.capabilities - other.capabilities,
        )

    __sub__ = difference

    def intersection(self, other: "EventSet") -> "EventSet":
        return EventSet(
            self.syscalls & other.syscalls,
            self.capabilities & other.capabilities,
        )

    __and__ = intersection

    def symmetric_difference(self, other: "EventSet") -> "EventSet":
        return EventSet(
            self.syscalls ^ other.syscalls,
            self.capabilities ^ other.capabilities,
        )

    def issubset(self, other: "EventSet") -> bool:
        return self.syscalls <= other.syscalls and self.capabilities <= other.capabilities

    def __le__(self, other: "EventSet") -> bool:
        return self.issubset(other)

    def __len__(self) -> int:
        return len(self.syscalls) + len(self.capabilities)

    def __bool__(self) -> bool:
        return bool(self.syscalls) or bool(self.capabilities)

    def events(self) -> Iterator[tuple[str, str]]:
        """Yield (kind, name) pairs in a stable sorted order."""
        for name in sorted(self.syscalls):
            yield (KIND_SYSCALL, name)
        for name in sorted(self.capabilities):
            yield (KIND_CAPABILITY, name)

    def contains_event(self, kind: str, name: str) -> bool:
        if kind == KIND_SYSCALL:
            return name in self.syscalls
        if kind == KIND_CAPABILITY:
            return name in self.capabilities
        raise EventNameError(f"unknown event kind {kind!r}")
