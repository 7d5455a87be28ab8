"""Policy scoring and synthesis from per-environment observations.

The two scores pull in opposite directions.  Security is worst-case: one
minus the highest normalized CVSS among allowed events, where an event's
CVSS is the maximum over database entries whose attack vector contains
it and zero when unmapped.  Functionality is the fraction of observed
environments whose full event set the policy covers.

Synthesis turns an operator target pair into a policy deterministically.
The security floor becomes a hard CVSS ceiling c* = 10*(1 - security_min)
on admissible events: events observed in every environment must all sit
under the ceiling or synthesis is infeasible outright, sporadic events
over the ceiling are excluded, and the remaining sporadic events are
added greedily (most environments first) until the functionality floor
is met.  Feasibility decisions always compare raw CVSS against the
ceiling rather than recomputing score inequalities, so they cannot
disagree with themselves across call sites; the reported achieved
scores are the exact formulas.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import yaml

from .events import (
    KIND_CAPABILITY,
    KIND_SYSCALL,
    EventSet,
    canonical_capability,
    canonical_syscall,
)
from .monitor import Observation

__all__ = [
    "CVEDB_HEADER",
    "OBSERVATIONS_HEADER",
    "DecisionError",
    "DbFormatError",
    "StoreError",
    "StoreFormatError",
    "CveEntry",
    "CveDatabase",
    "parse_cvedb",
    "load_cvedb",
    "default_cvedb",
    "parse_event_list",
    "ObservationStore",
    "load_store",
    "save_store",
    "security_score",
    "functionality_score",
    "EventClasses",
    "classify_events",
    "ScoreTargets",
    "Policy",
    "Infeasible",
    "synthesize_policy",
    "MitigationRow",
    "check_mitigation",
    "sweep",
    "POLICY_VERSION",
    "policy_to_doc",
    "policy_from_doc",
    "dump_policy",
    "load_policy",
]

CVEDB_HEADER = "beacon-cvedb v1"
OBSERVATIONS_HEADER = "beacon-observations v1"
POLICY_VERSION = 1

# Guard band for the final score sanity check; the ceiling construction
# makes achieved security >= the target up to division rounding only.
_SCORE_EPS = 1e-9


class DecisionError(ValueError):
    pass


class DbFormatError(DecisionError):
    pass


class StoreError(DecisionError):
    pass


class StoreFormatError(StoreError):
    pass


# -- CVE database ------------------------------------------------------------


@dataclass(frozen=True)
class CveEntry:
    cve_id: str
    cvss: float
    events: EventSet

    def __post_init__(self):
        if not self.cve_id:
            raise DecisionError("entry needs a CVE id")
        if not 0.0 <= self.cvss <= 10.0:
            raise DecisionError(f"{self.cve_id}: CVSS {self.cvss} outside [0,10]")
        if not self.events:
            raise DecisionError(f"{self.cve_id}: attack vector must name at least one event")


class CveDatabase:
    """Entries plus a precomputed event -> worst CVSS index."""

    def __init__(self, entries: Iterable[CveEntry]):
        self.entries = tuple(entries)
        seen: set[str] = set()
        for entry in self.entries:
            if entry.cve_id in seen:
                raise DecisionError(f"duplicate database entry {entry.cve_id}")
            seen.add(entry.cve_id)
        self._worst: dict[tuple[str, str], float] = {}
        for entry in self.entries:
            for event in entry.events.events():
                if entry.cvss > self._worst.get(event, -1.0):
                    self._worst[event] = entry.cvss

    def max_cvss(self, kind: str, name: str) -> float:
        """Worst CVSS across entries whose vector contains the event; 0 unmapped."""
        return self._worst.get((kind, name), 0.0)

    def __len__(self) -> int:
        return len(self.entries)


def _coerce_db(db: Union[CveDatabase, Iterable[CveEntry]]) -> CveDatabase:
    return db if isinstance(db, CveDatabase) else CveDatabase(db)


def _parse_event_name(name: str) -> tuple[str, str]:
    if name.upper().startswith("CAP_"):
        return KIND_CAPABILITY, canonical_capability(name)
    return KIND_SYSCALL, canonical_syscall(name)


def parse_event_list(names: Iterable[str]) -> EventSet:
    """Names to an event set; the CAP_ prefix selects the capability kind."""
    return EventSet.from_events(_parse_event_name(name) for name in names)


def parse_cvedb(lines: Iterable[str], source: str = "<memory>") -> CveDatabase:
    iterator = iter(lines)
    try:
        header = next(iterator).rstrip("\n")
    except StopIteration:
        raise DbFormatError(f"{source}: empty input, expected {CVEDB_HEADER!r}") from None
    if header != CVEDB_HEADER:
        raise DbFormatError(f"{source}: bad header {header!r}, expected {CVEDB_HEADER!r}")
    entries = []
    for lineno, raw in enumerate(iterator, start=2):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DbFormatError(
                f"{source}:{lineno}: expected `cve_id<TAB>cvss<TAB>events`, got {len(parts)} fields"
            )
        cve_id, cvss_text, events_text = (part.strip() for part in parts)
        try:
            cvss = float(cvss_text)
        except ValueError:
            raise DbFormatError(f"{source}:{lineno}: bad CVSS value {cvss_text!r}") from None
        if not math.isfinite(cvss):
            raise DbFormatError(f"{source}:{lineno}: bad CVSS value {cvss_text!r}")
        names = [piece.strip() for piece in events_text.split(",") if piece.strip()]
        if not names:
            raise DbFormatError(f"{source}:{lineno}: {cve_id}: empty attack vector")
        try:
            entry = CveEntry(cve_id, cvss, EventSet.from_events(_parse_event_name(n) for n in names))
        except DecisionError as exc:
            raise DbFormatError(f"{source}:{lineno}: {exc}") from None
        entries.append(entry)
    try:
        return CveDatabase(entries)
    except DecisionError as exc:
        raise DbFormatError(f"{source}: {exc}") from None


def load_cvedb(path) -> CveDatabase:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_cvedb(handle, source=str(path))


def default_cvedb() -> CveDatabase:
    """The shipped attack-vector database."""
    import importlib.resources

    resource = importlib.resources.files("leastpriv").joinpath("data/cves.cvedb")
    return parse_cvedb(resource.read_text(encoding="utf-8").splitlines(), source="cves.cvedb")


# -- observation store -------------------------------------------------------


class ObservationStore:
    """Per-environment event sets for one container, with occurrence counts.

    Environments are keyed by id; recording the same id twice merges
    (sets union, counts add).  The environment set is expected to include
    the baseline: a policy must at minimum let the container start.
    """

    def __init__(self, container: str = "container"):
        if not container or any(ch.isspace() for ch in container):
            raise StoreError(f"bad container name {container!r}")
        self.container = container
        self._events: dict[str, EventSet] = {}
        self._syscall_counts: dict[str, Counter] = {}
        self._capability_counts: dict[str, Counter] = {}

    def record(
        self,
        environment_id: str,
        events: EventSet,
        syscall_counts: Optional[Iterable[tuple[str, int]]] = None,
        capability_counts: Optional[Iterable[tuple[str, int]]] = None,
    ) -> None:
        if not environment_id or any(ch.isspace() for ch in environment_id):
            raise StoreError(f"bad environment id {environment_id!r}")
        current = self._events.get(environment_id, EventSet.empty())
        self._events[environment_id] = current | events
        sys_counter = self._syscall_counts.setdefault(environment_id, Counter())
        cap_counter = self._capability_counts.setdefault(environment_id, Counter())
        for name, count in syscall_counts or ():
            sys_counter[name] += count
        for name, count in capability_counts or ():
            cap_counter[name] += count
        # events without explicit counts still appear once
        for name in events.syscalls:
            sys_counter.setdefault(name, 1)
        for name in events.capabilities:
            cap_counter.setdefault(name, 1)

    def record_observation(self, observation: Observation) -> None:
        self.record(
            observation.environment_id,
            observation.events,
            observation.syscall_counts,
            observation.capability_counts,
        )

    def environments(self) -> tuple[str, ...]:
        return tuple(sorted(self._events))

    def events_for(self, environment_id: str) -> EventSet:
        try:
            return self._events[environment_id]
        except KeyError:
            raise StoreError(f"unknown environment {environment_id!r}") from None

    def counts_for(self, environment_id: str) -> tuple[Counter, Counter]:
        if environment_id not in self._events:
            raise StoreError(f"unknown environment {environment_id!r}")
        return (
            Counter(self._syscall_counts[environment_id]),
            Counter(self._capability_counts[environment_id]),
        )

    def union_events(self) -> EventSet:
        combined = EventSet.empty()
        for events in self._events.values():
            combined = combined | events
        return combined

    def intersection_events(self) -> EventSet:
        iterator = iter(self._events.values())
        try:
            combined = next(iterator)
        except StopIteration:
            return EventSet.empty()
        for events in iterator:
            combined = combined & events
        return combined

    def event_frequencies(self) -> dict[tuple[str, str], int]:
        """Event -> number of environments it appeared in."""
        frequencies: Counter = Counter()
        for events in self._events.values():
            for event in events.events():
                frequencies[event] += 1
        return dict(frequencies)

    def __len__(self) -> int:
        return len(self._events)

    def __bool__(self) -> bool:
        return bool(self._events)


def save_store(store: ObservationStore, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(OBSERVATIONS_HEADER + "\n")
        handle.write(f"CONTAINER {store.container}\n")
        for environment_id in store.environments():
            handle.write(f"ENV {environment_id}\n")
            sys_counts, cap_counts = store.counts_for(environment_id)
            events = store.events_for(environment_id)
            for name in sorted(events.syscalls):
                handle.write(f"SYS {name} {sys_counts.get(name, 1)}\n")
            for name in sorted(events.capabilities):
                handle.write(f"CAP {name} {cap_counts.get(name, 1)}\n")


def load_store(path) -> ObservationStore:
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0] != OBSERVATIONS_HEADER:
        raise StoreFormatError(f"{path}: expected {OBSERVATIONS_HEADER!r} header")
    store: Optional[ObservationStore] = None
    environment_id: Optional[str] = None
    pending: dict[str, list] = {}

    def flush():
        if environment_id is not None:
            store.record(
                environment_id,
                EventSet.of(
                    [name for name, _ in pending["SYS"]],
                    [name for name, _ in pending["CAP"]],
                ),
                pending["SYS"],
                pending["CAP"],
            )

    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "CONTAINER":
            if len(parts) != 2 or store is not None:
                raise StoreFormatError(f"{path}:{lineno}: bad CONTAINER line")
            store = ObservationStore(parts[1])
        elif tag == "ENV":
            if store is None or len(parts) != 2:
                raise StoreFormatError(f"{path}:{lineno}: bad ENV line")
            flush()
            environment_id = parts[1]
            pending = {"SYS": [], "CAP": []}
        elif tag in ("SYS", "CAP"):
            if environment_id is None or len(parts) != 3:
                raise StoreFormatError(f"{path}:{lineno}: stray or malformed {tag} line")
            try:
                count = int(parts[2])
            except ValueError:
                raise StoreFormatError(f"{path}:{lineno}: bad count {parts[2]!r}") from None
            pending[tag].append((parts[1], count))
        else:
            raise StoreFormatError(f"{path}:{lineno}: unknown tag {tag!r}")
    if store is None:
        raise StoreFormatError(f"{path}: missing CONTAINER line")
    flush()
    return store


# -- scores ------------------------------------------------------------------


def security_score(allowed: EventSet, db: Union[CveDatabase, Iterable[CveEntry]]) -> float:
    """1 - worst normalized CVSS over allowed events; empty set scores 1.0."""
    database = _coerce_db(db)
    worst = 0.0
    for event in allowed.events():
        cvss = database.max_cvss(*event)
        if cvss > worst:
            worst = cvss
    return 1.0 - worst / 10.0


def functionality_score(allowed: EventSet, store: ObservationStore) -> float:
    """Fraction of observed environments fully covered by the allowed set."""
    if not store:
        raise StoreError("functionality is undefined over an empty store")
    covered = sum(
        1 for environment_id in store.environments()
        if store.events_for(environment_id) <= allowed
    )
    return covered / len(store)


# -- classification and synthesis --------------------------------------------


@dataclass(frozen=True)
class EventClasses:
    """Observation partition: in every environment, in some, in none."""

    always: EventSet
    sporadic: EventSet
    observed: EventSet


def classify_events(store: ObservationStore) -> EventClasses:
    observed = store.union_events()
    always = store.intersection_events()
    return EventClasses(always, observed - always, observed)


@dataclass(frozen=True)
class ScoreTargets:
    security_min: float
    functionality_min: float

    def __post_init__(self):
        for label, value in (
            ("security_min", self.security_min),
            ("functionality_min", self.functionality_min),
        ):
            if not 0.0 <= value <= 1.0:
                raise DecisionError(f"{label} must be in [0,1], got {value}")

    @property
    def cvss_ceiling(self) -> float:
        return 10.0 * (1.0 - self.security_min)


@dataclass(frozen=True)
class Policy:
    container: str
    allowed: EventSet
    achieved_security: float
    achieved_functionality: float
    always: EventSet
    sporadic_included: EventSet
    sporadic_excluded: EventSet
    targets: Optional[ScoreTargets] = None

    def classification_of(self, kind: str, name: str) -> str:
        if self.always.contains_event(kind, name):
            return "always-in"
        if self.sporadic_included.contains_event(kind, name):
            return "sporadic-included"
        if self.sporadic_excluded.contains_event(kind, name):
            return "sporadic-excluded"
        return "never-observed"


@dataclass(frozen=True)
class Infeasible:
    """No policy meets both targets; names what stands in the way.

    best_security and best_functionality are the scores of the maximal
    admissible candidate (always-class plus every sporadic event under
    the ceiling): the policy the procedure would have produced with the
    failing constraint ignored.
    """

    reason: str
    blocking_events: tuple[tuple[str, str], ...]
    best_security: float
    best_functionality: float


def _event_label(event: tuple[str, str]) -> str:
    return event[1]  # capability names carry their CAP_ prefix already


def synthesize_policy(
    store: ObservationStore,
    db: Union[CveDatabase, Iterable[CveEntry]],
    targets: ScoreTargets,
) -> Union[Policy, Infeasible]:
    """Deterministic target-driven synthesis; see the module docstring.

    Greedy order over admissible sporadic events: descending environment
    frequency, then ascending CVSS, then (kind, name).  Each step first
    checks whether functionality already meets the target, so no more
    events are admitted than the target requires.
    """
    if not store:
        raise StoreError("cannot synthesize from an empty store")
    database = _coerce_db(db)
    classes = classify_events(store)
    ceiling = targets.cvss_ceiling

    admissible = [
        event for event in classes.sporadic.events()
        if database.max_cvss(*event) <= ceiling
    ]
    candidate_max = classes.always | EventSet.from_events(admissible)
    best_security = security_score(candidate_max, database)
    best_functionality = functionality_score(candidate_max, store)

    over_always = [
        event for event in classes.always.events()
        if database.max_cvss(*event) > ceiling
    ]
    if over_always:
        names = ", ".join(_event_label(event) for event in over_always)
        return Infeasible(
            f"always-required events exceed the CVSS ceiling {ceiling:g}: {names}",
            tuple(over_always),
            best_security,
            best_functionality,
        )

    frequencies = store.event_frequencies()
    ordered = sorted(
        admissible,
        key=lambda event: (-frequencies[event], database.max_cvss(*event), event),
    )
    allowed = classes.always
    included = []
    for event in ordered:
        if functionality_score(allowed, store) >= targets.functionality_min:
            break
        allowed = allowed | EventSet.from_events([event])
        included.append(event)
    included_set = EventSet.from_events(included)

    achieved_functionality = functionality_score(allowed, store)
    if achieved_functionality < targets.functionality_min:
        uncovered_needs: set[tuple[str, str]] = set()
        for environment_id in store.environments():
            events = store.events_for(environment_id)
            if not events <= candidate_max:
                uncovered_needs.update((events - candidate_max).events())
        blocking = tuple(sorted(uncovered_needs))
        names = ", ".join(_event_label(event) for event in blocking)
        return Infeasible(
            f"functionality target {targets.functionality_min:g} unreachable: "
            f"required events sit above the CVSS ceiling {ceiling:g}: {names}",
            blocking,
            best_security,
            best_functionality,
        )

    achieved_security = security_score(allowed, database)
    # ceiling admission implies the security target holds up to rounding
    assert achieved_security + _SCORE_EPS >= targets.security_min
    return Policy(
        container=store.container,
        allowed=allowed,
        achieved_security=achieved_security,
        achieved_functionality=achieved_functionality,
        always=classes.always,
        sporadic_included=included_set,
        # excluded covers both over-ceiling events and admissible ones
        # the functionality target never required
        sporadic_excluded=classes.sporadic - included_set,
        targets=targets,
    )


def sweep(
    store: ObservationStore,
    db: Union[CveDatabase, Iterable[CveEntry]],
    target_list: Iterable[ScoreTargets],
) -> list[tuple[ScoreTargets, Union[Policy, Infeasible]]]:
    """Synthesize once per target pair, in the given order."""
    database = _coerce_db(db)
    return [(targets, synthesize_policy(store, database, targets)) for targets in target_list]


# -- mitigation report -------------------------------------------------------


@dataclass(frozen=True)
class MitigationRow:
    cve_id: str
    cvss: float
    blocked: bool
    missing: tuple[tuple[str, str], ...]


def check_mitigation(
    policy: Union[Policy, EventSet],
    db: Union[CveDatabase, Iterable[CveEntry]],
) -> tuple[MitigationRow, ...]:
    """Per database entry: is at least one attack-vector event denied?

    A single missing event breaks the exploit chain, so a dropped
    capability blocks a CVE even when all its syscalls stay allowed.
    """
    allowed = policy.allowed if isinstance(policy, Policy) else policy
    database = _coerce_db(db)
    rows = []
    for entry in database.entries:
        missing = tuple(
            event for event in entry.events.events()
            if not allowed.contains_event(*event)
        )
        rows.append(MitigationRow(entry.cve_id, entry.cvss, bool(missing), missing))
    return tuple(rows)


# -- policy files ------------------------------------------------------------


def _events_doc(events: EventSet) -> dict:
    doc: dict = {}
    if events.syscalls:
        doc["syscalls"] = sorted(events.syscalls)
    if events.capabilities:
        doc["capabilities"] = sorted(events.capabilities)
    return doc


def _events_from_doc(doc) -> EventSet:
    if doc is None:
        return EventSet.empty()
    if not isinstance(doc, dict) or set(doc) - {"syscalls", "capabilities"}:
        raise DecisionError(f"bad event block {doc!r}")
    return EventSet.of(doc.get("syscalls") or (), doc.get("capabilities") or ())


def policy_to_doc(policy: Policy) -> dict:
    doc = {
        "policy_version": POLICY_VERSION,
        "container": policy.container,
        "achieved_security": policy.achieved_security,
        "achieved_functionality": policy.achieved_functionality,
        "allowed": _events_doc(policy.allowed),
        "classes": {
            "always": _events_doc(policy.always),
            "sporadic_included": _events_doc(policy.sporadic_included),
            "sporadic_excluded": _events_doc(policy.sporadic_excluded),
        },
    }
    if policy.targets is not None:
        doc["targets"] = {
            "security_min": policy.targets.security_min,
            "functionality_min": policy.targets.functionality_min,
        }
    return doc


def policy_from_doc(doc) -> Policy:
    if not isinstance(doc, dict):
        raise DecisionError("policy document must be a mapping")
    if doc.get("policy_version") != POLICY_VERSION:
        raise DecisionError(
            f"unsupported policy_version {doc.get('policy_version')!r}, expected {POLICY_VERSION}"
        )
    container = doc.get("container")
    if not isinstance(container, str) or not container:
        raise DecisionError("policy needs a container name")
    classes = doc.get("classes") or {}
    targets_doc = doc.get("targets")
    targets = None
    if targets_doc is not None:
        try:
            targets = ScoreTargets(
                float(targets_doc["security_min"]), float(targets_doc["functionality_min"])
            )
        except (TypeError, KeyError):
            raise DecisionError(f"bad targets block {targets_doc!r}") from None
    try:
        achieved_security = float(doc["achieved_security"])
        achieved_functionality = float(doc["achieved_functionality"])
    except (TypeError, KeyError, ValueError):
        raise DecisionError("policy needs numeric achieved scores") from None
    return Policy(
        container=container,
        allowed=_events_from_doc(doc.get("allowed")),
        achieved_security=achieved_security,
        achieved_functionality=achieved_functionality,
        always=_events_from_doc(classes.get("always")),
        sporadic_included=_events_from_doc(classes.get("sporadic_included")),
        sporadic_excluded=_events_from_doc(classes.get("sporadic_excluded")),
        targets=targets,
    )


def dump_policy(policy: Policy, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(policy_to_doc(policy), handle, sort_keys=False)


def load_policy(path) -> Policy:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise DecisionError(f"{path}: {exc}") from None
    return policy_from_doc(doc)
