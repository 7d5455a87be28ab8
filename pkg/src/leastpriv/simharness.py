"""Synthetic container models: deterministic environment -> event-set maps.

A model stands in for a real container image.  It owns a base event set
(startup behavior in the baseline environment) and ordered rules that add
events when a trigger matches the environment: an option being present,
an option value equal to a literal or inside an integer range, a workload
being applied, or a workload field clearing a threshold.  Interaction
rules fire only when two triggers match at once; they exist to exercise
code paths where a combined environment is not the union of its factors.

Models evaluate in microseconds, which lets the whole pipeline run at
desk scale: emit_trace turns an evaluation into a collector stream that
replays through the monitor to exactly the evaluated set.
"""

from __future__ import annotations

import importlib.resources
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import yaml

from .environment import (
    WORKLOAD_PRESETS,
    Environment,
    WorkloadSpec,
    compose_environment,
    baseline_environment,
)
from .events import EventSet
from .monitor import TRACE_HEADER
from .options import (
    OptionCatalog,
    OptionValue,
    default_catalog,
    integer_bounds,
    render_fragment,
    validate_value,
)

__all__ = [
    "ModelError",
    "OptionPresent",
    "OptionValueEquals",
    "OptionValueInRange",
    "WorkloadPresent",
    "WorkloadFieldAtLeast",
    "Predicate",
    "BehaviorRule",
    "InteractionRule",
    "SyntheticContainerModel",
    "evaluate",
    "emit_trace",
    "model_to_doc",
    "model_from_doc",
    "dump_model",
    "load_model",
    "load_fixture",
    "FIXTURE_NAMES",
    "PairCase",
    "build_pair_corpus",
    "ProbePlan",
    "build_threshold_probe",
]

MODEL_VERSION = 1
FIXTURE_NAMES = ("redis", "nginx")

_WORKLOAD_FIELDS = frozenset(
    (
        "read_ops",
        "update_ops",
        "scan_ops",
        "insert_ops",
        "delete_ops",
        "field_count",
        "field_length",
        "thread_count",
    )
)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class OptionPresent:
    option: str

    def matches(self, env: Environment) -> bool:
        return env.option_value(self.option) is not None

    def to_doc(self) -> dict:
        return {"option_present": self.option}


@dataclass(frozen=True)
class OptionValueEquals:
    """Matches when the option is bound and renders to exactly `value`."""

    option: str
    value: str

    def matches(self, env: Environment) -> bool:
        bound = env.option_value(self.option)
        return bound is not None and render_fragment(bound) == self.value

    def to_doc(self) -> dict:
        return {"option_value_equals": {"option": self.option, "value": self.value}}


@dataclass(frozen=True)
class OptionValueInRange:
    """Matches integer-payload options with lo <= value <= hi."""

    option: str
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ModelError(f"empty range [{self.lo}, {self.hi}]")

    def matches(self, env: Environment) -> bool:
        bound = env.option_value(self.option)
        if bound is None or not isinstance(bound.payload, int):
            return False
        return self.lo <= bound.payload <= self.hi

    def to_doc(self) -> dict:
        return {
            "option_value_in_range": {
                "option": self.option,
                "lo": self.lo,
                "hi": self.hi,
            }
        }


@dataclass(frozen=True)
class WorkloadPresent:
    def matches(self, env: Environment) -> bool:
        return env.workload is not None

    def to_doc(self) -> dict:
        return {"workload_present": True}


@dataclass(frozen=True)
class WorkloadFieldAtLeast:
    field: str
    threshold: int

    def __post_init__(self):
        if self.field not in _WORKLOAD_FIELDS:
            raise ModelError(f"unknown workload field {self.field!r}")

    def matches(self, env: Environment) -> bool:
        if env.workload is None:
            return False
        return getattr(env.workload, self.field) >= self.threshold

    def to_doc(self) -> dict:
        return {
            "workload_field_at_least": {
                "field": self.field,
                "threshold": self.threshold,
            }
        }


Predicate = Union[
    OptionPresent,
    OptionValueEquals,
    OptionValueInRange,
    WorkloadPresent,
    WorkloadFieldAtLeast,
]


@dataclass(frozen=True)
class BehaviorRule:
    trigger: Predicate
    adds: EventSet


@dataclass(frozen=True)
class InteractionRule:
    first: Predicate
    second: Predicate
    adds: EventSet


@dataclass(frozen=True)
class SyntheticContainerModel:
    name: str
    base_events: EventSet
    rules: tuple[BehaviorRule, ...] = ()
    interaction_rules: tuple[InteractionRule, ...] = ()


def evaluate(model: SyntheticContainerModel, env: Environment) -> EventSet:
    """Deterministic event set: base, matched rules, then matched interactions."""
    events = model.base_events
    for rule in model.rules:
        if rule.trigger.matches(env):
            events = events | rule.adds
    for rule in model.interaction_rules:
        if rule.first.matches(env) and rule.second.matches(env):
            events = events | rule.adds
    return events


def emit_trace(
    model: SyntheticContainerModel,
    env: Environment,
    namespace_id: int = 1,
    seed: int = 0,
) -> str:
    """Render evaluate(model, env) as a collector stream.

    The runtime preamble appears first: unshare creates the namespace,
    capset drops capabilities, prctl installs the syscall filter.  capset
    must precede prctl so that no preamble syscall lands after the filter
    marker; replay therefore reproduces the evaluated set exactly.  The
    payload events follow in seeded-shuffled order with strictly
    increasing timestamps, so equal (model, env, seed) gives a
    byte-identical stream.
    """
    events = evaluate(model, env)
    payload = list(events.events())
    random.Random(seed).shuffle(payload)
    lines = [TRACE_HEADER]
    timestamp = 1_000
    for marker in ("unshare", "capset", "prctl"):
        lines.append(f"{timestamp} {namespace_id} SYS {marker}")
        timestamp += 1_000
    for kind, name in payload:
        lines.append(f"{timestamp} {namespace_id} {kind} {name}")
        timestamp += 1_000
    return "\n".join(lines) + "\n"


# -- fixture file round trip ------------------------------------------------


def _predicate_from_doc(doc) -> Predicate:
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ModelError(f"bad trigger {doc!r}: expected a single-key mapping")
    key, body = next(iter(doc.items()))
    if key == "option_present":
        if not isinstance(body, str):
            raise ModelError("option_present takes an option name")
        return OptionPresent(body)
    if key == "option_value_equals":
        try:
            return OptionValueEquals(body["option"], str(body["value"]))
        except (TypeError, KeyError):
            raise ModelError(f"bad option_value_equals body {body!r}") from None
    if key == "option_value_in_range":
        try:
            return OptionValueInRange(body["option"], int(body["lo"]), int(body["hi"]))
        except (TypeError, KeyError, ValueError):
            raise ModelError(f"bad option_value_in_range body {body!r}") from None
    if key == "workload_present":
        return WorkloadPresent()
    if key == "workload_field_at_least":
        try:
            return WorkloadFieldAtLeast(body["field"], int(body["threshold"]))
        except (TypeError, KeyError, ValueError):
            raise ModelError(f"bad workload_field_at_least body {body!r}") from None
    raise ModelError(f"unknown trigger kind {key!r}")


def _events_to_doc(events: EventSet) -> dict:
    doc: dict = {}
    if events.syscalls:
        doc["syscalls"] = sorted(events.syscalls)
    if events.capabilities:
        doc["capabilities"] = sorted(events.capabilities)
    return doc


def _events_from_doc(doc) -> EventSet:
    if doc is None:
        return EventSet.empty()
    if not isinstance(doc, dict):
        raise ModelError(f"bad event set {doc!r}")
    unknown = set(doc) - {"syscalls", "capabilities"}
    if unknown:
        raise ModelError(f"unknown event set keys {sorted(unknown)}")
    return EventSet.of(doc.get("syscalls") or (), doc.get("capabilities") or ())


def model_to_doc(model: SyntheticContainerModel) -> dict:
    doc = {
        "model_version": MODEL_VERSION,
        "name": model.name,
        "base_events": _events_to_doc(model.base_events),
        "rules": [
            {"when": rule.trigger.to_doc(), "adds": _events_to_doc(rule.adds)}
            for rule in model.rules
        ],
    }
    if model.interaction_rules:
        doc["interaction_rules"] = [
            {
                "when": [rule.first.to_doc(), rule.second.to_doc()],
                "adds": _events_to_doc(rule.adds),
            }
            for rule in model.interaction_rules
        ]
    return doc


def model_from_doc(doc) -> SyntheticContainerModel:
    if not isinstance(doc, dict):
        raise ModelError("model document must be a mapping")
    version = doc.get("model_version")
    if version != MODEL_VERSION:
        raise ModelError(f"unsupported model_version {version!r}, expected {MODEL_VERSION}")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ModelError("model needs a non-empty name")
    rules = []
    for entry in doc.get("rules") or []:
        if not isinstance(entry, dict) or "when" not in entry:
            raise ModelError(f"bad rule entry {entry!r}")
        rules.append(
            BehaviorRule(_predicate_from_doc(entry["when"]), _events_from_doc(entry.get("adds")))
        )
    interactions = []
    for entry in doc.get("interaction_rules") or []:
        if not isinstance(entry, dict):
            raise ModelError(f"bad interaction entry {entry!r}")
        when = entry.get("when")
        if not isinstance(when, list) or len(when) != 2:
            raise ModelError("interaction rule needs exactly two triggers")
        interactions.append(
            InteractionRule(
                _predicate_from_doc(when[0]),
                _predicate_from_doc(when[1]),
                _events_from_doc(entry.get("adds")),
            )
        )
    return SyntheticContainerModel(
        name, _events_from_doc(doc.get("base_events")), tuple(rules), tuple(interactions)
    )


def dump_model(model: SyntheticContainerModel, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(model_to_doc(model), handle, sort_keys=False)


def load_model(path) -> SyntheticContainerModel:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ModelError(f"{path}: {exc}") from None
    return model_from_doc(doc)


def load_fixture(name: str) -> SyntheticContainerModel:
    """Load one of the shipped models (redis, nginx) from package data."""
    if name not in FIXTURE_NAMES:
        raise ModelError(f"unknown fixture {name!r}, have {', '.join(FIXTURE_NAMES)}")
    resource = importlib.resources.files("leastpriv").joinpath(
        f"data/fixtures/{name}.yaml"
    )
    doc = yaml.safe_load(resource.read_text(encoding="utf-8"))
    return model_from_doc(doc)


# -- generated corpora ------------------------------------------------------


@dataclass(frozen=True)
class PairCase:
    """One model plus a factor pair for union-inference validation."""

    model: SyntheticContainerModel
    factor_a: Environment
    factor_b: Environment
    interacting: bool


_EXTRA_BASE_POOL = (
    "futex",
    "nanosleep",
    "getrandom",
    "dup2",
    "pipe2",
    "lseek",
    "uname",
    "getcwd",
)


def build_pair_corpus(
    seed: int = 20240601, catalog: Optional[OptionCatalog] = None
) -> list[PairCase]:
    """Corpus of 384 (model, factor, factor) cases for inference validation.

    64 models cross 4 single-change factors (tty, interactive, W1, W2)
    taken two at a time.  Models 0..47 carry an interaction rule on pair
    indices 0, 2 and 4 whose added event appears only in the combined
    environment, so exactly 240 of the 384 cases are union-exact and the
    144 interacting cases differ by that single event.
    """
    catalog = catalog or default_catalog()
    rng = random.Random(seed)

    tty = compose_environment([validate_value(catalog["tty"], "true")])
    interactive = compose_environment([validate_value(catalog["interactive"], "true")])
    w_read = compose_environment(workload=WORKLOAD_PRESETS["W1"])
    w_update = compose_environment(workload=WORKLOAD_PRESETS["W2"])
    factors = (tty, interactive, w_read, w_update)
    triggers: tuple[Predicate, ...] = (
        OptionPresent("tty"),
        OptionPresent("interactive"),
        WorkloadFieldAtLeast("read_ops", 1),
        WorkloadFieldAtLeast("update_ops", 1),
    )
    pair_indices = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
    interacting_pairs = (0, 2, 4)

    cases: list[PairCase] = []
    for m in range(64):
        base = EventSet.of(
            ["read", "close", f"core_{m}"]
            + rng.sample(_EXTRA_BASE_POOL, rng.randint(1, 3))
        )
        rules = tuple(
            BehaviorRule(trigger, EventSet.of([f"probe_{m}_{i}"]))
            for i, trigger in enumerate(triggers)
        )
        interactions = ()
        if m < 48:
            interactions = tuple(
                InteractionRule(
                    triggers[pair_indices[k][0]],
                    triggers[pair_indices[k][1]],
                    EventSet.of([f"mix_{m}_{k}"]),
                )
                for k in interacting_pairs
            )
        model = SyntheticContainerModel(
            f"pair_model_{m}", base, rules, interactions
        )
        for k, (i, j) in enumerate(pair_indices):
            cases.append(
                PairCase(model, factors[i], factors[j], m < 48 and k in interacting_pairs)
            )
    return cases


@dataclass(frozen=True)
class ProbePlan:
    """A piecewise probe target for exercising the mutation loop.

    The model's behavior over `option` is piecewise constant on the
    integer domain [lo, hi]; `cut_values` lists every value where the
    event set can change, so probing {lo} ∪ cut_values enumerates all
    pieces and their union is the exact ground truth.
    """

    model: SyntheticContainerModel
    option: str
    lo: int
    hi: int
    cut_values: tuple[int, ...]

    def ground_truth(self, base_env: Optional[Environment] = None) -> EventSet:
        catalog = default_catalog()
        spec = catalog[self.option]
        truth = EventSet.empty()
        for value in sorted({self.lo, *self.cut_values}):
            bound = validate_value(spec, str(value))
            env = compose_environment(
                [*(base_env.options if base_env else ()), bound],
                base_env.workload if base_env else None,
            )
            truth = truth | evaluate(self.model, env)
        return truth


def build_threshold_probe(
    seed: int, catalog: Optional[OptionCatalog] = None
) -> ProbePlan:
    """Random stepped probe over the cpu-shares domain, max 5 breakpoints.

    Nested thresholds each add a unique event from their breakpoint
    upward; 30% of plans also hide one event inside a wide band whose
    right edge sits near the top of the domain.  Both shapes keep every
    event discoverable by a rightward sweep: nesting means any probe at
    or past a breakpoint finds it, and the band is wide and high enough
    that a pass across the upper half lands inside.
    """
    catalog = catalog or default_catalog()
    rng = random.Random(seed)
    option = "cpu-shares"
    lo, hi = integer_bounds(catalog[option].syntax)
    span = hi - lo

    with_band = rng.random() < 0.3
    count = rng.randint(1, 3 if with_band else 5)
    low_cut = lo + max(1, span // 50)
    high_cut = lo + int(span * 0.55)
    breakpoints = sorted(rng.sample(range(low_cut, high_cut), count))
    rules = [
        BehaviorRule(
            OptionValueInRange(option, point, hi), EventSet.of([f"step_{i}"])
        )
        for i, point in enumerate(breakpoints)
    ]
    cuts = set(breakpoints)

    if with_band:
        width = rng.randint(int(span * 0.40), int(span * 0.55))
        band_hi = rng.randint(lo + int(span * 0.95), hi)
        band_lo = max(lo, band_hi - width)
        rules.append(
            BehaviorRule(
                OptionValueInRange(option, band_lo, band_hi), EventSet.of(["band_evt"])
            )
        )
        cuts.update((band_lo, min(band_hi + 1, hi)))

    model = SyntheticContainerModel(
        f"probe_{seed}", EventSet.of(["read", "close"]), tuple(rules)
    )
    return ProbePlan(model, option, lo, hi, tuple(sorted(cuts)))
