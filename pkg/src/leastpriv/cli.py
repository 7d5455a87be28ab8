"""Command-line driver for the policy pipeline.

Every subcommand reads and writes the pinned file formats, validates
headers and versions up front, and fails with a single machine-parsable
line `error: <Class>: <message>` on stderr.  Exit codes: 0 success,
2 infeasible synthesis, 1 anything else.  Output is deterministic for
identical inputs, including configured seeds.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys
from dataclasses import fields
from typing import Optional

from .decision import (
    Infeasible,
    ObservationStore,
    Policy,
    ScoreTargets,
    check_mitigation,
    functionality_score,
    load_cvedb,
    load_policy,
    load_store,
    dump_policy,
    parse_event_list,
    save_store,
    security_score,
    sweep,
    synthesize_policy,
)
from .emitter import emit_capability_flags, emit_seccomp_profile
from .environment import (
    WORKLOAD_PRESETS,
    baseline_environment,
    compose_environment,
    load_plan,
    plan_environments,
    write_plan,
)
from .events import EventSet
from .explorer import (
    MutationConfig,
    command_probe,
    model_probe,
    mutate_option_values,
    validate_inference,
    write_log,
)
from .monitor import event_set_for, read_trace, replay_trace
from .options import default_catalog, integer_bounds, load_catalog, validate_value
from .simharness import FIXTURE_NAMES, load_fixture, load_model

__all__ = ["main"]


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for infeasibility
    def error(self, message):
        raise CliError(message)


def _load_catalog(path: Optional[str]):
    if path is None or path == "default":
        return default_catalog()
    return load_catalog(path)


def _load_model_or_fixture(text: str):
    if text in FIXTURE_NAMES:
        return load_fixture(text)
    return load_model(text)


def _parse_factor(token: str, catalog):
    if token in WORKLOAD_PRESETS:
        return compose_environment(workload=WORKLOAD_PRESETS[token])
    name, sep, value = token.partition("=")
    spec = catalog[name]
    if not sep:
        if spec.category != "bool":
            raise CliError(f"factor {name!r} needs =value (category {spec.category})")
        value = "true"
    return compose_environment([validate_value(spec, value)])


def _parse_targets(text: str) -> list[ScoreTargets]:
    targets = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        sec, sep, func = piece.partition(":")
        if not sep:
            raise CliError(f"target {piece!r} must be security:functionality")
        try:
            targets.append(ScoreTargets(float(sec), float(func)))
        except ValueError as exc:
            raise CliError(f"bad target {piece!r}: {exc}") from None
    if not targets:
        raise CliError("no targets given")
    return targets


def _event_rows(events: EventSet) -> list[str]:
    return [f"{kind}\t{name}" for kind, name in events.events()]


# -- subcommand bodies -------------------------------------------------------


def _cmd_ingest(args) -> int:
    records = read_trace(args.trace)
    states = replay_trace(records)
    if args.namespace is not None:
        namespace = args.namespace
    elif len(states) == 1:
        namespace = next(iter(states))
    else:
        known = ", ".join(str(ns) for ns in sorted(states)) or "none"
        raise CliError(
            f"trace tracks {len(states)} namespaces ({known}); pick one with --namespace"
        )
    observation = event_set_for(args.env_id, states, namespace)
    if os.path.exists(args.store):
        store = load_store(args.store)
        if args.container is not None and args.container != store.container:
            raise CliError(
                f"store {args.store} is for container {store.container!r}, "
                f"not {args.container!r}"
            )
    else:
        store = ObservationStore(args.container or "container")
    store.record_observation(observation)
    save_store(store, args.store)
    events = observation.events
    print(
        f"recorded {args.env_id} (namespace {namespace}): "
        f"{len(events.syscalls)} syscalls, {len(events.capabilities)} capabilities "
        f"-> {args.store} ({len(store)} environments)"
    )
    return 0


def _cmd_plan(args) -> int:
    catalog = _load_catalog(args.catalog)
    factors = [_parse_factor(token, catalog) for token in args.factors]
    plan = plan_environments(factors)
    write_plan(plan, args.out)
    print(
        f"planned {len(plan.factors)} factors, {len(plan.pairs)} inferred pairs "
        f"-> {args.out}"
    )
    return 0


def _config_overrides(pairs: list[str], v_min: int, v_max: int, seed: int) -> MutationConfig:
    integer_fields = {"v_min", "v_max", "it_max", "seed"}
    valid = {f.name for f in fields(MutationConfig)}
    kwargs: dict = {"v_min": v_min, "v_max": v_max, "seed": seed}
    for token in pairs:
        name, sep, text = token.partition("=")
        if not sep or name not in valid:
            raise CliError(f"bad --config entry {token!r} (fields: {', '.join(sorted(valid))})")
        try:
            kwargs[name] = int(text) if name in integer_fields else float(text)
        except ValueError:
            raise CliError(f"bad --config value {token!r}") from None
    return MutationConfig(**kwargs)


def _cmd_explore(args) -> int:
    catalog = _load_catalog(args.catalog)
    spec = catalog[args.option]
    bounds = integer_bounds(spec.syntax)
    if bounds is None:
        raise CliError(f"option {args.option!r} has no integer domain to mutate")
    if args.model.startswith("cmd:"):
        probe = command_probe(shlex.split(args.model[len("cmd:"):]))
    else:
        probe = model_probe(_load_model_or_fixture(args.model), spec)
    config = _config_overrides(args.config, bounds[0], bounds[1], args.seed)
    result = mutate_option_values(baseline_environment(), config, probe)
    if args.log:
        write_log(config, result, args.log)
    if args.format == "tsv":
        for row in _event_rows(result.events):
            print(row)
    else:
        print(
            f"explored {args.option} in [{config.v_min}, {config.v_max}]: "
            f"{len(result.log)} probes, {len(result.events)} events"
        )
        for warning in result.warnings:
            print(f"warning: {warning}")
        for row in _event_rows(result.events):
            print(row)
        if args.log:
            print(f"log -> {args.log}")
    return 0


def _cmd_validate_inference(args) -> int:
    catalog = _load_catalog(args.catalog)
    model = _load_model_or_fixture(args.model)
    plan = load_plan(args.plan, catalog)
    probe = model_probe(model)
    rows = []
    for factor_a, factor_b, _combined in plan.pair_environments():
        report = validate_inference(probe, plan.baseline, factor_a, factor_b)
        rows.append((factor_a.id, factor_b.id, report))
    exact = sum(1 for _, _, report in rows if report.exact)
    histogram: dict[int, int] = {}
    for _, _, report in rows:
        histogram[report.delta] = histogram.get(report.delta, 0) + 1
    if args.format == "tsv":
        print("factor_a\tfactor_b\texact\tdelta\tsize_delta")
        for id_a, id_b, report in rows:
            print(
                f"{id_a}\t{id_b}\t{str(report.exact).lower()}"
                f"\t{report.delta}\t{report.size_delta}"
            )
    else:
        total = len(rows)
        rate = exact / total if total else 1.0
        print(f"pairs {total} exact {exact} rate {rate!r}")
        buckets = " ".join(f"{delta}:{histogram[delta]}" for delta in sorted(histogram))
        print(f"delta histogram: {buckets or 'empty'}")
    return 0


def _cmd_score(args) -> int:
    store = load_store(args.store)
    db = load_cvedb(args.cvedb)
    allowed = parse_event_list(
        name.strip() for name in args.policy.split(",") if name.strip()
    )
    security = security_score(allowed, db)
    functionality = functionality_score(allowed, store)
    if args.format == "tsv":
        print(f"security\t{security!r}")
        print(f"functionality\t{functionality!r}")
    else:
        print(f"security {security!r}")
        print(f"functionality {functionality!r}")
    return 0


def _print_infeasible(outcome: Infeasible, fmt: str) -> None:
    blocking = ", ".join(name for _, name in outcome.blocking_events)
    if fmt == "tsv":
        print("status\tinfeasible")
        print(f"reason\t{outcome.reason}")
        print(f"blocking\t{blocking}")
        print(f"best_security\t{outcome.best_security!r}")
        print(f"best_functionality\t{outcome.best_functionality!r}")
    else:
        print(f"infeasible: {outcome.reason}")
        print(f"blocking events: {blocking}")
        print(
            f"best achievable: security {outcome.best_security!r} "
            f"functionality {outcome.best_functionality!r}"
        )


def _cmd_synthesize(args) -> int:
    store = load_store(args.store)
    db = load_cvedb(args.cvedb)
    targets = ScoreTargets(args.security_min, args.functionality_min)
    outcome = synthesize_policy(store, db, targets)
    if isinstance(outcome, Infeasible):
        _print_infeasible(outcome, args.format)
        return 2
    if args.out:
        dump_policy(outcome, args.out)
    if args.format == "tsv":
        print("status\tok")
        print(f"container\t{outcome.container}")
        print(f"size\t{len(outcome.allowed)}")
        print(f"syscalls\t{len(outcome.allowed.syscalls)}")
        print(f"capabilities\t{len(outcome.allowed.capabilities)}")
        print(f"achieved_security\t{outcome.achieved_security!r}")
        print(f"achieved_functionality\t{outcome.achieved_functionality!r}")
    else:
        print(
            f"policy for {outcome.container}: {len(outcome.allowed)} events "
            f"({len(outcome.allowed.syscalls)} syscalls, "
            f"{len(outcome.allowed.capabilities)} capabilities)"
        )
        print(
            f"achieved security {outcome.achieved_security!r} "
            f"functionality {outcome.achieved_functionality!r}"
        )
        if args.out:
            print(f"policy -> {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    store = load_store(args.store)
    db = load_cvedb(args.cvedb)
    targets = _parse_targets(args.targets)
    print(
        "security_min\tfunctionality_min\tstatus\tsize\tsyscalls\tcapabilities"
        "\tachieved_security\tachieved_functionality"
    )
    for target, outcome in sweep(store, db, targets):
        prefix = f"{target.security_min:g}\t{target.functionality_min:g}"
        if isinstance(outcome, Policy):
            print(
                f"{prefix}\tok\t{len(outcome.allowed)}"
                f"\t{len(outcome.allowed.syscalls)}\t{len(outcome.allowed.capabilities)}"
                f"\t{outcome.achieved_security!r}\t{outcome.achieved_functionality!r}"
            )
        else:
            print(
                f"{prefix}\tinfeasible\t-\t-\t-"
                f"\t{outcome.best_security!r}\t{outcome.best_functionality!r}"
            )
    return 0


def _cmd_emit(args) -> int:
    policy = load_policy(args.policy)
    if not args.seccomp and not args.caps:
        raise CliError("nothing to emit: pass --seccomp and/or --caps")
    if args.seccomp:
        with open(args.seccomp, "w", encoding="utf-8") as handle:
            handle.write(emit_seccomp_profile(policy))
        print(f"seccomp profile -> {args.seccomp}")
    if args.caps:
        flags = emit_capability_flags(policy)
        with open(args.caps, "w", encoding="utf-8") as handle:
            handle.write("\n".join(flags) + "\n")
        print(f"capability flags -> {args.caps}")
    return 0


def _cmd_check(args) -> int:
    policy = load_policy(args.policy)
    db = load_cvedb(args.cvedb)
    rows = check_mitigation(policy, db)
    print("cve_id\tcvss\tblocked\tmissing")
    for row in rows:
        missing = ",".join(name for _, name in row.missing)
        print(f"{row.cve_id}\t{row.cvss:g}\t{str(row.blocked).lower()}\t{missing}")
    if args.format != "tsv":
        blocked = sum(1 for row in rows if row.blocked)
        print(f"blocked {blocked}/{len(rows)}")
    return 0


# -- argument wiring ---------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="leastpriv",
        description="Generate least-privilege container policies from event traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="replay a trace into an observation store")
    p.add_argument("trace", help="beacon-trace v1 file")
    p.add_argument("--env-id", required=True, help="environment id to record under")
    p.add_argument("--store", required=True, help="observation store file (created or appended)")
    p.add_argument("--namespace", type=int, help="namespace id (default: the only tracked one)")
    p.add_argument("--container", help="container name for a new store")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("plan", help="plan single-factor environments and inferred pairs")
    p.add_argument("catalog", help="option catalog file, or `default`")
    p.add_argument("factors", nargs="*", help="factor specs: name, name=value, or W1..W8")
    p.add_argument("--out", required=True, help="plan file to write")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("explore", help="mutate one integer option and collect events")
    p.add_argument("model", help="fixture name, model file, or `cmd:<probe command>`")
    p.add_argument("option", help="catalog option to mutate")
    p.add_argument("--catalog", help="option catalog file (default: shipped)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", action="append", default=[], metavar="K=V",
                   help="mutation config override, repeatable")
    p.add_argument("--log", help="write the exploration log here")
    p.add_argument("--format", choices=("human", "tsv"), default="human")
    p.set_defaults(func=_cmd_explore)

    p = sub.add_parser("validate-inference", help="check pair union inference against a model")
    p.add_argument("model", help="fixture name or model file")
    p.add_argument("plan", help="plan file")
    p.add_argument("--catalog", help="option catalog file (default: shipped)")
    p.add_argument("--format", choices=("human", "tsv"), default="human")
    p.set_defaults(func=_cmd_validate_inference)

    p = sub.add_parser("score", help="score an event list against a store and database")
    p.add_argument("store", help="observation store file")
    p.add_argument("cvedb", help="CVE database file")
    p.add_argument("--policy", required=True, help="comma-separated allowed events")
    p.add_argument("--format", choices=("human", "tsv"), default="human")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("synthesize", help="synthesize a policy meeting both targets")
    p.add_argument("store", help="observation store file")
    p.add_argument("cvedb", help="CVE database file")
    p.add_argument("--security-min", type=float, required=True)
    p.add_argument("--functionality-min", type=float, required=True)
    p.add_argument("--out", help="policy file to write")
    p.add_argument("--format", choices=("human", "tsv"), default="human")
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("sweep", help="synthesize across several target pairs")
    p.add_argument("store", help="observation store file")
    p.add_argument("cvedb", help="CVE database file")
    p.add_argument("--targets", required=True,
                   help="comma-separated security:functionality pairs")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("emit", help="render a policy into deployable artifacts")
    p.add_argument("policy", help="policy file")
    p.add_argument("--seccomp", help="seccomp profile JSON output path")
    p.add_argument("--caps", help="capability flag list output path")
    p.set_defaults(func=_cmd_emit)

    p = sub.add_parser("check", help="report which database CVEs a policy blocks")
    p.add_argument("policy", help="policy file")
    p.add_argument("cvedb", help="CVE database file")
    p.add_argument("--format", choices=("human", "tsv"), default="human")
    p.set_defaults(func=_cmd_check)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValueError, OSError) as exc:
        message = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
