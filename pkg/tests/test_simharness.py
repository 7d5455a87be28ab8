"""Synthetic container models: evaluation, trace emission, corpora."""

import random

import pytest

from leastpriv.environment import (
    WORKLOAD_PRESETS,
    baseline_environment,
    compose_environment,
    compose_pair,
)
from leastpriv.events import EventSet
from leastpriv.monitor import ingest_trace, parse_trace
from leastpriv.options import default_catalog, validate_value
from leastpriv.simharness import (
    BehaviorRule,
    FIXTURE_NAMES,
    InteractionRule,
    ModelError,
    OptionPresent,
    OptionValueEquals,
    OptionValueInRange,
    SyntheticContainerModel,
    WorkloadFieldAtLeast,
    WorkloadPresent,
    build_pair_corpus,
    build_threshold_probe,
    dump_model,
    emit_trace,
    evaluate,
    load_fixture,
    load_model,
    model_from_doc,
    model_to_doc,
)


def opt(name, raw=""):
    return validate_value(default_catalog()[name], raw)


def env_of(*options, workload=None):
    return compose_environment([opt(n, r) for n, r in options], workload)


class TestPredicates:
    def test_option_present(self):
        p = OptionPresent("tty")
        assert p.matches(env_of(("tty", "")))
        assert not p.matches(baseline_environment())

    def test_option_value_equals_uses_rendered_text(self):
        p = OptionValueEquals("network", "host")
        assert p.matches(env_of(("network", "host")))
        assert not p.matches(env_of(("network", "bridge")))
        assert not p.matches(baseline_environment())

    def test_option_value_in_range_is_inclusive(self):
        p = OptionValueInRange("cpu-shares", 100, 200)
        assert p.matches(env_of(("cpu-shares", "100")))
        assert p.matches(env_of(("cpu-shares", "200")))
        assert not p.matches(env_of(("cpu-shares", "99")))
        assert not p.matches(env_of(("cpu-shares", "201")))

    def test_workload_present(self):
        p = WorkloadPresent()
        assert p.matches(env_of(workload=WORKLOAD_PRESETS["W1"]))
        assert not p.matches(baseline_environment())

    def test_workload_field_at_least(self):
        p = WorkloadFieldAtLeast("field_length", 10000)
        assert p.matches(env_of(workload=WORKLOAD_PRESETS["W7"]))
        assert not p.matches(env_of(workload=WORKLOAD_PRESETS["W1"]))


class TestFixtureBehavior:
    """Per-factor deltas of the bundled models, checked against their baselines."""

    def test_redis_init_adds_signal_handling(self):
        model = load_fixture("redis")
        plain = evaluate(model, baseline_environment())
        with_init = evaluate(model, env_of(("init", "")))
        delta = with_init - plain
        assert set(delta.syscalls) == {"rt_sigtimedwait", "setpgid"}
        assert not delta.capabilities

    def test_nginx_host_network_adds_bind_capability(self):
        model = load_fixture("nginx")
        plain = evaluate(model, baseline_environment())
        host = evaluate(model, env_of(("network", "host")))
        delta = host - plain
        assert not delta.syscalls
        assert set(delta.capabilities) == {"CAP_NET_BIND_SERVICE"}

    def test_redis_read_workload_adds_persistence_calls(self):
        model = load_fixture("redis")
        plain = evaluate(model, baseline_environment())
        w1 = evaluate(model, env_of(workload=WORKLOAD_PRESETS["W1"]))
        delta = w1 - plain
        assert set(delta.syscalls) == {"fsync", "fdatasync", "fadvise64"}

    def test_redis_long_fields_add_vectored_io(self):
        model = load_fixture("redis")
        w1 = evaluate(model, env_of(workload=WORKLOAD_PRESETS["W1"]))
        w7 = evaluate(model, env_of(workload=WORKLOAD_PRESETS["W7"]))
        delta = w7 - w1
        assert set(delta.syscalls) == {"writev", "shutdown", "sync_file_range"}

    def test_redis_publish_adds_socket_calls(self):
        model = load_fixture("redis")
        plain = evaluate(model, baseline_environment())
        published = evaluate(model, env_of(("publish", "80:8080")))
        delta = published - plain
        assert set(delta.syscalls) == {
            "socket", "setsockopt", "epoll_ctl", "accept4", "bind", "listen",
        }

    def test_unknown_fixture_name(self):
        with pytest.raises(ModelError):
            load_fixture("postgres")
        assert FIXTURE_NAMES == ("redis", "nginx")


class TestEvaluationLaws:
    def test_base_events_always_present(self):
        for name in FIXTURE_NAMES:
            model = load_fixture(name)
            assert model.base_events <= evaluate(model, baseline_environment())

    def test_pair_evaluation_is_union_without_interactions(self):
        # fixture models carry no interaction rules, so composing two
        # single-factor environments can only union their deltas
        model = load_fixture("redis")
        cases = [
            (env_of(("init", "")), env_of(("publish", "80:8080"))),
            (env_of(("init", "")), env_of(workload=WORKLOAD_PRESETS["W7"])),
            (env_of(("tty", "")), env_of(workload=WORKLOAD_PRESETS["W1"])),
        ]
        for a, b in cases:
            assert evaluate(model, compose_pair(a, b)) == evaluate(model, a) | evaluate(model, b)

    def test_interaction_rule_fires_only_when_both_match(self):
        model = SyntheticContainerModel(
            name="toy",
            base_events=EventSet.of(syscalls=["read"]),
            rules=(),
            interaction_rules=(
                InteractionRule(
                    OptionPresent("tty"),
                    OptionPresent("init"),
                    EventSet.of(syscalls=["pipe2"]),
                ),
            ),
        )
        assert "pipe2" not in evaluate(model, env_of(("tty", ""))).syscalls
        assert "pipe2" not in evaluate(model, env_of(("init", ""))).syscalls
        both = env_of(("tty", ""), ("init", ""))
        assert "pipe2" in evaluate(model, both).syscalls


class TestTraceEmission:
    def test_emit_then_ingest_equals_evaluate(self):
        model = load_fixture("redis")
        for env in (
            baseline_environment(),
            env_of(("init", "")),
            env_of(("publish", "80:8080"), workload=WORKLOAD_PRESETS["W7"]),
        ):
            text = emit_trace(model, env, namespace_id=4, seed=11)
            events = ingest_trace(parse_trace(text.splitlines()))
            assert events == {4: evaluate(model, env)}

    def test_emission_is_deterministic_per_seed(self):
        model = load_fixture("nginx")
        env = env_of(("network", "host"))
        assert emit_trace(model, env, seed=3) == emit_trace(model, env, seed=3)
        assert emit_trace(model, env, seed=3) != emit_trace(model, env, seed=4)

    def test_seed_changes_order_not_content(self):
        model = load_fixture("nginx")
        env = env_of(("network", "host"))
        sets = {
            frozenset(ingest_trace(parse_trace(emit_trace(model, env, seed=s).splitlines()))[1].events())
            for s in range(6)
        }
        assert len(sets) == 1

    def test_confinement_markers_lead_the_trace(self):
        model = load_fixture("redis")
        records = parse_trace(emit_trace(model, baseline_environment()).splitlines())
        assert [r.name for r in records[:3]] == ["unshare", "capset", "prctl"]


class TestModelFiles:
    def build(self):
        return SyntheticContainerModel(
            name="toy",
            base_events=EventSet.of(syscalls=["read", "close"], capabilities=["CAP_CHOWN"]),
            rules=(
                BehaviorRule(OptionPresent("tty"), EventSet.of(syscalls=["ioctl"])),
                BehaviorRule(
                    OptionValueInRange("cpu-shares", 10, 90),
                    EventSet.of(syscalls=["sched_yield"]),
                ),
                BehaviorRule(
                    WorkloadFieldAtLeast("read_ops", 1),
                    EventSet.of(syscalls=["pread64"]),
                ),
                BehaviorRule(OptionValueEquals("network", "none"), EventSet.of(syscalls=["socketpair"])),
                BehaviorRule(WorkloadPresent(), EventSet.of(capabilities=["CAP_IPC_LOCK"])),
            ),
            interaction_rules=(
                InteractionRule(
                    OptionPresent("tty"),
                    WorkloadPresent(),
                    EventSet.of(syscalls=["eventfd2"]),
                ),
            ),
        )

    def test_doc_round_trip(self):
        model = self.build()
        assert model_from_doc(model_to_doc(model)) == model

    def test_file_round_trip(self, tmp_path):
        model = self.build()
        path = tmp_path / "toy.yaml"
        dump_model(model, path)
        again = load_model(path)
        assert again == model
        env = env_of(("tty", ""), workload=WORKLOAD_PRESETS["W2"])
        assert evaluate(again, env) == evaluate(model, env)

    def test_version_checked(self, tmp_path):
        model = self.build()
        path = tmp_path / "toy.yaml"
        dump_model(model, path)
        path.write_text(path.read_text().replace("model_version: 1", "model_version: 9"))
        with pytest.raises(ModelError):
            load_model(path)


class TestPairCorpus:
    def test_shape_and_interaction_split(self):
        cases = build_pair_corpus()
        assert len(cases) == 384
        interacting = [c for c in cases if c.interacting]
        assert len(interacting) == 144
        assert len(cases) - len(interacting) == 240

    def test_interaction_flag_matches_behavior(self):
        for case in build_pair_corpus():
            union = (
                evaluate(case.model, case.factor_a)
                | evaluate(case.model, case.factor_b)
            )
            combined = evaluate(case.model, compose_pair(case.factor_a, case.factor_b))
            if case.interacting:
                assert union <= combined and union != combined
                assert len(combined) - len(union) == 1
            else:
                assert union == combined

    def test_corpus_is_deterministic(self):
        first = build_pair_corpus()
        second = build_pair_corpus()
        assert [(c.model.name, c.factor_a.id, c.factor_b.id, c.interacting) for c in first] == [
            (c.model.name, c.factor_a.id, c.factor_b.id, c.interacting) for c in second
        ]


class TestThresholdProbe:
    def test_cut_values_are_real_boundaries(self):
        # each declared cut must actually change the event set relative
        # to the value just below it, and nothing may change between cuts
        catalog = default_catalog()
        rng = random.Random(99)
        for seed in range(12):
            plan = build_threshold_probe(seed)
            spec = catalog[plan.option]

            def probe(v):
                return evaluate(plan.model, compose_environment([validate_value(spec, str(v))]))

            cuts = sorted(set(plan.cut_values))
            assert len(cuts) <= 5
            for cut in cuts:
                assert plan.lo < cut <= plan.hi
                assert probe(cut) != probe(cut - 1)
            # piecewise-constant between consecutive boundaries
            edges = [plan.lo, *cuts, plan.hi + 1]
            for left, right in zip(edges, edges[1:]):
                base = probe(left)
                for _ in range(4):
                    v = rng.randrange(left, right)
                    assert probe(v) == base

    def test_ground_truth_is_union_of_all_pieces(self):
        for seed in range(12):
            plan = build_threshold_probe(seed)
            catalog = default_catalog()
            spec = catalog[plan.option]
            union = EventSet.empty()
            for value in sorted({plan.lo, *plan.cut_values}):
                env = compose_environment([validate_value(spec, str(value))])
                union = union | evaluate(plan.model, env)
            assert plan.ground_truth() == union
