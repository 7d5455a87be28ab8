"""Environment composition, hashing, and plan round trips."""

import pytest

from leastpriv.environment import (
    Environment,
    EnvironmentError,
    PlanError,
    WORKLOAD_PRESETS,
    WorkloadSpec,
    baseline_environment,
    combine_workloads,
    compose_environment,
    compose_pair,
    environment_from_doc,
    environment_to_doc,
    load_plan,
    plan_environments,
    write_plan,
)
from leastpriv.options import default_catalog, validate_value


def opt(name, raw=""):
    return validate_value(default_catalog()[name], raw)


class TestWorkloads:
    def test_presets_cover_w1_through_w8(self):
        assert sorted(WORKLOAD_PRESETS) == [f"W{i}" for i in range(1, 9)]

    def test_preset_shapes(self):
        assert WORKLOAD_PRESETS["W1"] == WorkloadSpec(read_ops=1000, insert_ops=1000)
        assert WORKLOAD_PRESETS["W4"].insert_ops == 1000
        assert WORKLOAD_PRESETS["W6"].field_count == 500
        assert WORKLOAD_PRESETS["W7"].field_length == 10000
        assert WORKLOAD_PRESETS["W8"].thread_count == 500

    def test_combine_is_fieldwise_max(self):
        merged = combine_workloads(WORKLOAD_PRESETS["W2"], WORKLOAD_PRESETS["W7"])
        assert merged.update_ops == 1000
        assert merged.read_ops == 1000
        assert merged.field_length == 10000
        assert merged.field_count == 10

    def test_combine_commutes(self):
        a, b = WORKLOAD_PRESETS["W3"], WORKLOAD_PRESETS["W8"]
        assert combine_workloads(a, b) == combine_workloads(b, a)

    def test_rejects_all_zero_operations(self):
        with pytest.raises(EnvironmentError):
            WorkloadSpec()

    def test_rejects_negative_and_oversized(self):
        with pytest.raises(EnvironmentError):
            WorkloadSpec(read_ops=-1)
        with pytest.raises(EnvironmentError):
            WorkloadSpec(read_ops=100_001)


class TestEnvironment:
    def test_baseline_is_empty(self):
        env = baseline_environment()
        assert env.options == ()
        assert env.workload is None

    def test_id_is_stable_and_order_insensitive(self):
        a = compose_environment([opt("tty"), opt("init")])
        b = compose_environment([opt("init"), opt("tty")])
        assert a.id == b.id
        assert len(a.id) == 32  # 16-byte digest, hex

    def test_id_changes_with_value(self):
        a = compose_environment([opt("cpu-shares", "512")])
        b = compose_environment([opt("cpu-shares", "513")])
        assert a.id != b.id

    def test_id_changes_with_workload(self):
        a = compose_environment([], workload=WORKLOAD_PRESETS["W1"])
        b = compose_environment([], workload=WORKLOAD_PRESETS["W2"])
        assert a.id != b.id
        assert a.id != baseline_environment().id

    def test_duplicate_option_rejected(self):
        with pytest.raises(EnvironmentError):
            compose_environment([opt("tty"), opt("tty", "false")])

    def test_option_value_lookup(self):
        env = compose_environment([opt("network", "host")])
        assert env.option_value("network").payload == "host"
        assert env.option_value("tty") is None

    def test_compose_pair_merges_options_and_workloads(self):
        first = compose_environment([opt("tty")], workload=WORKLOAD_PRESETS["W2"])
        second = compose_environment([], workload=WORKLOAD_PRESETS["W7"])
        both = compose_pair(first, second)
        assert both.option_value("tty") is not None
        assert both.workload.update_ops == 1000
        assert both.workload.field_length == 10000

    def test_doc_round_trip(self):
        env = compose_environment([opt("publish", "80:8080")], workload=WORKLOAD_PRESETS["W5"])
        doc = environment_to_doc(env)
        again = environment_from_doc(doc, default_catalog())
        assert again.id == env.id


class TestPlans:
    def factors(self):
        return [
            compose_environment([opt("tty")]),
            compose_environment([opt("network", "host")]),
            compose_environment([], workload=WORKLOAD_PRESETS["W1"]),
        ]

    def test_plan_builds_all_pairs(self):
        plan = plan_environments(self.factors())
        assert len(plan.factors) == 3
        assert len(plan.pairs) == 3  # C(3,2)
        # only baseline + single factors are executed; pairs are inferred
        ids = {env.id for env in plan.executed_environments()}
        assert len(ids) == 4
        composed = {c.id for _, _, c in plan.pair_environments()}
        assert len(composed) == 3
        assert composed.isdisjoint(ids)

    def test_plan_rejects_multi_factor_environment(self):
        bad = compose_environment([opt("tty"), opt("init")])
        with pytest.raises(PlanError):
            plan_environments([bad])

    def test_plan_rejects_duplicate_factors(self):
        f = compose_environment([opt("tty")])
        with pytest.raises(PlanError):
            plan_environments([f, f])

    def test_plan_file_round_trip(self, tmp_path):
        plan = plan_environments(self.factors())
        path = tmp_path / "plan.yaml"
        write_plan(plan, path)
        again = load_plan(path, default_catalog())
        assert [f.id for f in again.factors] == [f.id for f in plan.factors]
        assert [(a.id, b.id, c.id) for a, b, c in again.pair_environments()] == [
            (a.id, b.id, c.id) for a, b, c in plan.pair_environments()
        ]

    def test_plan_file_rejects_tampered_factor_id(self, tmp_path):
        plan = plan_environments(self.factors())
        path = tmp_path / "plan.yaml"
        write_plan(plan, path)
        text = path.read_text()
        real_id = plan.factors[0].id
        path.write_text(text.replace(f"id: {real_id}", "id: " + "0" * 32))
        with pytest.raises(PlanError):
            load_plan(path, default_catalog())
