"""Deployment engine tests: intake, matchmaking, both scenarios, supervision."""

from __future__ import annotations

import pytest

from fractions import Fraction

from miniorc.autoscaler import ScalingDecision
from miniorc.catalog import MonitorSample
from miniorc.datamgr import NoEligibleSite
from miniorc.errors import MiniorcError
from miniorc.iam import InvalidToken
from miniorc.orchestrator import (
    CapacityExhausted,
    FailureEvent,
    IllegalTransition,
    ScenarioMismatch,
    SimulatedIaaSSite,
    SLAViolation,
    UnknownDeployment,
    infer_scenario,
)
from miniorc.resources import ResourceVector
from miniorc.tosca import parse_template

from helpers import (
    JOB_CHAIN_TEMPLATE,
    MB,
    SERVICE_TEMPLATE,
    EngineHarness as Platform,
    assert_legal,
    compute_template,
    descriptor,
    single_site_platform,
)
from oracles import replay_placement_checks


class TestSubmit:
    def test_valid_template_validates(self):
        p = single_site_platform()
        dep_id = p.orc.submit(compute_template(("node", 2, 4)), p.token, now=0.0)
        dep = p.orc.get(dep_id)
        assert dep.state == "VALIDATED"
        assert dep.scenario == "A"
        assert dep.validation["deployable"] is True

    def test_cyclic_template_fails_with_report(self):
        p = single_site_platform()
        text = compute_template(
            ("a", 1, 1),
            extra="      requirements:\n        - dependency: b\n"
            "    b:\n      type: Compute\n"
            "      properties: {cpu: 1, memory: 1}\n"
            "      requirements:\n        - dependency: a",
        )
        dep = p.orc.get(p.orc.submit(text, p.token, now=0.0))
        assert dep.state == "FAILED"
        assert dep.failure == "validation"
        assert any(e["code"] == "CYCLE" for e in dep.validation["errors"])
        assert_legal(dep)

    def test_unparseable_template_fails(self):
        p = single_site_platform()
        dep = p.orc.get(p.orc.submit("{{{not yaml", p.token, now=0.0))
        assert dep.state == "FAILED"
        assert dep.validation["deployable"] is False

    def test_bad_token_rejected_before_creation(self):
        p = single_site_platform()
        with pytest.raises(InvalidToken):
            p.orc.submit(compute_template(("n", 1, 1)), "bogus.token", now=0.0)
        assert p.orc.deployments == {}

    def test_expired_token_rejected(self):
        p = single_site_platform()
        with pytest.raises(InvalidToken):
            p.orc.submit(compute_template(("n", 1, 1)), p.token, now=10_000.0)

    def test_scenario_inference(self):
        assert infer_scenario(parse_template(SERVICE_TEMPLATE), None) == "B"
        assert infer_scenario(parse_template(compute_template(("n", 1, 1))), None) == "A"
        assert infer_scenario(parse_template(SERVICE_TEMPLATE), "A") == "A"

    def test_scenario_hint_policy_in_template(self):
        p = single_site_platform()
        text = compute_template(("n", 1, 1), policies=[("scenario_hint", "B")])
        dep = p.orc.get(p.orc.submit(text, p.token, now=0.0))
        assert dep.scenario == "B"


class TestMatchmaking:
    def test_single_site_no_data(self):
        p = single_site_platform()
        dep_id = p.orc.submit(compute_template(("n", 2, 4)), p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        placement = p.orc.matchmake(dep_id, now=0.0)
        assert placement.site_id == "s1"
        assert placement.data_plan == "none"
        assert p.orc.get(dep_id).state == "MATCHED"

    def test_matched_detail_records_all_four_inputs(self):
        p = single_site_platform()
        dep_id = p.orc.submit(compute_template(("n", 2, 4)), p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        p.orc.matchmake(dep_id, now=0.0)
        entry = [h for h in p.orc.get(dep_id).history if h["state"] == "MATCHED"][-1]
        inputs = entry["detail"]["inputs"]
        assert set(inputs) >= {"snapshot", "ranking", "sla", "replicas"}
        assert replay_placement_checks(entry) == []

    def _data_platform(self, s1_caps=frozenset(), locality=None):
        p = Platform([descriptor("s1", capabilities=s1_caps), descriptor("s2", base_cost=2.0)])
        p.backend("s1")
        p.backend("s2")
        p.grant("s1")
        p.grant("s2")
        p.dm.create_space("proj", owner=p.account)
        ds = p.dm.add_dataset(
            "proj", [{"path": "in.dat", "size": 2 * MB, "checksum": "c1"}], owner=p.account
        )
        p.dm.add_replica(ds, "s2", completeness=1)
        policies = [("locality", locality)] if locality else []
        gpu_line = ", gpu: true" if s1_caps else ""
        text = (
            "tosca_definitions_version: tosca_simple_yaml_1_0\n"
            "topology_template:\n"
            "  node_templates:\n"
            "    worker:\n"
            "      type: Compute\n"
            f"      properties: {{cpu: 4, memory: 8{gpu_line}}}\n"
            "    feed:\n"
            "      type: DataRequirement\n"
            f"      properties: {{dataset: {ds}}}\n"
        )
        if policies:
            text += "  policies:\n"
            for kind, value in policies:
                text += f"    - {kind}: {value}\n"
        return p, ds, text

    def test_prefer_data_colocates_on_holder(self):
        p, ds, text = self._data_platform()
        dep_id = p.orc.submit(text, p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        placement = p.orc.matchmake(dep_id, now=0.0)
        # s1 ranks higher (cheaper) but only s2 holds the data.
        assert placement.site_id == "s2"
        assert placement.data_plan == "colocate"
        assert p.orc.get(dep_id).state == "MATCHED"

    def test_capability_filter_forces_migration(self):
        p, ds, text = self._data_platform(s1_caps=frozenset({"gpu"}))
        dep_id = p.orc.submit(text, p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        placement = p.orc.matchmake(dep_id, now=0.0)
        assert placement.site_id == "s1"
        assert placement.data_plan == "migrate"
        assert len(placement.transfers) == 1
        job = p.dm.get_transfer(placement.transfers[0])
        assert (job.src_site, job.dst_site) == ("s2", "s1")
        assert p.orc.get(dep_id).state == "MIGRATING_DATA"

    def test_prefer_compute_migrates_to_best_ranked(self):
        p, ds, text = self._data_platform(locality="prefer_compute")
        dep_id = p.orc.submit(text, p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        placement = p.orc.matchmake(dep_id, now=0.0)
        assert placement.site_id == "s1"
        assert placement.data_plan == "migrate"

    def test_no_sla_anywhere_fails_no_site(self):
        p = Platform([descriptor("s1")])
        p.backend("s1")
        dep_id = p.orc.submit(compute_template(("n", 2, 4)), p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        with pytest.raises(NoEligibleSite):
            p.orc.matchmake(dep_id, now=0.0)
        dep = p.orc.get(dep_id)
        assert dep.state == "FAILED" and dep.failure == "no_site"
        assert_legal(dep)

    def test_sla_cap_violation_fails_sla(self):
        p = Platform([descriptor("s1")])
        p.backend("s1")
        p.slam.negotiate(p.account, "s1", "Silver", max_cores=2, max_storage=10, now=0.0)
        dep_id = p.orc.submit(compute_template(("big", 16, 4)), p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        with pytest.raises(SLAViolation):
            p.orc.matchmake(dep_id, now=0.0)
        assert p.orc.get(dep_id).failure == "sla"

    def test_requested_class_must_match_record(self):
        p = single_site_platform()  # Silver record
        text = compute_template(("n", 1, 1), policies=[("sla_class", "Gold")])
        dep_id = p.orc.submit(text, p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        with pytest.raises(SLAViolation):
            p.orc.matchmake(dep_id, now=0.0)

    def test_unhealthy_site_excluded(self):
        p = Platform([descriptor("s1"), descriptor("s2", base_cost=3.0)])
        p.backend("s1")
        p.backend("s2")
        p.grant("s1")
        p.grant("s2")
        p.orc.push_monitor_samples(0.0)
        p.catalog.ingest_metrics(
            MonitorSample(
                site_id="s1", timestamp=1.0, free=ResourceVector(32, 64, 400), error_rate=0.6
            )
        )
        dep_id = p.orc.submit(compute_template(("n", 2, 4)), p.token, now=1.0)
        placement = p.orc.matchmake(dep_id, now=1.0)
        assert placement.site_id == "s2"

    def test_owner_rules_filter_sites(self):
        p = Platform(
            [descriptor("s1"), descriptor("s2", capabilities=frozenset({"gpu"}))]
        )
        p.backend("s1")
        p.backend("s2")
        p.grant("s1")
        p.grant("s2")
        p.rules.put(f"user:{p.account}", "filter capability contains gpu\nscore inverse_cost 1.0")
        dep_id = p.orc.submit(compute_template(("n", 2, 4)), p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        placement = p.orc.matchmake(dep_id, now=0.0)
        assert placement.site_id == "s2"
        entry = [h for h in p.orc.get(dep_id).history if h["state"] == "MATCHED"][-1]
        rejected = [site for site, _ in entry["detail"]["inputs"]["ranking"]["rejected"]]
        assert rejected == ["s1"]

    def test_dataset_without_any_complete_replica_fails(self):
        p = single_site_platform()
        p.dm.create_space("proj", owner=p.account)
        ds = p.dm.add_dataset(
            "proj", [{"path": "a", "size": MB, "checksum": "x"}], owner=p.account
        )
        p.dm.add_replica(ds, "s1", completeness=Fraction(1, 2))
        text = (
            compute_template(("n", 1, 1))
            + f"    feed:\n      type: DataRequirement\n      properties: {{dataset: {ds}}}\n"
        )
        dep_id = p.orc.submit(text, p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        with pytest.raises(NoEligibleSite):
            p.orc.matchmake(dep_id, now=0.0)

    def test_matchmake_requires_validated_state(self):
        p = single_site_platform()
        dep_id = p.orc.submit("{{{bad", p.token, now=0.0)
        with pytest.raises(IllegalTransition):
            p.orc.matchmake(dep_id, now=0.0)

    def test_unknown_deployment(self):
        p = single_site_platform()
        with pytest.raises(UnknownDeployment):
            p.orc.matchmake("dep-9999", now=0.0)


class TestScenarioA:
    def test_two_node_template_runs_with_endpoints(self):
        p = single_site_platform()
        dep_id = p.orc.submit(
            compute_template(("front", 2, 4), ("back", 4, 8)), p.token, now=0.0
        )
        p.orc.supervise(1.0)
        dep = p.orc.get(dep_id)
        assert dep.state == "RUNNING"
        assert [e["name"] for e in dep.endpoints] == ["back", "front"]
        site = p.orc.iaas["s1"]
        assert len(site.live_instances()) == 2
        assert site.used() == ResourceVector(6, 12, 0)
        p.orc.verify_accounting()
        assert_legal(dep)

    def test_endpoint_credentials_introspect_clean(self):
        p = single_site_platform()
        dep_id = p.orc.submit(compute_template(("n", 2, 4)), p.token, now=0.0)
        p.orc.supervise(1.0)
        for endpoint in p.orc.get(dep_id).endpoints:
            claims = p.iam.introspect(endpoint["credential"], now=2.0)
            assert claims.active and claims.account_id == p.account
            assert claims.audience == "shell_credential"

    def test_boot_delay_holds_provisioning(self):
        p = Platform([descriptor("s1")])
        p.backend("s1", boot_delay=5.0)
        p.grant("s1")
        dep_id = p.orc.submit(compute_template(("n", 2, 4)), p.token, now=0.0)
        p.orc.supervise(1.0)
        dep = p.orc.get(dep_id)
        assert dep.state == "PROVISIONING"
        p.orc.supervise(3.0)
        assert dep.state == "PROVISIONING"
        p.orc.supervise(6.5)
        assert dep.state == "RUNNING"

    def test_configure_delay_per_node_type(self):
        p = Platform([descriptor("s1")])
        p.backend("s1")
        p.grant("s1")
        p.orc.configure_delay = {"Compute": 10.0}
        dep_id = p.orc.submit(compute_template(("n", 2, 4)), p.token, now=0.0)
        p.orc.supervise(0.0)
        dep = p.orc.get(dep_id)
        assert dep.state == "CONFIGURING"
        p.orc.supervise(9.0)
        assert dep.state == "CONFIGURING"
        p.orc.supervise(10.0)
        assert dep.state == "RUNNING"

    def test_ask_beyond_free_fails_provisioning(self):
        p = single_site_platform()
        dep_id = p.orc.submit(compute_template(("n", 8, 16)), p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        p.orc.matchmake(dep_id, now=0.0)
        # Another tenant grabs the space between decision and launch.
        p.orc.iaas["s1"].launch(ResourceVector(30, 60, 0), spot=False, now=0.0)
        with pytest.raises(CapacityExhausted):
            p.orc.execute_scenario_a(dep_id, now=0.5)
        dep = p.orc.get(dep_id)
        assert dep.state == "FAILED" and dep.failure == "provisioning"
        assert_legal(dep)

    def test_preemption_during_configuring_recovers(self):
        p = Platform([descriptor("s1")])
        p.backend(
            "s1",
            boot_delay=2.0,
            failure_schedule=[FailureEvent(at=3.0, action="kill", instance_id="vm-0001")],
        )
        p.grant("s1")
        p.orc.configure_delay = 10.0
        dep_id = p.orc.submit(compute_template(("n", 2, 4)), p.token, now=0.0)
        p.orc.supervise(0.0)
        p.orc.supervise(2.0)  # booted
        dep = p.orc.get(dep_id)
        assert dep.state == "CONFIGURING"
        p.orc.supervise(3.0)  # scripted kill, replacement launched
        assert dep.reprovisions == 1
        assert dep.state == "CONFIGURING"
        p.orc.supervise(5.0)  # replacement boots
        p.orc.supervise(12.0)
        assert dep.state == "RUNNING"
        assert_legal(dep)

    def test_bronze_overflows_to_spot(self):
        p = Platform(
            [
                descriptor(
                    "s1",
                    cpu=16,
                    mem=32,
                    disk=200,
                    capabilities=frozenset({"spot_instances"}),
                    on_demand_quota=ResourceVector(4, 32, 200),
                )
            ]
        )
        site = p.backend("s1")
        p.grant("s1", sla_class="Bronze")
        dep_id = p.orc.submit(compute_template(("a", 4, 4), ("b", 4, 4)), p.token, now=0.0)
        p.orc.supervise(0.0)
        assert p.orc.get(dep_id).state == "RUNNING"
        flags = {i.node_name: i.spot for i in site.live_instances()}
        assert flags == {"a": False, "b": True}
        site.verify_accounting()

    def test_silver_never_uses_spot(self):
        p = Platform(
            [
                descriptor(
                    "s1",
                    cpu=16,
                    mem=32,
                    disk=200,
                    capabilities=frozenset({"spot_instances"}),
                    on_demand_quota=ResourceVector(4, 32, 200),
                )
            ]
        )
        p.backend("s1")
        p.grant("s1", sla_class="Silver")
        dep_id = p.orc.submit(compute_template(("a", 4, 4), ("b", 4, 4)), p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        with pytest.raises(NoEligibleSite):
            p.orc.matchmake(dep_id, now=0.0)

    def test_gold_preempts_spot_squatters(self):
        p = Platform(
            [
                descriptor(
                    "s1",
                    cpu=16,
                    mem=32,
                    disk=200,
                    capabilities=frozenset({"spot_instances"}),
                    on_demand_quota=ResourceVector(10, 32, 200),
                )
            ]
        )
        site = p.backend("s1")
        p.grant("s1", sla_class="Bronze")
        bronze = p.orc.submit(
            compute_template(("squat1", 4, 8), ("squat2", 8, 8), ("squat3", 4, 8)),
            p.token,
            now=0.0,
        )
        p.orc.supervise(0.5)
        assert p.orc.get(bronze).state == "RUNNING"
        assert sorted(i.instance_id for i in site.live_instances() if i.spot) == ["vm-0002"]

        p.grant("s1", sla_class="Gold", now=1.0)
        gold = p.orc.submit(compute_template(("vip", 2, 4)), p.token, now=1.0)
        p.orc.supervise(1.5)
        assert p.orc.get(gold).state == "RUNNING"
        assert site.instances["vm-0002"].state == "Preempted"
        site.verify_accounting()
        # The evicted tenant cannot re-launch: quota and capacity are both full.
        p.orc.supervise(2.5)
        victim = p.orc.get(bronze)
        assert victim.state == "FAILED"
        assert victim.reprovisions == 1
        assert_legal(victim)

    def test_delete_restores_site_exactly(self):
        p = single_site_platform()
        dep_id = p.orc.submit(compute_template(("a", 3, 5), ("b", 5, 11)), p.token, now=0.0)
        p.orc.supervise(0.0)
        site = p.orc.iaas["s1"]
        assert site.used() == ResourceVector(8, 16, 0)
        p.orc.delete(dep_id, now=1.0)
        dep = p.orc.get(dep_id)
        assert dep.state == "DELETED"
        assert dep.endpoints == []
        assert site.used() == ResourceVector.zero()
        assert site.free() == site.descriptor.capacity
        assert_legal(dep)

    def test_delete_is_idempotent(self):
        p = single_site_platform()
        dep_id = p.orc.submit(compute_template(("a", 1, 1)), p.token, now=0.0)
        p.orc.delete(dep_id, now=0.5)
        p.orc.delete(dep_id, now=1.0)
        assert p.orc.get(dep_id).state == "DELETED"

    def test_delete_during_migration_cancels_transfers(self):
        p = TestMatchmaking()._data_platform(s1_caps=frozenset({"gpu"}))[0]
        p2, ds, text = TestMatchmaking()._data_platform(s1_caps=frozenset({"gpu"}))
        dep_id = p2.orc.submit(text, p2.token, now=0.0)
        p2.orc.push_monitor_samples(0.0)
        placement = p2.orc.matchmake(dep_id, now=0.0)
        assert p2.orc.get(dep_id).state == "MIGRATING_DATA"
        p2.orc.delete(dep_id, now=1.0)
        job = p2.dm.get_transfer(placement.transfers[0])
        assert job.state == "Failed" and job.failure == "cancelled"

    def test_migration_completes_before_provisioning(self):
        p, ds, text = TestMatchmaking()._data_platform(s1_caps=frozenset({"gpu"}))
        dep_id = p.orc.submit(text, p.token, now=0.0)
        dep = p.orc.get(dep_id)
        now = 0.0
        while dep.state not in ("RUNNING", "FAILED") and now < 60.0:
            now += 1.0
            p.dm.tick_transfers(now, 1.0)
            p.orc.supervise(now)
        assert dep.state == "RUNNING"
        # The destination held a complete replica before provisioning began.
        provisioned_at = [h["at"] for h in dep.history if h["state"] == "PROVISIONING"][0]
        job = p.dm.get_transfer(dep.placement.transfers[0])
        assert job.state == "Done" and job.finished_at <= provisioned_at
        assert "s1" in p.dm.complete_sites(ds)
        assert_legal(dep)


class TestScenarioB:
    def platform(self):
        p = Platform(
            [descriptor("msa", cpu=80, mem=160, disk=800)],
            cluster_site="msa",
        )
        p.grant("msa")
        return p

    def run_until(self, p, dep, goal=("RUNNING", "FAILED"), start=1.0, limit=30):
        now = start
        while dep.state not in goal and now < start + limit:
            p.cluster.step(now)
            p.orc.supervise(now)
            now += 1.0
        return now

    def test_service_reaches_running_with_endpoint(self):
        p = self.platform()
        dep_id = p.orc.submit(SERVICE_TEMPLATE, p.token, now=0.0)
        p.orc.supervise(0.0)
        dep = p.orc.get(dep_id)
        assert dep.scenario == "B"
        assert dep.state == "PROVISIONING"
        self.run_until(p, dep)
        assert dep.state == "RUNNING"
        assert [e["address"] for e in dep.endpoints] == [f"http://msa/{dep_id}/web"]
        service = p.cluster.services[dep.services["web"]]
        assert service.running_count() == 2
        assert_legal(dep)

    def test_job_chain_runs_in_dependency_order(self):
        p = self.platform()
        dep_id = p.orc.submit(JOB_CHAIN_TEMPLATE, p.token, now=0.0)
        p.orc.supervise(0.0)
        dep = p.orc.get(dep_id)
        prepare = p.cluster.jobs[dep.jobs["prepare"]]
        crunch = p.cluster.jobs[dep.jobs["crunch"]]
        assert prepare.job_id in crunch.depends_on
        self.run_until(p, dep)
        assert dep.state == "RUNNING"
        assert dep.endpoints == []
        assert prepare.finished_at <= crunch.started_at
        assert_legal(dep)

    def test_service_failure_heals_within_two_steps(self):
        p = self.platform()
        dep_id = p.orc.submit(SERVICE_TEMPLATE, p.token, now=0.0)
        p.orc.supervise(0.0)
        dep = p.orc.get(dep_id)
        self.run_until(p, dep)
        service = p.cluster.services[dep.services["web"]]
        victim = service.active_instances()[0]
        p.cluster._fail_task(p.cluster.tasks[victim.task_id], now=50.0)
        for step in (51.0, 52.0):
            p.cluster.step(step)
            p.orc.supervise(step)
        assert service.running_count() == 2
        assert dep.state == "RUNNING"

    def test_scale_service_through_states(self):
        p = self.platform()
        dep_id = p.orc.submit(SERVICE_TEMPLATE, p.token, now=0.0)
        dep = p.orc.get(dep_id)
        p.orc.supervise(0.0)
        self.run_until(p, dep)
        p.orc.scale(dep_id, "web", 4, now=40.0)
        assert dep.state == "SCALING"
        self.run_until(p, dep, start=41.0)
        assert dep.state == "RUNNING"
        assert p.cluster.services[dep.services["web"]].running_count() == 4
        assert_legal(dep)

    def test_scale_rejects_scenario_a(self):
        p = single_site_platform()
        dep_id = p.orc.submit(compute_template(("n", 1, 1)), p.token, now=0.0)
        p.orc.supervise(0.0)
        with pytest.raises(ScenarioMismatch):
            p.orc.scale(dep_id, "n", 2, now=1.0)

    def test_terminal_job_failure_fails_deployment(self):
        p = self.platform()
        text = """
tosca_definitions_version: tosca_simple_yaml_1_0
topology_template:
  node_templates:
    doomed:
      type: BatchJob
      properties: {cpu: 1, memory: 1, max_attempts: 2, simulate_failures: 2}
"""
        dep_id = p.orc.submit(text, p.token, now=0.0)
        p.orc.supervise(0.0)
        dep = p.orc.get(dep_id)
        self.run_until(p, dep)
        assert dep.state == "FAILED"
        assert dep.failure == "instance_failure"
        assert_legal(dep)

    def test_capacity_exhaustion_after_blocked_scaleouts(self):
        p = self.platform()
        text = """
tosca_definitions_version: tosca_simple_yaml_1_0
topology_template:
  node_templates:
    hungry:
      type: LongRunningService
      properties: {cpu: 64, memory: 4, replicas: 1}
"""
        dep_id = p.orc.submit(text, p.token, now=0.0)
        p.orc.supervise(0.0)
        dep = p.orc.get(dep_id)
        assert dep.state == "PROVISIONING"
        blocked = ScalingDecision(action=None, reason="at_max_nodes", blocked=True)
        for cycle in range(3):
            p.orc.notice_scaling(blocked, now=float(cycle))
        assert dep.state == "FAILED"
        # Retries burn out against the same wall, then the deployment rests.
        for cycle in range(3, 20):
            p.orc.supervise(float(cycle))
            p.orc.notice_scaling(blocked, now=float(cycle))
        assert dep.state == "FAILED"
        assert dep.rematches <= 3
        assert_legal(dep)

    def test_unblocked_cycles_reset_patience(self):
        p = self.platform()
        dep_id = p.orc.submit(SERVICE_TEMPLATE, p.token, now=0.0)
        p.orc.supervise(0.0)
        dep = p.orc.get(dep_id)
        blocked = ScalingDecision(action=None, reason="at_max_nodes", blocked=True)
        calm = ScalingDecision(action=None, reason="", blocked=False)
        p.orc.notice_scaling(blocked, now=0.0)
        p.orc.notice_scaling(blocked, now=1.0)
        p.orc.notice_scaling(calm, now=2.0)
        assert dep.blocked_cycles == 0
        assert dep.state == "PROVISIONING"


class TestSupervision:
    def test_kill_beyond_budget_fails_terminally(self):
        p = Platform([descriptor("s1")])
        schedule = [FailureEvent(at=float(t), action="kill") for t in (2, 3, 4, 5)]
        p.backend("s1", failure_schedule=schedule)
        p.grant("s1")
        dep_id = p.orc.submit(compute_template(("n", 2, 4)), p.token, now=0.0)
        p.orc.supervise(1.0)
        dep = p.orc.get(dep_id)
        assert dep.state == "RUNNING"
        for now in (2.0, 3.0, 4.0, 5.0, 6.0):
            p.orc.supervise(now)
        assert dep.state == "FAILED"
        assert dep.failure == "instance_failure"
        assert dep.reprovisions == 3
        # instance_failure is not auto-retried; the record stays put.
        history_len = len(dep.history)
        for now in (7.0, 8.0):
            p.orc.supervise(now)
        assert len(dep.history) == history_len
        assert_legal(dep)

    def test_provisioning_failure_retries_on_other_site(self):
        p = Platform([descriptor("s1"), descriptor("s2", base_cost=2.0)])
        site1 = p.backend("s1")
        p.backend("s2")
        p.grant("s1")
        p.grant("s2")
        dep_id = p.orc.submit(compute_template(("n", 8, 16)), p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        p.orc.matchmake(dep_id, now=0.0)
        dep = p.orc.get(dep_id)
        assert dep.placement.site_id == "s1"
        site1.launch(ResourceVector(30, 60, 0), spot=False, now=0.0)
        with pytest.raises(CapacityExhausted):
            p.orc.execute_scenario_a(dep_id, now=0.5)
        assert dep.state == "FAILED"
        p.orc.supervise(1.0)
        assert dep.state == "RUNNING"
        assert dep.placement.site_id == "s2"
        assert dep.rematches == 1
        assert "s1" in dep.site_cooldowns
        assert_legal(dep)

    def test_cooldown_expires_and_site_is_usable_again(self):
        p = Platform([descriptor("s1")])
        site1 = p.backend("s1")
        p.grant("s1")
        dep_id = p.orc.submit(compute_template(("n", 8, 16)), p.token, now=0.0)
        p.orc.push_monitor_samples(0.0)
        p.orc.matchmake(dep_id, now=0.0)
        filler = site1.launch(ResourceVector(30, 60, 0), spot=False, now=0.0)
        with pytest.raises(CapacityExhausted):
            p.orc.execute_scenario_a(dep_id, now=0.5)
        dep = p.orc.get(dep_id)
        p.orc.supervise(1.0)  # cooldown blocks the only site
        assert dep.state == "FAILED"
        site1.terminate(filler.instance_id)
        p.orc.supervise(301.0)  # past the 300 s cooldown
        assert dep.state == "RUNNING"
        assert_legal(dep)

    def test_retry_budget_is_bounded(self):
        p = Platform([descriptor("s1", cpu=4, mem=8, disk=40)])
        p.backend("s1")
        p.grant("s1")
        dep_id = p.orc.submit(compute_template(("n", 8, 16)), p.token, now=0.0)
        dep = p.orc.get(dep_id)
        for now in range(0, 20):
            p.orc.supervise(float(now))
        assert dep.state == "FAILED"
        assert dep.retry_attempts == 3
        rematch_count = sum(
            1
            for prev, cur in zip(dep.history, dep.history[1:])
            if prev["state"] == "FAILED" and cur["state"] == "MATCHED"
        )
        assert rematch_count <= 3
        assert_legal(dep)

    def test_degrade_event_flips_health(self):
        p = Platform([descriptor("s1")])
        site = p.backend(
            "s1", failure_schedule=[FailureEvent(at=5.0, action="degrade")]
        )
        p.grant("s1")
        p.orc.supervise(5.0)
        assert p.catalog.state_of("s1", now=5.0).health == "Degraded"
        site.pending_events = [FailureEvent(at=6.0, action="recover")]
        p.orc.supervise(6.0)
        assert p.catalog.state_of("s1", now=6.0).health == "Healthy"


class TestPersistence:
    def test_roundtrip_mid_lifecycle(self):
        p = Platform([descriptor("s1")])
        p.backend("s1", boot_delay=5.0)
        p.grant("s1")
        dep_id = p.orc.submit(compute_template(("a", 2, 4), ("b", 4, 8)), p.token, now=0.0)
        p.orc.supervise(1.0)
        assert p.orc.get(dep_id).state == "PROVISIONING"

        state = p.orc.to_state()
        q = Platform([descriptor("s1")])
        q.backend("s1", boot_delay=5.0)
        q.slam.restore(p.slam.to_state())
        q.iam.restore(p.iam.to_state())
        q.orc.restore(state)

        p.orc.supervise(6.0)
        q.orc.supervise(6.0)
        a, b = p.orc.get(dep_id), q.orc.get(dep_id)
        assert a.state == b.state == "RUNNING"
        assert a.to_payload() == b.to_payload()
        assert p.orc.iaas["s1"].to_state() == q.orc.iaas["s1"].to_state()

    def test_restore_reparses_template(self):
        p = single_site_platform()
        dep_id = p.orc.submit(SERVICE_TEMPLATE, p.token, now=0.0)
        state = p.orc.to_state()
        q = single_site_platform()
        q.orc.restore(state)
        dep = q.orc.get(dep_id)
        assert dep.template is not None
        assert dep.template.node_names() == ["web"]


class TestSimulatedSite:
    def test_quota_and_capacity_invariants(self):
        desc = descriptor(
            "s1", cpu=8, mem=16, disk=100, on_demand_quota=ResourceVector(4, 16, 100)
        )
        site = SimulatedIaaSSite(desc)
        site.launch(ResourceVector(4, 4, 0), spot=False, now=0.0)
        with pytest.raises(CapacityExhausted):
            site.launch(ResourceVector(1, 1, 0), spot=False, now=0.0)
        site.launch(ResourceVector(4, 4, 0), spot=True, now=0.0)
        with pytest.raises(CapacityExhausted):
            site.launch(ResourceVector(1, 1, 0), spot=True, now=0.0)
        site.verify_accounting()

    def test_preempt_event_only_hits_spot(self):
        desc = descriptor("s1", capabilities=frozenset({"spot_instances"}))
        site = SimulatedIaaSSite(
            desc, failure_schedule=[FailureEvent(at=1.0, action="preempt")]
        )
        on_demand = site.launch(ResourceVector(2, 2, 0), spot=False, now=0.0)
        spot = site.launch(ResourceVector(2, 2, 0), spot=True, now=0.0)
        site.tick(1.0)
        assert site.instances[on_demand.instance_id].state == "Active"
        assert site.instances[spot.instance_id].state == "Preempted"

    def test_terminate_is_idempotent(self):
        site = SimulatedIaaSSite(descriptor("s1"))
        inst = site.launch(ResourceVector(1, 1, 0), spot=False, now=0.0)
        site.terminate(inst.instance_id)
        site.terminate(inst.instance_id)
        assert site.instances[inst.instance_id].state == "Terminated"
        assert site.used() == ResourceVector.zero()
