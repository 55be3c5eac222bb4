"""Elasticity controller tests: sizing, hysteresis, quiescence, drain guard."""

from __future__ import annotations

import itertools
import random

import pytest

from miniorc.autoscaler import Autoscaler, ProvisioningFailed, ScalingPolicy
from miniorc.cluster import Cluster
from miniorc.errors import MiniorcError
from miniorc.resources import ResourceVector
from oracles import scaleout_node_count

BIG = 10**9


def rv(cpu=0, mem=0, disk=0):
    return ResourceVector(cpu, mem, disk)


def fake_provisioner():
    counter = itertools.count(1)
    return lambda vector: (f"auto-{next(counter):03d}", {"pool": "test"})


def make(policy=None):
    policy = policy or ScalingPolicy(
        min_nodes=1, max_nodes=10, scaleout_delay=30.0, idle_timeout=120.0,
        node_template=rv(4, 8, 40),
    )
    return Autoscaler(policy), Cluster(), fake_provisioner()


class TestSizing:
    def test_single_stuck_task_formula(self):
        scaler, cluster, prov = make()
        cluster.add_node(rv(1, 1, 1), now=0.0)
        cluster.submit_job(rv(2, 4), duration=BIG)
        cluster.step(0.0)
        assert scaler.evaluate(cluster, 30.0).action is None  # not past delay yet
        decision = scaler.evaluate(cluster, 31.0)
        assert decision.action == "add"
        assert decision.count == 1
        assert decision.vector == rv(4, 8, 40)

    @pytest.mark.parametrize("seed", range(20))
    def test_count_matches_ceiling_oracle(self, seed):
        rng = random.Random(seed)
        template = [4, 8, 40]
        policy = ScalingPolicy(
            min_nodes=0, max_nodes=100, node_template=rv(*template)
        )
        scaler = Autoscaler(policy)
        cluster = Cluster()
        demands = [
            [rng.randint(1, 4), rng.randint(1, 8), 0]
            for _ in range(rng.randint(1, 12))
        ]
        for d in demands:
            cluster.submit_job(rv(*d), duration=BIG)
        cluster.step(0.0)
        decision = scaler.evaluate(cluster, 31.0)
        assert decision.action == "add"
        assert decision.count == max(1, scaleout_node_count(demands, template))

    def test_vector_covers_largest_stuck_task(self):
        scaler, cluster, prov = make()
        cluster.add_node(rv(1, 1, 1), now=0.0)
        cluster.submit_job(rv(6, 2), duration=BIG)   # wider than the template
        cluster.step(0.0)
        decision = scaler.evaluate(cluster, 31.0)
        assert decision.vector == rv(6, 8, 40)
        scaler.apply(decision, cluster, prov, 31.0)
        cluster.step(31.0)
        assert cluster.allocation("job") == rv(6, 2)

    def test_growth_clamped_at_max(self):
        policy = ScalingPolicy(min_nodes=1, max_nodes=2, node_template=rv(2, 2, 2))
        scaler = Autoscaler(policy)
        cluster = Cluster()
        cluster.add_node(rv(2, 2, 2), now=0.0)
        for _ in range(12):
            cluster.submit_job(rv(2, 2), duration=BIG)
        cluster.step(0.0)
        decision = scaler.evaluate(cluster, 31.0)
        assert decision.action == "add"
        assert decision.count == 1
        assert decision.blocked
        prov = fake_provisioner()
        scaler.apply(decision, cluster, prov, 31.0)
        assert len(cluster.alive_nodes()) == 2
        decision = scaler.evaluate(cluster, 62.0)
        assert decision.action is None
        assert decision.blocked  # at max with pressure left

    def test_below_min_top_up(self):
        scaler, cluster, prov = make()
        decision = scaler.evaluate(cluster, 0.0)
        assert decision.action == "add"
        assert decision.reason == "below_min"
        scaler.apply(decision, cluster, prov, 0.0)
        assert len(cluster.alive_nodes()) == 1


class TestHysteresis:
    def test_pending_under_delay_never_grows(self):
        scaler, cluster, prov = make()
        cluster.add_node(rv(1, 1, 1), now=0.0)
        cluster.submit_job(rv(8, 8), duration=BIG)
        for t in range(31):  # delay is 30: strictly inside the window
            cluster.step(float(t))
            assert scaler.evaluate(cluster, float(t)).action is None

    def test_idle_under_timeout_not_removed(self):
        scaler, cluster, prov = make()
        cluster.add_node(rv(4, 8, 40), now=0.0)
        cluster.add_node(rv(4, 8, 40), now=0.0)
        assert scaler.evaluate(cluster, 120.0).action is None
        decision = scaler.evaluate(cluster, 120.5)
        assert decision.action == "remove"
        assert decision.count == 1

    def test_remove_longest_idle_first(self):
        policy = ScalingPolicy(min_nodes=1, max_nodes=10, idle_timeout=10.0)
        scaler = Autoscaler(policy)
        cluster = Cluster()
        old = cluster.add_node(rv(4, 8, 40), now=0.0)
        newer = cluster.add_node(rv(4, 8, 40), now=5.0)
        newest = cluster.add_node(rv(4, 8, 40), now=9.0)
        decision = scaler.evaluate(cluster, 16.0)
        assert decision.action == "remove"
        assert list(decision.node_ids) == [old, newer]
        assert newest not in decision.node_ids


class TestQuiescence:
    def test_burst_returns_to_min_and_stays(self):
        policy = ScalingPolicy(
            min_nodes=1, max_nodes=10, scaleout_delay=30.0, idle_timeout=120.0,
            node_template=rv(4, 8, 40),
        )
        scaler = Autoscaler(policy)
        cluster = Cluster()
        prov = fake_provisioner()
        now = 0.0
        scaler.run_cycle(cluster, prov, now)  # top up to min
        for _ in range(20):
            cluster.submit_job(rv(2, 4), duration=60.0)
        actions = []
        for _ in range(200):
            now += 10.0
            cluster.step(now)
            decision = scaler.run_cycle(cluster, prov, now)
            actions.append(decision.action)
            count = len(cluster.alive_nodes())
            assert 1 <= count <= 10
        assert "add" in actions and "remove" in actions
        assert len(cluster.alive_nodes()) == 1
        assert not cluster.pending_entries()
        # and no flapping afterwards
        for _ in range(10):
            now += 10.0
            cluster.step(now)
            assert scaler.run_cycle(cluster, prov, now).action is None
        assert len(cluster.alive_nodes()) == 1

    def test_queue_drains_with_enough_headroom(self):
        policy = ScalingPolicy(min_nodes=1, max_nodes=10, scaleout_delay=5.0,
                               idle_timeout=50.0, node_template=rv(4, 8, 40))
        scaler = Autoscaler(policy)
        cluster = Cluster()
        prov = fake_provisioner()
        rng = random.Random(3)
        now = 0.0
        scaler.run_cycle(cluster, prov, now)
        for burst in range(5):
            for _ in range(rng.randint(1, 6)):
                cluster.submit_job(rv(rng.randint(1, 4), rng.randint(1, 8)),
                                   duration=float(rng.randint(5, 30)))
            for _ in range(30):
                now += 5.0
                cluster.step(now)
                scaler.run_cycle(cluster, prov, now)
        for _ in range(60):
            now += 5.0
            cluster.step(now)
            scaler.run_cycle(cluster, prov, now)
        assert not cluster.pending_entries()
        assert all(j.state == "Done" for j in cluster.jobs.values())


class TestApply:
    def test_drain_guard_skips_busy_node(self):
        scaler, cluster, prov = make()
        a = cluster.add_node(rv(4, 8, 40), now=0.0)
        b = cluster.add_node(rv(4, 8, 40), now=0.0)
        decision = scaler.evaluate(cluster, 121.0)
        assert decision.action == "remove"
        victim = decision.node_ids[0]
        # work lands on the victim after the decision was taken
        cluster.submit_job(rv(1, 1), duration=BIG)
        cluster.step(121.0)
        placed_on = next(iter(cluster.tasks.values())).node_id
        removed = scaler.apply(decision, cluster, prov, 121.0)
        assert placed_on in cluster.nodes
        if victim == placed_on:
            assert removed == []
        else:
            assert removed == [victim]

    def test_provisioning_failure_propagates(self):
        scaler, cluster, prov = make()
        cluster.add_node(rv(1, 1, 1), now=0.0)
        cluster.submit_job(rv(4, 4), duration=BIG)
        cluster.step(0.0)
        decision = scaler.evaluate(cluster, 31.0)

        def failing(vector):
            raise ProvisioningFailed("no capacity anywhere")

        with pytest.raises(ProvisioningFailed):
            scaler.apply(decision, cluster, failing, 31.0)
        # pressure survives for the next cycle
        assert scaler.evaluate(cluster, 32.0).action == "add"

    def test_policy_validation(self):
        with pytest.raises(MiniorcError):
            ScalingPolicy(min_nodes=5, max_nodes=2).validate()
        with pytest.raises(MiniorcError):
            ScalingPolicy(scaleout_delay=0).validate()
        with pytest.raises(MiniorcError):
            ScalingPolicy(node_template=rv(0, 1, 1)).validate()

    def test_from_config_defaults(self):
        policy = ScalingPolicy.from_config(
            {"min_nodes": 1, "max_nodes": 10, "scaleout_delay": 30,
             "idle_timeout": 120, "node_template": {"cpu": 4, "mem": 8, "disk": 40}}
        )
        assert policy.node_template == rv(4, 8, 40)
        assert policy.max_nodes == 10
