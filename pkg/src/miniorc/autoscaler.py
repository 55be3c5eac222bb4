"""Queue-pressure elasticity controller for the cluster.

The controller looks at the scheduler's pending queue and node set and emits
at most one decision per evaluation: grow when some pending task has been
unschedulable for longer than ``scaleout_delay``, shrink when nodes have sat
idle past ``idle_timeout`` and the floor allows it. Growth is sized so the
largest stuck task fits a single new node and the stuck backlog fits the
requested count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from miniorc.errors import MiniorcError
from miniorc.resources import ResourceVector


class ProvisioningFailed(MiniorcError):
    code = "PROVISIONING_FAILED"


@dataclass(frozen=True)
class ScalingPolicy:
    min_nodes: int = 1
    max_nodes: int = 10
    scaleout_delay: float = 30.0
    idle_timeout: float = 120.0
    node_template: ResourceVector = ResourceVector(4, 8, 40)

    def validate(self) -> None:
        if self.min_nodes < 0 or self.max_nodes < self.min_nodes:
            raise MiniorcError("need 0 <= min_nodes <= max_nodes", code="CONFIG_ERROR")
        if self.scaleout_delay <= 0 or self.idle_timeout <= 0:
            raise MiniorcError("scaling delays must be positive", code="CONFIG_ERROR")
        if not self.node_template.strictly_positive():
            raise MiniorcError("node template must be positive", code="CONFIG_ERROR")

    @classmethod
    def from_config(cls, section: dict) -> "ScalingPolicy":
        template = section.get("node_template", {})
        policy = cls(
            min_nodes=int(section.get("min_nodes", 1)),
            max_nodes=int(section.get("max_nodes", 10)),
            scaleout_delay=float(section.get("scaleout_delay", 30)),
            idle_timeout=float(section.get("idle_timeout", 120)),
            node_template=ResourceVector(
                template.get("cpu", 4), template.get("mem", 8), template.get("disk", 40)
            ),
        )
        policy.validate()
        return policy


@dataclass(frozen=True)
class ScalingDecision:
    action: str | None  # None | "add" | "remove"
    count: int = 0
    vector: ResourceVector | None = None
    node_ids: tuple = ()
    reason: str = ""
    blocked: bool = False  # growth was clamped by max_nodes

    def to_payload(self) -> dict:
        return {
            "action": self.action,
            "count": self.count,
            "vector": self.vector.to_payload() if self.vector else None,
            "node_ids": list(self.node_ids),
            "reason": self.reason,
            "blocked": self.blocked,
        }


NO_ACTION = ScalingDecision(action=None)


class Autoscaler:
    def __init__(self, policy: ScalingPolicy):
        policy.validate()
        self.policy = policy
        self.decisions: list[dict] = []

    def evaluate(self, cluster, now: float) -> ScalingDecision:
        node_count = len(cluster.alive_nodes())
        if node_count < self.policy.min_nodes:
            return ScalingDecision(
                action="add",
                count=self.policy.min_nodes - node_count,
                vector=self.policy.node_template,
                reason="below_min",
            )
        stuck = [
            entry
            for entry in cluster.pending_entries()
            if now - entry.enqueued_at > self.policy.scaleout_delay
        ]
        if stuck:
            return self._grow_decision(stuck, node_count)
        if node_count > self.policy.min_nodes:
            idle = [
                node
                for node in cluster.alive_nodes()
                if cluster.idle_duration(node, now) > self.policy.idle_timeout
            ]
            removable = min(len(idle), node_count - self.policy.min_nodes)
            if removable > 0:
                idle.sort(key=lambda n: (-cluster.idle_duration(n, now), n.node_id))
                return ScalingDecision(
                    action="remove",
                    count=removable,
                    node_ids=tuple(n.node_id for n in idle[:removable]),
                    reason="idle_timeout",
                )
        return NO_ACTION

    def _grow_decision(self, stuck, node_count: int) -> ScalingDecision:
        template = self.policy.node_template
        vector = template
        backlog = ResourceVector.zero()
        for entry in stuck:
            vector = vector.max_with(entry.demand)
            backlog = backlog + entry.demand
        worst = 0
        for need, cap in zip(backlog, template):
            if cap > 0:
                worst = max(worst, math.ceil(Fraction(need) / Fraction(cap)))
        count = max(1, worst)
        headroom = self.policy.max_nodes - node_count
        if headroom <= 0:
            return ScalingDecision(
                action=None, reason="at_max_nodes", blocked=True
            )
        blocked = count > headroom
        return ScalingDecision(
            action="add",
            count=min(count, headroom),
            vector=vector,
            reason="stuck_queue",
            blocked=blocked,
        )

    def apply(self, decision: ScalingDecision, cluster, provisioner, now: float) -> list[str]:
        """Carry out a decision; returns node ids added or removed.

        ``provisioner(vector)`` must return (node_id, attributes) or raise
        ProvisioningFailed; queue pressure then persists to the next cycle.
        """
        changed: list[str] = []
        if decision.action == "add":
            for _ in range(decision.count):
                node_id, attributes = provisioner(decision.vector)
                cluster.add_node(
                    decision.vector, attributes=attributes, node_id=node_id, now=now
                )
                changed.append(node_id)
        elif decision.action == "remove":
            for node_id in decision.node_ids:
                node = cluster.nodes.get(node_id)
                if node is None:
                    continue
                # stale-decision guard: the node may have picked up work
                if any(t.node_id == node_id for t in cluster.tasks.values()):
                    continue
                if len(cluster.alive_nodes()) <= self.policy.min_nodes:
                    break
                cluster.remove_node(node_id, reason="scale_in", now=now)
                changed.append(node_id)
        if decision.action is not None or decision.blocked:
            self.decisions.append(
                {"now": now, "decision": decision.to_payload(), "changed": changed}
            )
        if len(self.decisions) > 1000:
            del self.decisions[: len(self.decisions) - 1000]
        return changed

    def run_cycle(self, cluster, provisioner, now: float) -> ScalingDecision:
        decision = self.evaluate(cluster, now)
        self.apply(decision, cluster, provisioner, now)
        return decision
