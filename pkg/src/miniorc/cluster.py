"""Two-level cluster scheduler with Dominant Resource Fairness.

The cluster offers whole-node free vectors to two built-in frameworks, one
managing long-running services and one managing batch jobs. Each offer round
repeatedly picks the framework chosen by the scheduling policy (DRF by
default: minimum dominant share, ties by framework id) and places exactly one
task, so allocations follow progressive filling. A round ends when no
framework can place any pending task.

All accounting is exact rational arithmetic; after every round each node
satisfies free + placed == total with zero tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from miniorc.errors import MiniorcError
from miniorc.resources import ResourceVector

FRAMEWORK_KINDS = ("job", "service")
BUILTIN_FRAMEWORKS = (("job", "job"), ("service", "service"))

SERVICE_STATES = ("Starting", "Running", "Failed")
JOB_STATES = ("Pending", "Runnable", "Running", "Done", "Failed")

TRACE_LIMIT = 1000


class UnknownNode(MiniorcError):
    code = "UNKNOWN_NODE"


class NodeBusy(MiniorcError):
    code = "NODE_BUSY"


class UnknownService(MiniorcError):
    code = "UNKNOWN_SERVICE"


class UnknownJob(MiniorcError):
    code = "UNKNOWN_JOB"


class CyclicDependency(MiniorcError):
    code = "CYCLIC_DEPENDENCY"


class NoPendingDemand(MiniorcError):
    code = "NO_PENDING_DEMAND"


@dataclass
class Node:
    node_id: str
    total: ResourceVector
    free: ResourceVector
    attributes: dict = field(default_factory=dict)
    alive: bool = True
    created_at: float = 0.0
    idle_since: float | None = 0.0  # None while tasks are placed here

    def to_payload(self) -> dict:
        return {
            "node_id": self.node_id,
            "total": self.total.to_payload(),
            "free": self.free.to_payload(),
            "attributes": dict(self.attributes),
            "alive": self.alive,
            "created_at": self.created_at,
            "idle_since": self.idle_since,
        }


@dataclass
class Task:
    task_id: str
    framework_id: str
    demand: ResourceVector
    node_id: str
    unit_id: str  # service instance id or job id
    started_at: float

    def to_payload(self) -> dict:
        return {
            "task_id": self.task_id,
            "framework_id": self.framework_id,
            "demand": self.demand.to_payload(),
            "node_id": self.node_id,
            "unit_id": self.unit_id,
            "started_at": self.started_at,
        }


@dataclass
class QueueEntry:
    seq: int
    framework_id: str
    demand: ResourceVector
    unit_id: str
    enqueued_at: float

    def to_payload(self) -> dict:
        return {
            "seq": self.seq,
            "framework_id": self.framework_id,
            "demand": self.demand.to_payload(),
            "unit_id": self.unit_id,
            "enqueued_at": self.enqueued_at,
        }


@dataclass
class ServiceInstance:
    instance_id: str
    state: str = "Starting"
    node_id: str | None = None
    task_id: str | None = None
    placed_step: int = -1

    def to_payload(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "state": self.state,
            "node_id": self.node_id,
            "task_id": self.task_id,
            "placed_step": self.placed_step,
        }


@dataclass
class Service:
    service_id: str
    demand: ResourceVector
    replicas_target: int
    endpoint: str
    framework_id: str = "service"
    labels: dict = field(default_factory=dict)
    instances: list = field(default_factory=list)
    instance_counter: int = 0

    def active_instances(self) -> list:
        return [i for i in self.instances if i.state in ("Starting", "Running")]

    def running_count(self) -> int:
        return sum(1 for i in self.instances if i.state == "Running")

    def to_payload(self) -> dict:
        return {
            "service_id": self.service_id,
            "demand": self.demand.to_payload(),
            "replicas_target": self.replicas_target,
            "endpoint": self.endpoint,
            "framework_id": self.framework_id,
            "labels": dict(self.labels),
            "instances": [i.to_payload() for i in self.instances],
            "instance_counter": self.instance_counter,
        }


@dataclass
class Job:
    job_id: str
    demand: ResourceVector
    depends_on: frozenset = frozenset()
    framework_id: str = "job"
    state: str = "Pending"
    attempts: int = 0
    max_attempts: int = 3
    duration: float = 0.0
    fail_attempts: frozenset = frozenset()  # scripted attempt numbers that abort
    labels: dict = field(default_factory=dict)
    started_at: float | None = None
    finished_at: float | None = None
    node_id: str | None = None
    task_id: str | None = None

    def to_payload(self) -> dict:
        return {
            "job_id": self.job_id,
            "demand": self.demand.to_payload(),
            "depends_on": sorted(self.depends_on),
            "framework_id": self.framework_id,
            "state": self.state,
            "attempts": self.attempts,
            "max_attempts": self.max_attempts,
            "duration": self.duration,
            "fail_attempts": sorted(self.fail_attempts),
            "labels": dict(self.labels),
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "node_id": self.node_id,
            "task_id": self.task_id,
        }


@dataclass(frozen=True)
class FrameworkView:
    framework_id: str
    dominant_share: Fraction
    head_seq: int


class DrfPolicy:
    name = "drf"

    def select(self, candidates: list[FrameworkView]) -> str:
        best = min(candidates, key=lambda c: (c.dominant_share, c.framework_id))
        return best.framework_id


class FifoPolicy:
    name = "fifo"

    def select(self, candidates: list[FrameworkView]) -> str:
        return min(candidates, key=lambda c: c.head_seq).framework_id


POLICIES = {"drf": DrfPolicy, "fifo": FifoPolicy}


def make_policy(name: str):
    try:
        return POLICIES[name]()
    except KeyError:
        raise MiniorcError(f"unknown scheduling policy {name!r}", code="CONFIG_ERROR")


class Cluster:
    def __init__(self, policy: str = "drf"):
        self.policy = make_policy(policy)
        self.frameworks: dict[str, str] = dict(BUILTIN_FRAMEWORKS)
        self.nodes: dict[str, Node] = {}
        self.tasks: dict[str, Task] = {}
        self.queues: dict[str, list[QueueEntry]] = {fw: [] for fw in self.frameworks}
        self.services: dict[str, Service] = {}
        self.jobs: dict[str, Job] = {}
        self.step_index = 0
        self.trace: list[dict] = []
        self._node_counter = 0
        self._task_counter = 0
        self._service_counter = 0
        self._job_counter = 0
        self._queue_seq = 0

    def register_framework(self, framework_id: str, kind: str) -> None:
        if kind not in FRAMEWORK_KINDS:
            raise MiniorcError(f"unknown framework kind {kind!r}", code="CONFIG_ERROR")
        if framework_id in self.frameworks:
            raise MiniorcError(
                f"framework {framework_id!r} already registered", code="DUPLICATE_FRAMEWORK"
            )
        self.frameworks[framework_id] = kind
        self.queues[framework_id] = []

    def kind_of(self, framework_id: str) -> str:
        return self.frameworks[framework_id]

    # -- membership ---------------------------------------------------------

    def add_node(
        self,
        total: ResourceVector,
        attributes: dict | None = None,
        node_id: str | None = None,
        now: float = 0.0,
    ) -> str:
        if node_id is None:
            self._node_counter += 1
            node_id = f"n-{self._node_counter:04d}"
        if node_id in self.nodes:
            raise MiniorcError(f"node {node_id!r} already exists", code="DUPLICATE_NODE")
        self.nodes[node_id] = Node(
            node_id=node_id,
            total=total,
            free=total,
            attributes=dict(attributes or {}),
            created_at=now,
            idle_since=now,
        )
        return node_id

    def remove_node(self, node_id: str, reason: str, now: float = 0.0) -> list[str]:
        """Remove a node; on failure/preemption its tasks re-enter their queues.

        Returns the unit ids whose tasks were displaced.
        """
        node = self.nodes.get(node_id)
        if node is None:
            raise UnknownNode(f"no node {node_id!r}")
        on_node = [t for t in self.tasks.values() if t.node_id == node_id]
        if reason == "scale_in":
            if on_node:
                raise NodeBusy(f"node {node_id!r} still runs {len(on_node)} task(s)")
            del self.nodes[node_id]
            return []
        displaced = []
        for task in on_node:
            displaced.append(task.unit_id)
            self._fail_task(task, now)
        del self.nodes[node_id]
        return displaced

    def node_ids(self) -> list[str]:
        return sorted(self.nodes)

    def alive_nodes(self) -> list[Node]:
        return [self.nodes[n] for n in sorted(self.nodes) if self.nodes[n].alive]

    def cluster_total(self) -> ResourceVector:
        total = ResourceVector.zero()
        for node in self.alive_nodes():
            total = total + node.total
        return total

    # -- frameworks and shares ---------------------------------------------

    def allocation(self, framework_id: str) -> ResourceVector:
        alloc = ResourceVector.zero()
        for task in self.tasks.values():
            if task.framework_id == framework_id:
                alloc = alloc + task.demand
        return alloc

    def dominant_share(self, framework_id: str) -> Fraction:
        return self.allocation(framework_id).dominant_ratio(self.cluster_total())

    def next_framework(self) -> str:
        views = self._framework_views([fw for fw in self.frameworks if self.queues[fw]])
        if not views:
            raise NoPendingDemand("no framework has pending demand")
        return self.policy.select(views)

    def _framework_views(self, framework_ids) -> list[FrameworkView]:
        return [
            FrameworkView(
                framework_id=fw,
                dominant_share=self.dominant_share(fw),
                head_seq=self.queues[fw][0].seq,
            )
            for fw in sorted(framework_ids)
        ]

    # -- services ------------------------------------------------------------

    def submit_service(
        self,
        demand: ResourceVector,
        replicas: int,
        endpoint: str,
        labels: dict | None = None,
        service_id: str | None = None,
        framework_id: str = "service",
    ) -> str:
        if self.frameworks.get(framework_id) != "service":
            raise MiniorcError(
                f"{framework_id!r} is not a service framework", code="UNKNOWN_FRAMEWORK"
            )
        if service_id is None:
            self._service_counter += 1
            service_id = f"svc-{self._service_counter:04d}"
        if service_id in self.services:
            raise MiniorcError(f"service {service_id!r} already exists", code="DUPLICATE_SERVICE")
        self.services[service_id] = Service(
            service_id=service_id,
            demand=demand,
            replicas_target=int(replicas),
            endpoint=endpoint,
            framework_id=framework_id,
            labels=dict(labels or {}),
        )
        return service_id

    def get_service(self, service_id: str) -> Service:
        service = self.services.get(service_id)
        if service is None:
            raise UnknownService(f"no service {service_id!r}")
        return service

    def scale_service(self, service_id: str, replicas: int) -> None:
        self.get_service(service_id).replicas_target = int(replicas)

    def cancel_service(self, service_id: str, now: float = 0.0) -> None:
        service = self.get_service(service_id)
        fw = service.framework_id
        self.queues[fw] = [e for e in self.queues[fw] if e.unit_id != service_id]
        for instance in service.active_instances():
            if instance.task_id:
                self._release_task(instance.task_id, now)
            instance.state = "Failed"
            instance.task_id = None
        del self.services[service_id]

    # -- jobs -----------------------------------------------------------------

    def submit_job(
        self,
        demand: ResourceVector,
        depends_on=(),
        duration: float = 0.0,
        max_attempts: int = 3,
        fail_attempts=(),
        labels: dict | None = None,
        job_id: str | None = None,
        framework_id: str = "job",
    ) -> str:
        if self.frameworks.get(framework_id) != "job":
            raise MiniorcError(
                f"{framework_id!r} is not a job framework", code="UNKNOWN_FRAMEWORK"
            )
        if job_id is None:
            self._job_counter += 1
            job_id = f"job-{self._job_counter:04d}"
        if job_id in self.jobs:
            raise MiniorcError(f"job {job_id!r} already exists", code="DUPLICATE_JOB")
        depends_on = frozenset(depends_on)
        self._check_acyclic(job_id, depends_on)
        self.jobs[job_id] = Job(
            job_id=job_id,
            demand=demand,
            depends_on=depends_on,
            framework_id=framework_id,
            max_attempts=int(max_attempts),
            duration=float(duration),
            fail_attempts=frozenset(int(a) for a in fail_attempts),
            labels=dict(labels or {}),
        )
        return job_id

    def _check_acyclic(self, job_id: str, depends_on) -> None:
        # Dependencies may reference jobs submitted later; cycle-check over known edges.
        edges = {jid: set(job.depends_on) for jid, job in self.jobs.items()}
        edges[job_id] = set(depends_on)
        seen: set[str] = set()
        stack: list[str] = []

        def visit(jid: str) -> None:
            if jid in stack:
                cycle = stack[stack.index(jid) :] + [jid]
                raise CyclicDependency(f"dependency cycle {' -> '.join(cycle)}")
            if jid in seen or jid not in edges:
                return
            stack.append(jid)
            for dep in sorted(edges[jid]):
                visit(dep)
            stack.pop()
            seen.add(jid)

        visit(job_id)

    def get_job(self, job_id: str) -> Job:
        job = self.jobs.get(job_id)
        if job is None:
            raise UnknownJob(f"no job {job_id!r}")
        return job

    def cancel_job(self, job_id: str, now: float = 0.0) -> None:
        job = self.get_job(job_id)
        fw = job.framework_id
        self.queues[fw] = [e for e in self.queues[fw] if e.unit_id != job_id]
        if job.task_id:
            self._release_task(job.task_id, now)
        del self.jobs[job_id]

    # -- queue plumbing ---------------------------------------------------------

    def _enqueue(self, framework_id: str, demand: ResourceVector, unit_id: str, now: float):
        self._queue_seq += 1
        self.queues[framework_id].append(
            QueueEntry(
                seq=self._queue_seq,
                framework_id=framework_id,
                demand=demand,
                unit_id=unit_id,
                enqueued_at=now,
            )
        )

    def pending_entries(self) -> list[QueueEntry]:
        return sorted(
            (e for fw in self.queues for e in self.queues[fw]), key=lambda e: e.seq
        )

    def _queued_count(self, framework_id: str, unit_id: str) -> int:
        return sum(1 for e in self.queues[framework_id] if e.unit_id == unit_id)

    # -- task lifecycle -----------------------------------------------------------

    def _release_task(self, task_id: str, now: float) -> None:
        task = self.tasks.pop(task_id, None)
        if task is None:
            return
        node = self.nodes.get(task.node_id)
        if node is not None:
            node.free = node.free + task.demand
            if not any(t.node_id == node.node_id for t in self.tasks.values()):
                node.idle_since = now

    def _fail_task(self, task, now: float) -> None:
        """Task lost to node failure/preemption: unit goes Failed and is requeued."""
        self._release_task(task.task_id, now)
        if self.frameworks.get(task.framework_id) == "service":
            service_id, _ = task.unit_id.rsplit("/", 1)
            service = self.services.get(service_id)
            if service is None:
                return
            for instance in service.instances:
                if instance.task_id == task.task_id:
                    instance.state = "Failed"
                    instance.task_id = None
            # reconcile_services tops the deficit back up next step
        else:
            job = self.jobs.get(task.unit_id)
            if job is None or job.state != "Running":
                return
            job.node_id = None
            job.task_id = None
            if job.attempts < job.max_attempts:
                job.state = "Runnable"
                self._enqueue(job.framework_id, job.demand, job.job_id, now)
            else:
                self._terminal_failure(job, now)

    def _terminal_failure(self, job, now: float) -> None:
        job.state = "Failed"
        job.finished_at = now
        self._cascade_failure(job.job_id, now)

    def _cascade_failure(self, failed_id: str, now: float) -> None:
        for other in self.jobs.values():
            if other.state in ("Done", "Failed"):
                continue
            if failed_id in other.depends_on:
                self.queues[other.framework_id] = [
                    e for e in self.queues[other.framework_id] if e.unit_id != other.job_id
                ]
                if other.task_id:
                    self._release_task(other.task_id, now)
                other.state = "Failed"
                other.finished_at = now
                self._cascade_failure(other.job_id, now)

    # -- step pipeline ---------------------------------------------------------

    def step(self, now: float) -> dict:
        self.step_index += 1
        self.reconcile_services(now)
        job_events = self.advance_jobs(now)
        placements = self.offer_round(now)
        record = {
            "step": self.step_index,
            "now": now,
            "placements": placements,
            "job_events": job_events,
        }
        self.trace.append(record)
        if len(self.trace) > TRACE_LIMIT:
            del self.trace[: len(self.trace) - TRACE_LIMIT]
        return record

    def reconcile_services(self, now: float) -> None:
        for service in self.services.values():
            # instances on dead/removed nodes have lost their task records
            for instance in service.instances:
                if instance.state in ("Starting", "Running"):
                    if instance.task_id not in self.tasks:
                        instance.state = "Failed"
                        instance.task_id = None
                    elif instance.state == "Starting" and instance.placed_step < self.step_index:
                        instance.state = "Running"
            active = service.active_instances()
            queued = self._queued_count(service.framework_id, service.service_id)
            deficit = service.replicas_target - len(active) - queued
            for _ in range(max(0, deficit)):
                self._enqueue(service.framework_id, service.demand, service.service_id, now)
            excess = len(active) - service.replicas_target
            if excess > 0:
                # shed newest first, preferring instances not yet Running
                by_preference = sorted(
                    active,
                    key=lambda i: (i.state == "Running", i.instance_id),
                    reverse=True,
                )
                victims = [i for i in by_preference if i.state == "Starting"][:excess]
                if len(victims) < excess:
                    running = [i for i in by_preference if i.state == "Running"]
                    victims += running[: excess - len(victims)]
                for instance in victims:
                    if instance.task_id:
                        self._release_task(instance.task_id, now)
                    instance.state = "Failed"
                    instance.task_id = None
            if queued > service.replicas_target - len(active):
                drop = queued - max(0, service.replicas_target - len(active))
                kept: list[QueueEntry] = []
                for entry in self.queues[service.framework_id]:
                    if entry.unit_id == service.service_id and drop > 0:
                        drop -= 1
                        continue
                    kept.append(entry)
                self.queues[service.framework_id] = kept

    def advance_jobs(self, now: float) -> list[dict]:
        events: list[dict] = []
        for job in sorted(self.jobs.values(), key=lambda j: j.job_id):
            if job.state == "Pending":
                deps = [self.jobs.get(d) for d in job.depends_on]
                if any(d is not None and d.state == "Failed" for d in deps):
                    job.state = "Failed"
                    job.finished_at = now
                    events.append({"job_id": job.job_id, "event": "failed_dependency"})
                    self._cascade_failure(job.job_id, now)
                elif all(d is not None and d.state == "Done" for d in deps):
                    job.state = "Runnable"
                    self._enqueue(job.framework_id, job.demand, job.job_id, now)
                    events.append({"job_id": job.job_id, "event": "runnable"})
            elif job.state == "Running" and now - job.started_at >= job.duration:
                self._release_task(job.task_id, now)
                job.node_id = None
                job.task_id = None
                if job.attempts in job.fail_attempts:
                    if job.attempts < job.max_attempts:
                        job.state = "Runnable"
                        self._enqueue(job.framework_id, job.demand, job.job_id, now)
                        events.append({"job_id": job.job_id, "event": "failed_retry"})
                    else:
                        self._terminal_failure(job, now)
                        events.append({"job_id": job.job_id, "event": "failed_terminal"})
                else:
                    job.state = "Done"
                    job.finished_at = now
                    events.append({"job_id": job.job_id, "event": "done"})
        return events

    def offer_round(self, now: float) -> list[dict]:
        placements: list[dict] = []
        while True:
            candidates = {fw for fw in self.frameworks if self.queues[fw]}
            placed = None
            while candidates:
                framework_id = self.policy.select(self._framework_views(candidates))
                placed = self._try_place_one(framework_id, now)
                if placed is not None:
                    placements.append(placed)
                    break
                candidates.discard(framework_id)
            if placed is None:
                return placements

    def _offer_order(self) -> list[Node]:
        return sorted(
            self.alive_nodes(),
            key=lambda n: (-n.free.cpu, -n.free.mem, -n.free.disk, n.node_id),
        )

    def _try_place_one(self, framework_id: str, now: float) -> dict | None:
        queue = self.queues[framework_id]
        nodes = self._offer_order()
        for index, entry in enumerate(queue):
            for node in nodes:
                if entry.demand.fits(node.free):
                    queue.pop(index)
                    return self._place(entry, node, now)
        return None

    def _place(self, entry: QueueEntry, node: Node, now: float) -> dict:
        self._task_counter += 1
        task_id = f"t-{self._task_counter:06d}"
        node.free = node.free - entry.demand
        node.idle_since = None
        unit_id = entry.unit_id
        if self.frameworks[entry.framework_id] == "service":
            service = self.services[entry.unit_id]
            service.instance_counter += 1
            instance = ServiceInstance(
                instance_id=f"i{service.instance_counter:03d}",
                state="Starting",
                node_id=node.node_id,
                task_id=task_id,
                placed_step=self.step_index,
            )
            service.instances.append(instance)
            unit_id = f"{service.service_id}/{instance.instance_id}"
        else:
            job = self.jobs[entry.unit_id]
            job.state = "Running"
            job.attempts += 1
            job.started_at = now
            job.node_id = node.node_id
            job.task_id = task_id
        self.tasks[task_id] = Task(
            task_id=task_id,
            framework_id=entry.framework_id,
            demand=entry.demand,
            node_id=node.node_id,
            unit_id=unit_id,
            started_at=now,
        )
        return {
            "task_id": task_id,
            "framework_id": entry.framework_id,
            "node_id": node.node_id,
            "unit_id": unit_id,
            "demand": entry.demand.to_payload(),
        }

    # -- invariants and views ----------------------------------------------------

    def verify_accounting(self) -> None:
        """Assert exact capacity safety; raises AssertionError on violation."""
        per_node: dict[str, ResourceVector] = {n: ResourceVector.zero() for n in self.nodes}
        for task in self.tasks.values():
            assert task.node_id in per_node, f"task {task.task_id} on missing node"
            per_node[task.node_id] = per_node[task.node_id] + task.demand
        for node_id, placed in per_node.items():
            node = self.nodes[node_id]
            assert node.free.nonnegative(), f"{node_id} free went negative"
            assert node.free.fits(node.total), f"{node_id} free exceeds total"
            assert node.total - node.free == placed, f"{node_id} placed+free != total"

    def idle_duration(self, node: Node, now: float) -> float:
        return 0.0 if node.idle_since is None else max(0.0, now - node.idle_since)

    def describe(self, now: float) -> dict:
        return {
            "now": now,
            "policy": self.policy.name,
            "total": self.cluster_total().to_payload(),
            "nodes": [self.nodes[n].to_payload() for n in sorted(self.nodes)],
            "frameworks": [
                {
                    "framework_id": fw,
                    "kind": self.frameworks[fw],
                    "allocation": self.allocation(fw).to_payload(),
                    "dominant_share": str(self.dominant_share(fw)),
                    "dominant_share_float": float(self.dominant_share(fw)),
                    "queue_length": len(self.queues[fw]),
                }
                for fw in sorted(self.frameworks)
            ],
            "queue": [e.to_payload() for e in self.pending_entries()],
            "services": [self.services[s].to_payload() for s in sorted(self.services)],
            "jobs": [self.jobs[j].to_payload() for j in sorted(self.jobs)],
            "tasks": [self.tasks[t].to_payload() for t in sorted(self.tasks)],
        }

    # -- persistence -----------------------------------------------------------

    def to_state(self) -> dict:
        return {
            "policy": self.policy.name,
            "frameworks": dict(sorted(self.frameworks.items())),
            "step_index": self.step_index,
            "nodes": [self.nodes[n].to_payload() for n in sorted(self.nodes)],
            "tasks": [self.tasks[t].to_payload() for t in sorted(self.tasks)],
            "queues": {fw: [e.to_payload() for e in q] for fw, q in self.queues.items()},
            "services": [self.services[s].to_payload() for s in sorted(self.services)],
            "jobs": [self.jobs[j].to_payload() for j in sorted(self.jobs)],
            "counters": {
                "node": self._node_counter,
                "task": self._task_counter,
                "service": self._service_counter,
                "job": self._job_counter,
                "seq": self._queue_seq,
            },
        }

    def restore(self, state: dict) -> None:
        self.policy = make_policy(state.get("policy", "drf"))
        self.frameworks = dict(state.get("frameworks", dict(BUILTIN_FRAMEWORKS)))
        self.step_index = int(state.get("step_index", 0))
        self.nodes = {}
        for payload in state.get("nodes", []):
            self.nodes[payload["node_id"]] = Node(
                node_id=payload["node_id"],
                total=ResourceVector.from_payload(payload["total"]),
                free=ResourceVector.from_payload(payload["free"]),
                attributes=dict(payload.get("attributes", {})),
                alive=payload.get("alive", True),
                created_at=payload.get("created_at", 0.0),
                idle_since=payload.get("idle_since"),
            )
        self.tasks = {}
        for payload in state.get("tasks", []):
            self.tasks[payload["task_id"]] = Task(
                task_id=payload["task_id"],
                framework_id=payload["framework_id"],
                demand=ResourceVector.from_payload(payload["demand"]),
                node_id=payload["node_id"],
                unit_id=payload["unit_id"],
                started_at=payload["started_at"],
            )
        self.queues = {fw: [] for fw in self.frameworks}
        for fw, entries in state.get("queues", {}).items():
            self.queues[fw] = [
                QueueEntry(
                    seq=e["seq"],
                    framework_id=e["framework_id"],
                    demand=ResourceVector.from_payload(e["demand"]),
                    unit_id=e["unit_id"],
                    enqueued_at=e["enqueued_at"],
                )
                for e in entries
            ]
        self.services = {}
        for payload in state.get("services", []):
            service = Service(
                service_id=payload["service_id"],
                demand=ResourceVector.from_payload(payload["demand"]),
                replicas_target=payload["replicas_target"],
                endpoint=payload["endpoint"],
                framework_id=payload.get("framework_id", "service"),
                labels=dict(payload.get("labels", {})),
                instance_counter=payload.get("instance_counter", 0),
            )
            service.instances = [
                ServiceInstance(
                    instance_id=i["instance_id"],
                    state=i["state"],
                    node_id=i.get("node_id"),
                    task_id=i.get("task_id"),
                    placed_step=i.get("placed_step", -1),
                )
                for i in payload.get("instances", [])
            ]
            self.services[service.service_id] = service
        self.jobs = {}
        for payload in state.get("jobs", []):
            self.jobs[payload["job_id"]] = Job(
                job_id=payload["job_id"],
                demand=ResourceVector.from_payload(payload["demand"]),
                depends_on=frozenset(payload.get("depends_on", [])),
                framework_id=payload.get("framework_id", "job"),
                state=payload["state"],
                attempts=payload.get("attempts", 0),
                max_attempts=payload.get("max_attempts", 3),
                duration=payload.get("duration", 0.0),
                fail_attempts=frozenset(payload.get("fail_attempts", [])),
                labels=dict(payload.get("labels", {})),
                started_at=payload.get("started_at"),
                finished_at=payload.get("finished_at"),
                node_id=payload.get("node_id"),
                task_id=payload.get("task_id"),
            )
        counters = state.get("counters", {})
        self._node_counter = counters.get("node", 0)
        self._task_counter = counters.get("task", 0)
        self._service_counter = counters.get("service", 0)
        self._job_counter = counters.get("job", 0)
        self._queue_seq = counters.get("seq", 0)
        self.trace = []
