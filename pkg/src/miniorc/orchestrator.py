"""Deployment engine: template intake, data-aware matchmaking, lifecycle drive.

Two execution paths share one state machine. Scenario A provisions virtual
infrastructure on simulated IaaS sites (including preemptible spot capacity);
scenario B lands long-running services and batch jobs on the elastic
scheduler cluster. Every matchmaking decision records the inputs it saw, so
any placement can be re-checked against them after the fact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from miniorc.broker import PlacementRequest, rank
from miniorc.catalog import MonitorSample, SiteDescriptor
from miniorc.datamgr import GIB, NoEligibleSite
from miniorc.errors import MiniorcError
from miniorc.resources import ResourceVector
from miniorc.sla import CLASS_SEMANTICS, SLAManager
from miniorc.tosca import ParseError, parse_template, validate
from miniorc.tosca.validation import effective_properties, resolve_order

DEPLOYMENT_STATES = (
    "CREATED",
    "VALIDATED",
    "MATCHED",
    "MIGRATING_DATA",
    "PROVISIONING",
    "CONFIGURING",
    "RUNNING",
    "SCALING",
    "DELETING",
    "DELETED",
    "FAILED",
)

# Legal edges of the lifecycle graph. FAILED counts as terminal once the
# retry budget is spent, but delete() stays available for cleanup.
LEGAL_TRANSITIONS: dict[str, frozenset] = {
    "CREATED": frozenset({"VALIDATED", "FAILED", "DELETING"}),
    "VALIDATED": frozenset({"MATCHED", "FAILED", "DELETING"}),
    "MATCHED": frozenset({"MIGRATING_DATA", "PROVISIONING", "FAILED", "DELETING"}),
    "MIGRATING_DATA": frozenset({"PROVISIONING", "FAILED", "DELETING"}),
    "PROVISIONING": frozenset({"CONFIGURING", "FAILED", "DELETING"}),
    "CONFIGURING": frozenset({"RUNNING", "FAILED", "DELETING"}),
    "RUNNING": frozenset({"SCALING", "FAILED", "DELETING"}),
    "SCALING": frozenset({"RUNNING", "FAILED", "DELETING"}),
    "FAILED": frozenset({"MATCHED", "DELETING"}),
    "DELETING": frozenset({"DELETED"}),
    "DELETED": frozenset(),
}

# Failure reasons the engine retries on its own; the rest need operator action.
RETRYABLE_REASONS = frozenset({"no_site", "provisioning", "capacity", "migration"})

INSTANCE_STATES = ("Booting", "Active", "Preempted", "Terminated")


class UnknownDeployment(MiniorcError):
    code = "UNKNOWN_DEPLOYMENT"


class IllegalTransition(MiniorcError):
    code = "ILLEGAL_TRANSITION"


class SLAViolation(MiniorcError):
    code = "SLA_VIOLATION"


class CapacityExhausted(MiniorcError):
    code = "CAPACITY_EXHAUSTED"


class ScenarioMismatch(MiniorcError):
    code = "SCENARIO_MISMATCH"


# -- simulated IaaS backend ----------------------------------------------------


@dataclass
class IaaSInstance:
    instance_id: str
    vector: ResourceVector
    spot: bool
    state: str  # Booting | Active | Preempted | Terminated
    deployment_id: str | None = None
    node_name: str | None = None
    boot_ready_at: float = 0.0

    def live(self) -> bool:
        return self.state in ("Booting", "Active")

    def to_payload(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "vector": self.vector.to_payload(),
            "spot": self.spot,
            "state": self.state,
            "deployment_id": self.deployment_id,
            "node_name": self.node_name,
            "boot_ready_at": self.boot_ready_at,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "IaaSInstance":
        return cls(
            instance_id=payload["instance_id"],
            vector=ResourceVector.from_payload(payload["vector"]),
            spot=payload["spot"],
            state=payload["state"],
            deployment_id=payload.get("deployment_id"),
            node_name=payload.get("node_name"),
            boot_ready_at=payload.get("boot_ready_at", 0.0),
        )


@dataclass(frozen=True)
class FailureEvent:
    """Scripted fault injected by the simulator clock.

    ``instance_id`` of None targets the lowest-id eligible instance; preempt
    only ever hits spot instances.
    """

    at: float
    action: str  # kill | preempt | degrade | recover
    instance_id: str | None = None

    def to_payload(self) -> dict:
        return {"at": self.at, "action": self.action, "instance_id": self.instance_id}

    @classmethod
    def from_payload(cls, payload: dict) -> "FailureEvent":
        return cls(
            at=payload["at"], action=payload["action"], instance_id=payload.get("instance_id")
        )


class SimulatedIaaSSite:
    """Instance pool behind one catalog site.

    On-demand launches must fit inside ``on_demand_quota``; spot launches may
    use the full capacity but are the ones preemption and scripted faults
    take down first. All accounting is exact.
    """

    def __init__(self, descriptor: SiteDescriptor, boot_delay: float = 0.0, failure_schedule=()):
        self.descriptor = descriptor
        self.site_id = descriptor.site_id
        self.boot_delay = float(boot_delay)
        self.instances: dict[str, IaaSInstance] = {}
        self.pending_events: list[FailureEvent] = sorted(
            failure_schedule, key=lambda e: (e.at, e.action, e.instance_id or "")
        )
        self.error_rate = 0.0
        self._instance_counter = 0

    @property
    def quota(self) -> ResourceVector:
        return self.descriptor.on_demand_quota or self.descriptor.capacity

    def live_instances(self) -> list[IaaSInstance]:
        return [self.instances[i] for i in sorted(self.instances) if self.instances[i].live()]

    def used(self) -> ResourceVector:
        total = ResourceVector.zero()
        for inst in self.instances.values():
            if inst.live():
                total = total + inst.vector
        return total

    def used_on_demand(self) -> ResourceVector:
        total = ResourceVector.zero()
        for inst in self.instances.values():
            if inst.live() and not inst.spot:
                total = total + inst.vector
        return total

    def free(self) -> ResourceVector:
        return self.descriptor.capacity - self.used()

    def can_fit(self, vector: ResourceVector, *, spot: bool) -> bool:
        if not (self.used() + vector).fits(self.descriptor.capacity):
            return False
        if not spot and not (self.used_on_demand() + vector).fits(self.quota):
            return False
        return True

    def quota_fits(self, vector: ResourceVector) -> bool:
        return (self.used_on_demand() + vector).fits(self.quota)

    def preemption_frees(self, vector: ResourceVector) -> bool:
        """Would evicting every spot instance make room for an on-demand ask?"""
        return (self.used_on_demand() + vector).fits(self.descriptor.capacity)

    def launch(
        self,
        vector: ResourceVector,
        *,
        spot: bool,
        now: float,
        deployment_id: str | None = None,
        node_name: str | None = None,
    ) -> IaaSInstance:
        if not self.can_fit(vector, spot=spot):
            pool = "capacity" if spot else "on-demand quota"
            raise CapacityExhausted(f"site {self.site_id}: {pool} cannot fit {vector}")
        self._instance_counter += 1
        ready_at = now + self.boot_delay
        inst = IaaSInstance(
            instance_id=f"vm-{self._instance_counter:04d}",
            vector=vector,
            spot=spot,
            state="Active" if ready_at <= now else "Booting",
            deployment_id=deployment_id,
            node_name=node_name,
            boot_ready_at=ready_at,
        )
        self.instances[inst.instance_id] = inst
        return inst

    def preempt_spot_for(self, vector: ResourceVector, now: float) -> list[str]:
        """Evict spot instances (ascending id) until the ask fits on-demand."""
        evicted: list[str] = []
        for inst in self.live_instances():
            if self.can_fit(vector, spot=False):
                break
            if inst.spot:
                inst.state = "Preempted"
                evicted.append(inst.instance_id)
        return evicted

    def terminate(self, instance_id: str) -> None:
        inst = self.instances.get(instance_id)
        if inst is not None and inst.live():
            inst.state = "Terminated"

    def tick(self, now: float) -> list[dict]:
        """Promote finished boots and apply scripted faults due by ``now``."""
        events: list[dict] = []
        for iid in sorted(self.instances):
            inst = self.instances[iid]
            if inst.state == "Booting" and now >= inst.boot_ready_at:
                inst.state = "Active"
                events.append({"site_id": self.site_id, "event": "booted", "instance_id": iid})
        while self.pending_events and self.pending_events[0].at <= now:
            event = self.pending_events.pop(0)
            applied = self._apply_event(event)
            events.append(
                {
                    "site_id": self.site_id,
                    "event": event.action,
                    "instance_id": applied,
                    "at": event.at,
                }
            )
        return events

    def _apply_event(self, event: FailureEvent) -> str | None:
        if event.action == "degrade":
            self.error_rate = 0.4
            return None
        if event.action == "recover":
            self.error_rate = 0.0
            return None
        candidates = [
            inst
            for inst in self.live_instances()
            if event.instance_id in (None, inst.instance_id)
            and (event.action != "preempt" or inst.spot)
        ]
        if not candidates:
            return None
        victim = candidates[0]
        victim.state = "Preempted" if event.action == "preempt" else "Terminated"
        return victim.instance_id

    def sample(self, now: float) -> MonitorSample:
        return MonitorSample(
            site_id=self.site_id, timestamp=now, free=self.free(), error_rate=self.error_rate
        )

    def verify_accounting(self) -> None:
        assert self.used().fits(self.descriptor.capacity), f"{self.site_id}: over capacity"
        assert self.used_on_demand().fits(self.quota), f"{self.site_id}: over on-demand quota"
        assert self.free().nonnegative(), f"{self.site_id}: negative free"

    def to_state(self) -> dict:
        return {
            "site_id": self.site_id,
            "boot_delay": self.boot_delay,
            "error_rate": self.error_rate,
            "instance_counter": self._instance_counter,
            "instances": [self.instances[i].to_payload() for i in sorted(self.instances)],
            "pending_events": [e.to_payload() for e in self.pending_events],
        }

    def restore(self, state: dict) -> None:
        self.boot_delay = state.get("boot_delay", 0.0)
        self.error_rate = state.get("error_rate", 0.0)
        self._instance_counter = int(state.get("instance_counter", 0))
        self.instances = {}
        for payload in state.get("instances", []):
            inst = IaaSInstance.from_payload(payload)
            self.instances[inst.instance_id] = inst
        self.pending_events = [
            FailureEvent.from_payload(p) for p in state.get("pending_events", [])
        ]


# -- deployments ----------------------------------------------------------------


@dataclass
class Placement:
    site_id: str
    asks: tuple  # of (node name, ResourceVector)
    sla_id: str | None
    sla_class: str
    data_plan: str  # none | colocate | migrate
    transfers: tuple = ()  # transfer job ids backing a migrate plan

    def total_ask(self) -> ResourceVector:
        total = ResourceVector.zero()
        for _, vector in self.asks:
            total = total + vector
        return total

    def to_payload(self) -> dict:
        return {
            "site_id": self.site_id,
            "asks": [[name, vector.to_payload()] for name, vector in self.asks],
            "sla_id": self.sla_id,
            "sla_class": self.sla_class,
            "data_plan": self.data_plan,
            "transfers": list(self.transfers),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Placement":
        return cls(
            site_id=payload["site_id"],
            asks=tuple(
                (name, ResourceVector.from_payload(vec)) for name, vec in payload["asks"]
            ),
            sla_id=payload.get("sla_id"),
            sla_class=payload["sla_class"],
            data_plan=payload["data_plan"],
            transfers=tuple(payload.get("transfers", [])),
        )


@dataclass
class Deployment:
    deployment_id: str
    owner: str
    template_text: str
    template: object  # TemplateDocument, or None when parsing failed
    scenario: str
    created_at: float
    owner_groups: tuple = ()
    state: str = "CREATED"
    placement: Placement | None = None
    endpoints: list = field(default_factory=list)  # dicts: name/address/credential
    history: list = field(default_factory=list)  # dicts: at/state/detail
    failure: str | None = None
    validation: dict | None = None
    retry_attempts: int = 0  # automatic rematch attempts after FAILED
    rematches: int = 0  # FAILED -> MATCHED transitions taken
    reprovisions: int = 0  # in-place instance relaunches (scenario A)
    blocked_cycles: int = 0  # consecutive exhausted scale-outs while pending (B)
    site_cooldowns: dict = field(default_factory=dict)  # site_id -> excluded until
    instances: dict = field(default_factory=dict)  # node name -> instance_id (A)
    services: dict = field(default_factory=dict)  # node name -> service_id (B)
    jobs: dict = field(default_factory=dict)  # node name -> job_id (B)
    configure_ready_at: float | None = None

    def record(self, at: float, state: str, detail: dict | None = None) -> None:
        self.history.append({"at": at, "state": state, "detail": detail or {}})

    def to_payload(self) -> dict:
        return {
            "deployment_id": self.deployment_id,
            "owner": self.owner,
            "scenario": self.scenario,
            "state": self.state,
            "failure": self.failure,
            "created_at": self.created_at,
            "placement": self.placement.to_payload() if self.placement else None,
            "endpoints": [dict(e) for e in self.endpoints],
            "validation": self.validation,
            "retry_attempts": self.retry_attempts,
            "rematches": self.rematches,
            "reprovisions": self.reprovisions,
            "instances": dict(sorted(self.instances.items())),
            "services": dict(sorted(self.services.items())),
            "jobs": dict(sorted(self.jobs.items())),
            "history": [dict(h) for h in self.history],
        }


def infer_scenario(doc, hint: str | None) -> str:
    if hint in ("A", "B"):
        return hint
    for node in doc.node_templates:
        if node.type in ("LongRunningService", "BatchJob"):
            return "B"
    return "A"


def _node_demand(props: dict) -> ResourceVector:
    return ResourceVector(props.get("cpu", 1), props.get("memory", 1), props.get("disk", 0))


class Orchestrator:
    """Drives deployments from template text to running resources and back."""

    def __init__(
        self,
        *,
        catalog,
        rules,
        slam,
        datamgr,
        cluster,
        iam,
        cluster_site_id: str | None = None,
        retry_limit: int = 3,
        site_cooldown: float = 300.0,
        configure_delay=0.0,
        capacity_patience: int = 3,
    ):
        self.catalog = catalog
        self.rules = rules
        self.slam = slam
        self.datamgr = datamgr
        self.cluster = cluster
        self.iam = iam
        self.cluster_site_id = cluster_site_id
        self.retry_limit = int(retry_limit)
        self.site_cooldown = float(site_cooldown)
        self.configure_delay = configure_delay  # scalar seconds, or {node type: seconds}
        self.capacity_patience = int(capacity_patience)
        self.iaas: dict[str, SimulatedIaaSSite] = {}
        self.deployments: dict[str, Deployment] = {}
        self._deployment_counter = 0

    # -- wiring ----------------------------------------------------------------

    def register_iaas(self, site: SimulatedIaaSSite) -> None:
        if site.site_id not in self.catalog:
            raise MiniorcError(
                f"site {site.site_id!r} is not in the catalog", code="UNKNOWN_SITE"
            )
        self.iaas[site.site_id] = site

    def push_monitor_samples(self, now: float) -> None:
        """Feed fresh free-capacity samples for every site this engine backs."""
        for site_id in sorted(self.iaas):
            self.catalog.ingest_metrics(self.iaas[site_id].sample(now))
        if self.cluster_site_id is not None and self.cluster_site_id in self.catalog:
            capacity = self.catalog.descriptor(self.cluster_site_id).capacity
            used = ResourceVector.zero()
            for node in self.cluster.nodes.values():
                used = used + (node.total - node.free)
            free = capacity - used
            if not free.nonnegative():
                free = ResourceVector.zero()
            self.catalog.ingest_metrics(
                MonitorSample(site_id=self.cluster_site_id, timestamp=now, free=free)
            )

    def get(self, deployment_id: str) -> Deployment:
        dep = self.deployments.get(deployment_id)
        if dep is None:
            raise UnknownDeployment(f"no deployment {deployment_id!r}")
        return dep

    def _transition(self, dep: Deployment, now: float, state: str, detail: dict | None = None):
        if state not in LEGAL_TRANSITIONS[dep.state]:
            raise IllegalTransition(f"{dep.deployment_id}: {dep.state} -> {state} is not legal")
        dep.state = state
        if state not in ("RUNNING", "SCALING"):
            dep.endpoints = []
        dep.record(now, state, detail)

    # -- intake -----------------------------------------------------------------

    def submit(
        self, template_text: str, token: str, now: float = 0.0, scenario_hint: str | None = None
    ) -> str:
        claims = self.iam.require(token, now)
        self._deployment_counter += 1
        dep = Deployment(
            deployment_id=f"dep-{self._deployment_counter:04d}",
            owner=claims.account_id,
            owner_groups=tuple(claims.groups),
            template_text=template_text,
            template=None,
            scenario="A",
            created_at=now,
        )
        self.deployments[dep.deployment_id] = dep
        dep.record(now, "CREATED", {"owner": dep.owner})
        try:
            doc = parse_template(template_text)
        except ParseError as exc:
            dep.validation = {
                "deployable": False,
                "errors": [{"code": exc.code, "message": exc.message}],
                "warnings": [],
            }
            dep.failure = "validation"
            self._transition(dep, now, "FAILED", {"reason": "validation", "parse_error": True})
            return dep.deployment_id
        dep.template = doc
        report = validate(doc)
        dep.validation = report.to_payload()
        dep.scenario = infer_scenario(doc, scenario_hint or doc.policy("scenario_hint"))
        if report.deployable:
            self._transition(
                dep, now, "VALIDATED", {"warnings": len(report.warnings), "scenario": dep.scenario}
            )
        else:
            dep.failure = "validation"
            self._transition(
                dep, now, "FAILED", {"reason": "validation", "errors": len(report.errors)}
            )
        return dep.deployment_id

    # -- matchmaking ---------------------------------------------------------------

    def _required_capabilities(self, doc) -> set[str]:
        caps: set[str] = set()
        for node in doc.node_templates:
            props = effective_properties(node, doc)
            if props.get("gpu") is True:
                caps.add("gpu")
            if props.get("infiniband") is True:
                caps.add("infiniband")
        return caps

    def _resource_asks(self, dep: Deployment) -> list[tuple[str, ResourceVector]]:
        doc = dep.template
        asks: list[tuple[str, ResourceVector]] = []
        for name in resolve_order(doc):
            node = doc.node(name)
            props = effective_properties(node, doc)
            if dep.scenario == "A":
                if node.type == "Compute":
                    asks.append((name, _node_demand(props)))
            else:
                if node.type == "LongRunningService":
                    asks.append((name, _node_demand(props).scale(int(props.get("replicas", 1)))))
                elif node.type == "BatchJob":
                    asks.append((name, _node_demand(props)))
        return asks

    def _required_datasets(self, dep: Deployment) -> list[str]:
        doc = dep.template
        seen: list[str] = []
        for node in doc.node_templates:
            if node.type != "DataRequirement":
                continue
            dataset_id = effective_properties(node, doc).get("dataset")
            if dataset_id and dataset_id not in seen:
                seen.append(dataset_id)
        return seen

    def matchmake(self, deployment_id: str, now: float) -> Placement:
        dep = self.get(deployment_id)
        if dep.state not in ("VALIDATED", "FAILED") or dep.template is None:
            raise IllegalTransition(f"{dep.deployment_id}: cannot matchmake from {dep.state}")
        if dep.state == "FAILED" and dep.rematches >= self.retry_limit:
            raise IllegalTransition(f"{dep.deployment_id}: retry budget spent")

        doc = dep.template
        asks = self._resource_asks(dep)
        total_ask = ResourceVector.zero()
        for _, vector in asks:
            total_ask = total_ask + vector
        required_caps = self._required_capabilities(doc)
        datasets = self._required_datasets(dep)

        # Input 1: current site states as the catalog reports them.
        snapshot = self.catalog.snapshot(now)
        by_site = {state.site_id: state for state in snapshot}

        # Input 4: replica locations for every required dataset.
        replica_map: dict[str, list] = {}
        complete: dict[str, list[str]] = {}
        for dataset_id in datasets:
            replica_map[dataset_id] = [r.to_payload() for r in self.datamgr.locate(dataset_id)]
            complete[dataset_id] = self.datamgr.complete_sites(dataset_id)
        sourceless = sorted(ds for ds in datasets if not complete[ds])
        colocated_sites = None
        if datasets:
            colocated_sites = set.intersection(*(set(complete[ds]) for ds in datasets))

        # Input 2: the owner's ruleset ranks the snapshot, data locations included.
        ruleset = self.rules.resolve(dep.owner, dep.owner_groups)
        request = PlacementRequest(
            account_id=dep.owner, data_sites=frozenset(colocated_sites or ())
        )
        ranking = rank(snapshot, request, ruleset)

        # Input 3: active SLA constraints for the owner.
        qos = self.slam.qos_of(dep.owner, now)
        wanted_class = doc.policy("sla_class")

        inputs_detail = {
            "snapshot": [state.to_payload() for state in snapshot],
            "ranking": ranking.to_payload(),
            "sla": {"site_classes": dict(sorted(qos.site_classes.items()))},
            "replicas": replica_map,
            "required_capabilities": sorted(required_caps),
            "total_ask": total_ask.to_payload(),
        }

        rejections: list[list] = []
        eligible: list[tuple[str, object]] = []  # (site_id, SLARecord)
        if sourceless:
            rejections.append(["*", f"datasets without a complete replica: {sourceless}"])
        else:
            for site_id in ranking.site_ids():
                state = by_site[site_id]
                record, reason = self._site_eligibility(
                    dep, site_id, state, required_caps, total_ask, wanted_class, datasets,
                    complete, now,
                )
                if reason is None:
                    eligible.append((site_id, record))
                else:
                    rejections.append([site_id, reason])
        inputs_detail["rejections"] = rejections

        if not eligible:
            # A site that cleared every gate before the SLA check makes the
            # failure an SLA problem, not a missing-site problem.
            sla_blocking = any(reason.startswith("sla") for _, reason in rejections)
            dep.failure = "sla" if sla_blocking else "no_site"
            error: MiniorcError
            if dep.failure == "sla":
                error = SLAViolation(f"{dep.deployment_id}: every candidate site fails the SLA")
            else:
                error = NoEligibleSite(f"{dep.deployment_id}: no site passes matchmaking")
            if dep.state == "VALIDATED":
                self._transition(
                    dep, now, "FAILED", {"reason": dep.failure, "inputs": inputs_detail}
                )
            else:
                dep.record(now, "FAILED", {"reason": dep.failure, "inputs": inputs_detail})
            raise error

        locality = doc.policy("locality") or "prefer_data"
        chosen_site, chosen_record = eligible[0]
        data_plan = "none"
        if datasets:
            holders = [item for item in eligible if item[0] in (colocated_sites or set())]
            if locality == "prefer_data" and holders:
                chosen_site, chosen_record = holders[0]
                data_plan = "colocate"
            elif chosen_site in (colocated_sites or set()):
                data_plan = "colocate"
            else:
                data_plan = "migrate"

        transfers: list[str] = []
        migration_detail: list[dict] = []
        if data_plan == "migrate":
            for dataset_id in datasets:
                if chosen_site in complete[dataset_id]:
                    continue
                src = min(complete[dataset_id])
                job = self.datamgr.schedule_transfer(dataset_id, src, chosen_site, now=now)
                transfers.append(job.job_id)
                link = self.datamgr.link_for(src, chosen_site)
                migration_detail.append(
                    {
                        "transfer": job.job_id,
                        "dataset": dataset_id,
                        "src": src,
                        "dst": chosen_site,
                        "estimated_seconds": float(
                            Fraction(job.total_bytes) / link.throughput(1)
                        ),
                    }
                )

        inputs_detail["fit_free"] = self._fit_free(
            chosen_record, chosen_site, by_site[chosen_site]
        ).to_payload()
        inputs_detail["sla_check"] = {
            "record": chosen_record.to_payload(),
            "cores": float(total_ask.cpu),
            "storage_gib": self._storage_need_gib(chosen_site, total_ask, datasets, complete),
        }
        placement = Placement(
            site_id=chosen_site,
            asks=tuple(asks),
            sla_id=chosen_record.sla_id if chosen_record else None,
            sla_class=chosen_record.sla_class if chosen_record else "Bronze",
            data_plan=data_plan,
            transfers=tuple(transfers),
        )
        dep.placement = placement
        dep.failure = None
        detail = {
            "inputs": inputs_detail,
            "placement": placement.to_payload(),
            "migration": migration_detail,
        }
        if dep.state == "FAILED":
            dep.rematches += 1
        self._transition(dep, now, "MATCHED", detail)
        if data_plan == "migrate":
            self._transition(dep, now, "MIGRATING_DATA", {"transfers": transfers})
        return placement

    def _site_eligibility(
        self, dep, site_id, state, required_caps, total_ask, wanted_class, datasets,
        complete, now,
    ):
        """(SLARecord, None) when the site can host the deployment, else (None, why)."""
        until = dep.site_cooldowns.get(site_id)
        if until is not None and now < until:
            return None, "cooldown"
        if dep.scenario == "A" and site_id not in self.iaas:
            return None, "no infrastructure backend"
        if dep.scenario == "B" and site_id != self.cluster_site_id:
            return None, "not the managed cluster"
        if state.health == "Unhealthy":
            return None, "unhealthy"
        missing = required_caps - set(state.descriptor.capabilities)
        if missing:
            return None, f"missing capabilities {sorted(missing)}"
        record = self.slam.active_for(dep.owner, site_id, now)
        if record is None:
            return None, "no active sla"
        if wanted_class is not None and record.sla_class != wanted_class:
            return None, f"sla class {record.sla_class} != requested {wanted_class}"
        storage_gib = self._storage_need_gib(site_id, total_ask, datasets, complete)
        violation = SLAManager.check(
            record, cores=float(total_ask.cpu), storage=storage_gib, now=now
        )
        if violation is not None:
            return None, f"sla violation: {violation.bound}"
        # The managed cluster is elastic; its admission is supervised at runtime.
        if dep.scenario == "A" and not total_ask.fits(self._fit_free(record, site_id, state)):
            return None, "insufficient free capacity"
        return record, None

    def _storage_need_gib(self, site_id, total_ask, datasets, complete) -> float:
        """Disk asks plus bytes of every dataset a migrate plan would add here."""
        storage_gib = float(total_ask.disk)
        for dataset_id in datasets:
            if site_id not in complete.get(dataset_id, ()):
                storage_gib += float(
                    Fraction(self.datamgr.get_dataset(dataset_id).total_size()) / GIB
                )
        return storage_gib

    def _fit_free(self, record, site_id, state) -> ResourceVector:
        """Capacity the fit check runs against, by SLA class.

        Preempting classes can reclaim whatever the on-demand pool has left of
        its quota; spot-eligible classes may overflow into global free space;
        everyone else is bounded by both the monitored free and the quota.
        """
        free = state.free()
        if site_id not in self.iaas:
            return free
        backend = self.iaas[site_id]
        semantics = CLASS_SEMANTICS[record.sla_class]
        od_room = backend.quota - backend.used_on_demand()
        if semantics["preempt_spot"]:
            return od_room
        if semantics["spot_eligible"]:
            return free
        return ResourceVector(
            min(free.cpu, od_room.cpu), min(free.mem, od_room.mem), min(free.disk, od_room.disk)
        )

    # -- scenario A: virtual infrastructure ----------------------------------------

    def _configure_delay_for(self, dep: Deployment) -> float:
        if not isinstance(self.configure_delay, dict):
            return float(self.configure_delay)
        worst = 0.0
        for node in dep.template.node_templates:
            worst = max(worst, float(self.configure_delay.get(node.type, 0.0)))
        return worst

    def _launch_instance(self, dep, site, node_name, vector, now) -> IaaSInstance:
        semantics = CLASS_SEMANTICS[dep.placement.sla_class]
        spot_ok = semantics["spot_eligible"] and "spot_instances" in set(
            site.descriptor.capabilities
        )
        if site.can_fit(vector, spot=False):
            return site.launch(
                vector, spot=False, now=now, deployment_id=dep.deployment_id, node_name=node_name
            )
        if spot_ok and site.can_fit(vector, spot=True):
            return site.launch(
                vector, spot=True, now=now, deployment_id=dep.deployment_id, node_name=node_name
            )
        if (
            semantics["preempt_spot"]
            and site.quota_fits(vector)
            and site.preemption_frees(vector)
        ):
            evicted = site.preempt_spot_for(vector, now)
            dep.record(now, dep.state, {"preempted_spot": evicted, "for_node": node_name})
            return site.launch(
                vector, spot=False, now=now, deployment_id=dep.deployment_id, node_name=node_name
            )
        raise CapacityExhausted(f"site {site.site_id}: no room for {node_name} {vector}")

    def execute_scenario_a(self, deployment_id: str, now: float) -> list[dict]:
        dep = self.get(deployment_id)
        if dep.scenario != "A":
            raise ScenarioMismatch(f"{deployment_id} is a scenario {dep.scenario} deployment")
        self._require_ready_to_provision(dep)
        site = self.iaas[dep.placement.site_id]
        self._transition(dep, now, "PROVISIONING", {"site": site.site_id})
        try:
            for node_name, vector in dep.placement.asks:
                inst = self._launch_instance(dep, site, node_name, vector, now)
                dep.instances[node_name] = inst.instance_id
        except CapacityExhausted as exc:
            self._fail(dep, "provisioning", now, {"error": exc.message})
            raise
        self._poll_scenario_a(dep, now)
        return dep.endpoints

    def _require_ready_to_provision(self, dep: Deployment) -> None:
        if dep.state == "MATCHED":
            return
        if dep.state == "MIGRATING_DATA":
            pending = [
                job_id
                for job_id in dep.placement.transfers
                if self.datamgr.get_transfer(job_id).state != "Done"
            ]
            if pending:
                raise IllegalTransition(
                    f"{dep.deployment_id}: transfers still running: {pending}"
                )
            return
        raise IllegalTransition(f"{dep.deployment_id}: cannot provision from {dep.state}")

    def _poll_scenario_a(self, dep: Deployment, now: float) -> None:
        site = self.iaas[dep.placement.site_id]
        states = [site.instances[iid].state for iid in dep.instances.values()]
        if dep.state == "PROVISIONING" and all(s == "Active" for s in states):
            dep.configure_ready_at = now + self._configure_delay_for(dep)
            self._transition(dep, now, "CONFIGURING", {"instances": len(states)})
        if (
            dep.state == "CONFIGURING"
            and all(s == "Active" for s in states)
            and now >= (dep.configure_ready_at or 0.0)
        ):
            endpoints = []
            for node_name in sorted(dep.instances):
                credential = self.iam.issue_credential(dep.owner, "shell_credential", now)
                endpoints.append(
                    {
                        "name": node_name,
                        "address": f"ssh://{site.site_id}/{dep.deployment_id}/{node_name}",
                        "credential": credential,
                    }
                )
            self._transition(dep, now, "RUNNING", {"endpoints": len(endpoints)})
            dep.endpoints = endpoints

    def _reconcile_instances(self, dep: Deployment, now: float) -> None:
        site = self.iaas[dep.placement.site_id]
        for node_name in sorted(dep.instances):
            inst = site.instances[dep.instances[node_name]]
            if inst.live():
                continue
            if dep.reprovisions >= self.retry_limit:
                self._fail(
                    dep, "instance_failure", now, {"node": node_name, "lost": inst.instance_id}
                )
                return
            dep.reprovisions += 1
            vector = dict(dep.placement.asks)[node_name]
            try:
                replacement = self._launch_instance(dep, site, node_name, vector, now)
            except CapacityExhausted as exc:
                self._fail(dep, "provisioning", now, {"error": exc.message})
                return
            dep.instances[node_name] = replacement.instance_id
            dep.record(
                now,
                dep.state,
                {
                    "reprovisioned": node_name,
                    "lost": inst.instance_id,
                    "instance": replacement.instance_id,
                },
            )

    # -- scenario B: managed services and jobs --------------------------------------

    def execute_scenario_b(self, deployment_id: str, now: float) -> list[dict]:
        dep = self.get(deployment_id)
        if dep.scenario != "B":
            raise ScenarioMismatch(f"{deployment_id} is a scenario {dep.scenario} deployment")
        self._require_ready_to_provision(dep)
        doc = dep.template
        self._transition(dep, now, "PROVISIONING", {"site": dep.placement.site_id})
        for name in resolve_order(doc):
            node = doc.node(name)
            props = effective_properties(node, doc)
            labels = {"deployment": dep.deployment_id, "node": name}
            if node.type == "LongRunningService":
                address = f"http://{dep.placement.site_id}/{dep.deployment_id}/{name}"
                dep.services[name] = self.cluster.submit_service(
                    _node_demand(props),
                    int(props.get("replicas", 1)),
                    endpoint=address,
                    labels=labels,
                )
            elif node.type == "BatchJob":
                failures = int(props.get("simulate_failures", 0))
                depends = [
                    dep.jobs[req.target] for req in node.requirements if req.target in dep.jobs
                ]
                dep.jobs[name] = self.cluster.submit_job(
                    _node_demand(props),
                    depends_on=depends,
                    duration=float(props.get("duration", 0.0)),
                    max_attempts=int(props.get("max_attempts", 3)),
                    fail_attempts=tuple(range(1, failures + 1)),
                    labels=labels,
                )
        self._poll_scenario_b(dep, now)
        return dep.endpoints

    def _units_ready(self, dep: Deployment) -> tuple[bool, str | None]:
        """(ready, failed job name): services at target and every job Done."""
        for name in sorted(dep.services):
            service = self.cluster.services.get(dep.services[name])
            if service is None or service.running_count() < service.replicas_target:
                return False, None
        for name in sorted(dep.jobs):
            job = self.cluster.jobs.get(dep.jobs[name])
            if job is None or job.state == "Failed":
                return False, name
            if job.state != "Done":
                return False, None
        return True, None

    def _poll_scenario_b(self, dep: Deployment, now: float) -> None:
        ready, failed_job = self._units_ready(dep)
        if failed_job is not None:
            self._fail(dep, "instance_failure", now, {"job": failed_job})
            return
        if dep.state == "PROVISIONING" and ready:
            dep.configure_ready_at = now + self._configure_delay_for(dep)
            self._transition(dep, now, "CONFIGURING", {"units": "ready"})
        if dep.state == "CONFIGURING" and ready and now >= (dep.configure_ready_at or 0.0):
            endpoints = []
            for name in sorted(dep.services):
                service = self.cluster.services[dep.services[name]]
                credential = self.iam.issue_credential(dep.owner, "shell_credential", now)
                endpoints.append(
                    {"name": name, "address": service.endpoint, "credential": credential}
                )
            self._transition(dep, now, "RUNNING", {"endpoints": len(endpoints)})
            dep.endpoints = endpoints
        elif dep.state == "SCALING" and ready:
            self._transition(dep, now, "RUNNING", {"scaled": True})
            self._refresh_endpoints(dep, now)

    def _refresh_endpoints(self, dep: Deployment, now: float) -> None:
        endpoints = []
        for name in sorted(dep.services):
            service = self.cluster.services[dep.services[name]]
            credential = self.iam.issue_credential(dep.owner, "shell_credential", now)
            endpoints.append(
                {"name": name, "address": service.endpoint, "credential": credential}
            )
        dep.endpoints = endpoints

    def scale(self, deployment_id: str, node_name: str, replicas: int, now: float) -> Deployment:
        dep = self.get(deployment_id)
        if dep.scenario != "B":
            raise ScenarioMismatch("only managed-service deployments scale")
        if dep.state not in ("RUNNING", "SCALING"):
            raise IllegalTransition(f"{deployment_id}: cannot scale from {dep.state}")
        service_id = dep.services.get(node_name)
        if service_id is None:
            raise MiniorcError(
                f"{deployment_id} has no service node {node_name!r}", code="UNKNOWN_SERVICE"
            )
        self.cluster.scale_service(service_id, int(replicas))
        if dep.state == "RUNNING":
            self._transition(dep, now, "SCALING", {"node": node_name, "replicas": int(replicas)})
        else:
            dep.record(now, "SCALING", {"node": node_name, "replicas": int(replicas)})
        return dep

    def notice_scaling(self, decision, now: float) -> None:
        """Feed autoscaler outcomes; pending deployments time out on dead ends.

        A blocked decision with no action means the cluster cannot grow any
        further; after ``capacity_patience`` consecutive such cycles a still
        pending scenario-B deployment fails with reason ``capacity``.
        """
        exhausted = bool(getattr(decision, "blocked", False)) and decision.action is None
        for dep_id in sorted(self.deployments):
            dep = self.deployments[dep_id]
            if dep.scenario != "B" or dep.state not in ("PROVISIONING", "CONFIGURING"):
                continue
            ready, _ = self._units_ready(dep)
            if ready:
                dep.blocked_cycles = 0
                continue
            if exhausted:
                dep.blocked_cycles += 1
                if dep.blocked_cycles >= self.capacity_patience:
                    self._fail(dep, "capacity", now, {"blocked_cycles": dep.blocked_cycles})
            else:
                dep.blocked_cycles = 0

    # -- failure, supervision, deletion ----------------------------------------------

    def _teardown(self, dep: Deployment, now: float) -> None:
        if dep.placement is not None and dep.placement.site_id in self.iaas:
            site = self.iaas[dep.placement.site_id]
            for instance_id in dep.instances.values():
                site.terminate(instance_id)
        dep.instances = {}
        for service_id in dep.services.values():
            if service_id in self.cluster.services:
                self.cluster.cancel_service(service_id, now=now)
        dep.services = {}
        for job_id in dep.jobs.values():
            if job_id in self.cluster.jobs:
                self.cluster.cancel_job(job_id, now=now)
        dep.jobs = {}

    def _fail(self, dep: Deployment, reason: str, now: float, detail: dict | None = None):
        self._teardown(dep, now)
        if reason in ("provisioning", "capacity", "instance_failure", "migration"):
            if dep.placement is not None:
                dep.site_cooldowns[dep.placement.site_id] = now + self.site_cooldown
        dep.failure = reason
        dep.blocked_cycles = 0
        payload = {"reason": reason}
        payload.update(detail or {})
        self._transition(dep, now, "FAILED", payload)

    def delete(self, deployment_id: str, now: float) -> Deployment:
        dep = self.get(deployment_id)
        if dep.state == "DELETED":
            return dep
        if dep.state != "DELETING":
            self._transition(dep, now, "DELETING", {})
        self._teardown(dep, now)
        if dep.placement is not None:
            # Replicas a migrate plan created stay behind; only movement stops.
            for job_id in dep.placement.transfers:
                self.datamgr.cancel_transfer(job_id, now=now)
        self._transition(dep, now, "DELETED", {})
        return dep

    def tick_sites(self, now: float) -> list[dict]:
        events: list[dict] = []
        for site_id in sorted(self.iaas):
            events.extend(self.iaas[site_id].tick(now))
        return events

    def supervise(self, now: float) -> list[dict]:
        """One reconciliation pass: boots, faults, fresh samples, promotions."""
        events = self.tick_sites(now)
        self.push_monitor_samples(now)
        changes: list[dict] = []
        for dep_id in sorted(self.deployments):
            dep = self.deployments[dep_id]
            before = len(dep.history)
            self._pump(dep, now)
            for entry in dep.history[before:]:
                changes.append(
                    {"deployment_id": dep_id, "state": entry["state"], "at": entry["at"]}
                )
        return events + changes

    def _pump(self, dep: Deployment, now: float) -> None:
        # A deployment may cross several phases in one pass when delays are zero.
        for _ in range(8):
            state = dep.state
            self._pump_once(dep, now)
            if dep.state == state:
                return

    def _pump_once(self, dep: Deployment, now: float) -> None:
        if dep.state == "FAILED":
            if (
                dep.failure in RETRYABLE_REASONS
                and dep.retry_attempts < self.retry_limit
                and dep.rematches < self.retry_limit
            ):
                dep.retry_attempts += 1
                try:
                    self.matchmake(dep.deployment_id, now)
                except (NoEligibleSite, SLAViolation):
                    pass
            return
        if dep.state == "VALIDATED":
            try:
                self.matchmake(dep.deployment_id, now)
            except (NoEligibleSite, SLAViolation):
                pass
            return
        if dep.state == "MIGRATING_DATA":
            states = {
                job_id: self.datamgr.get_transfer(job_id).state
                for job_id in dep.placement.transfers
            }
            if any(s == "Failed" for s in states.values()):
                self._fail(dep, "migration", now, {"transfers": states})
            elif all(s == "Done" for s in states.values()):
                self._execute(dep, now)
            return
        if dep.state == "MATCHED":
            self._execute(dep, now)
            return
        if dep.state in ("PROVISIONING", "CONFIGURING", "RUNNING", "SCALING"):
            if dep.scenario == "A":
                self._reconcile_instances(dep, now)
                if dep.state in ("PROVISIONING", "CONFIGURING"):
                    self._poll_scenario_a(dep, now)
            else:
                self._poll_scenario_b(dep, now)

    def _execute(self, dep: Deployment, now: float) -> None:
        try:
            if dep.scenario == "A":
                self.execute_scenario_a(dep.deployment_id, now)
            else:
                self.execute_scenario_b(dep.deployment_id, now)
        except CapacityExhausted:
            pass  # _fail already recorded the transition

    def verify_accounting(self) -> None:
        for site_id in sorted(self.iaas):
            self.iaas[site_id].verify_accounting()

    # -- persistence ------------------------------------------------------------------

    def to_state(self) -> dict:
        deployments = []
        for dep_id in sorted(self.deployments):
            dep = self.deployments[dep_id]
            deployments.append(
                {
                    "deployment_id": dep.deployment_id,
                    "owner": dep.owner,
                    "owner_groups": list(dep.owner_groups),
                    "template_text": dep.template_text,
                    "scenario": dep.scenario,
                    "state": dep.state,
                    "created_at": dep.created_at,
                    "placement": dep.placement.to_payload() if dep.placement else None,
                    "endpoints": [dict(e) for e in dep.endpoints],
                    "history": [dict(h) for h in dep.history],
                    "failure": dep.failure,
                    "validation": dep.validation,
                    "retry_attempts": dep.retry_attempts,
                    "rematches": dep.rematches,
                    "reprovisions": dep.reprovisions,
                    "blocked_cycles": dep.blocked_cycles,
                    "site_cooldowns": dict(sorted(dep.site_cooldowns.items())),
                    "instances": dict(sorted(dep.instances.items())),
                    "services": dict(sorted(dep.services.items())),
                    "jobs": dict(sorted(dep.jobs.items())),
                    "configure_ready_at": dep.configure_ready_at,
                }
            )
        return {
            "deployment_counter": self._deployment_counter,
            "deployments": deployments,
            "iaas": [self.iaas[s].to_state() for s in sorted(self.iaas)],
        }

    def restore(self, state: dict) -> None:
        self._deployment_counter = int(state.get("deployment_counter", 0))
        self.deployments = {}
        for payload in state.get("deployments", []):
            try:
                template = parse_template(payload["template_text"])
            except ParseError:
                template = None
            dep = Deployment(
                deployment_id=payload["deployment_id"],
                owner=payload["owner"],
                owner_groups=tuple(payload.get("owner_groups", ())),
                template_text=payload["template_text"],
                template=template,
                scenario=payload["scenario"],
                created_at=payload["created_at"],
                state=payload["state"],
                placement=(
                    Placement.from_payload(payload["placement"])
                    if payload.get("placement")
                    else None
                ),
                endpoints=[dict(e) for e in payload.get("endpoints", [])],
                history=[dict(h) for h in payload.get("history", [])],
                failure=payload.get("failure"),
                validation=payload.get("validation"),
                retry_attempts=int(payload.get("retry_attempts", 0)),
                rematches=int(payload.get("rematches", 0)),
                reprovisions=int(payload.get("reprovisions", 0)),
                blocked_cycles=int(payload.get("blocked_cycles", 0)),
                site_cooldowns=dict(payload.get("site_cooldowns", {})),
                instances=dict(payload.get("instances", {})),
                services=dict(payload.get("services", {})),
                jobs=dict(payload.get("jobs", {})),
                configure_ready_at=payload.get("configure_ready_at"),
            )
            self.deployments[dep.deployment_id] = dep
        for site_state in state.get("iaas", []):
            site = self.iaas.get(site_state["site_id"])
            if site is not None:
                site.restore(site_state)
