"""Platform facade: one object wiring every module behind a command journal.

All mutations enter through command(), which appends the request to the
journal before applying it; replaying the journal from empty therefore
rebuilds the exact same state, including the outcome of commands that
failed. Reads go straight to the modules under the same lock.

The logical clock only moves through the ``advance`` command, which runs one
scheduling cycle in a fixed order: cluster step, autoscaler, transfer ticks,
deployment supervision. Identical command scripts yield byte-identical
journals.
"""

from __future__ import annotations

import threading
from fractions import Fraction

from miniorc.autoscaler import Autoscaler, ProvisioningFailed, ScalingPolicy
from miniorc.broker import PlacementRequest, RuleStore, rank
from miniorc.catalog import Catalog, MonitorSample, SiteDescriptor
from miniorc.clock import LogicalClock
from miniorc.cluster import Cluster
from miniorc.config import Config, load_config
from miniorc.datamgr import DataManager, Link
from miniorc.errors import MiniorcError
from miniorc.iam import ExternalIdentity, IdentityService
from miniorc.journal import Journal
from miniorc.orchestrator import Orchestrator, SimulatedIaaSSite, FailureEvent
from miniorc.resources import ResourceVector
from miniorc.sla import SLAManager

EVENT_LIMIT = 10_000


def _vector(data) -> ResourceVector:
    if isinstance(data, ResourceVector):
        return data
    return ResourceVector(data.get("cpu", 0), data.get("mem", 0), data.get("disk", 0))


def _link(data: dict) -> Link:
    capacity = data.get("capacity")
    return Link(
        rate=Fraction(data.get("rate", 10_000_000)),
        capacity=None if capacity is None else Fraction(capacity),
    )


class Platform:
    def __init__(self, config: Config | None = None, journal_dir: str | None = None):
        self.config = config or load_config()
        self._lock = threading.RLock()
        self._event_cond = threading.Condition(self._lock)
        self.events: list[dict] = []
        self._event_counter = 0
        self.journal = Journal(
            journal_dir or self.config.get("journal.dir"),
            snapshot_every=self.config.get("journal.snapshot_every", 1000),
        )
        self._build_modules()
        self._replaying = False
        self._recover()

    # -- construction and recovery ----------------------------------------

    def _build_modules(self) -> None:
        cfg = self.config
        self.clock = LogicalClock(
            mode=cfg.get("clock.mode", "manual"), start=cfg.get("clock.start", 0.0)
        )
        self.catalog = Catalog()
        self.rules = RuleStore()
        self.slam = SLAManager(self.catalog)
        pairs = {
            (p["src"], p["dst"]): _link(p) for p in cfg.get("links.pairs", [])
        }
        self.datamgr = DataManager(
            self.catalog,
            window_ticks=cfg.get("transfers.window_ticks", 5),
            initial_streams=cfg.get("transfers.initial_streams", 2),
            max_streams=cfg.get("transfers.max_streams", 32),
            default_link=_link(cfg.get("links.default", {})),
            link_pairs=pairs,
        )
        self.cluster = Cluster(policy=cfg.get("scheduler.policy", "drf"))
        self.iam = IdentityService(
            secret=cfg.get("iam.secret", "miniorc-dev-secret"),
            admin_group=cfg.get("iam.admin_group", "admin"),
        )
        self.autoscaler = Autoscaler(
            ScalingPolicy(
                min_nodes=cfg.get("autoscaler.min_nodes", 1),
                max_nodes=cfg.get("autoscaler.max_nodes", 10),
                scaleout_delay=cfg.get("autoscaler.scaleout_delay", 30.0),
                idle_timeout=cfg.get("autoscaler.idle_timeout", 120.0),
                node_template=_vector(cfg.get("autoscaler.node_template", {})),
            )
        )
        self.orchestrator = Orchestrator(
            catalog=self.catalog,
            rules=self.rules,
            slam=self.slam,
            datamgr=self.datamgr,
            cluster=self.cluster,
            iam=self.iam,
            cluster_site_id=cfg.get("orchestrator.cluster_site"),
            retry_limit=cfg.get("orchestrator.retry_limit", 3),
            site_cooldown=cfg.get("orchestrator.site_cooldown", 300.0),
            configure_delay=cfg.get("orchestrator.configure_delay", 0.0),
            capacity_patience=cfg.get("orchestrator.capacity_patience", 3),
        )

    def _recover(self) -> None:
        with self._lock:
            self._recover_locked()

    def _recover_locked(self) -> None:
        records = self.journal.records()
        snapshot = self.journal.latest_snapshot()
        start_seq = 0
        if snapshot is not None:
            start_seq, state = snapshot
            self.restore_state(state)
        self._replaying = True
        try:
            for record in records:
                if record["seq"] <= start_seq:
                    continue
                try:
                    self._apply(record)
                except MiniorcError:
                    pass  # the original caller saw this same error
        finally:
            self._replaying = False
        if not records and snapshot is None:
            self._bootstrap()

    def _bootstrap(self) -> None:
        boot = self.config.section("bootstrap")
        for audience in boot.get("clients", []):
            self.command("account", "register_client", {"audience": audience})
        for entry in boot.get("identities", []):
            self.command("account", "link", dict(entry))
        for entry in boot.get("rules", []):
            self.command("rules", "put", dict(entry))
        for entry in boot.get("sites", []):
            self.command("site", "register", dict(entry))
        for entry in boot.get("datasets", []):
            entry = dict(entry)
            replicas = entry.pop("replicas", [])
            space = entry["space"]
            if space not in self.datamgr.spaces:
                self.command(
                    "dataset", "create_space", {"name": space, "owner": entry.get("owner", "")}
                )
            result = self.command("dataset", "add", entry)
            for replica in replicas:
                self.command(
                    "dataset",
                    "replicate",
                    {"dataset": result["dataset_id"], **replica},
                )

    # -- command path -------------------------------------------------------

    def command(self, entity: str, operation: str, payload: dict):
        return self.command_with_record(entity, operation, payload)[0]

    def command_with_record(self, entity: str, operation: str, payload: dict):
        with self._lock:
            record = self.journal.append(entity, operation, payload, at=self.clock.now())
            try:
                return self._apply(record), record
            finally:
                if (
                    not self._replaying
                    and self.journal.snapshot_every > 0
                    and record["seq"] % self.journal.snapshot_every == 0
                ):
                    self.journal.write_snapshot(self.to_state())

    def _apply(self, record: dict):
        handler = self._HANDLERS.get((record["entity"], record["op"]))
        if handler is None:
            raise MiniorcError(
                f"no handler for {record['entity']}/{record['op']}", code="BAD_COMMAND"
            )
        return handler(self, record["payload"], record["at"])

    # -- handlers -------------------------------------------------------------

    def _h_link(self, payload: dict, at: float):
        ext = ExternalIdentity(issuer=payload["issuer"], subject=payload["subject"])
        account_id = self.iam.link_credential(ext, account_id=payload.get("account_id"))
        if payload.get("groups"):
            merged = set(self.iam.get_account(account_id).groups) | set(payload["groups"])
            self.iam.set_groups(account_id, merged)
        return {"account_id": account_id}

    def _h_register_client(self, payload: dict, at: float):
        return self.iam.register_client(payload["audience"])

    def _h_login(self, payload: dict, at: float):
        ext = ExternalIdentity(issuer=payload["issuer"], subject=payload["subject"])
        token = self.iam.authenticate(ext, payload["audience"], now=at)
        return {"token": token}

    def _h_revoke(self, payload: dict, at: float):
        self.iam.revoke(payload["token_id"])
        return {"revoked": payload["token_id"]}

    def _h_translate(self, payload: dict, at: float):
        token = self.iam.translate_token(payload["token"], payload["target"], now=at)
        return {"token": token}

    def _h_set_groups(self, payload: dict, at: float):
        self.iam.set_groups(payload["account_id"], payload["groups"])
        return {"account_id": payload["account_id"]}

    def _h_register_site(self, payload: dict, at: float):
        payload = dict(payload)
        backend = payload.pop("backend", None)
        sla_grants = payload.pop("slas", [])
        descriptor = SiteDescriptor.from_payload(payload)
        self.catalog.register_site(descriptor)
        if backend is not None:
            schedule = [FailureEvent.from_payload(e) for e in backend.get("failures", [])]
            site = SimulatedIaaSSite(
                descriptor,
                boot_delay=backend.get("boot_delay", 0.0),
                failure_schedule=schedule,
            )
            self.orchestrator.register_iaas(site)
        for grant in sla_grants:
            self.slam.negotiate(
                grant["account"],
                descriptor.site_id,
                grant.get("sla_class", "Silver"),
                grant.get("max_cores", 10_000),
                grant.get("max_storage", 10_000),
                now=at,
            )
        return {"site_id": descriptor.site_id}

    def _h_metrics(self, payload: dict, at: float):
        sample = MonitorSample.from_payload(payload)
        self.catalog.ingest_metrics(sample)
        return {"site_id": sample.site_id}

    def _h_rules_put(self, payload: dict, at: float):
        self.rules.put(payload["owner"], payload["text"])
        return {"owner": payload["owner"]}

    def _h_negotiate(self, payload: dict, at: float):
        record = self.slam.negotiate(
            payload["account"],
            payload["site"],
            payload.get("sla_class", "Silver"),
            payload.get("max_cores", 10_000),
            payload.get("max_storage", 10_000),
            now=at,
        )
        return record.to_payload()

    def _h_create_space(self, payload: dict, at: float):
        self.datamgr.create_space(payload["name"], owner=payload.get("owner", ""))
        return {"space": payload["name"]}

    def _h_add_dataset(self, payload: dict, at: float):
        dataset_id = self.datamgr.add_dataset(
            payload["space"], payload["files"], owner=payload.get("owner", "")
        )
        return {"dataset_id": dataset_id}

    def _h_add_replica(self, payload: dict, at: float):
        replica = self.datamgr.add_replica(
            payload["dataset"],
            payload["site"],
            completeness=payload.get("completeness", 1),
        )
        return replica.to_payload()

    def _h_schedule_transfer(self, payload: dict, at: float):
        job = self.datamgr.schedule_transfer(
            payload["dataset"], payload["src"], payload["dst"], now=at
        )
        return job.to_payload()

    def _h_cancel_transfer(self, payload: dict, at: float):
        job = self.datamgr.cancel_transfer(payload["job"], now=at)
        return job.to_payload()

    def _h_submit(self, payload: dict, at: float):
        deployment_id = self.orchestrator.submit(
            payload["template"], payload["token"], now=at
        )
        dep = self.orchestrator.get(deployment_id)
        self._emit(
            {"kind": "deployment", "deployment_id": deployment_id, "state": dep.state},
            at,
        )
        return {"deployment_id": deployment_id, "state": dep.state}

    def _h_delete(self, payload: dict, at: float):
        dep = self.orchestrator.delete(payload["deployment"], now=at)
        self._emit(
            {"kind": "deployment", "deployment_id": dep.deployment_id, "state": dep.state},
            at,
        )
        return {"deployment_id": dep.deployment_id, "state": dep.state}

    def _h_scale(self, payload: dict, at: float):
        dep = self.orchestrator.scale(
            payload["deployment"], payload["node"], int(payload["replicas"]), now=at
        )
        return {"deployment_id": dep.deployment_id, "state": dep.state}

    def _h_advance(self, payload: dict, at: float):
        dt = float(payload.get("dt", 0.0))
        now = self.clock.advance(dt)
        if dt == 0:
            return {"now": now}
        step_record = self.cluster.step(now)
        for event in step_record.get("job_events", []):
            self._emit({"kind": "job", **event}, now)
        if self.orchestrator.cluster_site_id is not None:
            decision = self.autoscaler.evaluate(self.cluster, now)
            try:
                changed = self.autoscaler.apply(
                    decision, self.cluster, self._provision_node, now
                )
            except ProvisioningFailed:
                changed = []
            if decision.action is not None or decision.blocked:
                self._emit(
                    {"kind": "scaling", "decision": decision.to_payload(), "nodes": changed},
                    now,
                )
            self.orchestrator.notice_scaling(decision, now)
        if dt > 0:
            for event in self.datamgr.tick_transfers(now, dt):
                self._emit({"kind": "transfer", **event}, now)
        for event in self.orchestrator.supervise(now):
            kind = "deployment" if "deployment_id" in event else "site"
            self._emit({"kind": kind, **event}, now)
        return {"now": now}

    _HANDLERS = {
        ("account", "link"): _h_link,
        ("account", "register_client"): _h_register_client,
        ("account", "login"): _h_login,
        ("account", "revoke"): _h_revoke,
        ("account", "translate"): _h_translate,
        ("account", "set_groups"): _h_set_groups,
        ("site", "register"): _h_register_site,
        ("site", "metrics"): _h_metrics,
        ("rules", "put"): _h_rules_put,
        ("sla", "negotiate"): _h_negotiate,
        ("dataset", "create_space"): _h_create_space,
        ("dataset", "add"): _h_add_dataset,
        ("dataset", "replicate"): _h_add_replica,
        ("transfer", "schedule"): _h_schedule_transfer,
        ("transfer", "cancel"): _h_cancel_transfer,
        ("deployment", "submit"): _h_submit,
        ("deployment", "delete"): _h_delete,
        ("deployment", "scale"): _h_scale,
        ("clock", "advance"): _h_advance,
    }

    def _provision_node(self, vector: ResourceVector):
        site_id = self.orchestrator.cluster_site_id
        capacity = self.catalog.descriptor(site_id).capacity
        committed = ResourceVector.zero()
        for node in self.cluster.nodes.values():
            committed = committed + node.total
        if not (committed + vector).fits(capacity):
            raise ProvisioningFailed(f"site {site_id!r} has no headroom for another node")
        return None, {"site": site_id}

    # -- events ---------------------------------------------------------------

    def _emit(self, event: dict, at: float) -> None:
        self._event_counter += 1
        event = {"event_id": self._event_counter, "at": at, **event}
        self.events.append(event)
        if len(self.events) > EVENT_LIMIT:
            del self.events[: len(self.events) - EVENT_LIMIT]
        self._event_cond.notify_all()

    def events_since(
        self,
        after_id: int = 0,
        deployment_id: str | None = None,
        wait: float = 0.0,
    ) -> list[dict]:
        """Events newer than after_id, optionally blocking up to ``wait`` s."""

        def matching():
            found = [e for e in self.events if e["event_id"] > after_id]
            if deployment_id is not None:
                found = [f for f in found if f.get("deployment_id") == deployment_id]
            return found

        with self._event_cond:
            found = matching()
            if found or wait <= 0:
                return found
            self._event_cond.wait(timeout=wait)
            return matching()

    # -- reads ------------------------------------------------------------------

    def deployment_payload(self, deployment_id: str) -> dict:
        with self._lock:
            return self.orchestrator.get(deployment_id).to_payload()

    def list_deployments(self) -> list[dict]:
        with self._lock:
            return [
                self.orchestrator.deployments[k].to_payload()
                for k in sorted(self.orchestrator.deployments)
            ]

    def sites_payload(self) -> list[dict]:
        with self._lock:
            now = self.clock.now()
            return [s.to_payload() for s in self.catalog.snapshot(now)]

    def rank_payload(self, account_id: str | None, groups=(), data_sites=()) -> dict:
        with self._lock:
            ruleset = self.rules.resolve(account_id, groups)
            ranked = rank(
                self.catalog.snapshot(self.clock.now()),
                PlacementRequest(account_id=account_id or "", data_sites=tuple(data_sites)),
                ruleset,
            )
            return ranked.to_payload()

    def cluster_payload(self) -> dict:
        with self._lock:
            return self.cluster.describe(self.clock.now())

    def transfers_payload(self) -> list[dict]:
        with self._lock:
            return [
                self.datamgr.transfers[k].to_payload()
                for k in sorted(self.datamgr.transfers)
            ]

    def namespace_payload(self) -> list[dict]:
        with self._lock:
            return self.datamgr.federated_namespace(sorted(self.datamgr.spaces))

    def datasets_payload(self) -> list[dict]:
        with self._lock:
            out = []
            for dataset_id in sorted(self.datamgr.datasets):
                dataset = self.datamgr.datasets[dataset_id]
                out.append(
                    {
                        "dataset_id": dataset_id,
                        "space": dataset.space,
                        "owner": dataset.owner,
                        "total_size": dataset.total_size(),
                        "files": [f.to_payload() for f in dataset.files],
                        "replicas": [r.to_payload() for r in self.datamgr.locate(dataset_id)],
                    }
                )
            return out

    def slas_payload(self, account_id: str) -> list[dict]:
        with self._lock:
            return [r.to_payload() for r in self.slam.list_for(account_id)]

    # -- state ---------------------------------------------------------------

    def to_state(self) -> dict:
        return {
            "clock": self.clock.to_state(),
            "catalog": self.catalog.to_state(),
            "rules": self.rules.to_state(),
            "slam": self.slam.to_state(),
            "datamgr": self.datamgr.to_state(),
            "cluster": self.cluster.to_state(),
            "iam": self.iam.to_state(),
            "orchestrator": self.orchestrator.to_state(),
            "autoscaler": {"decisions": list(self.autoscaler.decisions)},
            "events": {"counter": self._event_counter},
        }

    def restore_state(self, state: dict) -> None:
        self.clock.restore(state["clock"])
        self.catalog.restore(state["catalog"])
        self.rules.restore(state["rules"])
        self.slam.restore(state["slam"])
        self.datamgr.restore(state["datamgr"])
        self.cluster.restore(state["cluster"])
        self.iam.restore(state["iam"])
        for site_state in state["orchestrator"].get("iaas", []):
            site_id = site_state["site_id"]
            if site_id not in self.orchestrator.iaas:
                self.orchestrator.register_iaas(
                    SimulatedIaaSSite(self.catalog.descriptor(site_id))
                )
        self.orchestrator.restore(state["orchestrator"])
        self.autoscaler.decisions = list(state.get("autoscaler", {}).get("decisions", []))
        self._event_counter = state.get("events", {}).get("counter", 0)

    def verify_accounting(self) -> None:
        with self._lock:
            self.orchestrator.verify_accounting()
