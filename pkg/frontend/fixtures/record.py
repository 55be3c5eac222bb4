#!/usr/bin/env python3
"""Record gateway responses from scripted platform runs.

Each recording boots a real platform from a config file, drives it through
the HTTP app exactly as a browser would, and captures the JSON bodies the
gateway served, frame by frame. The dashboard tests replay the recordings
through a fetch mock, so every figure they assert on is a value the
gateway actually produced. Rerun after changing the platform:

    python3 fixtures/record.py

Requires the miniorc package (pip install -e ../..) and its test client
dependencies (fastapi, httpx).
"""

from __future__ import annotations

import copy
import json
import tempfile
from pathlib import Path

import yaml
from fastapi.testclient import TestClient

from miniorc.config import load_config
from miniorc.core import Platform
from miniorc.gateway import create_app

OUT = Path(__file__).resolve().parent

BASE_CONFIG: dict = {
    "clock": {"mode": "manual", "start": 0.0},
    "journal": {"snapshot_every": 1000},
    "orchestrator": {"cluster_site": "msa", "configure_delay": 1.0},
    "autoscaler": {
        "min_nodes": 1,
        "max_nodes": 4,
        "scaleout_delay": 2.0,
        "idle_timeout": 30.0,
        "node_template": {"cpu": 4, "mem": 8, "disk": 40},
    },
    "bootstrap": {
        "clients": ["portal"],
        "identities": [
            {"issuer": "campus", "subject": "ada", "groups": ["dev"]},
            {"issuer": "local", "subject": "root", "groups": ["admin"]},
        ],
        "rules": [],
        "sites": [
            {
                "site_id": "s1",
                "capacity": {"cpu": 16, "mem": 32, "disk": 200},
                "storage_capacity": 50.0,
                "backend": {"boot_delay": 0.0},
                "slas": [{"account": "acct-0001", "sla_class": "Silver"}],
            },
            {
                "site_id": "s2",
                "capacity": {"cpu": 24, "mem": 48, "disk": 300},
                "storage_capacity": 80.0,
                "base_cost": 2.0,
                "backend": {"boot_delay": 1.0},
                "slas": [{"account": "acct-0001", "sla_class": "Silver"}],
            },
            {
                "site_id": "msa",
                "capacity": {"cpu": 32, "mem": 64, "disk": 320},
                "storage_capacity": 40.0,
                "base_cost": 1.5,
                "slas": [{"account": "acct-0001", "sla_class": "Silver"}],
            },
        ],
        "datasets": [
            {
                "space": "shared",
                "owner": "acct-0001",
                "files": [{"path": "corpus.bin", "size": 3_000_000, "checksum": "c0"}],
                "replicas": [{"site": "s2", "completeness": 1}],
            }
        ],
    },
}

SERVICE_TEMPLATE = """tosca_definitions_version: tosca_simple_yaml_1_0
description: Web portal managed by the platform.
topology_template:
  node_templates:
    vm:
      type: Compute
      properties:
        cpu: 2
        memory: 4
        disk: 20
    web:
      type: LongRunningService
      properties:
        image: web-portal:2.1
        replicas: 2
      requirements:
        - host: vm
  policies:
    - scenario_hint: B
"""

CONSUMER_TEMPLATE = """tosca_definitions_version: tosca_simple_yaml_1_0
description: Analysis pinned to the cheapest compute, forcing a replica move.
topology_template:
  node_templates:
    worker:
      type: tosca.nodes.Compute
      properties:
        cpu: 2
        memory: 4
        disk: 20
      requirements:
        - data: input_data
    input_data:
      type: DataRequirement
      properties:
        dataset: ds-0001
        access_mode: posix
  policies:
    - locality: prefer_compute
"""

GPU_TEMPLATE = """tosca_definitions_version: tosca_simple_yaml_1_0
description: Asks for an accelerator no site offers.
topology_template:
  node_templates:
    trainer:
      type: tosca.nodes.Compute
      properties:
        cpu: 4
        memory: 8
        disk: 40
        gpu: true
"""

BATCH_TEMPLATE = """tosca_definitions_version: tosca_simple_yaml_1_0
description: Two-stage crunch on the managed cluster.
topology_template:
  node_templates:
    wn:
      type: tosca.nodes.Compute
      properties:
        cpu: 2
        memory: 4
        disk: 10
    prepare:
      type: tosca.nodes.BatchJob
      properties:
        image: prep:1.0
        command: stage
        duration: 3
      requirements:
        - host: wn
    crunch:
      type: tosca.nodes.BatchJob
      properties:
        image: crunch:1.0
        command: run
        duration: 6
      requirements:
        - host: wn
        - dependency: prepare
  policies:
    - scenario_hint: B
"""

SNAPSHOT_ROUTES = [
    "/clock",
    "/deployments",
    "/cluster",
    "/sites",
    "/transfers",
    "/namespace/datasets",
    "/slas",
    "/rank",
]


class Recorder:
    """Drives one platform over HTTP and accumulates frames."""

    def __init__(self, config: dict, workdir: str):
        config = copy.deepcopy(config)
        config.setdefault("journal", {})["dir"] = f"{workdir}/journal"
        config_path = Path(workdir) / "config.yaml"
        config_path.write_text(yaml.safe_dump(config))
        self.platform = Platform(load_config(str(config_path)))
        self.client = TestClient(create_app(self.platform), raise_server_exceptions=False)
        self.token = ""
        self.frames: list[dict] = []
        self.deployment_ids: list[str] = []

    def login(self, issuer: str, subject: str) -> str:
        body = {"issuer": issuer, "subject": subject, "audience": "portal"}
        response = self.client.post("/iam/login", json=body)
        assert response.status_code == 200, response.text
        return response.json()["token"]

    def auth(self, token: str | None = None) -> dict:
        return {"Authorization": f"Bearer {token or self.token}"}

    def get(self, path: str, token: str | None = None) -> dict:
        response = self.client.get(path, headers=self.auth(token))
        assert response.status_code == 200, f"{path}: {response.text}"
        return response.json()

    def post(self, path: str, body: dict, token: str | None = None) -> dict:
        response = self.client.post(path, json=body, headers=self.auth(token))
        assert response.status_code in (200, 201), f"{path}: {response.text}"
        return response.json()

    def submit(self, template: str, token: str | None = None) -> str:
        out = self.post("/deployments", {"template": template}, token)
        self.deployment_ids.append(out["deployment_id"])
        return out["deployment_id"]

    def advance(self, dt: float) -> None:
        self.post("/clock/advance", {"dt": dt})

    def frame(self, note: str) -> None:
        routes = {}
        for path in SNAPSHOT_ROUTES + [f"/deployments/{d}" for d in self.deployment_ids]:
            routes[path] = self.get(path)
        events = self.get("/events?after=0&wait=0")["events"]
        self.frames.append(
            {
                "note": note,
                "now": self.platform.clock.now(),
                "eventCount": len(events),
                "routes": routes,
            }
        )

    def save(self, name: str, description: str) -> None:
        events = self.get("/events?after=0&wait=0")["events"]
        claims = self.get(f"/iam/introspect?token={self.token}")
        recording = {
            "name": name,
            "description": description,
            "token": self.token,
            "claims": claims,
            "frames": self.frames,
            "events": events,
        }
        path = OUT / f"{name}.json"
        path.write_text(json.dumps(recording, indent=1, sort_keys=True) + "\n")
        print(f"wrote {path.name}: {len(self.frames)} frames, {len(events)} events")


def record_lifecycle(workdir: str) -> None:
    """Scenario-B service from submission to RUNNING, then a scale-out."""
    r = Recorder(BASE_CONFIG, workdir)
    r.token = r.login("campus", "ada")
    r.frame("signed in, nothing deployed")
    dep = r.submit(SERVICE_TEMPLATE)
    r.frame("submitted, validation done")
    r.advance(1.0)
    r.frame("placed on the cluster, configuring")
    r.advance(1.0)
    r.frame("running with two replicas")
    r.post(f"/deployments/{dep}/scale", {"node": "web", "replicas": 3})
    r.frame("scaling to three replicas")
    r.advance(1.0)
    r.frame("settled at three replicas")
    r.save("lifecycle", "Managed web service: submit, run, scale.")


def record_migration(workdir: str) -> None:
    """Data-aware placement that moves a replica, plus a rejected ask."""
    r = Recorder(BASE_CONFIG, workdir)
    r.token = r.login("campus", "ada")
    r.submit(CONSUMER_TEMPLATE)
    r.frame("submitted a consumer pinned to cheap compute")
    r.advance(0.125)
    r.frame("matched with a migration plan")
    r.advance(0.125)
    r.advance(1.0)
    r.frame("replica moved, provisioning")
    r.advance(1.0)
    r.advance(1.0)
    r.frame("running next to the moved replica")
    r.submit(GPU_TEMPLATE)
    r.advance(1.0)
    r.frame("accelerator ask rejected everywhere")
    r.save("migration", "Replica migration for locality, and a no-site failure.")


def record_operations(workdir: str) -> None:
    """Admin view: cluster under load and a multi-window transfer."""
    config = copy.deepcopy(BASE_CONFIG)
    config["links"] = {"default": {"rate": 1_000_000.0, "capacity": None}, "pairs": []}
    r = Recorder(config, workdir)
    ada = r.login("campus", "ada")
    r.token = r.login("local", "root")

    r.post("/namespace/spaces", {"name": "ops"})
    dataset = r.post(
        "/namespace/datasets",
        {"space": "ops", "files": [{"path": "archive.tar", "size": 20_000_000, "checksum": "a1"}]},
    )["dataset_id"]
    r.post("/namespace/replicas", {"dataset": dataset, "site": "s2", "completeness": 1})
    r.submit(SERVICE_TEMPLATE, token=ada)
    r.submit(BATCH_TEMPLATE, token=ada)
    r.post("/transfers", {"dataset": dataset, "src": "s2", "dst": "s1"})
    r.frame("workloads submitted, transfer queued")
    r.advance(1.0)
    r.frame("first scheduling cycle")
    for _ in range(3):
        r.advance(1.0)
    r.frame("streams ramping, jobs queued")
    for _ in range(6):
        r.advance(1.0)
    r.frame("cluster grown, transfer mid flight")
    for _ in range(10):
        r.advance(1.0)
    r.frame("batch stages finishing")
    r.save("operations", "Cluster under load with a long transfer, admin session.")


def main() -> None:
    for fn in (record_lifecycle, record_migration, record_operations):
        with tempfile.TemporaryDirectory() as workdir:
            fn(workdir)


if __name__ == "__main__":
    main()
