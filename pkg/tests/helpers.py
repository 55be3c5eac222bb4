"""Shared test utilities: parser fuzz inputs and an engine-level harness."""

from __future__ import annotations

import random
from fractions import Fraction

import yaml

from miniorc.broker import RuleStore
from miniorc.catalog import Catalog, SiteDescriptor
from miniorc.cluster import Cluster
from miniorc.datamgr import DataManager, Link
from miniorc.iam import ExternalIdentity, IdentityService
from miniorc.orchestrator import LEGAL_TRANSITIONS, Orchestrator, SimulatedIaaSSite
from miniorc.resources import ResourceVector
from miniorc.sla import SLAManager

from oracles import illegal_history_steps

MB = 10**6


class EngineHarness:
    """Everything one orchestrator instance is wired to, for tests."""

    def __init__(self, sites, cluster_site=None, node_template=ResourceVector(8, 16, 80)):
        self.catalog = Catalog()
        for descriptor in sites:
            self.catalog.register_site(descriptor)
        self.rules = RuleStore()
        self.slam = SLAManager(self.catalog)
        self.dm = DataManager(self.catalog, default_link=Link(rate=Fraction(MB)))
        self.cluster = Cluster()
        if cluster_site is not None:
            self.cluster.add_node(node_template)
        self.iam = IdentityService()
        ext = ExternalIdentity(issuer="campus", subject="ada")
        self.account = self.iam.link_credential(ext)
        self.iam.register_client("portal")
        self.token = self.iam.authenticate(ext, "portal", now=0.0)
        self.orc = Orchestrator(
            catalog=self.catalog,
            rules=self.rules,
            slam=self.slam,
            datamgr=self.dm,
            cluster=self.cluster,
            iam=self.iam,
            cluster_site_id=cluster_site,
        )

    def grant(self, site_id, sla_class="Silver", cores=640, storage=5000, now=0.0):
        return self.slam.negotiate(self.account, site_id, sla_class, cores, storage, now=now)

    def backend(self, site_id, **kwargs) -> SimulatedIaaSSite:
        site = SimulatedIaaSSite(self.catalog.descriptor(site_id), **kwargs)
        self.orc.register_iaas(site)
        return site


def descriptor(site_id, cpu=32, mem=64, disk=400, **kwargs):
    kwargs.setdefault("storage_capacity", 100.0)
    return SiteDescriptor(site_id=site_id, capacity=ResourceVector(cpu, mem, disk), **kwargs)


def compute_template(*nodes, policies=(), extra=""):
    lines = [
        "tosca_definitions_version: tosca_simple_yaml_1_0",
        "topology_template:",
        "  node_templates:",
    ]
    for name, cpu, mem in nodes:
        lines.append(f"    {name}:")
        lines.append("      type: Compute")
        lines.append(f"      properties: {{cpu: {cpu}, memory: {mem}}}")
    if extra:
        lines.extend(extra.splitlines())
    if policies:
        lines.append("  policies:")
        for kind, value in policies:
            lines.append(f"    - {kind}: {value}")
    return "\n".join(lines) + "\n"


SERVICE_TEMPLATE = """
tosca_definitions_version: tosca_simple_yaml_1_0
topology_template:
  node_templates:
    web:
      type: LongRunningService
      properties: {cpu: 1, memory: 2, replicas: 2}
"""

JOB_CHAIN_TEMPLATE = """
tosca_definitions_version: tosca_simple_yaml_1_0
topology_template:
  node_templates:
    prepare:
      type: BatchJob
      properties: {cpu: 1, memory: 1, duration: 1}
    crunch:
      type: BatchJob
      properties: {cpu: 1, memory: 1, duration: 1}
      requirements:
        - dependency: prepare
"""


def assert_legal(dep):
    assert illegal_history_steps(dep.history, LEGAL_TRANSITIONS) == []


def single_site_platform(**site_kwargs):
    p = EngineHarness([descriptor("s1", **site_kwargs)])
    p.backend("s1")
    p.grant("s1")
    return p

BASE_TEMPLATES = [
    (
        "tosca_definitions_version: tosca_simple_yaml_1_0\n"
        "topology_template:\n"
        "  node_templates:\n"
        "    vm1:\n"
        "      type: Compute\n"
        "      properties: {cpu: 2, memory: 4}\n"
    ),
    (
        "node_templates:\n"
        "  app:\n"
        "    type: LongRunningService\n"
        "    properties:\n"
        "      image: web:1\n"
        "      replicas: 2\n"
        "    requirements:\n"
        "      - host: vm\n"
        "  vm:\n"
        "    type: Compute\n"
        "    properties: {cpu: 1, memory: 2}\n"
        "policies:\n"
        "  - sla_class: Silver\n"
    ),
    (
        "topology_template:\n"
        "  inputs:\n"
        "    n: {type: integer, default: 3}\n"
        "  node_templates:\n"
        "    job:\n"
        "      type: BatchJob\n"
        "      properties: {command: run, duration: 10}\n"
        "      requirements: [{data: ds}]\n"
        "    ds:\n"
        "      type: DataRequirement\n"
        "      properties: {dataset: d1, access_mode: webdav}\n"
    ),
]

_MUTATION_POOL = "abcxyz:{}[]-#&*!|>%@`\"' \n\t0123456789é ﻿"


def _mutate(rng: random.Random, base: str) -> str:
    chars = list(base)
    for _ in range(rng.randrange(1, 5)):
        if not chars:
            break
        op = rng.randrange(3)
        idx = rng.randrange(len(chars))
        if op == 0:
            chars[idx] = rng.choice(_MUTATION_POOL)
        elif op == 1:
            chars.insert(idx, rng.choice(_MUTATION_POOL))
        else:
            del chars[idx]
    return "".join(chars)


def _random_tree(rng: random.Random, depth: int):
    roll = rng.random()
    if depth <= 0 or roll < 0.5:
        return rng.choice(
            [rng.randrange(-99, 99), rng.random(), "w" * rng.randrange(0, 4), True, None]
        )
    if roll < 0.8:
        return {f"k{rng.randrange(6)}": _random_tree(rng, depth - 1) for _ in range(rng.randrange(1, 4))}
    return [_random_tree(rng, depth - 1) for _ in range(rng.randrange(1, 4))]


def fuzz_documents(n: int, seed: int = 0):
    """Yield n adversarial parser inputs: mutations, garbage, trees, truncations."""
    rng = random.Random(seed)
    for _ in range(n):
        roll = rng.random()
        if roll < 0.45:
            yield _mutate(rng, rng.choice(BASE_TEMPLATES))
        elif roll < 0.75:
            length = rng.randrange(0, 120)
            yield "".join(rng.choice(_MUTATION_POOL) for _ in range(length))
        elif roll < 0.9:
            yield yaml.safe_dump(_random_tree(rng, 3))
        else:
            base = rng.choice(BASE_TEMPLATES)
            yield base[: rng.randrange(0, len(base))]
