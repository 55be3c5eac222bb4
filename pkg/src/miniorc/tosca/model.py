"""Structured model of the supported TOSCA template subset."""

from __future__ import annotations

from dataclasses import dataclass, field

NODE_TYPES = frozenset(
    {"Compute", "SoftwareComponent", "LongRunningService", "BatchJob", "DataRequirement"}
)

REQUIREMENT_KINDS = frozenset({"host", "dependency", "data"})

POLICY_KINDS = frozenset({"scenario_hint", "sla_class", "locality"})

SLA_CLASSES = ("Gold", "Silver", "Bronze")

# Properties understood per node type; anything else lands in the node's
# extras map and is reported as an UNKNOWN_PROPERTY warning.
KNOWN_PROPERTIES: dict[str, frozenset[str]] = {
    "Compute": frozenset({"cpu", "memory", "disk", "image", "gpu", "infiniband"}),
    "SoftwareComponent": frozenset({"image", "command"}),
    "LongRunningService": frozenset(
        {"cpu", "memory", "disk", "image", "replicas", "command", "gpu", "infiniband"}
    ),
    "BatchJob": frozenset(
        {
            "cpu",
            "memory",
            "disk",
            "image",
            "command",
            "duration",
            "max_attempts",
            "simulate_failures",
            "gpu",
            "infiniband",
        }
    ),
    "DataRequirement": frozenset({"dataset", "access_mode"}),
}


@dataclass(frozen=True)
class Requirement:
    """A directed dependency on another node template."""

    kind: str  # host | dependency | data (unknown kinds kept, warned about)
    target: str


@dataclass
class InputDef:
    type: str | None = None
    default: object = None
    extras: dict = field(default_factory=dict)


@dataclass
class NodeTemplate:
    name: str
    type: str | None  # short type name, or the raw string when unsupported
    properties: dict = field(default_factory=dict)
    requirements: list[Requirement] = field(default_factory=list)
    description: str | None = None
    extras: dict = field(default_factory=dict)

    def prop(self, key: str, default=None):
        return self.properties.get(key, default)


@dataclass(frozen=True)
class DeploymentPolicy:
    kind: str
    value: object


@dataclass
class TemplateDocument:
    inputs: dict[str, InputDef] = field(default_factory=dict)
    node_templates: list[NodeTemplate] = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    policies: list[DeploymentPolicy] = field(default_factory=list)
    tosca_version: str | None = None
    description: str | None = None
    extras: dict = field(default_factory=dict)

    def node(self, name: str) -> NodeTemplate | None:
        for n in self.node_templates:
            if n.name == name:
                return n
        return None

    def node_names(self) -> list[str]:
        return [n.name for n in self.node_templates]

    def policy(self, kind: str):
        for p in self.policies:
            if p.kind == kind:
                return p.value
        return None

    def nodes_of_type(self, type_name: str) -> list[NodeTemplate]:
        return [n for n in self.node_templates if n.type == type_name]


@dataclass(frozen=True)
class ReportEntry:
    code: str
    message: str
    node: str | None = None

    def to_payload(self) -> dict:
        payload = {"code": self.code, "message": self.message}
        if self.node is not None:
            payload["node"] = self.node
        return payload


@dataclass
class ValidationReport:
    errors: list[ReportEntry] = field(default_factory=list)
    warnings: list[ReportEntry] = field(default_factory=list)

    @property
    def deployable(self) -> bool:
        return not self.errors

    def error_codes(self) -> set[str]:
        return {e.code for e in self.errors}

    def warning_codes(self) -> set[str]:
        return {w.code for w in self.warnings}

    def to_payload(self) -> dict:
        return {
            "deployable": self.deployable,
            "errors": [e.to_payload() for e in self.errors],
            "warnings": [w.to_payload() for w in self.warnings],
        }
