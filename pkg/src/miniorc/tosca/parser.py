"""Text-to-model parsing for the TOSCA simple-profile YAML subset.

Accepted document shape (both with and without the ``topology_template``
wrapper):

    tosca_definitions_version: tosca_simple_yaml_1_0
    topology_template:
      inputs:
        num_cpus: {type: integer, default: 2}
      node_templates:
        vm1:
          type: Compute            # or tosca.nodes.Compute etc.
          properties: {cpu: 2, memory: 4}
          requirements:
            - host: other_node
      outputs: {...}
      policies:
        - scenario_hint: B

Unknown keys anywhere are preserved in extras maps so validation can warn
about them without losing information.
"""

from __future__ import annotations

import yaml

from miniorc.errors import MiniorcError
from miniorc.tosca.model import (
    DeploymentPolicy,
    InputDef,
    NodeTemplate,
    Requirement,
    TemplateDocument,
)

MAX_TEMPLATE_BYTES = 1 << 20  # 1 MiB document cap

_BaseLoader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)


class ParseError(MiniorcError):
    code = "PARSE_ERROR"

    def __init__(self, line: int, column: int, reason: str, *, code: str | None = None):
        super().__init__(f"line {line}, column {column}: {reason}", code=code)
        self.line = line
        self.column = column
        self.reason = reason

    def to_payload(self) -> dict:
        return {"line": self.line, "column": self.column, "reason": self.reason}


class _StrictLoader(_BaseLoader):
    """SafeLoader variant that rejects duplicate mapping keys.

    Plain YAML silently keeps the last duplicate, which would make the
    node-name uniqueness invariant unverifiable after loading.
    """


def _construct_mapping(loader, node, deep=False):
    loader.flatten_mapping(node)
    mapping = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=deep)
        try:
            duplicate = key in mapping
        except TypeError as exc:  # unhashable key
            raise yaml.constructor.ConstructorError(
                None, None, f"unusable mapping key: {exc}", key_node.start_mark
            )
        if duplicate:
            raise yaml.constructor.ConstructorError(
                None, None, f"duplicate mapping key: {key!r}", key_node.start_mark
            )
        mapping[key] = loader.construct_object(value_node, deep=deep)
    return mapping


_StrictLoader.add_constructor("tag:yaml.org,2002:map", _construct_mapping)


def _shape_error(reason: str) -> ParseError:
    return ParseError(1, 1, reason)


def _parse_requirements(node_name: str, raw) -> list[Requirement]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise _shape_error(f"node {node_name!r}: requirements must be a list")
    requirements = []
    for entry in raw:
        if not isinstance(entry, dict) or len(entry) != 1:
            raise _shape_error(
                f"node {node_name!r}: each requirement must be a single 'kind: target' pair"
            )
        (kind, target), = entry.items()
        if not isinstance(kind, str) or not isinstance(target, str):
            raise _shape_error(f"node {node_name!r}: requirement kind and target must be strings")
        requirements.append(Requirement(kind=kind, target=target))
    return requirements


def _parse_node(name, spec) -> NodeTemplate:
    if not isinstance(name, str) or not name:
        raise _shape_error(f"node template name must be a non-empty string, got {name!r}")
    if not isinstance(spec, dict):
        raise _shape_error(f"node {name!r}: definition must be a mapping")
    raw_type = spec.get("type")
    if raw_type is not None and not isinstance(raw_type, str):
        raise _shape_error(f"node {name!r}: type must be a string")
    # Accept dotted TOSCA type names; the short suffix selects the subset type.
    short_type = raw_type.rsplit(".", 1)[-1] if raw_type else None
    properties = spec.get("properties")
    if properties is None:
        properties = {}
    if not isinstance(properties, dict):
        raise _shape_error(f"node {name!r}: properties must be a mapping")
    description = spec.get("description")
    if description is not None and not isinstance(description, str):
        raise _shape_error(f"node {name!r}: description must be a string")
    extras = {
        k: v
        for k, v in spec.items()
        if k not in ("type", "properties", "requirements", "description")
    }
    if raw_type is not None and short_type != raw_type:
        extras["__raw_type__"] = raw_type
    return NodeTemplate(
        name=name,
        type=short_type,
        properties=dict(properties),
        requirements=_parse_requirements(name, spec.get("requirements")),
        description=description,
        extras=extras,
    )


def _parse_inputs(raw) -> dict[str, InputDef]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise _shape_error("inputs must be a mapping")
    inputs = {}
    for name, spec in raw.items():
        if not isinstance(name, str):
            raise _shape_error(f"input name must be a string, got {name!r}")
        if spec is None:
            spec = {}
        if not isinstance(spec, dict):
            raise _shape_error(f"input {name!r}: definition must be a mapping")
        extras = {k: v for k, v in spec.items() if k not in ("type", "default")}
        inputs[name] = InputDef(type=spec.get("type"), default=spec.get("default"), extras=extras)
    return inputs


def _parse_policies(raw) -> list[DeploymentPolicy]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise _shape_error("policies must be a list")
    policies = []
    for entry in raw:
        if not isinstance(entry, dict) or len(entry) != 1:
            raise _shape_error("each policy must be a single 'kind: value' pair")
        (kind, value), = entry.items()
        if not isinstance(kind, str):
            raise _shape_error("policy kind must be a string")
        policies.append(DeploymentPolicy(kind=kind, value=value))
    return policies


def parse_template(text: str) -> TemplateDocument:
    """Parse TOSCA YAML text into a TemplateDocument.

    Raises ParseError on malformed syntax or wrong document shape. Unknown
    keys are preserved and surface as warnings from ``validate``.
    """
    if not isinstance(text, str) or not text.strip():
        raise ParseError(1, 1, "empty template document", code="EMPTY_TEMPLATE")
    if len(text.encode("utf-8", errors="replace")) > MAX_TEMPLATE_BYTES:
        raise ParseError(1, 1, "template exceeds the 1 MiB size cap", code="TEMPLATE_TOO_LARGE")

    try:
        raw = yaml.load(text, Loader=_StrictLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else 1
        column = mark.column + 1 if mark else 1
        raise ParseError(line, column, exc.problem or str(exc))
    except yaml.YAMLError as exc:
        raise ParseError(1, 1, str(exc))

    if not isinstance(raw, dict):
        raise _shape_error("top level must be a mapping")

    topology = raw.get("topology_template")
    doc_extra_source: dict = raw
    if topology is None:
        topology = raw
    elif not isinstance(topology, dict):
        raise _shape_error("topology_template must be a mapping")

    raw_nodes = topology.get("node_templates")
    if raw_nodes is None:
        raw_nodes = {}
    if not isinstance(raw_nodes, dict):
        raise _shape_error("node_templates must be a mapping")

    nodes = [_parse_node(name, spec) for name, spec in raw_nodes.items()]

    outputs = topology.get("outputs") or {}
    if not isinstance(outputs, dict):
        raise _shape_error("outputs must be a mapping")

    version = raw.get("tosca_definitions_version")
    if version is not None and not isinstance(version, str):
        raise _shape_error("tosca_definitions_version must be a string")

    description = doc_extra_source.get("description")
    if description is not None and not isinstance(description, str):
        raise _shape_error("description must be a string")

    topology_keys = ("inputs", "node_templates", "outputs", "policies")
    extras = {}
    for key, value in raw.items():
        if key in ("tosca_definitions_version", "topology_template", "description"):
            continue
        if raw is topology and key in topology_keys:
            continue
        extras[key] = value
    if topology is not raw:
        for key, value in topology.items():
            if key not in topology_keys and key != "description":
                extras[f"topology_template.{key}"] = value

    return TemplateDocument(
        inputs=_parse_inputs(topology.get("inputs")),
        node_templates=nodes,
        outputs=dict(outputs),
        policies=_parse_policies(topology.get("policies")),
        tosca_version=version,
        description=description,
        extras=extras,
    )


def serialize_template(doc: TemplateDocument) -> str:
    """Render a TemplateDocument back to YAML (parse/serialize round-trip stable)."""
    topology: dict = {}
    if doc.inputs:
        topology["inputs"] = {
            name: {
                **({"type": d.type} if d.type is not None else {}),
                **({"default": d.default} if d.default is not None else {}),
                **d.extras,
            }
            for name, d in doc.inputs.items()
        }
    node_templates = {}
    for node in doc.node_templates:
        spec: dict = {}
        raw_type = node.extras.get("__raw_type__", node.type)
        if raw_type is not None:
            spec["type"] = raw_type
        if node.description is not None:
            spec["description"] = node.description
        if node.properties:
            spec["properties"] = dict(node.properties)
        if node.requirements:
            spec["requirements"] = [{r.kind: r.target} for r in node.requirements]
        spec.update({k: v for k, v in node.extras.items() if k != "__raw_type__"})
        node_templates[node.name] = spec
    topology["node_templates"] = node_templates
    if doc.outputs:
        topology["outputs"] = dict(doc.outputs)
    if doc.policies:
        topology["policies"] = [{p.kind: p.value} for p in doc.policies]

    out: dict = {}
    if doc.tosca_version is not None:
        out["tosca_definitions_version"] = doc.tosca_version
    if doc.description is not None:
        out["description"] = doc.description
    out["topology_template"] = topology
    out.update({k: v for k, v in doc.extras.items() if not k.startswith("topology_template.")})
    for key, value in doc.extras.items():
        if key.startswith("topology_template."):
            topology[key.split(".", 1)[1]] = value
    return yaml.safe_dump(out, sort_keys=False, default_flow_style=False)
