"""Template validation and dependency ordering."""

from __future__ import annotations

import heapq

from miniorc.errors import MiniorcError
from miniorc.tosca.model import (
    KNOWN_PROPERTIES,
    NODE_TYPES,
    POLICY_KINDS,
    REQUIREMENT_KINDS,
    SLA_CLASSES,
    NodeTemplate,
    ReportEntry,
    TemplateDocument,
    ValidationReport,
)

_SCALAR_TYPES = (str, int, float, bool)

_SCENARIO_VALUES = ("A", "B")
_LOCALITY_VALUES = ("prefer_data", "prefer_compute")
_ACCESS_MODES = ("posix", "webdav")


class CycleError(MiniorcError):
    code = "CYCLE"


class MissingInput(MiniorcError):
    code = "MISSING_INPUT"


def _is_get_input(value) -> str | None:
    if isinstance(value, dict) and len(value) == 1 and "get_input" in value:
        name = value["get_input"]
        if isinstance(name, str):
            return name
    return None


def effective_properties(node: NodeTemplate, doc: TemplateDocument) -> dict:
    """Node properties with one level of ``{get_input: name}`` substituted.

    Raises MissingInput when a referenced input does not exist or carries
    no default value.
    """
    resolved = {}
    for key, value in node.properties.items():
        input_name = _is_get_input(value)
        if input_name is not None:
            if input_name not in doc.inputs:
                raise MissingInput(f"node {node.name!r} references unknown input {input_name!r}")
            default = doc.inputs[input_name].default
            if default is None:
                raise MissingInput(
                    f"node {node.name!r} references input {input_name!r} which has no default"
                )
            value = default
        resolved[key] = value
    return resolved


def _check_number(value, *, minimum=None, exclusive_minimum=None, integer=False) -> bool:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False
    if integer and not isinstance(value, int):
        return False
    if minimum is not None and value < minimum:
        return False
    if exclusive_minimum is not None and value <= exclusive_minimum:
        return False
    return True


def _check_properties(node: NodeTemplate, props: dict, report: ValidationReport) -> None:
    def err(key, why):
        report.errors.append(
            ReportEntry("BAD_PROPERTY", f"property {key!r}: {why}", node=node.name)
        )

    known = KNOWN_PROPERTIES.get(node.type or "", frozenset())
    for key, value in props.items():
        if key not in known:
            report.warnings.append(
                ReportEntry("UNKNOWN_PROPERTY", f"property {key!r} not understood", node=node.name)
            )
            continue
        if value is None or not isinstance(value, _SCALAR_TYPES):
            err(key, "value must be a scalar")
            continue
        if key == "cpu" and not _check_number(value, minimum=1):
            err(key, "must be a number >= 1")
        elif key == "memory" and not _check_number(value, exclusive_minimum=0):
            err(key, "must be a number > 0")
        elif key == "disk" and not _check_number(value, minimum=0):
            err(key, "must be a number >= 0")
        elif key == "replicas" and not _check_number(value, minimum=1, integer=True):
            err(key, "must be an integer >= 1")
        elif key == "duration" and not _check_number(value, minimum=0):
            err(key, "must be a number >= 0")
        elif key == "max_attempts" and not _check_number(value, minimum=1, integer=True):
            err(key, "must be an integer >= 1")
        elif key == "simulate_failures" and not _check_number(value, minimum=0, integer=True):
            err(key, "must be an integer >= 0")
        elif key in ("image", "command", "dataset") and not (isinstance(value, str) and value):
            err(key, "must be a non-empty string")
        elif key == "access_mode" and value not in _ACCESS_MODES:
            err(key, f"must be one of {_ACCESS_MODES}")
        elif key in ("gpu", "infiniband") and not isinstance(value, bool):
            err(key, "must be a boolean")

    if node.type == "Compute":
        for required in ("cpu", "memory"):
            if required not in props:
                report.errors.append(
                    ReportEntry(
                        "MISSING_PROPERTY", f"Compute requires {required!r}", node=node.name
                    )
                )
    if node.type == "DataRequirement" and "dataset" not in props:
        report.errors.append(
            ReportEntry("MISSING_PROPERTY", "DataRequirement requires 'dataset'", node=node.name)
        )


def _check_policies(doc: TemplateDocument, report: ValidationReport) -> None:
    seen: set[str] = set()
    for policy in doc.policies:
        if policy.kind not in POLICY_KINDS:
            report.warnings.append(
                ReportEntry("UNKNOWN_POLICY", f"policy kind {policy.kind!r} not understood")
            )
            continue
        if policy.kind in seen:
            report.errors.append(
                ReportEntry("DUPLICATE_POLICY", f"more than one {policy.kind!r} policy")
            )
            continue
        seen.add(policy.kind)
        allowed = {
            "scenario_hint": _SCENARIO_VALUES,
            "sla_class": SLA_CLASSES,
            "locality": _LOCALITY_VALUES,
        }[policy.kind]
        if policy.value not in allowed:
            report.errors.append(
                ReportEntry(
                    "BAD_POLICY", f"policy {policy.kind!r}: value must be one of {tuple(allowed)}"
                )
            )


def _requirement_edges(doc: TemplateDocument) -> list[tuple[str, str]]:
    """Edges (dependent, target) for every requirement, known kind or not."""
    return [(node.name, req.target) for node in doc.node_templates for req in node.requirements]


def _find_cycle_nodes(doc: TemplateDocument) -> list[str]:
    """Names of nodes that cannot be topologically ordered (empty if acyclic)."""
    names = set(doc.node_names())
    out_count = {name: 0 for name in names}
    dependents: dict[str, list[str]] = {name: [] for name in names}
    for dependent, target in _requirement_edges(doc):
        if target in names and dependent in names:
            out_count[dependent] += 1
            dependents[target].append(dependent)
    ready = [name for name, count in out_count.items() if count == 0]
    resolved = 0
    while ready:
        name = ready.pop()
        resolved += 1
        for dep in dependents[name]:
            out_count[dep] -= 1
            if out_count[dep] == 0:
                ready.append(dep)
    if resolved == len(names):
        return []
    return sorted(name for name, count in out_count.items() if count > 0)


def validate(doc: TemplateDocument) -> ValidationReport:
    """Check every template invariant; violations become report entries.

    Pure: the same document always yields the same report. The template is
    deployable iff the report carries no errors.
    """
    report = ValidationReport()

    for key in doc.extras:
        report.warnings.append(ReportEntry("UNKNOWN_KEY", f"key {key!r} not understood"))

    names = doc.node_names()
    seen: set[str] = set()
    for name in names:
        if name in seen:
            report.errors.append(ReportEntry("DUPLICATE_NODE", f"node {name!r} defined twice"))
        seen.add(name)

    compute_names = {n.name for n in doc.node_templates if n.type == "Compute"}
    for node in doc.node_templates:
        if node.type not in NODE_TYPES:
            report.warnings.append(
                ReportEntry(
                    "UNSUPPORTED_TYPE",
                    f"type {node.extras.get('__raw_type__', node.type)!r} not in the supported set",
                    node=node.name,
                )
            )
        for extra_key in node.extras:
            if extra_key == "__raw_type__":
                continue
            report.warnings.append(
                ReportEntry("UNKNOWN_KEY", f"key {extra_key!r} not understood", node=node.name)
            )
        for req in node.requirements:
            if req.kind not in REQUIREMENT_KINDS:
                report.warnings.append(
                    ReportEntry(
                        "UNKNOWN_REQUIREMENT",
                        f"requirement kind {req.kind!r} treated as plain dependency",
                        node=node.name,
                    )
                )
            if req.target not in seen:
                report.errors.append(
                    ReportEntry(
                        "UNKNOWN_TARGET",
                        f"requirement {req.kind!r} targets unknown node {req.target!r}",
                        node=node.name,
                    )
                )
            elif req.kind == "host" and req.target not in compute_names:
                report.warnings.append(
                    ReportEntry(
                        "HOST_NOT_COMPUTE",
                        f"host target {req.target!r} is not a Compute node",
                        node=node.name,
                    )
                )

        if node.type in NODE_TYPES:
            try:
                props = effective_properties(node, doc)
            except MissingInput as exc:
                report.errors.append(ReportEntry("MISSING_INPUT", exc.message, node=node.name))
            else:
                _check_properties(node, props, report)

    cycle = _find_cycle_nodes(doc)
    if cycle:
        report.errors.append(
            ReportEntry("CYCLE", f"requirement cycle through nodes {cycle}")
        )

    _check_policies(doc, report)
    return report


def resolve_order(doc: TemplateDocument) -> list[str]:
    """Topological order of the requirement graph, dependencies first.

    Ties are broken by lexicographic node name so ordering is deterministic.
    Raises CycleError when called on a cyclic template.
    """
    names = doc.node_names()
    name_set = set(names)
    pending = {name: 0 for name in names}
    dependents: dict[str, list[str]] = {name: [] for name in names}
    for dependent, target in _requirement_edges(doc):
        if target in name_set:
            pending[dependent] += 1
            dependents[target].append(dependent)

    ready = [name for name in names if pending[name] == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        name = heapq.heappop(ready)
        order.append(name)
        for dep in dependents[name]:
            pending[dep] -= 1
            if pending[dep] == 0:
                heapq.heappush(ready, dep)
    if len(order) != len(names):
        stuck = sorted(name for name, count in pending.items() if count > 0)
        raise CycleError(f"requirement cycle through nodes {stuck}", detail=stuck)
    return order
