"""TOSCA simple-profile subset: parsing, validation, deployment ordering."""

from miniorc.tosca.model import (
    DeploymentPolicy,
    InputDef,
    NodeTemplate,
    Requirement,
    TemplateDocument,
    ValidationReport,
    NODE_TYPES,
    POLICY_KINDS,
    REQUIREMENT_KINDS,
)
from miniorc.tosca.parser import MAX_TEMPLATE_BYTES, ParseError, parse_template, serialize_template
from miniorc.tosca.validation import CycleError, effective_properties, resolve_order, validate

__all__ = [
    "DeploymentPolicy",
    "InputDef",
    "NodeTemplate",
    "Requirement",
    "TemplateDocument",
    "ValidationReport",
    "NODE_TYPES",
    "POLICY_KINDS",
    "REQUIREMENT_KINDS",
    "MAX_TEMPLATE_BYTES",
    "ParseError",
    "parse_template",
    "serialize_template",
    "CycleError",
    "effective_properties",
    "resolve_order",
    "validate",
]
