"""Template parsing, validation, and dependency-order tests."""

from __future__ import annotations

import itertools
import json
from pathlib import Path

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fuzz_documents
from miniorc.tosca import (
    CycleError,
    NodeTemplate,
    ParseError,
    Requirement,
    TemplateDocument,
    ValidationReport,
    parse_template,
    resolve_order,
    serialize_template,
    validate,
)

CORPUS = Path(__file__).resolve().parent.parent / "corpus" / "tosca"


def report_pairs(entries):
    return sorted(((e.code, e.node) for e in entries), key=lambda p: (p[0], p[1] or ""))


def expected_pairs(raw):
    return sorted(((code, node) for code, node in raw), key=lambda p: (p[0], p[1] or ""))


@pytest.mark.parametrize(
    "template_path", sorted(CORPUS.glob("*.yaml")), ids=lambda p: p.stem
)
def test_golden_corpus(template_path):
    expected = json.loads(template_path.with_suffix("").with_suffix(".expected.json").read_text())
    text = template_path.read_text()
    if expected["kind"] == "parse_error":
        with pytest.raises(ParseError) as err:
            parse_template(text)
        assert err.value.code == expected["code"]
        if "line" in expected:
            assert err.value.line == expected["line"]
        return
    doc = parse_template(text)
    report = validate(doc)
    assert report.deployable == expected["deployable"]
    assert report_pairs(report.errors) == expected_pairs(expected["errors"])
    assert report_pairs(report.warnings) == expected_pairs(expected["warnings"])
    if expected["order"] is not None:
        assert resolve_order(doc) == expected["order"]


def test_minimal_compute_shape():
    doc = parse_template("node_templates:\n  vm1:\n    type: Compute\n    properties: {cpu: 2, memory: 4}\n")
    assert len(doc.node_templates) == 1
    node = doc.node("vm1")
    assert node.type == "Compute"
    assert node.properties == {"cpu": 2, "memory": 4}
    assert node.requirements == []


def test_single_edge_shape():
    doc = parse_template(
        "node_templates:\n"
        "  app:\n"
        "    type: SoftwareComponent\n"
        "    requirements: [{host: vm1}]\n"
        "  vm1:\n"
        "    type: Compute\n"
        "    properties: {cpu: 1, memory: 1}\n"
    )
    assert doc.node_names() == ["app", "vm1"]
    assert doc.node("app").requirements == [Requirement(kind="host", target="vm1")]


def test_size_cap():
    filler = "# " + "x" * (1 << 20) + "\nnode_templates: {}\n"
    with pytest.raises(ParseError) as err:
        parse_template(filler)
    assert err.value.code == "TEMPLATE_TOO_LARGE"


def all_valid_orders(doc: TemplateDocument) -> list[list[str]]:
    """Oracle: every permutation that respects each requirement edge."""
    names = doc.node_names()
    edges = [(n.name, r.target) for n in doc.node_templates for r in n.requirements]
    valid = []
    for perm in itertools.permutations(names):
        pos = {name: i for i, name in enumerate(perm)}
        if all(pos[target] < pos[dependent] for dependent, target in edges):
            valid.append(list(perm))
    return valid


def test_diamond_order_matches_bruteforce():
    doc = parse_template((CORPUS / "diamond.yaml").read_text())
    valid = all_valid_orders(doc)
    assert resolve_order(doc) == min(valid) == ["d", "b", "c", "a"]


def test_independent_nodes_lexicographic():
    doc = TemplateDocument(
        node_templates=[
            NodeTemplate(name="b", type="Compute", properties={"cpu": 1, "memory": 1}),
            NodeTemplate(name="a", type="Compute", properties={"cpu": 1, "memory": 1}),
        ]
    )
    assert resolve_order(doc) == ["a", "b"]


def test_cycle_error():
    doc = parse_template((CORPUS / "dependency_cycle.yaml").read_text())
    with pytest.raises(CycleError) as err:
        resolve_order(doc)
    assert err.value.detail == ["a", "b"]


@st.composite
def random_dags(draw):
    n = draw(st.integers(min_value=1, max_value=6))
    letters = draw(st.permutations([chr(ord("a") + i) for i in range(n)]))
    nodes = []
    for i, name in enumerate(letters):
        # Edges only point at earlier nodes, so the graph is acyclic by construction.
        targets = draw(st.lists(st.sampled_from(letters[:i] or [name]), max_size=3, unique=True))
        reqs = [Requirement(kind="dependency", target=t) for t in targets if t != name]
        nodes.append(NodeTemplate(name=name, type="SoftwareComponent", requirements=reqs))
    return TemplateDocument(node_templates=nodes)


@settings(max_examples=120, deadline=None)
@given(random_dags())
def test_order_is_smallest_valid_permutation(doc):
    order = resolve_order(doc)
    valid = all_valid_orders(doc)
    assert sorted(order) == sorted(doc.node_names())
    assert order == min(valid)


_name = st.from_regex(r"[a-z][a-z0-9_]{0,7}", fullmatch=True)
_scalar = st.one_of(
    st.integers(min_value=-10**6, max_value=10**6),
    st.booleans(),
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.text(alphabet="abcdefgh -_.:XYZ0123456789", max_size=12),
)


@st.composite
def template_texts(draw):
    names = draw(st.lists(_name, min_size=1, max_size=5, unique=True))
    node_templates = {}
    for i, name in enumerate(names):
        spec = {}
        if draw(st.booleans()):
            spec["type"] = draw(
                st.sampled_from(
                    ["Compute", "tosca.nodes.Compute", "BatchJob", "custom.odd.Thing"]
                )
            )
        props = draw(st.dictionaries(_name, _scalar, max_size=4))
        if props:
            spec["properties"] = props
        if i and draw(st.booleans()):
            kinds = draw(
                st.lists(st.sampled_from(["host", "dependency", "data", "weird"]), max_size=2)
            )
            spec["requirements"] = [
                {kind: draw(st.sampled_from(names[:i]))} for kind in kinds
            ]
        if draw(st.booleans()):
            spec["unhandled_section"] = draw(_scalar)
        node_templates[name] = spec

    body = {"node_templates": node_templates}
    if draw(st.booleans()):
        body["inputs"] = draw(
            st.dictionaries(
                _name,
                st.fixed_dictionaries({"type": st.sampled_from(["string", "integer"])},
                                      optional={"default": _scalar}),
                max_size=2,
            )
        )
    if draw(st.booleans()):
        body["outputs"] = draw(st.dictionaries(_name, _scalar, max_size=2))
    if draw(st.booleans()):
        body["policies"] = [
            {draw(st.sampled_from(["sla_class", "scenario_hint", "locality", "odd"])): draw(_scalar)}
        ]
    doc = {"topology_template": body} if draw(st.booleans()) else body
    if draw(st.booleans()):
        doc["tosca_definitions_version"] = "tosca_simple_yaml_1_0"
    if draw(st.booleans()):
        doc["stray_top_level"] = draw(_scalar)
    return yaml.safe_dump(doc, sort_keys=False)


@settings(max_examples=150, deadline=None)
@given(template_texts())
def test_parse_serialize_parse_identity(text):
    first = parse_template(text)
    second = parse_template(serialize_template(first))
    assert first == second
    assert serialize_template(first) == serialize_template(second)


@settings(max_examples=60, deadline=None)
@given(template_texts())
def test_validate_is_pure(text):
    doc = parse_template(text)
    assert validate(doc).to_payload() == validate(doc).to_payload()


def test_quick_fuzz_never_crashes():
    for text in fuzz_documents(20_000, seed=7):
        try:
            doc = parse_template(text)
        except ParseError:
            continue
        assert isinstance(validate(doc), ValidationReport)
