"""Rule-driven site ranking.

Rule documents are line oriented; statements are separated by newlines or
semicolons, comments start with '#':

    filter health ge Degraded
    filter capability contains gpu
    score free_cpu_fraction 0.6, inverse_cost 0.4

Filters drop sites (first failing predicate is reported); survivors are
scored as the weighted sum of attributes min-max normalized across the
survivor set, so scores are comparable within one ranking only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from miniorc.catalog import CAPABILITIES, HEALTH_LEVELS, HEALTH_ORDER, SLA_CLASSES, SiteState
from miniorc.errors import MiniorcError

SCORE_ATTRIBUTES = (
    "free_cpu_fraction",
    "free_mem_fraction",
    "inverse_latency",
    "inverse_cost",
    "data_locality",
)

# comparator validity per filter attribute
FILTER_ATTRIBUTES = {
    "health": ("eq", "ge"),
    "capability": ("contains",),
    "sla_class": ("contains",),
    "free_cpu": ("eq", "ge"),
    "free_mem": ("eq", "ge"),
}

DEFAULT_RULES_TEXT = "filter health ge Degraded\nscore free_cpu_fraction 0.5, inverse_cost 0.5\n"


class RuleError(MiniorcError):
    code = "RULE_ERROR"

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason

    def to_payload(self) -> dict:
        return {"line": self.line, "reason": self.reason}


@dataclass(frozen=True)
class Predicate:
    attribute: str
    comparator: str
    value: object

    def to_payload(self) -> dict:
        return {"attribute": self.attribute, "comparator": self.comparator, "value": self.value}


@dataclass(frozen=True)
class RuleSet:
    owner: str = "default"  # "global" | "group:<name>" | "user:<account>" | "default"
    filters: tuple = ()
    score_terms: tuple = ()  # of (attribute, weight)

    def to_payload(self) -> dict:
        return {
            "owner": self.owner,
            "filters": [p.to_payload() for p in self.filters],
            "score_terms": [[a, w] for a, w in self.score_terms],
        }


@dataclass(frozen=True)
class PlacementRequest:
    """Broker-facing view of a placement: who asks and where its data already is."""

    account_id: str | None = None
    data_sites: frozenset = frozenset()


@dataclass
class RankedSites:
    ordered: list = field(default_factory=list)  # of (site_id, score)
    rejected: list = field(default_factory=list)  # of (site_id, Predicate)

    def site_ids(self) -> list[str]:
        return [site_id for site_id, _ in self.ordered]

    def to_payload(self) -> dict:
        return {
            "ordered": [[site_id, score] for site_id, score in self.ordered],
            "rejected": [[site_id, pred.to_payload()] for site_id, pred in self.rejected],
        }


def _parse_value(attribute: str, token: str, line_no: int):
    if attribute == "health":
        if token not in HEALTH_LEVELS:
            raise RuleError(line_no, f"unknown health level {token!r}")
        return token
    if attribute == "capability":
        if token not in CAPABILITIES:
            raise RuleError(line_no, f"unknown capability {token!r}")
        return token
    if attribute == "sla_class":
        if token not in SLA_CLASSES:
            raise RuleError(line_no, f"unknown SLA class {token!r}")
        return token
    try:
        return float(token)
    except ValueError:
        raise RuleError(line_no, f"{attribute} needs a numeric value, got {token!r}")


def compile_rules(text: str, owner: str = "default") -> RuleSet:
    """Compile a rule document; empty text yields the built-in default ruleset."""
    filters: list[Predicate] = []
    terms: list[tuple[str, float]] = []
    saw_statement = False
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0]
        for statement in line.split(";"):
            words = statement.split()
            if not words:
                continue
            saw_statement = True
            keyword = words[0]
            if keyword == "filter":
                if len(words) != 4:
                    raise RuleError(line_no, "filter needs: filter <attr> <cmp> <value>")
                _, attribute, comparator, value = words
                if attribute not in FILTER_ATTRIBUTES:
                    raise RuleError(line_no, f"unknown filter attribute {attribute!r}")
                if comparator not in FILTER_ATTRIBUTES[attribute]:
                    raise RuleError(
                        line_no, f"comparator {comparator!r} not valid for {attribute!r}"
                    )
                filters.append(
                    Predicate(attribute, comparator, _parse_value(attribute, value, line_no))
                )
            elif keyword == "score":
                rest = " ".join(words[1:])
                if not rest.strip():
                    raise RuleError(line_no, "score needs at least one '<attr> <weight>' term")
                for chunk in rest.split(","):
                    pair = chunk.split()
                    if len(pair) != 2:
                        raise RuleError(line_no, f"bad score term {chunk.strip()!r}")
                    attribute, weight_token = pair
                    if attribute not in SCORE_ATTRIBUTES:
                        raise RuleError(line_no, f"unknown score attribute {attribute!r}")
                    try:
                        weight = float(weight_token)
                    except ValueError:
                        raise RuleError(line_no, f"weight must be a number, got {weight_token!r}")
                    if not math.isfinite(weight):
                        raise RuleError(line_no, "weight must be finite")
                    terms.append((attribute, weight))
            else:
                raise RuleError(line_no, f"unknown statement {keyword!r}")
    if not saw_statement:
        return compile_rules(DEFAULT_RULES_TEXT, owner=owner)
    return RuleSet(owner=owner, filters=tuple(filters), score_terms=tuple(terms))


def _attribute_value(site: SiteState, attribute: str, request: PlacementRequest) -> float:
    sample = site.last_sample
    capacity = site.descriptor.capacity
    if attribute == "free_cpu_fraction":
        if sample is None or capacity.cpu == 0:
            return 0.0
        return float(sample.free.cpu / capacity.cpu)
    if attribute == "free_mem_fraction":
        if sample is None or capacity.mem == 0:
            return 0.0
        return float(sample.free.mem / capacity.mem)
    if attribute == "inverse_latency":
        latency = sample.latency_ms if sample is not None else float("inf")
        return 0.0 if latency == float("inf") else 1.0 / (1.0 + latency)
    if attribute == "inverse_cost":
        return 1.0 / (1.0 + site.descriptor.base_cost)
    if attribute == "data_locality":
        return 1.0 if site.site_id in request.data_sites else 0.0
    raise MiniorcError(f"unknown score attribute {attribute!r}")


def _passes(site: SiteState, pred: Predicate) -> bool:
    if pred.attribute == "health":
        if pred.comparator == "eq":
            return site.health == pred.value
        return HEALTH_ORDER[site.health] >= HEALTH_ORDER[pred.value]
    if pred.attribute == "capability":
        return pred.value in site.descriptor.capabilities
    if pred.attribute == "sla_class":
        return pred.value in site.descriptor.supported_sla_classes
    free = site.last_sample.free if site.last_sample else None
    actual = 0.0
    if pred.attribute == "free_cpu":
        actual = float(free.cpu) if free else 0.0
    elif pred.attribute == "free_mem":
        actual = float(free.mem) if free else 0.0
    if pred.comparator == "eq":
        return actual == pred.value
    return actual >= pred.value


def rank(sites: list[SiteState], request: PlacementRequest, rules: RuleSet) -> RankedSites:
    """Filter then score sites; every input site lands in ordered or rejected."""
    result = RankedSites()
    survivors: list[SiteState] = []
    for site in sites:
        failed = next((p for p in rules.filters if not _passes(site, p)), None)
        if failed is not None:
            result.rejected.append((site.site_id, failed))
        else:
            survivors.append(site)
    if not survivors:
        return result

    raw: dict[str, dict[str, float]] = {}
    for site in survivors:
        raw[site.site_id] = {
            attr: _attribute_value(site, attr, request) for attr, _ in rules.score_terms
        }

    spans = {}
    for attr, _ in rules.score_terms:
        values = [raw[s.site_id][attr] for s in survivors]
        spans[attr] = (min(values), max(values))

    def normalized(site_id: str, attr: str) -> float:
        low, high = spans[attr]
        if high == low:
            return 1.0
        return (raw[site_id][attr] - low) / (high - low)

    scored = []
    for site in survivors:
        score = sum(w * normalized(site.site_id, attr) for attr, w in rules.score_terms)
        scored.append((site.site_id, score, site.descriptor.base_cost))
    scored.sort(key=lambda item: (-item[1], item[2], item[0]))
    result.ordered = [(site_id, score) for site_id, score, _ in scored]
    return result


class RuleStore:
    """Per-owner rule documents; resolution picks the most specific ruleset."""

    def __init__(self):
        self._texts: dict[str, str] = {}

    def put(self, owner: str, text: str) -> RuleSet:
        ruleset = compile_rules(text, owner=owner)
        self._texts[owner] = text
        return ruleset

    def text_of(self, owner: str) -> str | None:
        return self._texts.get(owner)

    def resolve(self, account_id: str | None, groups=()) -> RuleSet:
        if account_id is not None:
            owner = f"user:{account_id}"
            if owner in self._texts:
                return compile_rules(self._texts[owner], owner=owner)
        for group in sorted(groups):
            owner = f"group:{group}"
            if owner in self._texts:
                return compile_rules(self._texts[owner], owner=owner)
        if "global" in self._texts:
            return compile_rules(self._texts["global"], owner="global")
        return compile_rules("", owner="default")

    def to_state(self) -> dict:
        return {"texts": dict(sorted(self._texts.items()))}

    def restore(self, state: dict) -> None:
        self._texts = dict(state.get("texts", {}))
