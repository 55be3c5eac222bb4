"""Registry of simulated IaaS sites: capabilities, monitoring samples, health.

Health is a total function of the last sample's age and error rate:

    no sample                          -> Unknown
    age > 120 s or error_rate > 0.5    -> Unhealthy
    0.25 < error_rate <= 0.5           -> Degraded
    otherwise                          -> Healthy
"""

from __future__ import annotations

from dataclasses import dataclass

from miniorc.errors import MiniorcError
from miniorc.resources import ResourceVector

STALENESS_WINDOW = 120.0

CAPABILITIES = frozenset(
    {"gpu", "infiniband", "spot_instances", "posix_storage", "webdav_gateway"}
)

SLA_CLASSES = ("Gold", "Silver", "Bronze")

HEALTH_LEVELS = ("Unknown", "Unhealthy", "Degraded", "Healthy")
HEALTH_ORDER = {name: i for i, name in enumerate(HEALTH_LEVELS)}


class DuplicateSite(MiniorcError):
    code = "DUPLICATE_SITE"


class UnknownSite(MiniorcError):
    code = "UNKNOWN_SITE"


class InvalidDescriptor(MiniorcError):
    code = "INVALID_DESCRIPTOR"


class InvalidSample(MiniorcError):
    code = "INVALID_SAMPLE"


class StaleSample(MiniorcError):
    code = "STALE_SAMPLE"


@dataclass(frozen=True)
class SiteDescriptor:
    site_id: str
    capacity: ResourceVector
    storage_capacity: float  # GiB
    supported_sla_classes: tuple = SLA_CLASSES
    base_cost: float = 1.0  # cost units per core-hour
    capabilities: frozenset = frozenset()
    # slice of capacity reserved for on-demand instances; the remainder is
    # only reachable by preemptible spot launches (None: everything on-demand)
    on_demand_quota: ResourceVector | None = None

    def validate(self) -> None:
        if not self.site_id or not isinstance(self.site_id, str):
            raise InvalidDescriptor("site_id must be a non-empty string")
        if not self.capacity.strictly_positive():
            raise InvalidDescriptor(
                f"site {self.site_id}: capacity must be strictly positive in every dimension"
            )
        if self.storage_capacity < 0:
            raise InvalidDescriptor(f"site {self.site_id}: storage_capacity must be >= 0")
        if not self.supported_sla_classes:
            raise InvalidDescriptor(f"site {self.site_id}: supported_sla_classes must be nonempty")
        unknown_classes = set(self.supported_sla_classes) - set(SLA_CLASSES)
        if unknown_classes:
            raise InvalidDescriptor(f"site {self.site_id}: unknown SLA classes {unknown_classes}")
        unknown_caps = set(self.capabilities) - CAPABILITIES
        if unknown_caps:
            raise InvalidDescriptor(f"site {self.site_id}: unknown capabilities {unknown_caps}")
        if self.base_cost < 0:
            raise InvalidDescriptor(f"site {self.site_id}: base_cost must be >= 0")
        if self.on_demand_quota is not None:
            if not self.on_demand_quota.nonnegative() or not self.on_demand_quota.fits(
                self.capacity
            ):
                raise InvalidDescriptor(
                    f"site {self.site_id}: on_demand_quota must sit within capacity"
                )

    def to_payload(self) -> dict:
        return {
            "site_id": self.site_id,
            "capacity": self.capacity.to_payload(),
            "storage_capacity": self.storage_capacity,
            "supported_sla_classes": list(self.supported_sla_classes),
            "base_cost": self.base_cost,
            "capabilities": sorted(self.capabilities),
            "on_demand_quota": (
                None if self.on_demand_quota is None else self.on_demand_quota.to_payload()
            ),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "SiteDescriptor":
        return cls(
            site_id=payload["site_id"],
            capacity=ResourceVector.from_payload(payload["capacity"]),
            storage_capacity=float(payload["storage_capacity"]),
            supported_sla_classes=tuple(payload.get("supported_sla_classes") or SLA_CLASSES),
            base_cost=float(payload.get("base_cost", 1.0)),
            capabilities=frozenset(payload.get("capabilities") or ()),
            on_demand_quota=(
                None
                if payload.get("on_demand_quota") is None
                else ResourceVector.from_payload(payload["on_demand_quota"])
            ),
        )


@dataclass(frozen=True)
class MonitorSample:
    site_id: str
    timestamp: float
    free: ResourceVector
    error_rate: float = 0.0
    latency_ms: float = 0.0

    def to_payload(self) -> dict:
        return {
            "site_id": self.site_id,
            "timestamp": self.timestamp,
            "free": self.free.to_payload(),
            "error_rate": self.error_rate,
            "latency_ms": self.latency_ms,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "MonitorSample":
        return cls(
            site_id=payload["site_id"],
            timestamp=float(payload["timestamp"]),
            free=ResourceVector.from_payload(payload["free"]),
            error_rate=float(payload.get("error_rate", 0.0)),
            latency_ms=float(payload.get("latency_ms", 0.0)),
        )


@dataclass(frozen=True)
class SiteState:
    descriptor: SiteDescriptor
    last_sample: MonitorSample | None
    health: str

    @property
    def site_id(self) -> str:
        return self.descriptor.site_id

    def free(self) -> ResourceVector:
        """Best known free capacity: last sample, or full capacity when unsampled."""
        if self.last_sample is None:
            return self.descriptor.capacity
        return self.last_sample.free

    def to_payload(self) -> dict:
        return {
            "descriptor": self.descriptor.to_payload(),
            "last_sample": self.last_sample.to_payload() if self.last_sample else None,
            "health": self.health,
        }


def health_of(sample: MonitorSample | None, now: float) -> str:
    if sample is None:
        return "Unknown"
    if now - sample.timestamp > STALENESS_WINDOW or sample.error_rate > 0.5:
        return "Unhealthy"
    if sample.error_rate > 0.25:
        return "Degraded"
    return "Healthy"


class Catalog:
    def __init__(self):
        self._sites: dict[str, SiteDescriptor] = {}
        self._samples: dict[str, MonitorSample] = {}

    def register_site(self, descriptor: SiteDescriptor) -> str:
        descriptor.validate()
        if descriptor.site_id in self._sites:
            raise DuplicateSite(f"site {descriptor.site_id!r} already registered")
        self._sites[descriptor.site_id] = descriptor
        return descriptor.site_id

    def descriptor(self, site_id: str) -> SiteDescriptor:
        try:
            return self._sites[site_id]
        except KeyError:
            raise UnknownSite(f"site {site_id!r} is not registered")

    def site_ids(self) -> list[str]:
        return sorted(self._sites)

    def __contains__(self, site_id: str) -> bool:
        return site_id in self._sites

    def ingest_metrics(self, sample: MonitorSample) -> None:
        descriptor = self.descriptor(sample.site_id)
        previous = self._samples.get(sample.site_id)
        if previous is not None and sample.timestamp < previous.timestamp:
            raise StaleSample(
                f"sample for {sample.site_id!r} at {sample.timestamp} precedes {previous.timestamp}"
            )
        if not (0.0 <= sample.error_rate <= 1.0):
            raise InvalidSample(f"error_rate {sample.error_rate} outside [0, 1]")
        if sample.latency_ms < 0:
            raise InvalidSample(f"latency_ms {sample.latency_ms} must be >= 0")
        if not sample.free.nonnegative() or not sample.free.fits(descriptor.capacity):
            raise InvalidSample(
                f"free {sample.free} outside [0, capacity {descriptor.capacity}]"
            )
        self._samples[sample.site_id] = sample

    def state_of(self, site_id: str, now: float) -> SiteState:
        descriptor = self.descriptor(site_id)
        sample = self._samples.get(site_id)
        return SiteState(descriptor=descriptor, last_sample=sample, health=health_of(sample, now))

    def snapshot(self, now: float) -> list[SiteState]:
        return [self.state_of(site_id, now) for site_id in sorted(self._sites)]

    def to_state(self) -> dict:
        return {
            "sites": [self._sites[s].to_payload() for s in sorted(self._sites)],
            "samples": [self._samples[s].to_payload() for s in sorted(self._samples)],
        }

    def restore(self, state: dict) -> None:
        self._sites = {}
        self._samples = {}
        for payload in state.get("sites", []):
            descriptor = SiteDescriptor.from_payload(payload)
            self._sites[descriptor.site_id] = descriptor
        for payload in state.get("samples", []):
            sample = MonitorSample.from_payload(payload)
            self._samples[sample.site_id] = sample
