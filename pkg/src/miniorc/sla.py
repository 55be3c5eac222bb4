"""SLA negotiation and enforcement.

Service classes carry concrete, observable semantics in the simulator:

    Gold   - may preempt spot instances; datasets replicated to >= 2 sites
    Silver - no preemption rights; datasets replicated to >= 2 sites
    Bronze - no preemption; single replica; may run on preemptible spot capacity

Every SLA runs for a fixed 30-day term from negotiation.
"""

from __future__ import annotations

from dataclasses import dataclass

from miniorc.catalog import Catalog
from miniorc.errors import MiniorcError

SLA_TERM_SECONDS = 30 * 24 * 3600.0
DEFAULT_CLASS = "Bronze"

CLASS_SEMANTICS = {
    "Gold": {"preempt_spot": True, "replication_min": 2, "spot_eligible": False},
    "Silver": {"preempt_spot": False, "replication_min": 2, "spot_eligible": False},
    "Bronze": {"preempt_spot": False, "replication_min": 1, "spot_eligible": True},
}


class UnsupportedClass(MiniorcError):
    code = "UNSUPPORTED_CLASS"


class InvalidCaps(MiniorcError):
    code = "INVALID_CAPS"


class UnknownSLA(MiniorcError):
    code = "UNKNOWN_SLA"


@dataclass(frozen=True)
class SLARecord:
    sla_id: str
    account_id: str
    site_id: str
    sla_class: str
    max_cores: float
    max_storage: float  # GiB
    valid_until: float

    def to_payload(self) -> dict:
        return {
            "sla_id": self.sla_id,
            "account_id": self.account_id,
            "site_id": self.site_id,
            "sla_class": self.sla_class,
            "max_cores": self.max_cores,
            "max_storage": self.max_storage,
            "valid_until": self.valid_until,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "SLARecord":
        return cls(
            sla_id=payload["sla_id"],
            account_id=payload["account_id"],
            site_id=payload["site_id"],
            sla_class=payload["sla_class"],
            max_cores=float(payload["max_cores"]),
            max_storage=float(payload["max_storage"]),
            valid_until=float(payload["valid_until"]),
        )


@dataclass(frozen=True)
class QoSProfile:
    account_id: str
    site_classes: dict  # site_id -> class
    default_class: str = DEFAULT_CLASS

    def class_at(self, site_id: str) -> str:
        return self.site_classes.get(site_id, self.default_class)

    def best_class(self) -> str:
        """Highest class held anywhere; Gold > Silver > Bronze."""
        for name in ("Gold", "Silver"):
            if name in self.site_classes.values():
                return name
        return DEFAULT_CLASS

    def to_payload(self) -> dict:
        return {
            "account_id": self.account_id,
            "site_classes": dict(sorted(self.site_classes.items())),
            "default_class": self.default_class,
        }


@dataclass(frozen=True)
class Violation:
    bound: str  # expired | max_cores | max_storage
    message: str

    def to_payload(self) -> dict:
        return {"bound": self.bound, "message": self.message}


class SLAManager:
    def __init__(self, catalog: Catalog):
        self._catalog = catalog
        self._records: dict[str, SLARecord] = {}  # sla_id -> record
        self._active: dict[tuple[str, str], str] = {}  # (account, site) -> sla_id
        self._counter = 0

    def negotiate(
        self,
        account_id: str,
        site_id: str,
        requested_class: str,
        max_cores: float,
        max_storage: float,
        now: float,
    ) -> SLARecord:
        descriptor = self._catalog.descriptor(site_id)
        if requested_class not in CLASS_SEMANTICS:
            raise UnsupportedClass(f"unknown SLA class {requested_class!r}")
        if requested_class not in descriptor.supported_sla_classes:
            raise UnsupportedClass(
                f"site {site_id!r} supports {list(descriptor.supported_sla_classes)}, "
                f"not {requested_class!r}"
            )
        if max_cores < 1:
            raise InvalidCaps(f"max_cores must be >= 1, got {max_cores}")
        if max_storage < 0:
            raise InvalidCaps(f"max_storage must be >= 0, got {max_storage}")
        self._counter += 1
        record = SLARecord(
            sla_id=f"sla-{self._counter:04d}",
            account_id=account_id,
            site_id=site_id,
            sla_class=requested_class,
            max_cores=float(max_cores),
            max_storage=float(max_storage),
            valid_until=now + SLA_TERM_SECONDS,
        )
        # Renegotiation supersedes: exactly one active record per (account, site).
        old = self._active.get((account_id, site_id))
        if old is not None:
            del self._records[old]
        self._records[record.sla_id] = record
        self._active[(account_id, site_id)] = record.sla_id
        return record

    def get(self, sla_id: str) -> SLARecord:
        try:
            return self._records[sla_id]
        except KeyError:
            raise UnknownSLA(f"no SLA {sla_id!r}")

    def active_for(self, account_id: str, site_id: str, now: float) -> SLARecord | None:
        sla_id = self._active.get((account_id, site_id))
        if sla_id is None:
            return None
        record = self._records[sla_id]
        return record if now <= record.valid_until else None

    def list_for(self, account_id: str) -> list[SLARecord]:
        return sorted(
            (r for r in self._records.values() if r.account_id == account_id),
            key=lambda r: r.sla_id,
        )

    def qos_of(self, account_id: str, now: float) -> QoSProfile:
        site_classes = {}
        for record in self._records.values():
            if record.account_id == account_id and now <= record.valid_until:
                site_classes[record.site_id] = record.sla_class
        return QoSProfile(account_id=account_id, site_classes=site_classes)

    @staticmethod
    def check(sla: SLARecord, *, cores: float, storage: float, now: float) -> Violation | None:
        """None when the placement fits the SLA, else the first violated bound."""
        if now > sla.valid_until:
            return Violation("expired", f"SLA {sla.sla_id} expired at {sla.valid_until}")
        if cores > sla.max_cores:
            return Violation("max_cores", f"asked {cores} cores > cap {sla.max_cores}")
        if storage > sla.max_storage:
            return Violation("max_storage", f"asked {storage} GiB > cap {sla.max_storage}")
        return None

    def to_state(self) -> dict:
        return {
            "records": [self._records[k].to_payload() for k in sorted(self._records)],
            "counter": self._counter,
        }

    def restore(self, state: dict) -> None:
        self._records = {}
        self._active = {}
        self._counter = int(state.get("counter", 0))
        for payload in state.get("records", []):
            record = SLARecord.from_payload(payload)
            self._records[record.sla_id] = record
            self._active[(record.account_id, record.site_id)] = record.sla_id
