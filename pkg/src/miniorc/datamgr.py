"""Logical data spaces, per-site replicas, and adaptive third-party transfers.

Datasets are immutable file lists registered into named spaces. Replicas
track which sites hold how much of a dataset; a federated namespace merges
per-space listings without any extra catalog state. Transfers move bytes
between sites over modeled links: each link turns a stream count into a
throughput (with per-stream efficiency decay and an optional hard capacity),
and the engine adjusts stream counts by windowed hill-climbing on achieved
throughput. Byte accounting is exact rational arithmetic end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from miniorc.catalog import Catalog, UnknownSite
from miniorc.errors import MiniorcError
from miniorc.resources import fraction_repr, to_fraction

GIB = 2**30

ACCESS_LATENCIES = ("online", "nearline")
RETENTIONS = ("replicated", "single")
TRANSFER_STATES = ("Queued", "Active", "Done", "Failed")

HISTORY_LIMIT = 200


class UnknownSpace(MiniorcError):
    code = "UNKNOWN_SPACE"


class DuplicateSpace(MiniorcError):
    code = "DUPLICATE_SPACE"


class UnknownDataset(MiniorcError):
    code = "UNKNOWN_DATASET"


class EmptyDataset(MiniorcError):
    code = "EMPTY_DATASET"


class DuplicatePath(MiniorcError):
    code = "DUPLICATE_PATH"


class SourceIncomplete(MiniorcError):
    code = "SOURCE_INCOMPLETE"


class NoEligibleSite(MiniorcError):
    code = "NO_ELIGIBLE_SITE"


class BadTransfer(MiniorcError):
    code = "BAD_TRANSFER"


class UnknownTransfer(MiniorcError):
    code = "UNKNOWN_TRANSFER"


@dataclass(frozen=True)
class StorageQoS:
    access_latency: str = "online"
    retention: str = "single"
    replication_min: int = 1

    def validate(self) -> None:
        if self.access_latency not in ACCESS_LATENCIES:
            raise MiniorcError(
                f"access_latency must be one of {ACCESS_LATENCIES}", code="BAD_QOS"
            )
        if self.retention not in RETENTIONS:
            raise MiniorcError(f"retention must be one of {RETENTIONS}", code="BAD_QOS")
        if self.replication_min < 1:
            raise MiniorcError("replication_min must be >= 1", code="BAD_QOS")
        if self.retention == "replicated" and self.replication_min < 2:
            raise MiniorcError(
                "replicated retention needs replication_min >= 2", code="BAD_QOS"
            )

    def to_payload(self) -> dict:
        return {
            "access_latency": self.access_latency,
            "retention": self.retention,
            "replication_min": self.replication_min,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "StorageQoS":
        qos = cls(
            access_latency=payload.get("access_latency", "online"),
            retention=payload.get("retention", "single"),
            replication_min=int(payload.get("replication_min", 1)),
        )
        qos.validate()
        return qos


def qos_for_class(sla_class: str) -> StorageQoS:
    """Storage expectations implied by a service class."""
    if sla_class in ("Gold", "Silver"):
        return StorageQoS("online", "replicated", 2)
    return StorageQoS("nearline", "single", 1)


@dataclass(frozen=True)
class FileEntry:
    path: str
    size: int
    checksum: str

    def to_payload(self) -> dict:
        return {"path": self.path, "size": self.size, "checksum": self.checksum}


@dataclass
class Dataset:
    dataset_id: str
    space: str
    owner: str
    files: tuple

    def total_size(self) -> int:
        return sum(f.size for f in self.files)

    def to_payload(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "space": self.space,
            "owner": self.owner,
            "files": [f.to_payload() for f in self.files],
            "total_size": self.total_size(),
        }


@dataclass
class Replica:
    dataset_id: str
    site_id: str
    completeness: Fraction
    qos: StorageQoS

    def is_complete(self) -> bool:
        return self.completeness == 1

    def to_payload(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "site_id": self.site_id,
            "completeness": fraction_repr(self.completeness),
            "completeness_float": float(self.completeness),
            "complete": self.is_complete(),
            "qos": self.qos.to_payload(),
        }


@dataclass(frozen=True)
class Link:
    """Connectivity between two sites.

    ``rate`` is the single-stream throughput in bytes/s; extra streams help
    with diminishing returns: throughput(s) = rate*s / (1 + efficiency*(s-1)),
    hard-limited by ``capacity`` when set.
    """

    rate: Fraction
    capacity: Fraction | None = None
    efficiency: Fraction = Fraction(1, 5)

    def throughput(self, streams: int) -> Fraction:
        streams = max(1, int(streams))
        return self.rate * streams / (1 + self.efficiency * (streams - 1))

    def capped(self, demand: Fraction) -> Fraction:
        if self.capacity is None:
            return demand
        return min(demand, self.capacity)


@dataclass
class TransferJob:
    job_id: str
    dataset_id: str
    src_site: str
    dst_site: str
    total_bytes: int
    files: tuple
    state: str = "Queued"
    streams: int = 2
    bytes_moved: Fraction = Fraction(0)
    created_at: float = 0.0
    finished_at: float | None = None
    failure: str | None = None
    direction: int = 1
    window_bytes: Fraction = Fraction(0)
    window_seconds: Fraction = Fraction(0)
    window_ticks: int = 0
    prev_window_rate: Fraction | None = None
    tick_count: int = 0
    throughput_history: list = field(default_factory=list)

    def remaining(self) -> Fraction:
        return Fraction(self.total_bytes) - self.bytes_moved

    def progress(self) -> Fraction:
        if self.total_bytes == 0:
            return Fraction(1)
        return self.bytes_moved / self.total_bytes

    def to_payload(self) -> dict:
        return {
            "job_id": self.job_id,
            "dataset_id": self.dataset_id,
            "src_site": self.src_site,
            "dst_site": self.dst_site,
            "total_bytes": self.total_bytes,
            "files": [f.to_payload() for f in self.files],
            "state": self.state,
            "streams": self.streams,
            "bytes_moved": fraction_repr(self.bytes_moved),
            "bytes_moved_float": float(self.bytes_moved),
            "created_at": self.created_at,
            "finished_at": self.finished_at,
            "failure": self.failure,
            "direction": self.direction,
            "window_bytes": fraction_repr(self.window_bytes),
            "window_seconds": fraction_repr(self.window_seconds),
            "window_ticks": self.window_ticks,
            "prev_window_rate": (
                None if self.prev_window_rate is None else fraction_repr(self.prev_window_rate)
            ),
            "tick_count": self.tick_count,
            "throughput_history": list(self.throughput_history),
        }


class DataManager:
    def __init__(
        self,
        catalog: Catalog,
        window_ticks: int = 5,
        initial_streams: int = 2,
        max_streams: int = 32,
        default_link: Link | None = None,
        link_pairs: dict | None = None,
        ranker=None,
    ):
        self.catalog = catalog
        self.window_ticks = int(window_ticks)
        self.initial_streams = int(initial_streams)
        self.max_streams = int(max_streams)
        self.default_link = default_link or Link(rate=Fraction(10_000_000))
        self.link_pairs = dict(link_pairs or {})  # (src, dst) -> Link
        self.ranker = ranker  # callable(site_ids, owner) -> ordered site ids
        self.spaces: dict[str, dict] = {}
        self.datasets: dict[str, Dataset] = {}
        self.replicas: dict[tuple, Replica] = {}  # (dataset_id, site_id)
        self.transfers: dict[str, TransferJob] = {}
        self._dataset_counter = 0
        self._transfer_counter = 0

    # -- spaces and datasets -------------------------------------------------

    def create_space(self, name: str, owner: str) -> None:
        if not name or not isinstance(name, str):
            raise MiniorcError("space name must be a non-empty string", code="BAD_SPACE")
        if name in self.spaces:
            raise DuplicateSpace(f"space {name!r} already exists")
        self.spaces[name] = {"owner": owner}

    def add_dataset(
        self,
        space: str,
        files,
        owner: str,
        dataset_id: str | None = None,
    ) -> str:
        if space not in self.spaces:
            raise UnknownSpace(f"no space {space!r}")
        entries = []
        seen: set[str] = set()
        for item in files:
            if isinstance(item, FileEntry):
                entry = item
            else:
                entry = FileEntry(
                    path=str(item["path"]),
                    size=int(item["size"]),
                    checksum=str(item.get("checksum", "")),
                )
            if entry.size <= 0:
                raise MiniorcError(
                    f"file {entry.path!r} must have positive size", code="BAD_FILE"
                )
            if entry.path in seen:
                raise DuplicatePath(f"path {entry.path!r} appears twice")
            seen.add(entry.path)
            entries.append(entry)
        if not entries:
            raise EmptyDataset("dataset needs at least one file")
        if dataset_id is None:
            self._dataset_counter += 1
            dataset_id = f"ds-{self._dataset_counter:04d}"
        if dataset_id in self.datasets:
            raise MiniorcError(f"dataset {dataset_id!r} exists", code="DUPLICATE_DATASET")
        self.datasets[dataset_id] = Dataset(
            dataset_id=dataset_id, space=space, owner=owner, files=tuple(entries)
        )
        return dataset_id

    def get_dataset(self, dataset_id: str) -> Dataset:
        dataset = self.datasets.get(dataset_id)
        if dataset is None:
            raise UnknownDataset(f"no dataset {dataset_id!r}")
        return dataset

    # -- replicas --------------------------------------------------------------

    def add_replica(
        self,
        dataset_id: str,
        site_id: str,
        completeness=1,
        qos: StorageQoS | None = None,
    ) -> Replica:
        self.get_dataset(dataset_id)
        if site_id not in self.catalog:
            raise UnknownSite(f"no site {site_id!r}")
        fraction = to_fraction(completeness)
        if not 0 <= fraction <= 1:
            raise MiniorcError("completeness must be within [0, 1]", code="BAD_REPLICA")
        qos = qos or StorageQoS()
        qos.validate()
        replica = Replica(
            dataset_id=dataset_id, site_id=site_id, completeness=fraction, qos=qos
        )
        self.replicas[(dataset_id, site_id)] = replica
        return replica

    def drop_replica(self, dataset_id: str, site_id: str) -> None:
        self.replicas.pop((dataset_id, site_id), None)

    def locate(self, dataset_id: str) -> list[Replica]:
        self.get_dataset(dataset_id)
        found = [r for (d, _), r in self.replicas.items() if d == dataset_id]
        found.sort(key=lambda r: (-r.completeness, r.site_id))
        return found

    def complete_sites(self, dataset_id: str) -> list[str]:
        return [r.site_id for r in self.locate(dataset_id) if r.is_complete()]

    def federated_namespace(self, spaces) -> list[dict]:
        """Merged listing across spaces; no catalog is kept beyond replicas."""
        wanted = set(spaces)
        merged: dict[tuple, dict] = {}
        for dataset_id in sorted(self.datasets):
            dataset = self.datasets[dataset_id]
            if dataset.space not in wanted:
                continue
            sites = set(self.complete_sites(dataset_id))
            for entry in dataset.files:
                key = (dataset.space, entry.path)
                slot = merged.setdefault(
                    key,
                    {"path": f"{dataset.space}/{entry.path}", "size": entry.size, "sites": set()},
                )
                slot["sites"] |= sites
        out = []
        for key in sorted(merged):
            slot = merged[key]
            out.append(
                {"path": slot["path"], "size": slot["size"], "sites": sorted(slot["sites"])}
            )
        return out

    # -- transfers ----------------------------------------------------------------

    def link_for(self, src_site: str, dst_site: str) -> Link:
        return self.link_pairs.get((src_site, dst_site), self.default_link)

    def get_transfer(self, job_id: str) -> TransferJob:
        job = self.transfers.get(job_id)
        if job is None:
            raise UnknownTransfer(f"no transfer {job_id!r}")
        return job

    def in_flight(self, dataset_id: str, dst_site: str) -> TransferJob | None:
        for job in self.transfers.values():
            if (
                job.dataset_id == dataset_id
                and job.dst_site == dst_site
                and job.state in ("Queued", "Active")
            ):
                return job
        return None

    def cancel_transfer(self, job_id: str, now: float = 0.0) -> TransferJob:
        """Abort an in-flight transfer; finished jobs are left untouched."""
        job = self.get_transfer(job_id)
        if job.state in ("Queued", "Active"):
            job.state = "Failed"
            job.failure = "cancelled"
            job.finished_at = now
        return job

    def schedule_transfer(
        self, dataset_id: str, src_site: str, dst_site: str, now: float = 0.0
    ) -> TransferJob:
        dataset = self.get_dataset(dataset_id)
        for site_id in (src_site, dst_site):
            if site_id not in self.catalog:
                raise UnknownSite(f"no site {site_id!r}")
        if src_site == dst_site:
            raise BadTransfer("source and destination are the same site")
        existing = self.in_flight(dataset_id, dst_site)
        if existing is not None:
            return existing
        src = self.replicas.get((dataset_id, src_site))
        if src is None or not src.is_complete():
            raise SourceIncomplete(
                f"site {src_site!r} does not hold a complete replica of {dataset_id!r}"
            )
        self._transfer_counter += 1
        job = TransferJob(
            job_id=f"xfer-{self._transfer_counter:04d}",
            dataset_id=dataset_id,
            src_site=src_site,
            dst_site=dst_site,
            total_bytes=dataset.total_size(),
            files=dataset.files,
            streams=self.initial_streams,
            created_at=now,
        )
        self.transfers[job.job_id] = job
        return job

    def tick_transfers(self, now: float, dt) -> list[dict]:
        dt = to_fraction(dt)
        if dt <= 0:
            raise MiniorcError("dt must be positive", code="BAD_TICK")
        events: list[dict] = []
        active: list[TransferJob] = []
        for job_id in sorted(self.transfers):
            job = self.transfers[job_id]
            if job.state == "Queued":
                job.state = "Active"
                events.append({"job_id": job.job_id, "event": "activated"})
            if job.state == "Active":
                active.append(job)
        # per-link proportional sharing against hard capacities
        by_link: dict[tuple, list[TransferJob]] = {}
        for job in active:
            by_link.setdefault((job.src_site, job.dst_site), []).append(job)
        rates: dict[str, Fraction] = {}
        for (src, dst), jobs in by_link.items():
            link = self.link_for(src, dst)
            demands = {job.job_id: link.throughput(job.streams) for job in jobs}
            total = sum(demands.values())
            if link.capacity is not None and total > link.capacity:
                factor = link.capacity / total
                demands = {jid: d * factor for jid, d in demands.items()}
            rates.update(demands)
        for job in active:
            moved = min(job.remaining(), rates[job.job_id] * dt)
            job.bytes_moved += moved
            job.tick_count += 1
            achieved = moved / dt
            job.throughput_history.append((job.tick_count, float(achieved)))
            if len(job.throughput_history) > HISTORY_LIMIT:
                del job.throughput_history[: len(job.throughput_history) - HISTORY_LIMIT]
            job.window_bytes += moved
            job.window_seconds += dt
            job.window_ticks += 1
            self._sync_replica(job)
            if job.remaining() == 0:
                self._complete(job, now, events)
                continue
            if job.window_ticks >= self.window_ticks:
                self._adjust_streams(job)
            events.append(
                {
                    "job_id": job.job_id,
                    "event": "progress",
                    "bytes_moved": float(job.bytes_moved),
                    "streams": job.streams,
                }
            )
        return events

    def _sync_replica(self, job: TransferJob) -> None:
        src = self.replicas.get((job.dataset_id, job.src_site))
        qos = src.qos if src is not None else StorageQoS()
        key = (job.dataset_id, job.dst_site)
        replica = self.replicas.get(key)
        if replica is None:
            replica = Replica(
                dataset_id=job.dataset_id,
                site_id=job.dst_site,
                completeness=Fraction(0),
                qos=qos,
            )
            self.replicas[key] = replica
        if not replica.is_complete():
            replica.completeness = job.progress()

    def _complete(self, job: TransferJob, now: float, events: list) -> None:
        dataset = self.datasets.get(job.dataset_id)
        if dataset is None or tuple(dataset.files) != tuple(job.files):
            job.state = "Failed"
            job.failure = "checksum mismatch against the dataset of record"
            job.finished_at = now
            events.append({"job_id": job.job_id, "event": "failed", "reason": job.failure})
            return
        job.state = "Done"
        job.finished_at = now
        replica = self.replicas[(job.dataset_id, job.dst_site)]
        replica.completeness = Fraction(1)
        events.append(
            {
                "job_id": job.job_id,
                "event": "done",
                "bytes_moved": float(job.bytes_moved),
                "dst_site": job.dst_site,
            }
        )

    def _adjust_streams(self, job: TransferJob) -> None:
        rate = job.window_bytes / job.window_seconds
        if job.prev_window_rate is not None:
            if rate > job.prev_window_rate:
                pass  # keep climbing the same way
            elif rate < job.prev_window_rate:
                job.direction = -job.direction
            else:
                job.direction = -1  # plateau: fewer streams do the same work
        job.prev_window_rate = rate
        job.streams = min(self.max_streams, max(1, job.streams + job.direction))
        job.window_bytes = Fraction(0)
        job.window_seconds = Fraction(0)
        job.window_ticks = 0

    # -- QoS enforcement -----------------------------------------------------------

    def storage_used(self, site_id: str) -> Fraction:
        """Bytes occupied at a site by all (possibly partial) replicas."""
        used = Fraction(0)
        for (dataset_id, holder), replica in self.replicas.items():
            if holder == site_id:
                used += replica.completeness * self.datasets[dataset_id].total_size()
        return used

    def storage_headroom(self, site_id: str) -> Fraction:
        descriptor = self.catalog.descriptor(site_id)
        return to_fraction(descriptor.storage_capacity) * GIB - self.storage_used(site_id)

    def enforce_qos(
        self,
        dataset_id: str,
        replication_min: int | None = None,
        now: float = 0.0,
    ) -> list[TransferJob]:
        dataset = self.get_dataset(dataset_id)
        replicas = self.locate(dataset_id)
        complete = [r for r in replicas if r.is_complete()]
        if not complete:
            raise SourceIncomplete(f"dataset {dataset_id!r} has no complete replica")
        if replication_min is None:
            replication_min = max(r.qos.replication_min for r in complete)
        holders = {r.site_id for r in complete}
        pending = {
            job.dst_site
            for job in self.transfers.values()
            if job.dataset_id == dataset_id and job.state in ("Queued", "Active")
        }
        needed = replication_min - len(holders) - len(pending.difference(holders))
        if needed <= 0:
            return []
        candidates = []
        size = Fraction(dataset.total_size())
        for site_id in self.catalog.site_ids():
            if site_id in holders or site_id in pending:
                continue
            if self.storage_headroom(site_id) >= size:
                candidates.append(site_id)
        if self.ranker is not None:
            candidates = list(self.ranker(candidates, dataset.owner))
        else:
            candidates.sort(key=lambda s: (-self.storage_headroom(s), s))
        if len(candidates) < needed:
            raise NoEligibleSite(
                f"need {needed} more replica site(s) for {dataset_id!r}, "
                f"only {len(candidates)} eligible"
            )
        src_site = min(holders)
        return [
            self.schedule_transfer(dataset_id, src_site, dst, now=now)
            for dst in candidates[:needed]
        ]

    # -- persistence -------------------------------------------------------------

    def to_state(self) -> dict:
        return {
            "spaces": {name: dict(meta) for name, meta in sorted(self.spaces.items())},
            "datasets": [self.datasets[d].to_payload() for d in sorted(self.datasets)],
            "replicas": [
                self.replicas[k].to_payload() for k in sorted(self.replicas)
            ],
            "transfers": [self.transfers[t].to_payload() for t in sorted(self.transfers)],
            "counters": {
                "dataset": self._dataset_counter,
                "transfer": self._transfer_counter,
            },
        }

    def restore(self, state: dict) -> None:
        self.spaces = {name: dict(meta) for name, meta in state.get("spaces", {}).items()}
        self.datasets = {}
        for payload in state.get("datasets", []):
            self.datasets[payload["dataset_id"]] = Dataset(
                dataset_id=payload["dataset_id"],
                space=payload["space"],
                owner=payload["owner"],
                files=tuple(
                    FileEntry(f["path"], int(f["size"]), f["checksum"])
                    for f in payload["files"]
                ),
            )
        self.replicas = {}
        for payload in state.get("replicas", []):
            replica = Replica(
                dataset_id=payload["dataset_id"],
                site_id=payload["site_id"],
                completeness=Fraction(payload["completeness"]),
                qos=StorageQoS.from_payload(payload["qos"]),
            )
            self.replicas[(replica.dataset_id, replica.site_id)] = replica
        self.transfers = {}
        for payload in state.get("transfers", []):
            job = TransferJob(
                job_id=payload["job_id"],
                dataset_id=payload["dataset_id"],
                src_site=payload["src_site"],
                dst_site=payload["dst_site"],
                total_bytes=int(payload["total_bytes"]),
                files=tuple(
                    FileEntry(f["path"], int(f["size"]), f["checksum"])
                    for f in payload["files"]
                ),
                state=payload["state"],
                streams=int(payload["streams"]),
                bytes_moved=Fraction(payload["bytes_moved"]),
                created_at=payload["created_at"],
                finished_at=payload.get("finished_at"),
                failure=payload.get("failure"),
                direction=int(payload.get("direction", 1)),
                window_bytes=Fraction(payload.get("window_bytes", 0)),
                window_seconds=Fraction(payload.get("window_seconds", 0)),
                window_ticks=int(payload.get("window_ticks", 0)),
                prev_window_rate=(
                    None
                    if payload.get("prev_window_rate") is None
                    else Fraction(payload["prev_window_rate"])
                ),
                tick_count=int(payload.get("tick_count", 0)),
                throughput_history=[tuple(x) for x in payload.get("throughput_history", [])],
            )
            self.transfers[job.job_id] = job
        counters = state.get("counters", {})
        self._dataset_counter = counters.get("dataset", 0)
        self._transfer_counter = counters.get("transfer", 0)
