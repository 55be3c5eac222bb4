"""SLA negotiation, QoS profiles, and placement checks."""

import random

import pytest

from miniorc.catalog import Catalog, SiteDescriptor
from miniorc.resources import ResourceVector
from miniorc.sla import (
    CLASS_SEMANTICS,
    SLA_TERM_SECONDS,
    InvalidCaps,
    SLAManager,
    UnsupportedClass,
)


@pytest.fixture
def slam():
    cat = Catalog()
    cat.register_site(
        SiteDescriptor(
            site_id="full",
            capacity=ResourceVector(16, 32, 200),
            storage_capacity=1000,
        )
    )
    cat.register_site(
        SiteDescriptor(
            site_id="gold-only",
            capacity=ResourceVector(16, 32, 200),
            storage_capacity=1000,
            supported_sla_classes=("Gold",),
        )
    )
    return SLAManager(cat)


def test_negotiate_supported_class(slam):
    record = slam.negotiate("acct-1", "full", "Silver", max_cores=8, max_storage=100, now=0.0)
    assert record.sla_class == "Silver"
    assert record.valid_until == SLA_TERM_SECONDS


def test_negotiate_unsupported_class(slam):
    with pytest.raises(UnsupportedClass):
        slam.negotiate("acct-1", "gold-only", "Bronze", max_cores=4, max_storage=10, now=0.0)


def test_negotiate_bad_caps(slam):
    with pytest.raises(InvalidCaps):
        slam.negotiate("acct-1", "full", "Gold", max_cores=0, max_storage=10, now=0.0)


def test_renegotiate_replaces(slam):
    first = slam.negotiate("acct-1", "full", "Bronze", max_cores=4, max_storage=10, now=0.0)
    second = slam.negotiate("acct-1", "full", "Gold", max_cores=8, max_storage=50, now=10.0)
    assert slam.list_for("acct-1") == [second]
    assert slam.active_for("acct-1", "full", now=20.0) == second
    assert first.sla_id != second.sla_id


def test_qos_profile_defaults_bronze(slam):
    profile = slam.qos_of("acct-9", now=0.0)
    assert profile.site_classes == {}
    assert profile.default_class == "Bronze"
    assert profile.class_at("full") == "Bronze"
    assert profile.best_class() == "Bronze"


def test_qos_profile_collects_sites(slam):
    slam.negotiate("acct-1", "full", "Silver", max_cores=8, max_storage=100, now=0.0)
    slam.negotiate("acct-1", "gold-only", "Gold", max_cores=8, max_storage=100, now=0.0)
    profile = slam.qos_of("acct-1", now=1.0)
    assert profile.site_classes == {"full": "Silver", "gold-only": "Gold"}
    assert profile.best_class() == "Gold"


def test_expired_sla_leaves_profile(slam):
    record = slam.negotiate("acct-1", "full", "Gold", max_cores=8, max_storage=100, now=0.0)
    before = slam.qos_of("acct-1", now=record.valid_until)
    after = slam.qos_of("acct-1", now=record.valid_until + 1)
    assert before.site_classes == {"full": "Gold"}
    assert after.site_classes == {}
    assert slam.active_for("acct-1", "full", now=record.valid_until + 1) is None


def test_check_bounds(slam):
    record = slam.negotiate("acct-1", "full", "Gold", max_cores=8, max_storage=100, now=0.0)
    assert slam.check(record, cores=4, storage=50, now=10.0) is None
    violation = slam.check(record, cores=16, storage=50, now=10.0)
    assert violation is not None and violation.bound == "max_cores"
    violation = slam.check(record, cores=4, storage=500, now=10.0)
    assert violation is not None and violation.bound == "max_storage"
    violation = slam.check(record, cores=4, storage=50, now=record.valid_until + 1)
    assert violation is not None and violation.bound == "expired"


def test_check_monotone_under_shrinking(slam):
    record = slam.negotiate("acct-1", "full", "Gold", max_cores=10, max_storage=100, now=0.0)
    rng = random.Random(3)
    for _ in range(100):
        cores = rng.uniform(0, 20)
        storage = rng.uniform(0, 200)
        if slam.check(record, cores=cores, storage=storage, now=5.0) is None:
            smaller = slam.check(
                record,
                cores=cores * rng.random(),
                storage=storage * rng.random(),
                now=5.0,
            )
            assert smaller is None


def test_class_semantics_table():
    assert CLASS_SEMANTICS["Gold"]["preempt_spot"] is True
    assert CLASS_SEMANTICS["Gold"]["replication_min"] == 2
    assert CLASS_SEMANTICS["Silver"]["preempt_spot"] is False
    assert CLASS_SEMANTICS["Silver"]["replication_min"] == 2
    assert CLASS_SEMANTICS["Bronze"]["replication_min"] == 1
    assert CLASS_SEMANTICS["Bronze"]["spot_eligible"] is True


def test_state_roundtrip(slam):
    slam.negotiate("acct-1", "full", "Silver", max_cores=8, max_storage=100, now=0.0)
    slam.negotiate("acct-2", "gold-only", "Gold", max_cores=2, max_storage=10, now=5.0)
    cat = Catalog()
    restored = SLAManager(cat)
    restored.restore(slam.to_state())
    assert restored.to_state() == slam.to_state()
    assert restored.active_for("acct-1", "full", now=10.0) is not None
