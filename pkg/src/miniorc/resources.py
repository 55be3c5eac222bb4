"""Multi-dimensional resource quantities with exact rational arithmetic.

Resource accounting across the whole system (site capacities, cluster
nodes, placements) must be exact: the capacity-safety checks assert
``placed + free == total`` with zero tolerance, so quantities are stored
as :class:`fractions.Fraction` rather than floats. Float inputs are
interpreted through their decimal representation (``0.1`` means 1/10).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

Scalar = Union[int, float, str, Fraction]

DIMENSIONS = ("cpu", "mem", "disk")


def to_fraction(value: Scalar) -> Fraction:
    """Coerce a scalar to an exact Fraction (floats via their decimal repr)."""
    if isinstance(value, bool):
        raise TypeError("bool is not a resource quantity")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite resource quantity: {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot convert {type(value).__name__} to resource quantity")


def fraction_repr(value: Fraction) -> str:
    """Canonical string form used in journals and API payloads."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class ResourceVector:
    """An exact (cpu cores, memory GiB, disk GiB) quantity.

    Supports componentwise addition, subtraction and ordering. ``a <= b``
    means componentwise less-or-equal, which is a partial order: use
    :meth:`fits` for "does this demand fit into that free vector".
    """

    cpu: Fraction
    mem: Fraction
    disk: Fraction

    def __init__(self, cpu: Scalar = 0, mem: Scalar = 0, disk: Scalar = 0):
        object.__setattr__(self, "cpu", to_fraction(cpu))
        object.__setattr__(self, "mem", to_fraction(mem))
        object.__setattr__(self, "disk", to_fraction(disk))

    @classmethod
    def zero(cls) -> "ResourceVector":
        return cls(0, 0, 0)

    def __iter__(self) -> Iterator[Fraction]:
        yield self.cpu
        yield self.mem
        yield self.disk

    def __add__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(self.cpu + other.cpu, self.mem + other.mem, self.disk + other.disk)

    def __sub__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(self.cpu - other.cpu, self.mem - other.mem, self.disk - other.disk)

    def __le__(self, other: "ResourceVector") -> bool:
        return self.cpu <= other.cpu and self.mem <= other.mem and self.disk <= other.disk

    def __ge__(self, other: "ResourceVector") -> bool:
        return other.__le__(self)

    def fits(self, available: "ResourceVector") -> bool:
        """True when this demand fits componentwise into ``available``."""
        return self <= available

    def scale(self, factor: Scalar) -> "ResourceVector":
        f = to_fraction(factor)
        return ResourceVector(self.cpu * f, self.mem * f, self.disk * f)

    def max_with(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(
            max(self.cpu, other.cpu), max(self.mem, other.mem), max(self.disk, other.disk)
        )

    def is_zero(self) -> bool:
        return self.cpu == 0 and self.mem == 0 and self.disk == 0

    def nonnegative(self) -> bool:
        return self.cpu >= 0 and self.mem >= 0 and self.disk >= 0

    def strictly_positive(self) -> bool:
        return self.cpu > 0 and self.mem > 0 and self.disk > 0

    def dominant_ratio(self, total: "ResourceVector") -> Fraction:
        """max over dimensions of self[r] / total[r], skipping empty dimensions.

        This is the dominant-share computation: the largest fraction of any
        one resource that ``self`` represents of ``total``.
        """
        best = Fraction(0)
        for mine, cap in zip(self, total):
            if cap > 0:
                best = max(best, mine / cap)
        return best

    def to_payload(self) -> dict:
        return {d: fraction_repr(v) for d, v in zip(DIMENSIONS, self)}

    @classmethod
    def from_payload(cls, payload: dict) -> "ResourceVector":
        return cls(
            payload.get("cpu", 0) or 0,
            payload.get("mem", 0) or 0,
            payload.get("disk", 0) or 0,
        )

    def as_floats(self) -> dict:
        return {d: float(v) for d, v in zip(DIMENSIONS, self)}

    def __str__(self) -> str:
        return (
            f"<cpu={fraction_repr(self.cpu)},"
            f"mem={fraction_repr(self.mem)},"
            f"disk={fraction_repr(self.disk)}>"
        )
