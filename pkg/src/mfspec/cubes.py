"""Half-open dyadic cubes of the unit cube and their address arithmetic.

A level-``n`` cube is the product of intervals ``(k_i 2^-n, (k_i+1) 2^-n]``
with integer coordinates ``0 <= k_i < 2^n``.  The level-``n`` cubes partition
``(0, 1]^d`` exactly; the half-open convention matches the cascade tree
semantics, so faces are never double counted.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator

__all__ = [
    "DyadicCube",
    "AXIS_START",
    "AXIS_LOW",
    "AXIS_HIGH",
    "AXIS_MID",
    "axis_step",
    "interior_state",
]


@dataclass(frozen=True)
class DyadicCube:
    """Address of a half-open dyadic sub-cube of the unit cube.

    Parameters
    ----------
    level : int
        Subdivision depth ``n >= 0``.
    coords : tuple of int
        One integer per axis, each in ``[0, 2^n)``.
    """

    level: int
    coords: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.level < 0:
            raise ValueError(f"negative level {self.level}")
        hi = 1 << self.level
        for k in self.coords:
            if not 0 <= k < hi:
                raise ValueError(
                    f"coordinate {k} outside [0, 2^{self.level}) at level {self.level}"
                )

    # ---- geometry -----------------------------------------------------

    @property
    def d(self) -> int:
        return len(self.coords)

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def volume(self) -> float:
        return 2.0 ** (-self.d * self.level)

    @property
    def log2_volume(self) -> float:
        """log2 of the Lebesgue volume, exact in floating point."""
        return float(-self.d * self.level)

    def lower_corner(self) -> tuple[float, ...]:
        s = self.side
        return tuple(k * s for k in self.coords)

    def upper_corner(self) -> tuple[float, ...]:
        s = self.side
        return tuple((k + 1) * s for k in self.coords)

    # ---- boundary classification ---------------------------------------

    @property
    def is_interior(self) -> bool:
        """Whether the closure avoids the boundary of the unit cube.

        The interior (Dirichlet) family at level ``n`` consists of the cubes
        with ``1 <= k_i <= 2^n - 2`` on every axis; it is empty for
        ``2^n < 4``... except in the trivial sense that level 0 and 1 have no
        interior cubes at all.
        """
        hi = (1 << self.level) - 2
        return all(1 <= k <= hi for k in self.coords)

    # ---- tree structure -------------------------------------------------

    def parent(self) -> DyadicCube:
        if self.level == 0:
            raise ValueError("unit cube has no parent")
        return DyadicCube(self.level - 1, tuple(k >> 1 for k in self.coords))

    def child(self, bits: tuple[int, ...]) -> DyadicCube:
        """Child selected by one bit per axis (0 = lower half, 1 = upper)."""
        return DyadicCube(
            self.level + 1,
            tuple((k << 1) | b for k, b in zip(self.coords, bits)),
        )

    def children(self) -> Iterator[DyadicCube]:
        """All 2^d children, in lexicographic order of the bit vector."""
        for bits in product((0, 1), repeat=self.d):
            yield self.child(bits)

    def child_index(self, ancestor_level: int | None = None) -> tuple[int, ...]:
        """Bit vector selecting this cube inside its parent."""
        return tuple(k & 1 for k in self.coords)

    def path_from_root(self) -> list[tuple[int, ...]]:
        """Per-level child bit vectors from the unit cube down to this cube."""
        bits = []
        for shift in range(self.level - 1, -1, -1):
            bits.append(tuple((k >> shift) & 1 for k in self.coords))
        return bits

    def contains(self, other: DyadicCube) -> bool:
        if other.level < self.level or other.d != self.d:
            return False
        shift = other.level - self.level
        return all(ok >> shift == k for ok, k in zip(other.coords, self.coords))

    @classmethod
    def unit(cls, d: int) -> DyadicCube:
        return cls(0, (0,) * d)

    def __str__(self) -> str:  # compact address for dumps and messages
        ks = ",".join(str(k) for k in self.coords)
        return f"L{self.level}[{ks}]"


# ---- per-axis boundary state machine -----------------------------------
#
# Walking the address bits of one axis from the root, a coordinate ends on
# the lower boundary (k = 0) iff every bit was 0 and on the upper boundary
# (k = 2^n - 1) iff every bit was 1.  Three absorbing-ish states per axis
# therefore suffice to classify interior cubes during level-by-level sweeps.

AXIS_START = 0  # no bits consumed yet (level-0 only)
AXIS_LOW = 1  # all bits so far were 0
AXIS_HIGH = 2  # all bits so far were 1
AXIS_MID = 3  # mixed: the coordinate can no longer touch the boundary

_STEP = {
    (AXIS_START, 0): AXIS_LOW,
    (AXIS_START, 1): AXIS_HIGH,
    (AXIS_LOW, 0): AXIS_LOW,
    (AXIS_LOW, 1): AXIS_MID,
    (AXIS_HIGH, 0): AXIS_MID,
    (AXIS_HIGH, 1): AXIS_HIGH,
    (AXIS_MID, 0): AXIS_MID,
    (AXIS_MID, 1): AXIS_MID,
}


def axis_step(state: int, bit: int) -> int:
    """Advance one axis boundary state by one address bit."""
    return _STEP[(state, bit)]


def interior_state(states: tuple[int, ...]) -> bool:
    """Whether a joint per-axis state vector describes an interior cube."""
    return all(s == AXIS_MID for s in states)
