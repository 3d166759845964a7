"""Catalog of built-in measure models used throughout tests and the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .densities import CuspMeasure, cusp_measure
from .measures import (
    CascadeMeasure,
    ConstantSchedule,
    MeasureModel,
    ProductMeasure,
    build_block_cascade,
    lebesgue,
)

__all__ = [
    "CatalogEntry",
    "catalog",
    "get_measure",
    "sierpinski_tetraeder",
    "ahlfors_4of8",
    "block_cantor_product",
]


def _corner_weights(d: int, placed: dict[tuple[int, ...], Fraction]) -> tuple[Fraction, ...]:
    """Expand a corner->weight map into the flat child-index weight vector."""
    out = [Fraction(0)] * (1 << d)
    for bits, w in placed.items():
        idx = 0
        for b in bits:
            idx = (idx << 1) | b
        out[idx] = w
    return tuple(out)


def sierpinski_tetraeder() -> CascadeMeasure:
    """Self-similar cascade on four tetrahedral corners of the 3-cube.

    Weights 0.36, 0.36, 0.2, 0.08 sit on the corners (0,0,0), (1,1,0),
    (1,0,1), (0,1,1); the remaining four children carry no mass.
    """
    w = _corner_weights(
        3,
        {
            (0, 0, 0): Fraction(9, 25),
            (1, 1, 0): Fraction(9, 25),
            (1, 0, 1): Fraction(1, 5),
            (0, 1, 1): Fraction(2, 25),
        },
    )
    return CascadeMeasure(3, ConstantSchedule(tuple(float(x) for x in w), w))


def ahlfors_4of8() -> CascadeMeasure:
    """Uniform mass on the same four corners: 2-Ahlfors regular in d=3."""
    w = _corner_weights(
        3,
        {
            (0, 0, 0): Fraction(1, 4),
            (1, 1, 0): Fraction(1, 4),
            (1, 0, 1): Fraction(1, 4),
            (0, 1, 1): Fraction(1, 4),
        },
    )
    return CascadeMeasure(3, ConstantSchedule(tuple(float(x) for x in w), w))


def block_cantor_product() -> ProductMeasure:
    """Oscillating 1-D block cascade times Lebesgue^2 (d=3).

    The first factor alternates between branching densities 3/8 and 3/10
    on geometrically growing blocks, so its level moments do not converge;
    the two uniform factors keep the product supported on the full cube.
    """
    blk = build_block_cascade(Fraction(3, 8), Fraction(3, 10), 40)
    return ProductMeasure([blk, lebesgue(1), lebesgue(1)])


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    dimension: int
    summary: str
    build: Callable[[], MeasureModel]


_ENTRIES: tuple[CatalogEntry, ...] = (
    CatalogEntry("lebesgue-1", 1, "uniform measure on [0,1]", lambda: lebesgue(1)),
    CatalogEntry("lebesgue-2", 2, "uniform measure on the square", lambda: lebesgue(2)),
    CatalogEntry("lebesgue-3", 3, "uniform measure on the cube", lambda: lebesgue(3)),
    CatalogEntry(
        "sierpinski-tetraeder",
        3,
        "cascade with weights (0.36, 0.36, 0.2, 0.08) on four corners of the cube",
        sierpinski_tetraeder,
    ),
    CatalogEntry(
        "ahlfors-4of8",
        3,
        "equal weights 1/4 on four corners; 2-Ahlfors regular",
        ahlfors_4of8,
    ),
    CatalogEntry(
        "cusp-1",
        3,
        "density z^-2 on the axis cone (bounded regime)",
        lambda: cusp_measure(1),
    ),
    CatalogEntry(
        "cusp-2",
        3,
        "density z^-2 (ln 1/z)^(-4/3) on the axis cone (vanishing regime)",
        lambda: cusp_measure(2),
    ),
    CatalogEntry(
        "cusp-3",
        3,
        "density z^-2 ln(1/z) on the axis cone (unbounded regime)",
        lambda: cusp_measure(3),
    ),
    CatalogEntry(
        "block-cantor-product",
        3,
        "oscillating block cascade (targets 3/8, 3/10, unit 40) x Lebesgue^2",
        block_cantor_product,
    ),
)


def catalog() -> tuple[CatalogEntry, ...]:
    """All built-in measures, in stable display order."""
    return _ENTRIES


def get_measure(name: str) -> MeasureModel:
    for entry in _ENTRIES:
        if entry.name == name:
            return entry.build()
    known = ", ".join(e.name for e in _ENTRIES)
    raise KeyError(f"unknown measure {name!r} (known: {known})")
