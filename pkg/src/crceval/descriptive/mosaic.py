"""Mosaic layout of a three-way contingency table on the unit square.

The first dimension splits the square into horizontal bands (heights along
the vertical axis), the second splits each band left to right, and the third
splits each of those cells left to right again. Every rectangle's area is
its cell count over the total; coordinates are computed in exact rational
arithmetic and rounded to float only at the end.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from ..exceptions import ConfigurationError, DegenerateLayoutError, ValidationError
from ..indicators import PhdRecord

__all__ = ["ContingencyTable3", "MosaicRect", "mosaic_layout", "PHD_LEVELS"]

PHD_LEVELS = {
    "gender": ("female", "male"),
    "location": ("germany", "abroad"),
    "sector": ("academia", "other"),
}


@dataclass(frozen=True)
class ContingencyTable3:
    """Counts indexed by (gender, location, sector) level tuples; absent cells count zero."""

    counts: Mapping[tuple[str, str, str], int]
    dims: tuple[str, str, str] = ("gender", "location", "sector")
    levels: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        counts = {tuple(k): int(v) for k, v in self.counts.items()}
        if any(v < 0 for v in counts.values()):
            raise ValidationError("contingency counts must be non-negative")
        if any(len(k) != 3 for k in counts):
            raise ValidationError("contingency keys must have three levels")
        levels = self.levels
        if levels is None:
            levels = tuple(
                PHD_LEVELS[d] if d in PHD_LEVELS else tuple(sorted({k[i] for k in counts}))
                for i, d in enumerate(self.dims)
            )
        for key in counts:
            for i, lvl in enumerate(key):
                if lvl not in levels[i]:
                    raise ValidationError(f"level {lvl!r} not among {self.dims[i]} levels {levels[i]}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "levels", tuple(tuple(l) for l in levels))

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def count(self, key) -> int:
        return self.counts.get(tuple(key), 0)

    @classmethod
    def from_phd_records(cls, records: Iterable[PhdRecord]) -> "ContingencyTable3":
        counts: dict = {}
        for r in records:
            key = (r.gender, r.post_phd_location, r.post_phd_sector)
            counts[key] = counts.get(key, 0) + 1
        return cls(counts)


@dataclass(frozen=True)
class MosaicRect:
    labels: dict  # dimension name -> level
    x: float
    y: float
    width: float
    height: float
    count: int
    exact_area: Fraction

    @property
    def area(self) -> float:
        return self.width * self.height

    def to_dict(self) -> dict:
        return {
            "labels": dict(self.labels),
            "x": self.x,
            "y": self.y,
            "width": self.width,
            "height": self.height,
            "count": self.count,
            "area": float(self.exact_area),
        }


def mosaic_layout(table: ContingencyTable3, split_order: Sequence[str] | None = None) -> list[MosaicRect]:
    """Tile the unit square with one rectangle per non-empty cell.

    Parameters
    ----------
    table : ContingencyTable3
    split_order : sequence of three dimension names, optional
        Order of the splits: the first is laid out along the vertical axis, the
        other two along the horizontal axis. Defaults to ``table.dims``.
    """
    order = tuple(split_order or table.dims)
    if sorted(order) != sorted(table.dims):
        raise ConfigurationError(f"split_order {order} must be a permutation of {table.dims}")
    total = table.total
    if total == 0:
        raise DegenerateLayoutError("cannot lay out an all-zero table")
    pos = [table.dims.index(d) for d in order]
    levels = [table.levels[i] for i in pos]

    def count(prefix):
        s = 0
        for key, v in table.counts.items():
            if all(key[pos[i]] == prefix[i] for i in range(len(prefix))):
                s += v
        return s

    rects = []
    y0 = Fraction(0)
    for a in levels[0]:
        na = count((a,))
        if na == 0:
            continue
        h = Fraction(na, total)
        x0 = Fraction(0)
        for b in levels[1]:
            nab = count((a, b))
            if nab == 0:
                continue
            wb = Fraction(nab, na)
            x1 = x0
            for c in levels[2]:
                nabc = count((a, b, c))
                if nabc == 0:
                    continue
                w = wb * Fraction(nabc, nab)
                rects.append(
                    MosaicRect(
                        labels={order[0]: a, order[1]: b, order[2]: c},
                        x=float(x1),
                        y=float(y0),
                        width=float(w),
                        height=float(h),
                        count=nabc,
                        exact_area=w * h,
                    )
                )
                x1 += w
            x0 += wb
        y0 += h
    return rects
