"""Bibliometric and research-performance indicators.

Symbols follow the usual catalog: ``N_Pub`` (publications), ``NC_Pub``
(citations), ``C_Pub`` (citations per publication), ``FN_Pub`` (fractional
count), ``ScS`` (field-normalized strength), ``RA`` (research activity) and
``h``. Field and journal citation baselines are supplied by the caller.
"""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .exceptions import DomainError, ParseError, UndefinedRatioError, ValidationError

__all__ = [
    "JEL_CODES",
    "PublicationRecord",
    "StaffRecord",
    "PhdRecord",
    "ListIndicator",
    "read_publications",
    "read_staff",
    "read_phd",
    "citation_ratios",
    "research_activity",
    "fractional_productivity",
    "scientific_strength",
    "h_index",
    "absolute_citations",
    "n_staff",
    "efficiency_ratios",
    "promotion_stats",
    "indicator_report",
]

JEL_CODES = {
    "A": "General Economics and Teaching",
    "B": "History of Economic Thought, Methodology, and Heterodox Approaches",
    "C": "Mathematical and Quantitative Methods",
    "D": "Microeconomics",
    "E": "Macroeconomics and Monetary Economics",
    "F": "International Economics",
    "G": "Financial Economics",
    "H": "Public Economics",
    "I": "Health, Education, and Welfare",
    "J": "Labor and Demographic Economics",
    "K": "Law and Economics",
    "L": "Industrial Organization",
    "M": "Business Administration and Business Economics; Marketing; Accounting; Personnel Economics",
    "N": "Economic History",
    "O": "Economic Development, Innovation, Technological Change, and Growth",
    "P": "Economic Systems",
    "Q": "Agricultural and Natural Resource Economics; Environmental and Ecological Economics",
    "R": "Urban, Rural, Regional, Real Estate, and Transportation Economics",
    "Y": "Miscellaneous Categories",
    "Z": "Other Special Topics",
}


@dataclass(frozen=True)
class PublicationRecord:
    pub_id: str
    unit_id: str
    year: int
    citations: int = 0
    n_authors: int = 1
    field_mean_citations: float | None = None
    journal_mean_citations: float | None = None
    jel_codes: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "jel_codes", tuple(self.jel_codes))
        if self.n_authors < 1:
            raise ValidationError(f"publication {self.pub_id}: n_authors must be >= 1")
        if self.citations < 0:
            raise ValidationError(f"publication {self.pub_id}: citations must be >= 0")
        for name in ("field_mean_citations", "journal_mean_citations"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"publication {self.pub_id}: {name} must be positive")
        unknown = [c for c in self.jel_codes if c not in JEL_CODES]
        if unknown:
            raise ValidationError(f"publication {self.pub_id}: unknown JEL codes {unknown}")


@dataclass(frozen=True)
class StaffRecord:
    unit_id: str
    year: int
    fte: float
    role: str = "doc"

    def __post_init__(self):
        if not 0 < self.fte <= 2.5:
            raise ValidationError(f"staff record {self.unit_id}/{self.year}: fte must lie in (0, 2.5]")
        if self.role not in ("doc", "postdoc"):
            raise ValidationError(f"staff record {self.unit_id}/{self.year}: role must be doc or postdoc")


@dataclass(frozen=True)
class PhdRecord:
    person_id: str
    gender: str
    start_year: int
    defense_year: int
    publications: int = 0
    post_phd_location: str = "germany"
    post_phd_sector: str = "academia"

    def __post_init__(self):
        if self.defense_year < self.start_year:
            raise ValidationError(f"PhD record {self.person_id}: defense before start")
        checks = (
            ("gender", ("female", "male")),
            ("post_phd_location", ("germany", "abroad")),
            ("post_phd_sector", ("academia", "other")),
        )
        for name, allowed in checks:
            if getattr(self, name) not in allowed:
                raise ValidationError(f"PhD record {self.person_id}: {name} must be one of {allowed}")


@dataclass(frozen=True)
class ListIndicator:
    """List-valued indicator (prizes, editorships, patents, ...): items plus their count."""

    name: str
    items: tuple[str, ...] = field(default_factory=tuple)

    @property
    def count(self) -> int:
        return len(self.items)

    def to_dict(self) -> dict:
        return {"name": self.name, "count": self.count, "items": list(self.items)}


# -- CSV ingestion ----------------------------------------------------------------


def _csv_rows(data: bytes | str, required: Sequence[str]):
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ParseError("empty CSV document: header row required")
    missing = [c for c in required if c not in reader.fieldnames]
    if missing:
        raise ParseError(f"header is missing required columns: {missing}")
    for line, row in enumerate(reader, start=2):
        if None in row or any(v is None for v in row.values()):
            raise ParseError(f"line {line}: wrong number of fields")
        yield line, {k: v.strip() for k, v in row.items()}


def _num(row, key, line, kind=float, optional=False):
    raw = row.get(key, "")
    if raw == "":
        if optional:
            return None
        raise ParseError(f"line {line}: empty value for {key}")
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"line {line}: cannot parse {key}={raw!r}") from None
    if kind is int:
        if value != int(value):
            raise ParseError(f"line {line}: {key} must be an integer, got {raw!r}")
        return int(value)
    return value


def _wrap(line, build):
    try:
        return build()
    except ValidationError as exc:
        raise ValidationError(f"line {line}: {exc}") from None


def read_publications(data: bytes | str) -> list[PublicationRecord]:
    """Columns: pub_id, unit_id, year, citations, n_authors, field_mean_citations,
    journal_mean_citations, jel_codes (codes separated by ``;``, ``,`` or spaces)."""
    out = []
    for line, row in _csv_rows(data, ("pub_id", "unit_id", "year")):
        codes = tuple(c.upper() for c in re.split(r"[;,\s]+", row.get("jel_codes", "")) if c)
        out.append(_wrap(line, lambda: PublicationRecord(
            pub_id=row["pub_id"],
            unit_id=row["unit_id"],
            year=_num(row, "year", line, int),
            citations=_num(row, "citations", line, int, optional=True) or 0,
            n_authors=_num(row, "n_authors", line, int, optional=True) or 1,
            field_mean_citations=_num(row, "field_mean_citations", line, optional=True),
            journal_mean_citations=_num(row, "journal_mean_citations", line, optional=True),
            jel_codes=codes,
        )))
    return out


def read_staff(data: bytes | str) -> list[StaffRecord]:
    out = []
    for line, row in _csv_rows(data, ("unit_id", "year", "fte")):
        out.append(_wrap(line, lambda: StaffRecord(
            row["unit_id"], _num(row, "year", line, int), _num(row, "fte", line), row.get("role") or "doc"
        )))
    return out


def read_phd(data: bytes | str) -> list[PhdRecord]:
    out = []
    required = ("person_id", "gender", "start_year", "defense_year", "post_phd_location", "post_phd_sector")
    for line, row in _csv_rows(data, required):
        out.append(_wrap(line, lambda: PhdRecord(
            person_id=row["person_id"],
            gender=row["gender"].lower(),
            start_year=_num(row, "start_year", line, int),
            defense_year=_num(row, "defense_year", line, int),
            publications=_num(row, "publications", line, int, optional=True) or 0,
            post_phd_location=row["post_phd_location"].lower(),
            post_phd_sector=row["post_phd_sector"].lower(),
        )))
    return out


# -- indicators ---------------------------------------------------------------------


def citation_ratios(pubs: Sequence[PublicationRecord]) -> dict:
    """Citations per publication, raw and normalized by field and journal baselines.

    A normalized ratio is ``None`` when any publication lacks that baseline.
    """
    if not pubs:
        raise UndefinedRatioError("citation ratios are undefined for an empty publication list")
    n = len(pubs)
    out = {"c_pub": sum(p.citations for p in pubs) / n}
    for key, attr in (("c_pub_over_fc", "field_mean_citations"), ("c_pub_over_jc", "journal_mean_citations")):
        base = [getattr(p, attr) for p in pubs]
        out[key] = None if any(b is None for b in base) else sum(p.citations / b for p, b in zip(pubs, base)) / n
    return out


def research_activity(unit_pubs: Sequence[PublicationRecord], center_pubs: Sequence[PublicationRecord],
                      reading: str = "average") -> float:
    """``RA = N_Pub(unit) * C_Pub(unit) / C_Pub(center)``.

    ``reading="average"`` (default) uses citations per publication for both
    ``C_Pub`` terms; ``reading="total"`` uses total citation counts instead.
    """
    if reading not in ("average", "total"):
        raise ValueError("reading must be 'average' or 'total'")
    center_nc = sum(p.citations for p in center_pubs)
    if not center_pubs or center_nc == 0:
        raise UndefinedRatioError("research activity undefined: center has no citations")
    if not unit_pubs:
        return 0.0
    unit_nc = sum(p.citations for p in unit_pubs)
    if reading == "total":
        return len(unit_pubs) * unit_nc / center_nc
    return len(unit_pubs) * (unit_nc / len(unit_pubs)) / (center_nc / len(center_pubs))


def fractional_productivity(pubs: Iterable[PublicationRecord]) -> float:
    return math.fsum(1 / p.n_authors for p in pubs)


def scientific_strength(pubs: Iterable[PublicationRecord]) -> float:
    """Sum of field-normalized citation weights ``citations / FC_m``."""
    total = []
    for p in pubs:
        if not p.field_mean_citations:
            raise DomainError(f"publication {p.pub_id}: field mean citations must be positive")
        total.append(p.citations / p.field_mean_citations)
    return math.fsum(total)


def h_index(citations: Iterable[int]) -> int:
    """Largest ``h`` such that ``h`` entries have at least ``h`` citations."""
    h = 0
    for rank, c in enumerate(sorted(citations, reverse=True), start=1):
        if c < rank:
            break
        h = rank
    return h


def absolute_citations(pubs: Sequence[PublicationRecord]) -> dict:
    """Ingredients of absolute citation visibility: total, maximum single count, uncited count."""
    cites = [p.citations for p in pubs]
    return {
        "nc_pub": sum(cites),
        "c_pub_max": max(cites, default=0),
        "n_nc_pub": sum(1 for c in cites if c == 0),
    }


def n_staff(staff: Iterable[StaffRecord], measure: str = "fte") -> float:
    """Research staff as summed FTE (default) or as record head count."""
    staff = list(staff)
    if measure == "fte":
        return math.fsum(s.fte for s in staff)
    if measure == "headcount":
        return float(len(staff))
    raise ValueError("measure must be 'fte' or 'headcount'")


def efficiency_ratios(pubs: Sequence[PublicationRecord], staff: Sequence[StaffRecord], costs: float,
                      measure: str = "fte") -> dict:
    total = n_staff(staff, measure)
    if total <= 0:
        raise UndefinedRatioError("efficiency ratios undefined: no research staff")
    return {
        "pub_per_staff": len(pubs) / total,
        "cit_per_staff": sum(p.citations for p in pubs) / total,
        "cost_per_staff": costs / total,
    }


def promotion_stats(records: Sequence[PhdRecord]) -> dict:
    """Counts for defended PhDs; ``mean_duration_years`` is ``None`` for no records."""
    n = len(records)
    return {
        "n_phd": n,
        "mean_duration_years": (sum(r.defense_year - r.start_year for r in records) / n) if n else None,
        "n_pub_phd": sum(r.publications for r in records),
        "academia_share": (sum(r.post_phd_sector == "academia" for r in records) / n) if n else None,
    }


def _unit_block(pubs, center, staff, costs, ra_reading):
    block = {
        "n_pub": len(pubs),
        "nc_pub": sum(p.citations for p in pubs),
        "fn_pub": fractional_productivity(pubs),
        "h": h_index(p.citations for p in pubs),
    }
    if pubs:
        ratios = citation_ratios(pubs)
        block.update(c_pub=ratios["c_pub"], c_pub_fc=ratios["c_pub_over_fc"], c_pub_jc=ratios["c_pub_over_jc"])
    else:
        block.update(c_pub=None, c_pub_fc=None, c_pub_jc=None)
    block["scs"] = scientific_strength(pubs) if all(p.field_mean_citations for p in pubs) else None
    try:
        block["ra"] = research_activity(pubs, center, ra_reading)
    except UndefinedRatioError:
        block["ra"] = None
    if costs is not None:
        block["n_costs"] = costs
    if staff:
        block["n_staff"] = n_staff(staff)
        eff = efficiency_ratios(pubs, staff, costs or 0.0)
        block.update(
            n_pub_per_staff=eff["pub_per_staff"],
            nc_pub_per_staff=eff["cit_per_staff"],
            n_costs_per_staff=eff["cost_per_staff"] if costs is not None else None,
        )
    return block


def indicator_report(pubs: Sequence[PublicationRecord], staff: Sequence[StaffRecord] = (),
                     phd: Sequence[PhdRecord] = (), costs: Mapping[str, float] | None = None,
                     ra_reading: str = "average",
                     lists: Sequence[ListIndicator] = ()) -> dict:
    """Center-level and per-unit indicator tables keyed by indicator symbol.

    ``costs`` maps unit ids to total third-party expenses.
    """
    costs = dict(costs or {})
    center = _unit_block(list(pubs), list(pubs), list(staff), sum(costs.values()) if costs else None, ra_reading)
    center["abs_c_pub"] = absolute_citations(list(pubs))
    promo = promotion_stats(list(phd))
    center.update(
        n_phd=promo["n_phd"],
        d_phd=promo["mean_duration_years"],
        n_pub_phd=promo["n_pub_phd"],
        academia_share=promo["academia_share"],
    )
    units = sorted({p.unit_id for p in pubs} | {s.unit_id for s in staff} | set(costs))
    per_unit = {}
    for u in units:
        up = [p for p in pubs if p.unit_id == u]
        us = [s for s in staff if s.unit_id == u]
        per_unit[u] = _unit_block(up, list(pubs), us, costs.get(u), ra_reading)
    report = {"center": center, "units": per_unit}
    if lists:
        report["lists"] = [item.to_dict() for item in lists]
    return report
