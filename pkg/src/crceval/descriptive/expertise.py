"""Expertise attribution across subject fields, and field-level correlation.

A PI's research time in a year is split evenly over the sub-projects they
lead that year, and each project's share evenly over its JEL areas, so every
person-year contributes exactly one unit in total.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..exceptions import UndefinedRatioError, ValidationError

__all__ = ["ExpertiseAssignment", "ExpertiseWeights", "expertise_weights", "staff_expertise", "field_correlation"]


@dataclass(frozen=True)
class ExpertiseAssignment:
    """Sub-projects (each with its JEL areas) led by one person over some years."""

    person: str
    projects: Mapping[str, Sequence[str]]
    years: Sequence[int]
    rank: str = "full_professor"


@dataclass(frozen=True)
class ExpertiseWeights:
    per_year: dict  # (person, year) -> {(project, jel): weight}
    ranks: dict = field(default_factory=dict)  # person -> rank

    @property
    def totals(self) -> dict[tuple[str, str], float]:
        """Cumulative weighted years per (person, jel)."""
        acc: dict = defaultdict(list)
        for (person, _), cells in self.per_year.items():
            for (_, jel), w in cells.items():
                acc[person, jel].append(w)
        return {k: math.fsum(v) for k, v in sorted(acc.items())}

    def jel_totals(self, rank: str | None = None) -> dict[str, float]:
        """Weighted person-years per JEL code, optionally for one rank only."""
        acc: dict = defaultdict(list)
        for (person, jel), w in self.totals.items():
            if rank is None or self.ranks.get(person) == rank:
                acc[jel].append(w)
        return {k: math.fsum(v) for k, v in sorted(acc.items())}

    def by_rank(self) -> dict[str, dict[str, float]]:
        return {r: self.jel_totals(r) for r in sorted(set(self.ranks.values()))}


def expertise_weights(assignments: Iterable[ExpertiseAssignment]) -> ExpertiseWeights:
    """Weight ``1/#projects * 1/#areas`` per (project, area) for every active person-year."""
    active: dict = defaultdict(dict)  # (person, year) -> {project: areas}
    ranks = {}
    for a in assignments:
        if not a.projects:
            raise ValidationError(f"{a.person}: at least one sub-project required")
        for project, areas in a.projects.items():
            if not areas:
                raise ValidationError(f"{a.person}: sub-project {project} has no JEL areas")
        ranks[a.person] = a.rank
        for year in a.years:
            for project, areas in a.projects.items():
                active[a.person, int(year)][project] = tuple(dict.fromkeys(areas))
    per_year = {}
    for key in sorted(active):
        projects = active[key]
        cells = {}
        for project in sorted(projects):
            areas = projects[project]
            for jel in areas:
                cells[project, jel] = 1.0 / len(projects) / len(areas)
        per_year[key] = cells
    return ExpertiseWeights(per_year, ranks)


def staff_expertise(entries: Iterable[tuple[Sequence[str], Mapping[int, float]]]) -> dict[str, float]:
    """FTE-years per JEL area; each ``(areas, {year: fte})`` entry splits its FTE evenly over its areas."""
    acc: dict = defaultdict(list)
    for areas, ftes in entries:
        areas = tuple(dict.fromkeys(areas))
        if not areas:
            raise ValidationError("staff entry without JEL areas")
        for fte in ftes.values():
            for jel in areas:
                acc[jel].append(fte / len(areas))
    return {k: math.fsum(v) for k, v in sorted(acc.items())}


def field_correlation(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    """Pearson correlation of two per-field series over their common keys."""
    keys = sorted(set(a) & set(b))
    if len(keys) < 2:
        raise UndefinedRatioError("correlation needs at least 2 common fields")
    x = np.array([a[k] for k in keys], dtype=float)
    y = np.array([b[k] for k in keys], dtype=float)
    x = x - x.mean()
    y = y - y.mean()
    sx, sy = math.sqrt(x @ x), math.sqrt(y @ y)
    if sx == 0 or sy == 0:
        raise UndefinedRatioError("correlation undefined: a series has zero variance")
    return float(np.clip((x / sx) @ (y / sy), -1.0, 1.0))
