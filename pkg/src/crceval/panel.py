"""Unbalanced unit-by-year panel: data model, CSV ingestion and transforms.

A :class:`Panel` stores one row per (unit, year) pair in column form. Rows
are always sorted by unit and then by year, and the arrays are read-only, so
a panel can be shared between estimator runs without copying.

Missing values (only produced by :func:`add_lags`) are stored as ``NaN``.
A count of zero is a legal value and is never used as a missing marker.
"""
from __future__ import annotations

import csv
import enum
import io
import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import ConfigurationError, DomainError, ParseError, UniquenessError

__all__ = [
    "REQUIRED_ROLES",
    "PanelObservation",
    "Panel",
    "DropReason",
    "DropReport",
    "ingest_panel",
    "read_panel",
    "log_transform",
    "add_lags",
    "lag_name",
    "drop_singleton_groups",
    "drop_zero_outcome_groups",
]

REQUIRED_ROLES = ("unit", "year", "n_dp", "staff_costs", "travel_costs")
_NON_NEGATIVE = ("n_dp", "staff_costs", "travel_costs")
_LAG_RE = re.compile(r"_lag\d+$")


def lag_name(column: str, order: int = 1) -> str:
    return f"{column}_lag{order}"


def _is_lag_column(name: str) -> bool:
    return _LAG_RE.search(name) is not None


@dataclass(frozen=True)
class PanelObservation:
    """One sub-project in one calendar year.

    Base fields are ``None`` when the panel no longer carries that column
    (for instance after :func:`log_transform` replaced it).
    """

    unit_id: str
    year: int
    n_dp: int | None
    staff_costs: float | None
    travel_costs: float | None
    extra: Mapping[str, float] = field(default_factory=dict)


class Panel:
    """Immutable unbalanced panel.

    Parameters
    ----------
    unit_ids : sequence of str
        Unit identifier per row.
    years : sequence of int
        Calendar year per row.
    columns : mapping of str to sequence of float
        Value columns, aligned with ``unit_ids``. Column order is preserved.

    Rows are re-sorted by ``(unit_id, year)``. Duplicate pairs raise
    :class:`UniquenessError`; negative counts or costs raise
    :class:`DomainError`.
    """

    def __init__(self, unit_ids, years, columns: Mapping[str, Sequence[float]]):
        units = np.asarray([str(u) for u in unit_ids], dtype=object)
        yrs = np.asarray(years)
        if yrs.size and not np.issubdtype(yrs.dtype, np.integer):
            as_float = yrs.astype(float)
            if not np.all(as_float == np.round(as_float)):
                raise DomainError("years must be integers")
            yrs = as_float.astype(np.int64)
        yrs = yrs.astype(np.int64)
        if units.shape != yrs.shape or units.ndim != 1:
            raise ValueError("unit_ids and years must be 1-D and equally long")
        cols = {}
        for name, values in columns.items():
            arr = np.asarray(values, dtype=float).reshape(-1)
            if arr.shape != units.shape:
                raise ValueError(f"column {name!r} has {arr.size} rows, expected {units.size}")
            cols[str(name)] = arr

        order = sorted(range(units.size), key=lambda i: (units[i], yrs[i]))
        order = np.asarray(order, dtype=np.intp)
        units, yrs = units[order], yrs[order]
        cols = {k: v[order] for k, v in cols.items()}

        same = (units[1:] == units[:-1]) & (yrs[1:] == yrs[:-1])
        if np.any(same):
            i = int(np.flatnonzero(same)[0])
            raise UniquenessError(f"duplicate observation ({units[i]}, {yrs[i]})")

        for name in _NON_NEGATIVE:
            if name not in cols:
                continue
            arr = cols[name]
            bad = np.flatnonzero(~(arr >= 0))
            if bad.size:
                i = int(bad[0])
                raise DomainError(
                    f"{name} must be non-negative, got {arr[i]} at ({units[i]}, {yrs[i]})"
                )
        if "n_dp" in cols:
            arr = cols["n_dp"]
            bad = np.flatnonzero(arr != np.round(arr))
            if bad.size:
                i = int(bad[0])
                raise DomainError(f"n_dp must be integral, got {arr[i]} at ({units[i]}, {yrs[i]})")
        for name, arr in cols.items():
            if _is_lag_column(name):
                continue
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                i = int(bad[0])
                raise DomainError(f"non-finite value in {name} at ({units[i]}, {yrs[i]})")

        for arr in (units, yrs, *cols.values()):
            arr.flags.writeable = False
        self._units = units
        self._years = yrs
        self._columns = MappingProxyType(cols)

    # -- construction helpers -------------------------------------------------
    @classmethod
    def from_observations(cls, observations: Iterable[PanelObservation]) -> "Panel":
        obs = list(observations)
        extra_names: list[str] = []
        for o in obs:
            for k in o.extra:
                if k not in extra_names:
                    extra_names.append(k)
        cols = {
            "n_dp": [o.n_dp for o in obs],
            "staff_costs": [o.staff_costs for o in obs],
            "travel_costs": [o.travel_costs for o in obs],
        }
        for k in extra_names:
            cols[k] = [o.extra.get(k, math.nan) for o in obs]
        return cls([o.unit_id for o in obs], [o.year for o in obs], cols)

    def _replace(self, mask=None, columns=None) -> "Panel":
        cols = dict(self._columns) if columns is None else columns
        if mask is None:
            return Panel(self._units, self._years, cols)
        return Panel(self._units[mask], self._years[mask], {k: v[mask] for k, v in cols.items()})

    def subset(self, mask) -> "Panel":
        """Return the rows selected by a boolean mask."""
        return self._replace(mask=np.asarray(mask, dtype=bool))

    def with_columns(self, new: Mapping[str, Sequence[float]], drop: Sequence[str] = ()) -> "Panel":
        cols = {k: v for k, v in self._columns.items() if k not in drop}
        for k, v in new.items():
            cols[k] = np.asarray(v, dtype=float)
        return self._replace(columns=cols)

    def dropna(self, columns: Sequence[str]) -> "Panel":
        """Remove rows with a missing value in any of ``columns``."""
        return self.subset(~self.missing_mask(columns))

    # -- access ---------------------------------------------------------------
    @property
    def unit_ids(self) -> np.ndarray:
        return self._units

    @property
    def year_index(self) -> np.ndarray:
        return self._years

    @property
    def columns(self) -> Mapping[str, np.ndarray]:
        return self._columns

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self._columns)

    @property
    def units(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self._units.tolist()))

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(int(y) for y in np.unique(self._years))

    @property
    def n_obs(self) -> int:
        return int(self._units.size)

    def __len__(self) -> int:
        return self.n_obs

    def column(self, name: str) -> np.ndarray:
        try:
            return self._columns[name]
        except KeyError:
            raise ConfigurationError(f"unknown column {name!r}; have {list(self._columns)}") from None

    def missing_mask(self, columns: Sequence[str]) -> np.ndarray:
        mask = np.zeros(self.n_obs, dtype=bool)
        for name in columns:
            mask |= np.isnan(self.column(name))
        return mask

    @property
    def flagged(self) -> np.ndarray:
        """Rows with a missing lag value in any lag column."""
        lags = [k for k in self._columns if _is_lag_column(k)]
        return self.missing_mask(lags)

    def unit_sizes(self) -> dict[str, int]:
        sizes: dict[str, int] = {}
        for u in self._units:
            sizes[u] = sizes.get(u, 0) + 1
        return sizes

    def life_spans(self) -> dict[int, int]:
        """Histogram of observation counts per unit: span -> number of units."""
        hist: dict[int, int] = {}
        for n in self.unit_sizes().values():
            hist[n] = hist.get(n, 0) + 1
        return dict(sorted(hist.items()))

    @property
    def observations(self) -> list[PanelObservation]:
        base = ("n_dp", "staff_costs", "travel_costs")
        extras = [k for k in self._columns if k not in base]
        out = []
        for i in range(self.n_obs):
            get = lambda k: float(self._columns[k][i]) if k in self._columns else None
            n_dp = get("n_dp")
            out.append(
                PanelObservation(
                    unit_id=self._units[i],
                    year=int(self._years[i]),
                    n_dp=None if n_dp is None else int(n_dp),
                    staff_costs=get("staff_costs"),
                    travel_costs=get("travel_costs"),
                    extra={k: float(self._columns[k][i]) for k in extras},
                )
            )
        return out

    # -- comparison / serialization ------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, Panel):
            return NotImplemented
        if self.column_names != other.column_names:
            return False
        if not (np.array_equal(self._units, other._units) and np.array_equal(self._years, other._years)):
            return False
        return all(
            np.array_equal(self._columns[k], other._columns[k], equal_nan=True) for k in self._columns
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Panel(n_obs={self.n_obs}, n_units={len(self.units)}, years={self.years[:1]}..{self.years[-1:]}, columns={list(self._columns)})"

    def to_csv(self) -> str:
        """Serialize to CSV text readable by :func:`ingest_panel`."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = list(self._columns)
        writer.writerow(["unit", "year", *names])
        for i in range(self.n_obs):
            row = [self._units[i], int(self._years[i])]
            for k in names:
                v = self._columns[k][i]
                if math.isnan(v):
                    row.append("")
                elif k == "n_dp":
                    row.append(int(v))
                else:
                    row.append(repr(float(v)))
            writer.writerow(row)
        return buf.getvalue()


class DropReason(str, enum.Enum):
    SINGLETON_GROUP = "singleton_group"
    ALL_ZERO_OUTCOME = "all_zero_outcome"


@dataclass(frozen=True)
class DropReport:
    """Observations removed before estimation, for one reason."""

    dropped_singletons: int
    dropped_units: tuple[str, ...]
    reason: DropReason = DropReason.SINGLETON_GROUP

    def to_dict(self) -> dict:
        return {
            "reason": self.reason.value,
            "dropped_singletons": self.dropped_singletons,
            "dropped_units": list(self.dropped_units),
        }


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"line {line}: cannot parse {column}={text!r} as a number") from None
    if not math.isfinite(value):
        raise ParseError(f"line {line}: non-finite {column}={text!r}")
    return value


def ingest_panel(csv_bytes: bytes | str, schema: Mapping[str, str] | None = None) -> Panel:
    """Parse a UTF-8 CSV document into a :class:`Panel`.

    Parameters
    ----------
    csv_bytes : bytes or str
        CSV document with a header row.
    schema : mapping, optional
        Maps the roles ``unit, year, n_dp, staff_costs, travel_costs`` (and
        optionally extra covariate names) to header column names. Roles not
        listed map to the column of the same name. Header columns that are not
        mapped to a role are read as extra covariates.

    Returns
    -------
    Panel
    """
    text = csv_bytes.decode("utf-8-sig") if isinstance(csv_bytes, bytes) else csv_bytes
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV document: header row required") from None
    header = [h.strip() for h in header]
    mapping = {role: role for role in REQUIRED_ROLES}
    if schema:
        mapping.update(schema)
    index = {name: j for j, name in enumerate(header)}
    for role in ("staff_costs", "travel_costs"):
        # an already log-transformed panel carries log_<role> instead
        if mapping[role] not in index and f"log_{mapping[role]}" in index:
            del mapping[role]
    missing = [f"{role} (column {col!r})" for role, col in mapping.items() if col not in index]
    if missing:
        raise ParseError(f"header is missing required columns: {', '.join(missing)}")
    role_of = {col: role for role, col in mapping.items()}
    # value columns in header order, named by role where one is mapped
    value_roles = [role_of.get(h, h) for h in header if role_of.get(h) not in ("unit", "year")]

    units, years = [], []
    values: dict[str, list[float]] = {r: [] for r in value_roles}
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        cell = lambda role: row[index[mapping.get(role, role)]].strip()
        unit = cell("unit")
        if not unit:
            raise ParseError(f"line {line}: empty unit identifier")
        year = _parse_float(cell("year"), line, "year")
        if year != int(year):
            raise ParseError(f"line {line}: year must be an integer, got {cell('year')!r}")
        units.append(unit)
        years.append(int(year))
        for role in values:
            raw = cell(role)
            if raw == "":
                if not _is_lag_column(role):
                    raise ParseError(f"line {line}: empty value for {role}")
                values[role].append(math.nan)
            else:
                values[role].append(_parse_float(raw, line, role))
    return Panel(units, years, values)


def read_panel(path, schema: Mapping[str, str] | None = None) -> Panel:
    with open(path, "rb") as fh:
        return ingest_panel(fh.read(), schema)


def log_transform(panel: Panel, columns: Sequence[str]) -> Panel:
    """Replace each column ``c`` by ``log_c`` holding its natural logarithm."""
    new = {}
    for name in columns:
        arr = panel.column(name)
        bad = np.flatnonzero(~(arr > 0))
        if bad.size:
            i = int(bad[0])
            raise DomainError(
                f"log undefined for {name}={arr[i]} at ({panel.unit_ids[i]}, {panel.year_index[i]})"
            )
        new[f"log_{name}"] = np.log(arr)
    # keep column order: the log column takes the place of the original
    cols = {}
    for k, v in panel.columns.items():
        if k in columns:
            cols[f"log_{k}"] = new[f"log_{k}"]
        else:
            cols[k] = v
    return Panel(panel.unit_ids, panel.year_index, cols)


def add_lags(panel: Panel, columns: Sequence[str], order: int = 1) -> Panel:
    """Add ``<column>_lag<order>`` holding the unit's value ``order`` calendar years earlier.

    The lag is missing (``NaN``) when the unit was not observed in that year,
    so gaps in an unbalanced panel never borrow a value from an earlier period,
    and a lag never crosses into another unit. A lag column that already
    exists is kept as is, so repeating the call after dropping flagged rows
    changes nothing.
    """
    if int(order) != order or order < 1:
        raise ConfigurationError(f"lag order must be a positive integer, got {order!r}")
    for name in columns:
        if name not in panel.columns:
            raise ConfigurationError(f"cannot lag unknown column {name!r}")
    position = {(u, int(y)): i for i, (u, y) in enumerate(zip(panel.unit_ids, panel.year_index))}
    source = np.array(
        [position.get((u, int(y) - order), -1) for u, y in zip(panel.unit_ids, panel.year_index)],
        dtype=np.intp,
    )
    found = source >= 0
    new = {}
    for name in columns:
        if lag_name(name, order) in panel.columns:
            continue
        lagged = np.full(panel.n_obs, np.nan)
        lagged[found] = panel.column(name)[source[found]]
        new[lag_name(name, order)] = lagged
    return panel.with_columns(new)


def drop_singleton_groups(panel: Panel) -> tuple[Panel, DropReport]:
    """Remove units observed only once."""
    sizes = panel.unit_sizes()
    single = tuple(u for u, n in sizes.items() if n < 2)
    keep = ~np.isin(panel.unit_ids, np.asarray(single, dtype=object))
    report = DropReport(len(single), single, DropReason.SINGLETON_GROUP)
    return (panel.subset(keep) if single else panel), report


def drop_zero_outcome_groups(panel: Panel, dependent: str = "n_dp") -> tuple[Panel, DropReport]:
    """Remove units whose outcome is zero in every period."""
    y = panel.column(dependent)
    totals: dict[str, float] = {}
    for u, v in zip(panel.unit_ids, y):
        totals[u] = totals.get(u, 0.0) + v
    zero = tuple(u for u, s in totals.items() if s == 0)
    keep = ~np.isin(panel.unit_ids, np.asarray(zero, dtype=object))
    report = DropReport(int((~keep).sum()), zero, DropReason.ALL_ZERO_OUTCOME)
    return (panel.subset(keep) if zero else panel), report
