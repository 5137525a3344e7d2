"""Model specification and estimation-sample preparation.

Both estimators go through :func:`build_design`: optional lags, removal of
rows with missing values, group drops, and year dummies. Column order in the
design is regressors first, then dummies in year order; collinearity checks
rely on that order to decide which columns survive.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, PreconditionError
from .panel import DropReport, Panel, add_lags, drop_singleton_groups, drop_zero_outcome_groups, lag_name

__all__ = ["ModelSpec", "Design", "build_design", "year_dummy_name", "year_dummies", "group_codes"]


def year_dummy_name(year: int) -> str:
    return f"year_{int(year)}"


@dataclass(frozen=True)
class ModelSpec:
    """Which columns enter a fixed-effects model.

    ``include_lags`` adds the first calendar-year lag of the dependent
    variable and of every regressor, as in the lagged model variants.
    ``base_year`` defaults to the earliest year of the estimation sample.
    """

    dependent: str = "n_dp"
    regressors: tuple[str, ...] = ("log_staff_costs", "log_travel_costs")
    time_dummies: bool = True
    base_year: int | None = None
    include_lags: bool = False

    def __post_init__(self):
        object.__setattr__(self, "regressors", tuple(self.regressors))
        if self.dependent in self.regressors:
            raise ConfigurationError(f"dependent variable {self.dependent!r} is also listed as a regressor")
        if len(set(self.regressors)) != len(self.regressors):
            raise ConfigurationError("regressors must be distinct")

    @property
    def lagged_regressors(self) -> tuple[str, ...]:
        if not self.include_lags:
            return self.regressors
        lags = tuple(lag_name(c) for c in (self.dependent, *self.regressors))
        return self.regressors + lags

    def to_dict(self) -> dict:
        return {
            "dependent": self.dependent,
            "regressors": list(self.regressors),
            "time_dummies": self.time_dummies,
            "base_year": self.base_year,
            "include_lags": self.include_lags,
        }


def group_codes(groups) -> tuple[np.ndarray, np.ndarray]:
    """Integer code per row plus the sorted unique labels."""
    labels, codes = np.unique(np.asarray(groups, dtype=object).astype(str), return_inverse=True)
    return codes.reshape(-1), labels


def year_dummies(years, base_year: int | None = None) -> tuple[np.ndarray, list[int], int]:
    """0/1 indicator columns for every year except ``base_year``.

    Returns the matrix, the list of dummy years, and the base year used.
    """
    years = np.asarray(years, dtype=np.int64)
    present = sorted(int(y) for y in np.unique(years))
    if not present:
        raise PreconditionError("no observations to build year dummies from")
    base = present[0] if base_year is None else int(base_year)
    if base not in present:
        raise ConfigurationError(f"base year {base} is not in the sample years {present}")
    dummy_years = [y for y in present if y != base]
    D = (years[:, None] == np.asarray(dummy_years, dtype=np.int64)[None, :]).astype(float)
    return D, dummy_years, base


@dataclass
class Design:
    """Estimation sample in matrix form."""

    y: np.ndarray
    X: np.ndarray
    names: list[str]
    groups: np.ndarray
    years: np.ndarray
    n_regressors: int
    dummy_years: list[int] = field(default_factory=list)
    base_year: int | None = None
    drop_reports: list[DropReport] = field(default_factory=list)
    panel: Panel | None = None


def build_design(panel: Panel, spec: ModelSpec, drop_zero_outcomes: bool = False) -> Design:
    """Prepare the estimation sample described by ``spec``.

    Parameters
    ----------
    panel : Panel
    spec : ModelSpec
    drop_zero_outcomes : bool
        Also remove units whose dependent variable is zero in every period
        (needed by the conditional Poisson likelihood).
    """
    for name in (spec.dependent, *spec.regressors):
        if name not in panel.columns:
            raise ConfigurationError(f"model references unknown column {name!r}; have {list(panel.columns)}")
    if spec.include_lags:
        panel = add_lags(panel, [spec.dependent, *spec.regressors], order=1)
    regressors = list(spec.lagged_regressors)
    panel = panel.dropna([spec.dependent, *regressors])

    reports = []
    panel, report = drop_singleton_groups(panel)
    reports.append(report)
    if drop_zero_outcomes:
        panel, report = drop_zero_outcome_groups(panel, spec.dependent)
        reports.append(report)
    if len(panel.units) < 2:
        raise PreconditionError(f"need at least 2 units after drops, have {len(panel.units)}")

    X = np.column_stack([panel.column(c) for c in regressors]) if regressors else np.empty((panel.n_obs, 0))
    names = list(regressors)
    dummy_years: list[int] = []
    base = None
    if spec.time_dummies:
        D, dummy_years, base = year_dummies(panel.year_index, spec.base_year)
        X = np.hstack([X, D])
        names += [year_dummy_name(y) for y in dummy_years]
    return Design(
        y=np.asarray(panel.column(spec.dependent), dtype=float),
        X=np.asarray(X, dtype=float),
        names=names,
        groups=np.asarray(panel.unit_ids),
        years=np.asarray(panel.year_index),
        n_regressors=len(regressors),
        dummy_years=dummy_years,
        base_year=base,
        drop_reports=reports,
        panel=panel,
    )
