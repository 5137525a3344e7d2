"""Fixed-effects (within) linear regression with time dummies.

The unit effects are swept out by demeaning every column within its unit;
least squares on the demeaned design gives the slopes, and the unit effects
are recovered afterwards from the unit means. Inference uses the
cluster-robust sandwich with clusters equal to units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .design import Design, ModelSpec, build_design, group_codes, year_dummies, year_dummy_name
from .exceptions import (
    DegenerateModelError,
    InferenceError,
    PreconditionError,
    UnderdeterminedError,
)
from .panel import DropReport, Panel

__all__ = [
    "ModelSpec",
    "WithinDesign",
    "FitResult",
    "demean",
    "within_transform",
    "detect_collinearity",
    "cluster_robust_vcov",
    "fit_fe",
    "interpret_level_log",
    "interpret_semi_elasticity",
    "WithinTransformer",
    "FixedEffectsOLS",
]

DEFAULT_RANK_TOL = 1e-8


def demean(values, groups) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Subtract group means from each column of ``values``.

    Returns
    -------
    demeaned : ndarray, same shape as ``values``
    means : ndarray, shape (n_groups, n_columns)
        Group means, row order given by ``labels``.
    codes : ndarray of int
        Group index of every row.
    labels : ndarray
        Sorted group labels.
    """
    values = np.asarray(values, dtype=float)
    squeeze = values.ndim == 1
    V = values.reshape(values.shape[0], -1)
    codes, labels = group_codes(groups)
    counts = np.bincount(codes, minlength=labels.size).astype(float)
    means = np.empty((labels.size, V.shape[1]))
    for j in range(V.shape[1]):
        means[:, j] = np.bincount(codes, weights=V[:, j], minlength=labels.size) / counts
    out = V - means[codes]
    # second sweep removes the rounding left by the first
    for j in range(V.shape[1]):
        out[:, j] -= (np.bincount(codes, weights=out[:, j], minlength=labels.size) / counts)[codes]
    return (out.ravel() if squeeze else out), means, codes, labels


@dataclass(frozen=True)
class WithinDesign:
    """Demeaned outcome and design with the means needed to undo it."""

    y: np.ndarray
    X: np.ndarray
    names: list[str]
    codes: np.ndarray
    units: np.ndarray
    unit_mean_y: np.ndarray
    unit_mean_X: np.ndarray
    grand_mean_y: float
    grand_mean_X: np.ndarray


def _within(design: Design) -> WithinDesign:
    codes, labels = group_codes(design.groups)
    counts = np.bincount(codes, minlength=labels.size)
    if np.any(counts < 2):
        single = [str(labels[i]) for i in np.flatnonzero(counts < 2)]
        raise PreconditionError(f"singleton units present (drop them first): {single}")
    yd, my, _, _ = demean(design.y, design.groups)
    if design.X.shape[1]:
        Xd, mX, _, _ = demean(design.X, design.groups)
    else:
        Xd, mX = np.empty_like(design.X), np.empty((labels.size, 0))
    return WithinDesign(
        y=yd,
        X=Xd,
        names=list(design.names),
        codes=codes,
        units=labels,
        unit_mean_y=my[:, 0],
        unit_mean_X=mX,
        grand_mean_y=float(design.y.mean()),
        grand_mean_X=design.X.mean(axis=0),
    )


def within_transform(panel: Panel, spec: ModelSpec) -> WithinDesign:
    """Demean the dependent variable and design of ``spec`` within units.

    The panel must not contain singleton units; unlike :func:`fit_fe` this
    function does not drop them.
    """
    sizes = panel.unit_sizes()
    single = [u for u, n in sizes.items() if n < 2]
    if single:
        raise PreconditionError(f"singleton units present (drop them first): {single}")
    return _within(build_design(panel, spec))


def detect_collinearity(X, tol: float = DEFAULT_RANK_TOL) -> list[int]:
    """Indices of columns to omit so the remaining design has full column rank.

    Columns are processed left to right, as in a Householder QR with limited
    pivoting: a column is omitted when the norm of its component orthogonal to
    the columns already kept falls below ``tol`` times its original norm. Earlier
    columns therefore always win over later ones.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array")
    n, p = X.shape
    Q = np.empty((n, 0))
    omitted = []
    for j in range(p):
        x = X[:, j]
        norm = np.linalg.norm(x)
        if norm == 0.0:
            omitted.append(j)
            continue
        r = x - Q @ (Q.T @ x)
        r = r - Q @ (Q.T @ r)
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * norm or Q.shape[1] >= n:
            omitted.append(j)
            continue
        Q = np.column_stack([Q, r / rnorm])
    return omitted


def cluster_robust_vcov(X, residuals, clusters, n_params: int | None = None) -> np.ndarray:
    """Cluster-robust sandwich covariance of least-squares coefficients.

    ``c * (X'X)^-1 (sum_g X_g' u_g u_g' X_g) (X'X)^-1`` with the small-sample
    factor ``c = G/(G-1) * (N-1)/(N-K)``.

    Parameters
    ----------
    X : ndarray, shape (N, p)
        Design (already demeaned for the within estimator).
    residuals : ndarray, shape (N,)
    clusters : array-like, shape (N,)
        Cluster label of every observation.
    n_params : int, optional
        ``K`` in the correction factor; defaults to ``p``.
    """
    X = np.asarray(X, dtype=float)
    u = np.asarray(residuals, dtype=float).reshape(-1)
    N, p = X.shape
    if u.shape[0] != N:
        raise ValueError("residuals and X disagree on the number of observations")
    K = p if n_params is None else int(n_params)
    codes, labels = group_codes(clusters)
    G = labels.size
    if G < 2:
        raise InferenceError("cluster-robust covariance needs at least 2 clusters")
    if N - K <= 0:
        raise InferenceError(f"N - K = {N - K}: small-sample factor undefined")
    if p == 0:
        return np.empty((0, 0))
    bread = np.linalg.inv(X.T @ X)
    scores = np.zeros((G, p))
    np.add.at(scores, codes, X * u[:, None])
    meat = scores.T @ scores
    c = G / (G - 1) * (N - 1) / (N - K)
    V = c * bread @ meat @ bread
    return (V + V.T) / 2


@dataclass
class FitResult:
    """Fitted within regression.

    ``coefficients`` and ``std_errors`` cover the estimated columns only;
    columns dropped for collinearity are listed in ``omitted``. ``constant``
    is the mean of the recovered unit effects.
    """

    coefficients: dict[str, float]
    std_errors: dict[str, float]
    omitted: list[str]
    constant: float | None
    r2_within: float | None
    aic: float
    bic: float
    n_obs: int
    n_units: int
    drop_report: list[DropReport]
    residuals: np.ndarray = field(repr=False)
    fixed_effects: dict[str, float] = field(repr=False)
    vcov: np.ndarray = field(repr=False)
    loglik: float = math.nan
    base_year: int | None = None
    dummy_years: list[int] = field(default_factory=list)
    model: str = "fe"

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "coefficients": dict(self.coefficients),
            "std_errors": dict(self.std_errors),
            "omitted": list(self.omitted),
            "constant": self.constant,
            "r2_within": self.r2_within,
            "aic": self.aic,
            "bic": self.bic,
            "loglik": self.loglik,
            "n_obs": self.n_obs,
            "n_units": self.n_units,
            "drop_report": [r.to_dict() for r in self.drop_report],
            "base_year": self.base_year,
        }


def _estimate_within(design: Design, tol: float = DEFAULT_RANK_TOL) -> FitResult:
    wd = _within(design)
    scale = max(1.0, float(np.max(np.abs(design.y))))
    if np.all(np.abs(wd.y) <= 1e-12 * scale):
        raise DegenerateModelError("dependent variable has no within-unit variation")

    omitted_idx = detect_collinearity(wd.X, tol) if wd.X.shape[1] else []
    keep = [j for j in range(wd.X.shape[1]) if j not in set(omitted_idx)]
    Xk = wd.X[:, keep]
    names = [wd.names[j] for j in keep]
    N, G, k = wd.y.size, wd.units.size, len(keep)
    if N <= G + k:
        raise UnderdeterminedError(f"{N} observations for {G} unit effects and {k} slopes")

    beta = np.linalg.lstsq(Xk, wd.y, rcond=None)[0] if k else np.empty(0)
    fitted = Xk @ beta
    resid = wd.y - fitted
    ssr = float(resid @ resid)
    if ssr <= 1e-24 * max(1.0, float(wd.y @ wd.y)):
        raise DegenerateModelError("perfect within fit: residual variance is zero")

    effects = wd.unit_mean_y - (wd.unit_mean_X[:, keep] @ beta if k else 0.0)
    vcov = cluster_robust_vcov(Xk, resid, wd.codes, n_params=k + 1)
    se = np.sqrt(np.diag(vcov)) if k else np.empty(0)

    if k and np.std(fitted) > 0:
        r2 = float(np.corrcoef(fitted, wd.y)[0, 1] ** 2)
    else:
        r2 = 0.0
    loglik = -0.5 * N * (math.log(2 * math.pi * ssr / N) + 1)
    n_par = k + 1
    return FitResult(
        coefficients={n: float(b) for n, b in zip(names, beta)},
        std_errors={n: float(s) for n, s in zip(names, se)},
        omitted=[wd.names[j] for j in omitted_idx],
        constant=float(np.mean(effects)),
        r2_within=r2,
        aic=-2 * loglik + 2 * n_par,
        bic=-2 * loglik + n_par * math.log(N),
        n_obs=N,
        n_units=G,
        drop_report=list(design.drop_reports),
        residuals=resid,
        fixed_effects={str(u): float(c) for u, c in zip(wd.units, effects)},
        vcov=vcov,
        loglik=loglik,
        base_year=design.base_year,
        dummy_years=list(design.dummy_years),
    )


def fit_fe(panel: Panel, spec: ModelSpec | None = None, tol: float = DEFAULT_RANK_TOL) -> FitResult:
    """Fit the time fixed-effects (within) regression described by ``spec``.

    Rows with missing values in the model columns (for example the first year
    of each unit when lags are included) are excluded, then singleton units
    are dropped and reported. Collinear columns, typically a year dummy that
    the unit effects and the other dummies already span, are omitted.
    """
    spec = spec or ModelSpec()
    return _estimate_within(build_design(panel, spec), tol)


def interpret_level_log(coef: float, pct_change: float) -> float:
    """Change in the level outcome when a logged regressor grows by ``pct_change`` percent.

    Uses the usual linear approximation ``coef * pct_change / 100``.
    """
    return coef * pct_change / 100


def interpret_semi_elasticity(coef: float, pct_change: float, exact: bool = False) -> float:
    """Percent change in the expected count for a ``pct_change`` percent rise in a logged regressor.

    The default is the linear approximation ``coef * pct_change``; with
    ``exact=True`` the multiplicative effect ``(1 + pct/100)**coef - 1`` is
    returned in percent.
    """
    if exact:
        return 100 * ((1 + pct_change / 100) ** coef - 1)
    return coef * pct_change


# -- scikit-learn style wrappers ------------------------------------------------


def _array_design(X, y, groups, years, base_year, time_effects, feature_names) -> Design:
    X, y = check_X_y(X, y, y_numeric=True)
    if groups is None:
        raise ValueError("groups (unit labels) are required for fixed-effects estimation")
    groups = np.asarray(groups, dtype=object).astype(str)
    if groups.shape[0] != X.shape[0]:
        raise ValueError("groups and X have different lengths")
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise ValueError("feature_names length does not match X")
    dummy_years: list[int] = []
    base = None
    yrs = np.zeros(X.shape[0], dtype=np.int64) if years is None else np.asarray(years, dtype=np.int64)
    if time_effects:
        if years is None:
            raise ValueError("years are required when time_effects=True")
        D, dummy_years, base = year_dummies(yrs, base_year)
        X = np.hstack([X, D])
        names += [year_dummy_name(t) for t in dummy_years]
    return Design(
        y=y.astype(float),
        X=X.astype(float),
        names=names,
        groups=groups,
        years=yrs,
        n_regressors=len(names) - len(dummy_years),
        dummy_years=dummy_years,
        base_year=base,
    )


def _drop_singletons_arrays(X, y, groups, years):
    groups = np.asarray(groups, dtype=object).astype(str)
    labels, counts = np.unique(groups, return_counts=True)
    single = labels[counts < 2]
    keep = ~np.isin(groups, single)
    report = DropReport(int(single.size), tuple(single.tolist()))
    X = np.asarray(X)[keep]
    y = np.asarray(y)[keep]
    years = None if years is None else np.asarray(years)[keep]
    return X, y, groups[keep], years, report


class WithinTransformer(TransformerMixin, BaseEstimator):
    """Subtract per-group means learned in ``fit``.

    Groups unseen during ``fit`` are centred on the overall mean.
    """

    def fit(self, X, y=None, groups=None):
        X = check_array(X)
        if groups is None:
            raise ValueError("groups are required")
        _, means, _, labels = demean(X, groups)
        self.group_means_ = {str(g): m for g, m in zip(labels, means)}
        self.overall_mean_ = X.mean(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X, groups=None):
        check_is_fitted(self, "group_means_")
        X = check_array(X)
        if groups is None:
            raise ValueError("groups are required")
        M = np.vstack([self.group_means_.get(str(g), self.overall_mean_) for g in groups])
        return X - M

    def fit_transform(self, X, y=None, groups=None):
        return self.fit(X, y, groups=groups).transform(X, groups=groups)


class FixedEffectsOLS(RegressorMixin, BaseEstimator):
    """Within estimator with optional year dummies and cluster-robust errors.

    Parameters
    ----------
    time_effects : bool
        Add year dummies (requires ``years`` in :meth:`fit`).
    base_year : int, optional
        Reference year for the dummies; the earliest year by default.
    tol : float
        Relative rank tolerance for collinearity omission.

    Attributes
    ----------
    coef_ : ndarray
        Estimates for the ``X`` columns, ``nan`` where omitted.
    intercept_ : float
        Mean of the unit effects.
    result_ : FitResult
    """

    def __init__(self, time_effects: bool = False, base_year=None, tol: float = DEFAULT_RANK_TOL):
        self.time_effects = time_effects
        self.base_year = base_year
        self.tol = tol

    def fit(self, X, y, groups=None, years=None, feature_names=None):
        X, y = check_X_y(X, y, y_numeric=True)
        X, y, groups, years, report = _drop_singletons_arrays(X, y, groups, years)
        design = _array_design(X, y, groups, years, self.base_year, self.time_effects, feature_names)
        design.drop_reports = [report]
        self.result_ = _estimate_within(design, self.tol)
        names = design.names[: design.n_regressors]
        self.feature_names_ = names
        self.coef_ = np.array([self.result_.coefficients.get(n, np.nan) for n in names])
        self.bse_ = np.array([self.result_.std_errors.get(n, np.nan) for n in names])
        self.year_effects_ = {
            t: self.result_.coefficients.get(year_dummy_name(t), np.nan) for t in design.dummy_years
        }
        self.intercept_ = self.result_.constant
        self.fixed_effects_ = self.result_.fixed_effects
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, groups=None, years=None):
        """Linear prediction including unit and year effects; unseen units use ``intercept_``."""
        check_is_fitted(self, "result_")
        X = check_array(X)
        coef = np.nan_to_num(self.coef_)
        pred = X @ coef
        if groups is None:
            pred = pred + self.intercept_
        else:
            pred = pred + np.array([self.fixed_effects_.get(str(g), self.intercept_) for g in groups])
        if self.time_effects and years is not None:
            pred = pred + np.array([np.nan_to_num(self.year_effects_.get(int(t), 0.0)) for t in years])
        return pred
