"""Fixed-effects Poisson regression via the conditional likelihood.

Conditioning each unit's counts on their total removes the multiplicative
unit effect, leaving a multinomial likelihood in the slopes only:

    l(beta) = sum_i sum_t y_it * log p_it,   p_it = exp(x_it'b) / sum_s exp(x_is'b)

The estimate stays consistent when only the conditional mean is correctly
specified, so the reported standard errors use the per-unit score sandwich
rather than the inverse Hessian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .design import Design, ModelSpec, build_design, year_dummy_name
from .exceptions import DomainError, PreconditionError, UnderdeterminedError
from .linear import DEFAULT_RANK_TOL, _array_design, demean, detect_collinearity
from .panel import DropReason, DropReport, Panel

__all__ = [
    "FepGroup",
    "FepFit",
    "fep_loglik",
    "fep_score",
    "fep_hessian",
    "fep_group_scores",
    "detect_separation",
    "fit_fep",
    "FixedEffectsPoisson",
]


@dataclass(frozen=True)
class FepGroup:
    """Counts and regressors of one unit."""

    unit_id: str
    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"group {self.unit_id}: {y.size} counts but {X.shape[0]} regressor rows")
        if np.any(y < 0):
            raise DomainError(f"group {self.unit_id}: negative count")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> float:
        return float(self.y.sum())


class _Stacked:
    """Groups concatenated into contiguous arrays for vectorized evaluation."""

    def __init__(self, groups: Sequence[FepGroup]):
        groups = list(groups)
        if not groups:
            raise PreconditionError("no groups")
        self.units = [g.unit_id for g in groups]
        self.y = np.concatenate([g.y for g in groups])
        self.X = np.vstack([g.X for g in groups])
        sizes = np.array([g.y.size for g in groups])
        self.starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        self.codes = np.repeat(np.arange(len(groups)), sizes)
        self.n = np.bincount(self.codes, weights=self.y, minlength=len(groups))
        if not np.all(np.isfinite(self.X)):
            bad = int(self.codes[np.flatnonzero(~np.all(np.isfinite(self.X), axis=1))[0]])
            raise DomainError(f"non-finite regressor in group {self.units[bad]}")

    def probabilities(self, beta) -> tuple[np.ndarray, np.ndarray]:
        eta = self.X @ np.asarray(beta, dtype=float)
        m = np.maximum.reduceat(eta, self.starts)
        z = np.exp(eta - m[self.codes])
        lse = m + np.log(np.bincount(self.codes, weights=z, minlength=self.n.size))
        logp = eta - lse[self.codes]
        return np.exp(logp), logp


def _stacked(groups) -> _Stacked:
    return groups if isinstance(groups, _Stacked) else _Stacked(groups)


def fep_loglik(beta, groups) -> float:
    """Conditional log-likelihood ``sum y_it log p_it`` (multinomial constants omitted)."""
    s = _stacked(groups)
    _, logp = s.probabilities(beta)
    return float(s.y @ logp)


def fep_score(beta, groups) -> np.ndarray:
    """Gradient ``sum_i sum_t (y_it - n_i p_it) x_it``."""
    s = _stacked(groups)
    p, _ = s.probabilities(beta)
    return s.X.T @ (s.y - s.n[s.codes] * p)


def fep_group_scores(beta, groups) -> np.ndarray:
    """Per-group score contributions, shape (n_groups, K)."""
    s = _stacked(groups)
    p, _ = s.probabilities(beta)
    out = np.zeros((s.n.size, s.X.shape[1]))
    np.add.at(out, s.codes, s.X * (s.y - s.n[s.codes] * p)[:, None])
    return out


def fep_hessian(beta, groups) -> np.ndarray:
    """``-sum_i n_i [sum_t p_it x x' - (sum_t p_it x)(sum_t p_it x)']``."""
    s = _stacked(groups)
    p, _ = s.probabilities(beta)
    W = s.n[s.codes] * p
    H1 = (s.X * W[:, None]).T @ s.X
    xbar = np.zeros((s.n.size, s.X.shape[1]))
    np.add.at(xbar, s.codes, s.X * p[:, None])
    H2 = (xbar * s.n[:, None]).T @ xbar
    H = -(H1 - H2)
    return (H + H.T) / 2


def detect_separation(groups, rel_tol: float = 1e-7) -> bool:
    """True if some direction increases the likelihood without bound.

    That happens when a direction ``d`` exists under which every period with a
    positive count attains its unit's maximum of ``x'd`` while some period
    strictly falls below it. Solved as a bounded linear program.
    """
    s = _stacked(groups)
    K = s.X.shape[1]
    if K == 0:
        return False
    scale = s.X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = s.X / scale
    rows = []
    for g, start in enumerate(s.starts):
        stop = s.starts[g + 1] if g + 1 < s.starts.size else s.y.size
        Zg, yg = Z[start:stop], s.y[start:stop]
        pos = np.flatnonzero(yg > 0)
        if pos.size == yg.size:
            # all periods positive: any direction must be flat within the unit
            rows.append(Zg[1:] - Zg[0])
            rows.append(Zg[0] - Zg[1:])
            continue
        for t in pos:
            rows.append(Zg - Zg[t])
    A = np.vstack(rows)
    A = A[np.any(A != 0, axis=1)]
    if A.size == 0:
        return False
    c = A.sum(axis=0)  # minimizing sum of (x_s - x_t)'d maximizes the total gap
    res = linprog(c, A_ub=A, b_ub=np.zeros(A.shape[0]), bounds=[(-1, 1)] * K, method="highs")
    if res.status != 0:
        return False
    return bool(-res.fun > rel_tol * max(1.0, np.abs(A).sum() / A.shape[0]))


@dataclass
class FepFit:
    """Fitted conditional Poisson model."""

    coefficients: dict[str, float]
    std_errors: dict[str, float]
    omitted: list[str]
    loglik: float
    aic: float
    bic: float
    n_obs: int
    n_units: int
    drop_report: list[DropReport]
    iterations: int
    converged: bool
    gradient_norm: float = math.nan
    notes: list[str] = field(default_factory=list)
    vcov: np.ndarray = field(default=None, repr=False)
    base_year: int | None = None
    dummy_years: list[int] = field(default_factory=list)
    unit_effects: dict[str, float] = field(default_factory=dict, repr=False)
    model: str = "fep"

    # the reported schema matches FitResult
    constant = None
    r2_within = None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "coefficients": dict(self.coefficients),
            "std_errors": dict(self.std_errors),
            "omitted": list(self.omitted),
            "constant": None,
            "r2_within": None,
            "aic": self.aic,
            "bic": self.bic,
            "loglik": self.loglik,
            "n_obs": self.n_obs,
            "n_units": self.n_units,
            "drop_report": [r.to_dict() for r in self.drop_report],
            "base_year": self.base_year,
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "notes": list(self.notes),
        }


def _newton(stack: _Stacked, tol: float, max_iter: int, trace: list | None = None):
    """Newton-Raphson from zero with step halving.

    If ``trace`` is a list, one dict per iterate is appended with the
    iterate, its log-likelihood, the directional derivative ``g'step`` and
    the accepted step length.
    """
    K = stack.X.shape[1]
    beta = np.zeros(K)
    ll = fep_loglik(beta, stack)
    notes = []
    it = 0
    for it in range(1, max_iter + 1):
        g = fep_score(beta, stack)
        if np.max(np.abs(g), initial=0.0) < tol:
            it -= 1
            break
        H = fep_hessian(beta, stack)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            notes.append("singular Hessian during Newton iterations")
            break
        t = 1.0
        if trace is not None:
            trace.append({"beta": beta.copy(), "loglik": ll, "slope": float(g @ step)})
        for _ in range(40):
            cand = beta + t * step
            ll_new = fep_loglik(cand, stack)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * max(1.0, abs(ll)):
                break
            t /= 2
        else:
            notes.append("line search failed to increase the likelihood")
            break
        beta, ll = cand, ll_new
        if trace is not None:
            trace[-1]["step"] = t
        if np.linalg.norm(t * step) < tol:
            break
    g = fep_score(beta, stack)
    return beta, ll, g, it, notes


def _fit_groups(design: Design, tol: float, max_iter: int, rank_tol: float) -> FepFit:
    omitted_idx: list[int] = []
    if design.X.shape[1]:
        Xd, _, _, _ = demean(design.X, design.groups)
        omitted_idx = detect_collinearity(Xd, rank_tol)
    keep = [j for j in range(design.X.shape[1]) if j not in set(omitted_idx)]
    names = [design.names[j] for j in keep]
    Xk = design.X[:, keep]

    order = np.argsort(design.groups, kind="stable")
    units = list(dict.fromkeys(design.groups[order].tolist()))
    groups = []
    for u in units:
        m = design.groups == u
        groups.append(FepGroup(u, design.y[m], Xk[m]))
    stack = _Stacked(groups)
    N, G, K = stack.y.size, len(groups), len(keep)
    if N - G < K:
        raise UnderdeterminedError(f"{N} observations for {G} groups and {K} slopes")

    separated = detect_separation(stack)
    beta, ll, g, iterations, newton_notes = _newton(stack, tol, max_iter)
    notes = list(newton_notes)
    gnorm = float(np.max(np.abs(g), initial=0.0))
    converged = gnorm < tol and not separated and not newton_notes
    if separated:
        notes.append("separation: a regressor perfectly orders counts within units; estimates diverge")
    elif not converged and not newton_notes:
        notes.append(f"no convergence after {max_iter} iterations (gradient max-norm {gnorm:.3g})")

    if K:
        H = fep_hessian(beta, stack)
        S = fep_group_scores(beta, stack)
        try:
            Hinv = np.linalg.inv(H)
            vcov = Hinv @ (S.T @ S) @ Hinv
            vcov = (vcov + vcov.T) / 2
        except np.linalg.LinAlgError:
            vcov = np.full((K, K), np.nan)
        se = np.sqrt(np.clip(np.diag(vcov), 0, None))
    else:
        vcov, se = np.empty((0, 0)), np.empty(0)

    eta = stack.X @ beta
    denom = np.bincount(stack.codes, weights=np.exp(eta - eta.max()), minlength=G) * math.exp(eta.max())
    effects = {u: float(stack.n[i] / denom[i]) for i, u in enumerate(stack.units)}
    return FepFit(
        coefficients={n: float(b) for n, b in zip(names, beta)},
        std_errors={n: float(s) for n, s in zip(names, se)},
        omitted=[design.names[j] for j in omitted_idx],
        loglik=ll,
        aic=-2 * ll + 2 * K,
        bic=-2 * ll + K * math.log(N),
        n_obs=N,
        n_units=G,
        drop_report=list(design.drop_reports),
        iterations=iterations,
        converged=bool(converged),
        gradient_norm=gnorm,
        notes=notes,
        vcov=vcov,
        base_year=design.base_year,
        dummy_years=list(design.dummy_years),
        unit_effects=effects,
    )


def fit_fep(
    panel: Panel,
    spec: ModelSpec | None = None,
    tol: float = 1e-8,
    max_iter: int = 100,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> FepFit:
    """Fit the fixed-effects Poisson model by Newton's method on the conditional likelihood.

    Parameters
    ----------
    panel : Panel
    spec : ModelSpec, optional
        The dependent variable must hold non-negative counts.
    tol : float
        Convergence threshold on the gradient max-norm (and on the step norm).
    max_iter : int
        Newton iteration cap. Hitting it yields ``converged=False`` rather than
        an exception.
    rank_tol : float
        Relative tolerance for omitting collinear or within-constant columns.

    Notes
    -----
    Singleton units and units with zero counts in every period are removed
    first; both drops appear in ``drop_report``.
    """
    spec = spec or ModelSpec()
    y = panel.column(spec.dependent)
    ok = ~np.isnan(y)
    if np.any(y[ok] < 0) or np.any(y[ok] != np.round(y[ok])):
        raise DomainError(f"dependent variable {spec.dependent!r} must hold non-negative integer counts")
    design = build_design(panel, spec, drop_zero_outcomes=True)
    return _fit_groups(design, tol, max_iter, rank_tol)


class FixedEffectsPoisson(RegressorMixin, BaseEstimator):
    """Conditional (fixed-effects) Poisson regression with cluster-robust errors.

    ``predict`` returns expected counts ``a_i * exp(x'b)`` with the unit
    effect ``a_i`` estimated from the training counts; unseen units use the
    mean of the training effects.
    """

    def __init__(self, time_effects: bool = False, base_year=None, tol: float = 1e-8,
                 max_iter: int = 100, rank_tol: float = DEFAULT_RANK_TOL):
        self.time_effects = time_effects
        self.base_year = base_year
        self.tol = tol
        self.max_iter = max_iter
        self.rank_tol = rank_tol

    def fit(self, X, y, groups=None, years=None, feature_names=None):
        X, y = check_X_y(X, y, y_numeric=True)
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise DomainError("y must hold non-negative integer counts")
        if groups is None:
            raise ValueError("groups (unit labels) are required")
        groups = np.asarray(groups, dtype=object).astype(str)
        labels, counts = np.unique(groups, return_counts=True)
        totals = np.array([y[groups == g].sum() for g in labels])
        single = labels[counts < 2]
        zero = labels[(counts >= 2) & (totals == 0)]
        keep_single = ~np.isin(groups, single)
        keep = keep_single & ~np.isin(groups, zero)
        reports = [
            DropReport(int(single.size), tuple(single.tolist())),
            DropReport(int((keep_single & ~keep).sum()), tuple(zero.tolist()), DropReason.ALL_ZERO_OUTCOME),
        ]
        yrs = None if years is None else np.asarray(years)[keep]
        design = _array_design(X[keep], y[keep], groups[keep], yrs, self.base_year, self.time_effects, feature_names)
        design.drop_reports = reports
        self.result_ = _fit_groups(design, self.tol, self.max_iter, self.rank_tol)
        names = design.names[: design.n_regressors]
        self.feature_names_ = names
        self.coef_ = np.array([self.result_.coefficients.get(n, np.nan) for n in names])
        self.bse_ = np.array([self.result_.std_errors.get(n, np.nan) for n in names])
        self.year_effects_ = {
            t: self.result_.coefficients.get(year_dummy_name(t), np.nan) for t in design.dummy_years
        }
        self.unit_effects_ = self.result_.unit_effects
        self.converged_ = self.result_.converged
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, groups=None, years=None):
        check_is_fitted(self, "result_")
        X = check_array(X)
        eta = X @ np.nan_to_num(self.coef_)
        if self.time_effects and years is not None:
            eta = eta + np.array([np.nan_to_num(self.year_effects_.get(int(t), 0.0)) for t in years])
        default = float(np.mean(list(self.unit_effects_.values())))
        if groups is None:
            a = np.full(X.shape[0], default)
        else:
            a = np.array([self.unit_effects_.get(str(g), default) for g in groups])
        return a * np.exp(eta)
