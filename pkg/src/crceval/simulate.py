"""Seeded synthetic panels with known coefficients, for tests and demos."""
from __future__ import annotations

import numpy as np

from .panel import Panel

__all__ = ["unbalanced_years", "simulate_linear_panel", "simulate_poisson_panel"]


def unbalanced_years(rng: np.random.Generator, n_units: int, min_periods: int, max_periods: int,
                     first_year: int = 2005, n_years: int = 12) -> list[list[int]]:
    """Contiguous year spans of random length per unit, inside a fixed window."""
    spans = []
    for _ in range(n_units):
        T = int(rng.integers(min_periods, max_periods + 1))
        T = min(T, n_years)
        start = first_year + int(rng.integers(0, n_years - T + 1))
        spans.append(list(range(start, start + T)))
    return spans


def simulate_linear_panel(seed: int, n_units: int = 35, min_periods: int = 2, max_periods: int = 12,
                          beta=(1.5, -0.9), sigma: float = 0.5, year_effects: bool = False) -> Panel:
    """``y = x'beta + c_i (+ d_t) + e`` with unit effects correlated with the regressors."""
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    units, years, rows = [], [], []
    delta = rng.normal(0, 1, 12) if year_effects else np.zeros(12)
    for i, span in enumerate(unbalanced_years(rng, n_units, min_periods, max_periods)):
        c = rng.normal(0, 2)
        for t in span:
            x = rng.normal(0, 1, beta.size) + 0.5 * c
            y = x @ beta + c + delta[t - 2005] + rng.normal(0, sigma)
            units.append(f"SP{i + 1:02d}")
            years.append(t)
            rows.append([y, *x])
    rows = np.asarray(rows)
    cols = {"y": rows[:, 0]}
    cols.update({f"x{j + 1}": rows[:, j + 1] for j in range(beta.size)})
    return Panel(units, years, cols)


def simulate_poisson_panel(seed: int, n_units: int = 35, min_periods: int = 2, max_periods: int = 12,
                           beta=(0.5, -0.2), base_rate: float = 1.0) -> Panel:
    """Counts ``y ~ Poisson(exp(c_i + x'beta))`` with unit effects correlated with the regressors."""
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    units, years, ys, xs = [], [], [], []
    for i, span in enumerate(unbalanced_years(rng, n_units, min_periods, max_periods)):
        c = rng.normal(np.log(base_rate), 0.5)
        for t in span:
            x = rng.normal(0, 1, beta.size) + 0.3 * c
            ys.append(rng.poisson(np.exp(c + x @ beta)))
            xs.append(x)
            units.append(f"SP{i + 1:02d}")
            years.append(t)
    xs = np.asarray(xs)
    cols = {"n_dp": np.asarray(ys, dtype=float)}
    cols.update({f"x{j + 1}": xs[:, j] for j in range(beta.size)})
    return Panel(units, years, cols)
