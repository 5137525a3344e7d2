from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from crceval.design import ModelSpec

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "src" / "crceval" / "data" / "fixture"

LINEAR_SPEC = ModelSpec(dependent="y", regressors=("x1", "x2"), time_dummies=False)
POISSON_SPEC = ModelSpec(dependent="n_dp", regressors=("x1", "x2"), time_dummies=False)


def lsdv_slopes(y, X, groups, years=None):
    """Least squares on [X, unit dummies (, year dummies)] via lstsq; first p coefficients."""
    labels = sorted(set(groups))
    D = np.column_stack([(np.asarray(groups) == g).astype(float) for g in labels])
    blocks = [X, D]
    if years is not None:
        ys = sorted(set(years))[1:]
        blocks.append(np.column_stack([(np.asarray(years) == t).astype(float) for t in ys]))
    Z = np.column_stack(blocks)
    coef = np.linalg.lstsq(Z, y, rcond=None)[0]
    return coef[: X.shape[1]]


@pytest.fixture(scope="session")
def fixture_dir():
    return FIXTURE_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria report: criterion number -> (passed, detail)
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k:2d}: {detail}")
