"""Seeded synthetic research-center dataset in the shape of the real one.

35 sub-projects over 2005-2016 (12 lasting four years, 11 eight years, 5
twelve years, the rest short-lived), 760 discussion papers over 20 JEL
codes, 65 defended PhDs (45 of them in academia), 38 PIs, and two
text corpora whose top keywords overlap by about half.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .indicators import JEL_CODES

__all__ = ["make_fixture", "write_fixture", "LIFE_SPANS"]

# (years observed, number of sub-projects)
LIFE_SPANS = ((4, 12), (8, 11), (12, 5), (1, 5), (2, 1), (3, 1))
FTE_LEVELS = ((0.5, 8), (1.0, 21), (1.5, 4), (2.0, 1), (2.5, 1))
JEL_WEIGHTS = {"C": 30, "G": 18, "E": 14, "D": 12, "Q": 5, "F": 3, "J": 3, "H": 2, "L": 2, "O": 2}
# (gender, location, sector) -> count; non-academia totals per gender only
ACADEMIA_COUNTS = {
    ("female", "germany"): 11,
    ("female", "abroad"): 6,
    ("male", "germany"): 21,
    ("male", "abroad"): 7,
}
OTHER_BY_GENDER = {"female": 7, "male": 13}

_SHARED = (
    "risk", "market", "model", "financial", "volatility", "estimation", "time", "series", "data",
    "economic", "price", "policy", "statistical", "panel", "dynamic", "nonparametric", "copula",
    "dependence", "distribution", "inference", "stochastic", "equilibrium", "monetary", "credit",
    "portfolio", "option", "default", "quantile", "regression", "bayesian", "network", "forecast",
    "uncertainty", "insurance", "asset", "liquidity", "contract", "welfare",
)
_PROPOSAL_ONLY = tuple(f"goal{i:02d}" for i in range(37))
_ABSTRACT_ONLY = tuple(f"result{i:02d}" for i in range(37))


def _units(rng):
    units = []
    idx = 1
    for span, n in LIFE_SPANS:
        for j in range(n):
            if span == 12:
                start = 2005
            elif span == 8:
                start = (2005, 2009)[j % 2]
            elif span == 4:
                start = (2005, 2009, 2013)[j % 3]
            else:
                start = int(rng.integers(2005, 2017 - span + 1))
            units.append((f"SP{idx:02d}", list(range(start, start + span))))
            idx += 1
    return units


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _text(rng, core, n_words):
    """Documents dominated by ``core`` words plus a long tail of rare filler."""
    docs = []
    for _ in range(n_words[0]):
        words = list(rng.choice(core, size=n_words[1]))
        words += [f"filler{int(v)}" for v in rng.integers(0, 5000, size=4)]
        words += ["the", "of", "and", "we"]
        rng.shuffle(words)
        docs.append(" ".join(words))
    return docs


def make_fixture(seed: int = 649) -> dict[str, str]:
    """Return file name -> content for the full fixture."""
    rng = np.random.default_rng(seed)
    units = _units(rng)
    fte_pool = [f for f, n in FTE_LEVELS for _ in range(n)]
    rng.shuffle(fte_pool)
    delta = dict(zip(range(2005, 2017), [0.0, *rng.normal(-0.4, 0.3, 11)]))

    panel_rows, staff_rows, dp_weights = [], [], []
    for (uid, years), fte in zip(units, fte_pool):
        c = rng.normal(0.6, 0.4)
        for t in years:
            staff = fte * 62000 * float(np.exp(rng.normal(0, 0.15)))
            travel = 3000 * float(np.exp(rng.normal(0, 0.5)))
            mu = np.exp(c + 0.47 * np.log(staff / 62000) - 0.22 * np.log(travel / 3000) + delta[t])
            n_dp = int(rng.poisson(mu))
            panel_rows.append([uid, t, n_dp, round(staff, 2), round(travel, 2)])
            staff_rows.append([uid, t, fte, "postdoc" if rng.random() < 0.3 else "doc"])
            dp_weights.append((uid, t, mu))

    codes = list(JEL_CODES)
    w = np.array([JEL_WEIGHTS.get(c, 0.5) for c in codes], dtype=float)
    w /= w.sum()
    mu = np.array([m for _, _, m in dp_weights])
    rows_for_pub = rng.choice(len(dp_weights), size=760, p=mu / mu.sum())
    field_mean = {c: round(float(rng.uniform(2, 12)), 2) for c in codes}
    pub_rows = []
    for i, r in enumerate(rows_for_pub):
        uid, t, _ = dp_weights[r]
        if i < len(codes):
            jel = [codes[i]]
        else:
            k = int(rng.choice([1, 2, 3], p=[0.45, 0.4, 0.15]))
            jel = list(rng.choice(codes, size=k, replace=False, p=w))
        cites = int(rng.negative_binomial(1, 0.15))
        pub_rows.append([
            f"DP{i + 1:04d}", uid, t, cites, int(rng.integers(1, 5)), field_mean[jel[0]],
            round(float(rng.uniform(1, 20)), 2), ";".join(jel),
        ])

    phd_rows = []
    cells = [((g, loc, "academia"), n) for (g, loc), n in ACADEMIA_COUNTS.items()]
    for g, n in OTHER_BY_GENDER.items():
        n_de = int(rng.integers(0, n + 1))
        cells += [((g, "germany", "other"), n_de), ((g, "abroad", "other"), n - n_de)]
    pid = 1
    for (g, loc, sector), n in cells:
        for _ in range(n):
            start = int(rng.integers(2005, 2013))
            phd_rows.append([f"PHD{pid:02d}", g, start, start + int(rng.integers(3, 6)),
                             int(rng.integers(0, 7)), loc, sector])
            pid += 1

    ranks = ["full_professor"] * 29 + ["junior_professor"] * 7 + ["postdoc"] * 2
    rng.shuffle(ranks)
    # one lead PI per sub-project, six sub-projects with a second PI; three
    # of those second PIs already lead another project, giving 38 people
    leads = [(f"PI{i + 1:02d}", uid) for i, (uid, _) in enumerate(units)]
    leads += [("PI36", units[30][0]), ("PI37", units[31][0]), ("PI38", units[32][0])]
    leads += [("PI01", units[33][0]), ("PI02", units[34][0]), ("PI03", units[20][0])]
    span_of = dict(units)
    pi_rows = []
    for person, uid in leads:
        jel = list(rng.choice(codes, size=int(rng.integers(1, 5)), replace=False, p=w))
        ys = span_of[uid]
        pi_rows.append([person, uid, ";".join(jel), f"{ys[0]}-{ys[-1]}", ranks[int(person[2:]) - 1]])

    proposals = _text(rng, np.array(_SHARED + _PROPOSAL_ONLY), (61, 40))
    abstracts = _text(rng, np.array(_SHARED + _ABSTRACT_ONLY), (771, 20))

    config = {
        "panel_csv": "panel.csv",
        "publications_csv": "publications.csv",
        "staff_csv": "staff.csv",
        "phd_csv": "phd.csv",
        "pi_csv": "pi.csv",
        "proposals": "proposals.txt",
        "abstracts": "abstracts.txt",
        "dependent": "n_dp",
        "regressors": ["log_staff_costs", "log_travel_costs"],
        "log_columns": ["staff_costs", "travel_costs"],
        "sections": ["fe", "fe_lag", "fep", "fep_lag", "indicators", "network", "keywords", "mosaic"],
        "network_format": "json",
        "keywords_k": 75,
    }
    return {
        "panel.csv": _csv(REQUIRED_HEADER, panel_rows),
        "staff.csv": _csv(["unit_id", "year", "fte", "role"], staff_rows),
        "publications.csv": _csv(
            ["pub_id", "unit_id", "year", "citations", "n_authors", "field_mean_citations",
             "journal_mean_citations", "jel_codes"], pub_rows),
        "phd.csv": _csv(["person_id", "gender", "start_year", "defense_year", "publications",
                         "post_phd_location", "post_phd_sector"], phd_rows),
        "pi.csv": _csv(["person", "project", "jel_codes", "years", "rank"], pi_rows),
        "proposals.txt": "\n".join(proposals) + "\n",
        "abstracts.txt": "\n".join(abstracts) + "\n",
        "config.json": json.dumps(config, indent=2) + "\n",
    }


REQUIRED_HEADER = ["unit", "year", "n_dp", "staff_costs", "travel_costs"]


def write_fixture(out_dir, seed: int = 649) -> Path:
    """Write the fixture files into ``out_dir``; returns the config path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, content in make_fixture(seed).items():
        (out / name).write_text(content, encoding="utf-8")
    return out / "config.json"
