import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crceval.exceptions import ConfigurationError, DomainError, ParseError, UniquenessError
from crceval.panel import (
    DropReason,
    Panel,
    add_lags,
    drop_singleton_groups,
    drop_zero_outcome_groups,
    ingest_panel,
    lag_name,
    log_transform,
    read_panel,
)

CSV = """unit,year,n_dp,staff_costs,travel_costs
A1,2006,3,100.5,20
A1,2005,1,90,10
B2,2005,0,50,5
B2,2007,2,55,6
C3,2008,4,70,7
"""


def test_ingest_sorts_and_types():
    p = ingest_panel(CSV)
    assert p.n_obs == 5
    assert list(p.unit_ids) == ["A1", "A1", "B2", "B2", "C3"]
    assert list(p.year_index) == [2005, 2006, 2005, 2007, 2008]
    assert p.column("n_dp").tolist() == [1, 3, 0, 2, 4]
    assert p.unit_sizes() == {"A1": 2, "B2": 2, "C3": 1}
    assert p.life_spans() == {1: 1, 2: 2}


def test_ingest_accepts_bytes_and_schema():
    text = CSV.replace("unit,year,n_dp", "sp,jahr,dps")
    p = ingest_panel(text.encode(), schema={"unit": "sp", "year": "jahr", "n_dp": "dps"})
    assert p == ingest_panel(CSV)


def test_panel_is_immutable():
    p = ingest_panel(CSV)
    with pytest.raises(ValueError):
        p.column("n_dp")[0] = 9
    with pytest.raises(TypeError):
        p.columns["n_dp"] = np.zeros(5)


@pytest.mark.parametrize(
    "text, exc",
    [
        (CSV + "A1,2005,1,90,10\n", UniquenessError),
        (CSV.replace("A1,2005,1,90,10", "A1,2005,-1,90,10"), DomainError),
        (CSV.replace("A1,2005,1,90,10", "A1,2005,1.5,90,10"), DomainError),
        (CSV.replace("A1,2005,1,90,10", "A1,2005,1,-90,10"), DomainError),
        (CSV.replace("A1,2005,1,90,10", "A1,2005,1,abc,10"), ParseError),
        (CSV.replace("A1,2005,1,90,10", "A1,2005,1,,10"), ParseError),
        (CSV.replace("A1,2005,1,90,10", "A1,twenty,1,90,10"), ParseError),
        ("unit,year,n_dp\nA,2005,1\n", ParseError),
        ("", ParseError),
    ],
)
def test_ingest_rejects_malformed(text, exc):
    with pytest.raises(exc):
        ingest_panel(text)


def test_parse_error_names_line():
    with pytest.raises(ParseError, match="line 3"):
        ingest_panel(CSV.replace("A1,2005,1,90,10", "A1,2005,1,abc,10"))


def test_unknown_column():
    with pytest.raises(ConfigurationError):
        ingest_panel(CSV).column("nope")


def test_csv_round_trip(tmp_path):
    p = add_lags(log_transform(ingest_panel(CSV), ["staff_costs"]), ["n_dp"])
    q = ingest_panel(p.to_csv())
    assert q == p
    path = tmp_path / "p.csv"
    path.write_text(p.to_csv())
    assert read_panel(path) == p


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=1e9, allow_nan=False), min_size=1, max_size=12))
def test_csv_round_trip_exact_floats(vals):
    n = len(vals)
    p = Panel([f"U{i % 3}" for i in range(n)], [2000 + i for i in range(n)],
              {"n_dp": np.arange(n, dtype=float), "staff_costs": vals, "travel_costs": vals})
    assert ingest_panel(p.to_csv()) == p


def test_lags_respect_calendar_gaps():
    p = add_lags(ingest_panel(CSV), ["n_dp", "staff_costs"])
    lag = p.column(lag_name("n_dp"))
    # A1: 2005 has no predecessor, 2006 takes 2005; B2 2007 has a gap at 2006
    assert math.isnan(lag[0]) and lag[1] == 1
    assert math.isnan(lag[2]) and math.isnan(lag[3])
    assert math.isnan(lag[4])
    assert p.flagged.tolist() == [True, False, True, True, True]
    p2 = add_lags(ingest_panel(CSV), ["n_dp"], order=2)
    assert "n_dp_lag2" in p2.column_names
    assert p2.column("n_dp_lag2")[3] == 0


def test_lag_then_drop_idempotent():
    base = ingest_panel(CSV)
    once = add_lags(base, ["n_dp"])
    once = once.subset(~once.flagged)
    twice = add_lags(once, ["n_dp"])
    twice = twice.subset(~twice.flagged)
    assert twice == once


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=1e-6, max_value=1e8), min_size=1, max_size=10))
def test_log_exp_roundtrip(vals):
    n = len(vals)
    p = Panel(["U"] * n, list(range(2000, 2000 + n)),
              {"n_dp": np.zeros(n), "staff_costs": vals, "travel_costs": np.ones(n)})
    q = log_transform(p, ["staff_costs"])
    assert "log_staff_costs" in q.column_names and "staff_costs" not in q.column_names
    back = np.exp(q.column("log_staff_costs"))
    np.testing.assert_allclose(back, p.column("staff_costs"), rtol=1e-12, atol=0)


def test_log_of_nonpositive_names_row():
    p = ingest_panel(CSV.replace("B2,2005,0,50,5", "B2,2005,0,50,0"))
    with pytest.raises(DomainError, match="B2.*2005"):
        log_transform(p, ["travel_costs"])


def test_drop_singletons():
    p, rep = drop_singleton_groups(ingest_panel(CSV))
    assert rep.dropped_singletons == 1 and rep.dropped_units == ("C3",)
    assert rep.reason is DropReason.SINGLETON_GROUP
    assert min(p.unit_sizes().values()) >= 2


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=6), min_size=1, max_size=20))
def test_drop_singletons_property(sizes):
    units, years = [], []
    for i, s in enumerate(sizes):
        units += [f"U{i:02d}"] * s
        years += list(range(2000, 2000 + s))
    n = len(units)
    p = Panel(units, years, {"n_dp": np.ones(n), "staff_costs": np.ones(n), "travel_costs": np.ones(n)})
    out, rep = drop_singleton_groups(p)
    assert rep.dropped_singletons == sizes.count(1)
    assert all(v >= 2 for v in out.unit_sizes().values())
    assert out.n_obs == n - sizes.count(1)


def test_drop_zero_outcome():
    p, rep = drop_zero_outcome_groups(ingest_panel(CSV.replace("B2,2007,2", "B2,2007,0")))
    assert rep.dropped_units == ("B2",) and rep.dropped_singletons == 2
    assert rep.reason is DropReason.ALL_ZERO_OUTCOME
    assert "B2" not in p.units
