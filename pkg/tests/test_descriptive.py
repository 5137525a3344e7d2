import json
import math
import time
from fractions import Fraction
from xml.etree import ElementTree as ET

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crceval.descriptive import (
    ContingencyTable3,
    ExpertiseAssignment,
    build_jel_network,
    expertise_weights,
    export_network,
    extract_keywords,
    field_correlation,
    import_network_json,
    keyword_overlap,
    load_stopwords,
    mosaic_layout,
    read_corpus,
    staff_expertise,
    tokenize,
)
from crceval.exceptions import (
    ConfigurationError,
    DegenerateLayoutError,
    UndefinedRatioError,
    ValidationError,
)
from crceval.indicators import JEL_CODES, PublicationRecord

CODES = sorted(JEL_CODES)


def pubs_from(codes_per_pub):
    return [PublicationRecord(f"DP{i:04d}", "SP01", 2005, jel_codes=c) for i, c in enumerate(codes_per_pub)]


# -- network ---------------------------------------------------------------------


def test_small_network_and_dot():
    g = build_jel_network(pubs_from([("C",), ("C", "G")]))
    assert g.jel_degree == {"C": 2, "G": 1}
    assert g.dp_degree == {"DP0000": 1, "DP0001": 2}
    assert g.jel_share == {"C": 2 / 3, "G": 1 / 3}
    g1 = build_jel_network(pubs_from([("C",), ("G",)]))
    dot = export_network(g1, "dot").decode()
    assert dot.startswith("graph dp_jel {")
    assert dot.count(" -- ") == 2
    assert dot.count("[kind=") == 4
    g2 = build_jel_network(pubs_from([("C", "G")]))
    dot2 = export_network(g2, "dot").decode()
    assert dot2.count("[kind=") == 3 and dot2.count(" -- ") == 2
    assert 'width=5.0' in dot2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sets(st.sampled_from(CODES), min_size=1, max_size=4), min_size=1, max_size=40))
def test_network_properties(codes):
    pubs = pubs_from([tuple(sorted(c)) for c in codes])
    g = build_jel_network(pubs)
    assert len(g.edges) == sum(len(p.jel_codes) for p in pubs)
    assert math.isclose(sum(g.jel_share.values()), 1.0, abs_tol=1e-12)
    assert import_network_json(export_network(g, "json")) == g


def test_graphml_parses():
    g = build_jel_network(pubs_from([("C",), ("C", "G"), ("E",)]))
    data = export_network(g, "graphml")
    ET.fromstring(data)
    G = nx.parse_graphml(data.decode())
    assert G.number_of_nodes() == 6 and G.number_of_edges() == 4
    assert G.nodes["jel:C"]["share"] == pytest.approx(0.5)
    assert G.nodes["jel:C"]["size"] == pytest.approx(5.0)


def test_network_errors():
    g = build_jel_network(pubs_from([("C",)]))
    with pytest.raises(ConfigurationError):
        export_network(g, "gexf")
    empty = build_jel_network(pubs_from([()]))
    assert empty.jel_share is None and empty.summary()["n_edges"] == 0
    json.loads(export_network(empty, "json"))


def test_network_fixture_scale():
    rng = np.random.default_rng(13)
    codes = [tuple(rng.choice(CODES, size=int(rng.integers(1, 4)), replace=False)) for _ in range(760)]
    codes[:20] = [(c,) for c in CODES]
    t0 = time.perf_counter()
    g = build_jel_network(pubs_from(codes))
    export_network(g, "json")
    assert time.perf_counter() - t0 < 1.0
    assert len(g.dp_nodes) == 760 and len(g.jel_nodes) == 20


# -- expertise -------------------------------------------------------------------


def test_expertise_weights_example():
    a = ExpertiseAssignment("P", {"SP01": ("C", "G"), "SP02": ("E",)}, [2005, 2006])
    w = expertise_weights([a])
    cells = w.per_year["P", 2005]
    assert cells == {("SP01", "C"): 0.25, ("SP01", "G"): 0.25, ("SP02", "E"): 0.5}
    assert w.totals == {("P", "C"): 0.5, ("P", "E"): 1.0, ("P", "G"): 0.5}
    assert w.jel_totals() == {"C": 0.5, "E": 1.0, "G": 0.5}


def test_expertise_merges_assignments_per_year():
    w = expertise_weights([
        ExpertiseAssignment("P", {"SP01": ("C",)}, [2005, 2006], "postdoc"),
        ExpertiseAssignment("P", {"SP02": ("D", "E")}, [2006]),
    ])
    assert w.per_year["P", 2005] == {("SP01", "C"): 1.0}
    assert w.per_year["P", 2006] == {("SP01", "C"): 0.5, ("SP02", "D"): 0.25, ("SP02", "E"): 0.25}


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.text("ABCDEFGH", min_size=1, max_size=3),
                       st.lists(st.sampled_from(CODES), min_size=1, max_size=5), min_size=1, max_size=7))
def test_expertise_sums_to_one(projects):
    w = expertise_weights([ExpertiseAssignment("P", projects, range(2005, 2008))])
    for cells in w.per_year.values():
        assert abs(math.fsum(cells.values()) - 1) <= 1e-12


def test_expertise_by_rank_and_staff():
    w = expertise_weights([
        ExpertiseAssignment("P", {"SP01": ("C",)}, [2005], "full_professor"),
        ExpertiseAssignment("Q", {"SP01": ("C",)}, [2005, 2006], "junior_professor"),
    ])
    assert w.by_rank() == {"full_professor": {"C": 1.0}, "junior_professor": {"C": 2.0}}
    assert staff_expertise([(("C", "G"), {2005: 1.0, 2006: 0.5})]) == {"C": 0.75, "G": 0.75}
    with pytest.raises(ValidationError):
        expertise_weights([ExpertiseAssignment("P", {"SP01": ()}, [2005])])


def test_field_correlation_hand_value():
    a = {"C": 10.0, "E": 6.0, "G": 8.0, "D": 3.0}
    b = {"C": 20.0, "E": 11.0, "G": 17.0, "D": 7.0}
    # means 6.75 and 13.75; deviations (3.25, -0.75, 1.25, -3.75) and (6.25, -2.75, 3.25, -6.75)
    sxy = 3.25 * 6.25 + 0.75 * 2.75 + 1.25 * 3.25 + 3.75 * 6.75
    sxx = 3.25**2 + 0.75**2 + 1.25**2 + 3.75**2
    syy = 6.25**2 + 2.75**2 + 3.25**2 + 6.75**2
    hand = sxy / math.sqrt(sxx * syy)
    assert field_correlation(a, b) == pytest.approx(hand, abs=1e-14)
    assert round(hand, 4) == 0.9871


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=10, unique=True),
       st.floats(0.01, 100), st.floats(-50, 50))
def test_field_correlation_affine(vals, scale, shift):
    a = {f"k{i}": v for i, v in enumerate(vals)}
    b = {f"k{i}": v**2 + i for i, v in enumerate(vals)}
    if np.std(list(b.values())) < 1e-6 or np.std(vals) < 1e-3:
        return
    r = field_correlation(a, b)
    a2 = {k: scale * v + shift for k, v in a.items()}
    a3 = {k: -scale * v + shift for k, v in a.items()}
    assert field_correlation(a2, b) == pytest.approx(r, abs=1e-12)
    assert field_correlation(a3, b) == pytest.approx(-r, abs=1e-12)


def test_field_correlation_undefined():
    with pytest.raises(UndefinedRatioError):
        field_correlation({"C": 1.0}, {"C": 2.0})
    with pytest.raises(UndefinedRatioError):
        field_correlation({"C": 1.0, "D": 1.0}, {"C": 2.0, "D": 3.0})


# -- keywords --------------------------------------------------------------------


def test_tokenize_and_stopwords():
    assert tokenize("Risk-Management, the_VaR model!") == ["risk", "management", "the", "var", "model"]
    stop = load_stopwords()
    assert "the" in stop and "risk" not in stop


def test_extract_keywords_ranking():
    corpus = ["beta alpha alpha gamma", "gamma alpha beta the a"]
    assert extract_keywords(corpus, k=3) == [("alpha", 3), ("beta", 2), ("gamma", 2)]
    assert extract_keywords(corpus, k=10, stopwords=set())[-1] == ("the", 1)


def _engineered(shared, own, prefix):
    words = [f"shared{i:02d}" for i in range(shared)] + [f"{prefix}{i:02d}" for i in range(own)]
    return [" ".join(w for w in words for _ in range(5)), "rare" + prefix]


@pytest.mark.parametrize("shared, k", [(5, 10), (0, 4), (7, 7), (30, 75)])
def test_keyword_overlap_engineered(shared, k):
    a = extract_keywords(_engineered(shared, k - shared, "aa"), k=k)
    b = extract_keywords(_engineered(shared, k - shared, "bb"), k=k)
    assert keyword_overlap(a, b) == shared / k
    assert extract_keywords(_engineered(shared, k - shared, "aa"), k=k) == a


def test_keyword_overlap_errors():
    with pytest.raises(ConfigurationError):
        keyword_overlap(["a"], ["a", "b"])
    with pytest.raises(ConfigurationError):
        keyword_overlap([], [])
    with pytest.raises(ConfigurationError):
        extract_keywords(["x"], k=0)


def test_read_corpus(tmp_path):
    (tmp_path / "b.txt").write_text("second doc")
    (tmp_path / "a.txt").write_text("first doc")
    assert read_corpus(tmp_path) == ["first doc", "second doc"]
    f = tmp_path / "lines.txt"
    f.write_text("one\n\ntwo\n")
    assert read_corpus(f) == ["one", "two"]


# -- mosaic ----------------------------------------------------------------------

PHD_COUNTS = {
    ("female", "germany", "academia"): 11,
    ("female", "abroad", "academia"): 6,
    ("male", "germany", "academia"): 21,
    ("male", "abroad", "academia"): 7,
    ("female", "germany", "other"): 3,
    ("female", "abroad", "other"): 4,
    ("male", "germany", "other"): 8,
    ("male", "abroad", "other"): 5,
}


def test_mosaic_reference_counts():
    table = ContingencyTable3(PHD_COUNTS)
    assert table.total == 65
    rects = mosaic_layout(table)
    assert sum(r.exact_area for r in rects) == 1
    assert abs(sum(r.area for r in rects) - 1) <= 1e-12
    academia = sum(r.exact_area for r in rects if r.labels["sector"] == "academia")
    assert academia == Fraction(45, 65)
    for r in rects:
        assert r.exact_area == Fraction(r.count, 65)
        assert 0 <= r.x and r.x + r.width <= 1 + 1e-12 and r.y + r.height <= 1 + 1e-12


def test_mosaic_tiles_without_overlap():
    rects = mosaic_layout(ContingencyTable3(PHD_COUNTS), ["sector", "gender", "location"])
    for i, a in enumerate(rects):
        for b in rects[i + 1:]:
            ox = min(a.x + a.width, b.x + b.width) - max(a.x, b.x)
            oy = min(a.y + a.height, b.y + b.height) - max(a.y, b.y)
            assert ox <= 1e-12 or oy <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=8, max_size=8).filter(lambda c: sum(c) > 0),
       st.permutations(["gender", "location", "sector"]))
def test_mosaic_properties(counts, order):
    keys = sorted(PHD_COUNTS)
    table = ContingencyTable3(dict(zip(keys, counts)))
    rects = mosaic_layout(table, order)
    assert sum(r.exact_area for r in rects) == 1
    assert len(rects) == sum(c > 0 for c in counts)
    for r in rects:
        assert abs(r.area - r.count / table.total) <= 1e-12
    # swapping the counts of the two gender levels permutes rectangles only
    swap = {("male" if k[0] == "female" else "female", k[1], k[2]): v for k, v in table.counts.items()}
    areas = sorted(r.exact_area for r in rects)
    assert sorted(r.exact_area for r in mosaic_layout(ContingencyTable3(swap), order)) == areas


def test_mosaic_errors():
    with pytest.raises(DegenerateLayoutError):
        mosaic_layout(ContingencyTable3({}))
    with pytest.raises(ConfigurationError):
        mosaic_layout(ContingencyTable3(PHD_COUNTS), ["gender", "gender", "sector"])
    with pytest.raises(ValidationError):
        ContingencyTable3({("female", "mars", "academia"): 1})
