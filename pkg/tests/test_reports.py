import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from icborrow import ContingencyTable, Quarter, load_reports
from icborrow.errors import ValidationError

from conftest import make_store
from oracles import rescan_table

Q = Quarter.parse


def test_six_report_fixture(six_report_store):
    t = six_report_store.contingency("DRUG", "EV", Q("2015Q4"))
    assert (t.a, t.b, t.c, t.d) == (2, 1, 1, 2)
    assert t.n == 6
    assert t.drug_margin == 3 and t.event_margin == 3


def test_cutoff_is_inclusive_and_monotone(six_report_store):
    earlier = six_report_store.contingency("DRUG", "EV", Q("2015Q2"))
    later = six_report_store.contingency("DRUG", "EV", Q("2015Q4"))
    assert (earlier.a, earlier.b, earlier.c, earlier.d) == (2, 1, 1, 0)
    for cell in "abcd":
        assert getattr(later, cell) >= getattr(earlier, cell)


def test_contingency_before_first_report(six_report_store):
    with pytest.raises(ValidationError):
        six_report_store.contingency("DRUG", "EV", Q("2014Q4"))


def test_unreported_codes_land_in_margins(six_report_store):
    t = six_report_store.contingency("NO_SUCH_DRUG", "EV", Q("2015Q4"))
    assert (t.a, t.b) == (0, 0)
    assert t.c == 3
    t = six_report_store.contingency("DRUG", "NO_SUCH_EV", Q("2015Q4"))
    assert (t.a, t.c) == (0, 0)


def test_observed_expected():
    assert ContingencyTable(10, 90, 90, 810).observed_expected() == pytest.approx(1.0)
    assert ContingencyTable(10, 0, 0, 90).observed_expected() == pytest.approx(10.0)
    assert ContingencyTable(0, 10, 10, 80).observed_expected() == 0.0
    # zero margin: undefined, signaled as absent
    assert ContingencyTable(0, 0, 10, 90).observed_expected() is None
    with pytest.raises(ValueError):
        ContingencyTable(-1, 0, 0, 0)


def test_every_report_has_pair():
    store = make_store(
        [(f"R{i}", "2015Q1", {"D"}, {"E"}) for i in range(4)]
    )
    t = store.contingency("D", "E", Q("2015Q1"))
    assert (t.a, t.b, t.c, t.d) == (4, 0, 0, 0)


def test_active_pairs(six_report_store):
    pairs = six_report_store.active_pairs(Q("2015Q4"))
    assert pairs == [
        ("DRUG", "EV"),
        ("DRUG", "OTHER_EV"),
        ("OTHER_DRUG", "EV"),
        ("OTHER_DRUG", "OTHER_EV"),
        ("THIRD_DRUG", "OTHER_EV"),
    ]
    assert six_report_store.active_pairs(Q("2015Q4"), min_a=2) == [
        ("DRUG", "EV"),
        ("DRUG", "OTHER_EV"),
        ("OTHER_DRUG", "OTHER_EV"),
    ]
    assert six_report_store.active_pairs(Q("2015Q4"), min_a=99) == []
    for drug, event in pairs:
        assert six_report_store.contingency(drug, event, Q("2015Q4")).a >= 1


def test_dedup_last_wins(tmp_path, caplog):
    path = tmp_path / "dup.tsv"
    path.write_text(
        "R1\t2015Q1\tD1\tE1\nR1\t2015Q2\tD2\tE2\n", encoding="utf-8"
    )
    store = load_reports(str(path))
    assert len(store) == 1
    assert store.reports[0].quarter == Q("2015Q2")
    assert store.reports[0].drugs == frozenset({"D2"})
    assert len(store.load_warnings) == 1
    assert "R1" in store.load_warnings[0]


def test_empty_file(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("# nothing here\n", encoding="utf-8")
    store = load_reports(str(path))
    assert len(store) == 0
    assert store.quarters() == []


@pytest.mark.parametrize(
    "line",
    ["R1\t2015Q1\tD1", "R1\tbadq\tD1\tE1", "R1\t2015Q1\t\tE1", "R1\t2015Q1\tD1\t"],
)
def test_malformed_lines_rejected(tmp_path, line):
    path = tmp_path / "bad.tsv"
    path.write_text(line + "\n", encoding="utf-8")
    with pytest.raises(ValidationError) as err:
        load_reports(str(path))
    assert ":1:" in str(err.value)


def test_unknown_pt_warns_but_keeps(tmp_path, chain_ontology):
    path = tmp_path / "reports.tsv"
    path.write_text("R1\t2015Q1\tD1\tL1;MYSTERY\n", encoding="utf-8")
    store = load_reports(str(path), chain_ontology)
    assert len(store) == 1
    assert any("MYSTERY" in w for w in store.load_warnings)
    assert store.reports[0].events == frozenset({"L1", "MYSTERY"})


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_indexed_counts_match_full_rescan(seed):
    rng = np.random.default_rng(seed)
    drugs = [f"D{i}" for i in range(4)]
    events = [f"E{i}" for i in range(6)]
    rows = []
    raw = []
    for i in range(int(rng.integers(1, 200))):
        q = f"2015Q{int(rng.integers(1, 5))}"
        ds = set(rng.choice(drugs, size=int(rng.integers(1, 3)), replace=False))
        es = set(rng.choice(events, size=int(rng.integers(1, 4)), replace=False))
        rows.append((f"R{i}", q, ds, es))
        raw.append((Q(q), ds, es))
    store = make_store(rows)
    for cutoff in store.quarters():
        for drug in drugs:
            for event in events:
                t = store.contingency(drug, event, cutoff)
                assert (t.a, t.b, t.c, t.d) == rescan_table(raw, drug, event, cutoff)
                assert t.n == sum(1 for q, _, _ in raw if q <= cutoff)
