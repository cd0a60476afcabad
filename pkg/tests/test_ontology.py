import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from icborrow import SimilarityMatrix, build_similarity, load_ontology
from icborrow.errors import CycleError, ValidationError

from conftest import make_ontology
from oracles import brute_mica_ic, brute_sokal, random_dag, seco_ic

# Root plus A and B, with X under both (multi-parent), Y under A, Z under B.
DIAMOND_PARENTS = {
    "A": ("ROOT",),
    "B": ("ROOT",),
    "X": ("A", "B"),
    "Y": ("A",),
    "Z": ("B",),
}
DIAMOND_CODES = ["ROOT", "A", "B", "X", "Y", "Z"]


def test_chain_intrinsic_ic(chain_ontology):
    ic = chain_ontology.intrinsic_ic()
    assert ic["ROOT"] == 0.0
    assert ic["L1"] == 1.0 and ic["L2"] == 1.0
    assert ic["P"] == pytest.approx(0.5, abs=1e-12)
    assert ic["M5"] == pytest.approx(1.0 - math.log(4) / math.log(9), abs=1e-12)
    order = ["ROOT", "M1", "M2", "M3", "M4", "M5", "P", "L1"]
    assert all(ic[a] < ic[b] for a, b in zip(order, order[1:]))


def test_chain_sokal_values(chain_ontology):
    assert chain_ontology.sokal_sneath("L1", "L2") == pytest.approx(0.2, abs=1e-12)
    assert chain_ontology.sokal_sneath("L1", "P") == pytest.approx(1 / 3, abs=1e-12)
    assert chain_ontology.sokal_sneath("L1", "L1") == 1.0
    assert chain_ontology.mica_ic("L1", "L2") == pytest.approx(0.5, abs=1e-12)


def test_diamond_matches_brute_force():
    ont = make_ontology(DIAMOND_PARENTS, DIAMOND_CODES)
    ref_ic = seco_ic(DIAMOND_PARENTS, DIAMOND_CODES)
    for code, value in ont.intrinsic_ic().items():
        assert value == pytest.approx(ref_ic[code], abs=1e-12)
    # leaves under distinct parents share only the zero-information root
    assert ont.sokal_sneath("Y", "Z") == 0.0
    assert ont.sokal_sneath("X", "Y") == pytest.approx(
        brute_sokal(DIAMOND_PARENTS, DIAMOND_CODES, "X", "Y"), abs=1e-12
    )
    assert ont.sokal_sneath("X", "Y") == pytest.approx(0.13624256621143363, abs=1e-12)


def test_ancestors_are_reflexive(chain_ontology):
    assert chain_ontology.ancestors("L1") == frozenset(
        {"L1", "P", "M5", "M4", "M3", "M2", "M1", "ROOT"}
    )
    assert chain_ontology.ancestors("ROOT") == frozenset({"ROOT"})
    with pytest.raises(ValidationError):
        chain_ontology.ancestors("NOPE")


def test_ic_requires_two_concepts():
    ont = make_ontology({}, ["ONLY"])
    with pytest.raises(ValidationError):
        ont.intrinsic_ic()


def test_meddra_grouping(chain_ontology):
    assert chain_ontology.hlt_of("L1") == frozenset({"P"})
    assert chain_ontology.hlgt_neighbors("L1") == ["L2"]
    assert chain_ontology.hlgt_neighbors("L2") == ["L1"]


def test_hlgt_neighbors_union_across_groups(tmp_path):
    # PT X sits in two HLGTs; neighbors must be the union of both groups.
    text = "\n".join(
        ["N\tROOT\tOTHER\troot"]
        + [f"N\tG{i}\tHLGT\tgroup {i}" for i in (1, 2)]
        + [f"N\tH{i}\tHLT\tterm {i}" for i in (1, 2)]
        + [f"N\t{c}\tPT\tpt {c}" for c in ("X", "Y", "Z", "W")]
        + [
            "E\tG1\tROOT\tISA",
            "E\tG2\tROOT\tISA",
            "E\tH1\tG1\tMEDDRA",
            "E\tH2\tG2\tMEDDRA",
            "E\tH1\tG1\tISA",
            "E\tH2\tG2\tISA",
            "E\tX\tH1\tMEDDRA",
            "E\tX\tH2\tMEDDRA",
            "E\tY\tH1\tMEDDRA",
            "E\tZ\tH2\tMEDDRA",
            "E\tW\tROOT\tISA",
            "E\tX\tH1\tISA",
            "E\tY\tH1\tISA",
            "E\tZ\tH2\tISA",
        ]
    )
    path = tmp_path / "multi.tsv"
    path.write_text(text + "\n", encoding="utf-8")
    ont = load_ontology(str(path))
    assert ont.hlgt_neighbors("X") == ["Y", "Z"]
    assert ont.hlgt_neighbors("Y") == ["X"]
    # W has no HLGT at all: empty, not an error
    assert ont.hlgt_neighbors("W") == []


def test_loader_rejects_cycle(tmp_path):
    text = (
        "N\tA\tPT\ta\nN\tB\tOTHER\tb\n"
        "E\tA\tB\tISA\nE\tB\tA\tISA\n"
    )
    path = tmp_path / "cycle.tsv"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(CycleError) as err:
        load_ontology(str(path))
    assert "A" in str(err.value) and "B" in str(err.value)


@pytest.mark.parametrize(
    "line, message",
    [
        ("N\tA\tNOPE\tlabel", "unknown level"),
        ("E\tA\tB\tISA", "unknown code"),
        ("N\tROOT\tOTHER\tdup", "duplicate concept"),
        ("X\tA\tB\tISA", "unknown row tag"),
        ("N\tA\tPT", "4 tab-separated fields"),
    ],
)
def test_loader_rejects_malformed(tmp_path, line, message):
    path = tmp_path / "bad.tsv"
    path.write_text(f"N\tROOT\tOTHER\troot\n{line}\n", encoding="utf-8")
    with pytest.raises(ValidationError) as err:
        load_ontology(str(path))
    assert message in str(err.value)
    assert ":2:" in str(err.value)


def test_loader_rejects_orphan_pt(tmp_path):
    path = tmp_path / "orphan.tsv"
    path.write_text("N\tROOT\tOTHER\troot\nN\tA\tPT\tfloating\n", encoding="utf-8")
    with pytest.raises(ValidationError) as err:
        load_ontology(str(path))
    assert "A" in str(err.value)


def test_minimal_three_node_graph(tmp_path):
    text = (
        "N\tR\tOTHER\troot\nN\tA\tPT\ta\nN\tB\tPT\tb\n"
        "E\tA\tR\tISA\nE\tB\tR\tISA\n"
    )
    path = tmp_path / "tiny.tsv"
    path.write_text(text, encoding="utf-8")
    ont = load_ontology(str(path))
    ic = ont.intrinsic_ic()
    assert ic["R"] == 0.0
    assert ic["A"] == 1.0
    # two leaves under a bare root share no information
    assert ont.sokal_sneath("A", "B") == 0.0


def test_similarity_matrix_threshold(chain_ontology):
    # 0.2 pair survives at threshold 0, is dropped at the 0.3 default
    open_matrix = build_similarity(chain_ontology, min_ssm=0.0)
    assert open_matrix.get("L1", "L2") == pytest.approx(0.2)
    default = build_similarity(chain_ontology)
    assert default.get("L1", "L2") == 0.0
    assert default.n_pairs() == 0
    assert default.get("L1", "L1") == 1.0


def test_similarity_order_independence(tmp_path, chain_ontology):
    forward = build_similarity(chain_ontology, pts=["L1", "L2"], min_ssm=0.0)
    backward = build_similarity(chain_ontology, pts=["L2", "L1"], min_ssm=0.0)
    fwd, bwd = tmp_path / "fwd.csv", tmp_path / "bwd.csv"
    forward.save_csv(str(fwd))
    backward.save_csv(str(bwd))
    assert fwd.read_bytes() == bwd.read_bytes()


def test_similarity_csv_round_trip(tmp_path, chain_ontology):
    matrix = build_similarity(chain_ontology, min_ssm=0.1)
    path = tmp_path / "sim.csv"
    matrix.save_csv(str(path))
    text = path.read_text(encoding="utf-8")
    assert text.splitlines()[0] == "pt_a,pt_b,ssm"
    assert "L1,L2,0.200000" in text
    again = SimilarityMatrix.load_csv(str(path), min_ssm=0.1)
    assert again.get("L1", "L2") == pytest.approx(0.2, abs=1e-6)
    assert again.neighbors("L1") == [("L2", 0.2)]
    with pytest.raises(ValidationError):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n", encoding="utf-8")
        SimilarityMatrix.load_csv(str(bad), min_ssm=0.1)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(5, 30))
def test_random_dags_match_brute_force(seed, n_nodes):
    rng = np.random.default_rng(seed)
    parents = random_dag(rng, n_nodes)
    codes = [f"C{i:03d}" for i in range(n_nodes)]
    ont = make_ontology(parents, codes)
    ic = ont.intrinsic_ic()
    ref = seco_ic(parents, codes)
    assert all(abs(ic[c] - ref[c]) < 1e-12 for c in codes)
    picks = rng.choice(n_nodes, size=min(8, n_nodes), replace=False)
    for i in picks:
        for j in picks:
            a, b = codes[int(i)], codes[int(j)]
            assert ont.mica_ic(a, b) == pytest.approx(
                brute_mica_ic(parents, codes, a, b), abs=1e-12
            )
            s = ont.sokal_sneath(a, b)
            assert s == pytest.approx(brute_sokal(parents, codes, a, b), abs=1e-12)
            assert 0.0 <= s <= 1.0
            assert s == pytest.approx(ont.sokal_sneath(b, a), abs=0.0)
