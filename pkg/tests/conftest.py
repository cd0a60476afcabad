import pytest

from icborrow import Ontology, ReportStore, Report, Quarter
from icborrow.ontology import Concept

# Nine-concept chain: ROOT > M1 > ... > M5 > P > {L1, L2}. With N = 9 the
# parent P of the two leaves has exactly two descendants, so its intrinsic
# information content is 1 - log(3)/log(9) = 1/2 and sokal(L1, L2) lands on
# the round value 0.5 / (2 + 2 - 1.5) = 0.2.
CHAIN_ONTOLOGY = """\
# chain fixture
N\tROOT\tOTHER\troot
N\tM1\tOTHER\tmid 1
N\tM2\tOTHER\tmid 2
N\tM3\tOTHER\tmid 3
N\tM4\tSOC\tmid 4
N\tM5\tHLGT\tmid 5
N\tP\tHLT\tleaf parent
N\tL1\tPT\tleaf one
N\tL2\tPT\tleaf two
E\tM1\tROOT\tISA
E\tM2\tM1\tISA
E\tM3\tM2\tISA
E\tM4\tM3\tISA
E\tM5\tM4\tISA
E\tP\tM5\tISA
E\tL1\tP\tISA
E\tL2\tP\tISA
E\tL1\tP\tMEDDRA
E\tL2\tP\tMEDDRA
E\tP\tM5\tMEDDRA
E\tM5\tM4\tMEDDRA
"""

# Six reports giving the pair (DRUG, EV) the hand-counted table (2, 1, 1, 2).
SIX_REPORTS = """\
# hand-built store
R1\t2015Q1\tDRUG\tEV
R2\t2015Q1\tDRUG\tEV;OTHER_EV
R3\t2015Q2\tDRUG\tOTHER_EV
R4\t2015Q2\tOTHER_DRUG\tEV
R5\t2015Q3\tOTHER_DRUG\tOTHER_EV
R6\t2015Q4\tOTHER_DRUG;THIRD_DRUG\tOTHER_EV
"""


@pytest.fixture
def chain_ontology_path(tmp_path):
    path = tmp_path / "chain.tsv"
    path.write_text(CHAIN_ONTOLOGY, encoding="utf-8")
    return str(path)


@pytest.fixture
def chain_ontology(chain_ontology_path):
    from icborrow import load_ontology

    return load_ontology(chain_ontology_path)


@pytest.fixture
def six_report_path(tmp_path):
    path = tmp_path / "reports.tsv"
    path.write_text(SIX_REPORTS, encoding="utf-8")
    return str(path)


@pytest.fixture
def six_report_store(six_report_path):
    from icborrow import load_reports

    return load_reports(six_report_path)


def make_ontology(parents: dict, codes: list[str], levels: dict | None = None) -> Ontology:
    """Assemble an Ontology directly from a parent map (ISA edges only)."""
    levels = levels or {}
    concepts = {c: Concept(c, levels.get(c, "OTHER"), c.lower()) for c in codes}
    return Ontology(
        concepts=concepts,
        isa_parents={c: tuple(ps) for c, ps in parents.items()},
        meddra_parents={},
    )


def make_store(rows: list[tuple[str, str, set, set]]) -> ReportStore:
    """Build a store from (report_id, quarter string, drugs, events) rows."""
    return ReportStore(
        [
            Report(rid, Quarter.parse(q), frozenset(drugs), frozenset(events))
            for rid, q, drugs, events in rows
        ]
    )
