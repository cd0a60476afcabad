"""Synthetic report/ontology/reference generation with known ground truth.

The generated ontology is a flat balanced shape whose intrinsic information
content is analytically known: sibling PTs under a dedicated cluster parent
have pairwise similarity m / (4 - 3m) with m = 1 - log(size+1) / log(N).
Raising the total concept count N is the lever that raises within-cluster
similarity, so feasibility is checked up front.

Baseline reports draw drug and event independently; planted pairs multiply
the joint cell probability from their onset quarter onward. Everything is
deterministic per (scenario, seed): regenerating yields byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .quarters import Quarter

log = logging.getLogger(__name__)

CONCORDANT = "concordant"
DISCORDANT = "discordant"

REPORTS_FILE = "reports.tsv"
ONTOLOGY_FILE = "ontology.tsv"
REFERENCE_FILE = "reference.tsv"
MANIFEST_FILE = "manifest.json"

_PTS_PER_HLT = 8
_HLTS_PER_HLGT = 2


@dataclass(frozen=True)
class PlantedSignal:
    drug: str
    pt: str
    multiplier: float
    onset: int  # quarter offset from scenario start


@dataclass(frozen=True)
class ClusterSpec:
    kind: str
    size: int
    target_ssm: float = 0.35
    n_groupmates: int = 4  # discordant only: common PTs sharing the HLT


@dataclass(frozen=True)
class Scenario:
    name: str
    n_drugs: int
    n_pts: int
    n_reports: int
    n_quarters: int
    seed: int
    planted: tuple[PlantedSignal, ...] = ()
    clusters: tuple[ClusterSpec, ...] = ()
    start: Quarter = Quarter(2015, 1)
    label_lag: int = 4
    negatives_per_drug: int = 10


def drug_code(i: int) -> str:
    return f"D{i:03d}"


def pt_code(i: int) -> str:
    return f"PT{i:04d}"


@dataclass
class Layout:
    """Deterministic structural assignment derived from a scenario."""

    cluster_members: list[list[str]]
    groupmates: list[list[str]]
    background: list[str]
    n_concepts: int
    designed_ssm: list[float]


def _layout(s: Scenario) -> Layout:
    total_cluster = sum(c.size for c in s.clusters)
    if total_cluster > s.n_pts:
        raise ValidationError("cluster sizes exceed n_pts")
    members = []
    offset = 0
    for c in s.clusters:
        if c.kind not in (CONCORDANT, DISCORDANT):
            raise ValidationError(f"unknown cluster kind {c.kind!r}")
        if c.size < 2:
            raise ValidationError("clusters need at least 2 PTs")
        members.append([pt_code(offset + j) for j in range(c.size)])
        offset += c.size
    background = [pt_code(i) for i in range(offset, s.n_pts)]
    groupmates = []
    take = 0
    for c in s.clusters:
        n = c.n_groupmates if c.kind == DISCORDANT else 0
        if take + n > len(background):
            raise ValidationError("not enough background PTs for group-mates")
        groupmates.append(background[take : take + n])
        take += n

    n_bg = len(background)
    n_bg_hlt = math.ceil(n_bg / _PTS_PER_HLT) if n_bg else 0
    n_bg_hlgt = math.ceil(n_bg_hlt / _HLTS_PER_HLGT) if n_bg_hlt else 0
    n_concepts = (
        s.n_pts
        + 3 * len(s.clusters)  # GRP + cluster HLT + cluster HLGT
        + n_bg_hlt
        + n_bg_hlgt
        + 2  # SOC0 + ROOT
    )
    designed = []
    for c in s.clusters:
        m = 1.0 - math.log(c.size + 1) / math.log(n_concepts)
        ssm = m / (4.0 - 3.0 * m) if m > 0 else 0.0
        if ssm < c.target_ssm:
            m_req = 4.0 * c.target_ssm / (1.0 + 3.0 * c.target_ssm)
            n_req = math.ceil(math.exp(math.log(c.size + 1) / (1.0 - m_req)))
            raise ValidationError(
                f"cluster of size {c.size} reaches sibling similarity "
                f"{ssm:.4f} < target {c.target_ssm} with {n_concepts} concepts; "
                f"the flat shape needs at least {n_req} concepts, so raise "
                f"n_pts by about {n_req - n_concepts}"
            )
        designed.append(ssm)
    return Layout(members, groupmates, background, n_concepts, designed)


def _render_ontology(s: Scenario, lay: Layout) -> str:
    lines = ["# synthetic concept graph"]
    nodes: list[tuple[str, str, str]] = [("ROOT", "OTHER", "root"), ("SOC0", "SOC", "system organ class 0")]
    edges: list[tuple[str, str, str]] = [("SOC0", "ROOT", "ISA")]

    def add_node(code: str, level: str, label: str, isa_parent: str = "ROOT"):
        nodes.append((code, level, label))
        edges.append((code, isa_parent, "ISA"))

    for idx, c in enumerate(s.clusters):
        add_node(f"GRP{idx:02d}", "OTHER", f"cluster parent {idx}")
        add_node(f"HLGC{idx:02d}", "HLGT", f"cluster group {idx}")
        add_node(f"HLTC{idx:02d}", "HLT", f"cluster term group {idx}")
        edges.append((f"HLGC{idx:02d}", "SOC0", "MEDDRA"))
        edges.append((f"HLTC{idx:02d}", f"HLGC{idx:02d}", "MEDDRA"))
        for pt in lay.cluster_members[idx]:
            add_node(pt, "PT", f"term {pt}", isa_parent=f"GRP{idx:02d}")
            edges.append((pt, f"HLTC{idx:02d}", "MEDDRA"))

    n_bg_hlt = math.ceil(len(lay.background) / _PTS_PER_HLT) if lay.background else 0
    for k in range(n_bg_hlt):
        add_node(f"HLT{k:03d}", "HLT", f"term group {k}")
    n_bg_hlgt = math.ceil(n_bg_hlt / _HLTS_PER_HLGT) if n_bg_hlt else 0
    for k in range(n_bg_hlgt):
        add_node(f"HLG{k:03d}", "HLGT", f"group {k}")
        edges.append((f"HLG{k:03d}", "SOC0", "MEDDRA"))
    for k in range(n_bg_hlt):
        edges.append((f"HLT{k:03d}", f"HLG{k // _HLTS_PER_HLGT:03d}", "MEDDRA"))
    for j, pt in enumerate(lay.background):
        add_node(pt, "PT", f"term {pt}")
        edges.append((pt, f"HLT{j // _PTS_PER_HLT:03d}", "MEDDRA"))
    for idx, mates in enumerate(lay.groupmates):
        for pt in mates:
            edges.append((pt, f"HLTC{idx:02d}", "MEDDRA"))

    for code, level, label in nodes:
        lines.append(f"N\t{code}\t{level}\t{label}")
    for child, parent, kind in sorted(edges):
        lines.append(f"E\t{child}\t{parent}\t{kind}")
    return "\n".join(lines) + "\n"


def _event_weights(s: Scenario, lay: Layout) -> np.ndarray:
    weights = {pt: 1.0 for pt in (pt_code(i) for i in range(s.n_pts))}
    for idx, c in enumerate(s.clusters):
        if c.kind == CONCORDANT:
            for pt in lay.cluster_members[idx]:
                weights[pt] = 3.0
        else:
            member_iter = iter(lay.cluster_members[idx])
            weights[next(member_iter)] = 3.0  # target stays visible
            for pt in member_iter:
                weights[pt] = 0.6  # rare, noisy neighbors
            for pt in lay.groupmates[idx]:
                weights[pt] = 5.0  # common group-mates, tightly null
    w = np.array([weights[pt_code(i)] for i in range(s.n_pts)])
    return w / w.sum()


def _drug_weights(s: Scenario) -> np.ndarray:
    w = np.array([1.0 + (i % 3) for i in range(s.n_drugs)])
    return w / w.sum()


def _render_reports(s: Scenario, lay: Layout) -> tuple[str, dict[str, int]]:
    p_drug = _drug_weights(s)
    p_event = _event_weights(s, lay)
    drug_idx = {drug_code(i): i for i in range(s.n_drugs)}
    pt_idx = {pt_code(i): i for i in range(s.n_pts)}
    for p in s.planted:
        if p.drug not in drug_idx or p.pt not in pt_idx:
            raise ValidationError(f"planted pair ({p.drug}, {p.pt}) not in scenario")
        if p.multiplier < 1.0:
            raise ValidationError("planted multipliers must be >= 1")
        if not 0 <= p.onset < s.n_quarters:
            raise ValidationError(f"onset {p.onset} outside 0..{s.n_quarters - 1}")

    rng = np.random.Generator(np.random.Philox(s.seed))
    lines = ["# synthetic spontaneous reports"]
    counts: dict[str, int] = {}
    report_no = 0
    base = s.n_reports // s.n_quarters
    extra = s.n_reports % s.n_quarters
    for q_off in range(s.n_quarters):
        quarter = s.start + q_off
        n_q = base + (1 if q_off < extra else 0)
        cell_p = np.outer(p_drug, p_event)
        for p in s.planted:
            if q_off >= p.onset:
                cell_p[drug_idx[p.drug], pt_idx[p.pt]] *= p.multiplier
        cell_p /= cell_p.sum()
        cell_counts = rng.multinomial(n_q, cell_p.ravel())
        for flat_i in np.flatnonzero(cell_counts):
            d = drug_code(flat_i // s.n_pts)
            e = pt_code(flat_i % s.n_pts)
            n_cell = int(cell_counts[flat_i])
            counts[f"{d}|{e}|{quarter}"] = n_cell
            for _ in range(n_cell):
                report_no += 1
                lines.append(f"R{report_no:07d}\t{quarter}\t{d}\t{e}")
    return "\n".join(lines) + "\n", counts


def _positive_hlts(s: Scenario, lay: Layout) -> set[str]:
    hlts = set()
    positive_pts = {p.pt for p in s.planted}
    for idx, members in enumerate(lay.cluster_members):
        if positive_pts & set(members) or positive_pts & set(lay.groupmates[idx]):
            hlts.add(f"HLTC{idx:02d}")
    for j, pt in enumerate(lay.background):
        if pt in positive_pts:
            hlts.add(f"HLT{j // _PTS_PER_HLT:03d}")
    return hlts


def _render_reference(s: Scenario, lay: Layout) -> tuple[str, list[dict], list[dict]]:
    lines = ["# reference set"]
    positives = []
    for p in sorted(s.planted, key=lambda p: (p.drug, p.pt)):
        label = s.start + (p.onset + s.label_lag)
        lines.append(f"{p.drug}\t{p.pt}\tPOSITIVE\t{label}")
        positives.append({"drug": p.drug, "pt": p.pt, "label_quarter": str(label)})

    blocked_hlts = _positive_hlts(s, lay)
    planted_pts = {p.pt for p in s.planted}
    groupmate_pts = {pt for mates in lay.groupmates for pt in mates}
    candidates = []
    for j, pt in enumerate(lay.background):
        if pt in planted_pts or pt in groupmate_pts:
            continue
        if f"HLT{j // _PTS_PER_HLT:03d}" in blocked_hlts:
            continue
        candidates.append(pt)
    drugs = sorted({p.drug for p in s.planted}) or [
        drug_code(i) for i in range(s.n_drugs)
    ]
    negatives = []
    for drug in drugs:
        for pt in candidates[: s.negatives_per_drug]:
            lines.append(f"{drug}\t{pt}\tNEGATIVE")
            negatives.append({"drug": drug, "pt": pt})
    return "\n".join(lines) + "\n", positives, negatives


def _scenario_echo(s: Scenario) -> dict:
    return {
        "name": s.name,
        "n_drugs": s.n_drugs,
        "n_pts": s.n_pts,
        "n_reports": s.n_reports,
        "n_quarters": s.n_quarters,
        "seed": s.seed,
        "start": str(s.start),
        "label_lag": s.label_lag,
        "negatives_per_drug": s.negatives_per_drug,
        "planted": [
            {
                "drug": p.drug,
                "pt": p.pt,
                "multiplier": p.multiplier,
                "onset": p.onset,
            }
            for p in s.planted
        ],
        "clusters": [
            {
                "kind": c.kind,
                "size": c.size,
                "target_ssm": c.target_ssm,
                "n_groupmates": c.n_groupmates,
            }
            for c in s.clusters
        ],
    }


def scenario_from_echo(echo: dict) -> Scenario:
    return Scenario(
        name=echo["name"],
        n_drugs=echo["n_drugs"],
        n_pts=echo["n_pts"],
        n_reports=echo["n_reports"],
        n_quarters=echo["n_quarters"],
        seed=echo["seed"],
        start=Quarter.parse(echo["start"]),
        label_lag=echo["label_lag"],
        negatives_per_drug=echo["negatives_per_drug"],
        planted=tuple(
            PlantedSignal(p["drug"], p["pt"], p["multiplier"], p["onset"])
            for p in echo["planted"]
        ),
        clusters=tuple(
            ClusterSpec(c["kind"], c["size"], c["target_ssm"], c["n_groupmates"])
            for c in echo["clusters"]
        ),
    )


def render(scenario: Scenario) -> tuple[dict[str, str], dict]:
    """File contents plus the manifest, both fully deterministic."""
    lay = _layout(scenario)
    ontology_text = _render_ontology(scenario, lay)
    reports_text, counts = _render_reports(scenario, lay)
    reference_text, positives, negatives = _render_reference(scenario, lay)
    files = {
        ONTOLOGY_FILE: ontology_text,
        REPORTS_FILE: reports_text,
        REFERENCE_FILE: reference_text,
    }
    manifest = {
        "format_version": 1,
        "scenario": _scenario_echo(scenario),
        "counts": counts,
        "totals": {
            "reports": scenario.n_reports,
            "concepts": lay.n_concepts,
            "positives": len(positives),
            "negatives": len(negatives),
        },
        "designed_ssm": [round(v, 12) for v in lay.designed_ssm],
        "cluster_members": lay.cluster_members,
        "groupmates": lay.groupmates,
        "positives": positives,
        "negatives": negatives,
        "digests": {
            name: hashlib.sha256(text.encode("utf-8")).hexdigest()
            for name, text in files.items()
        },
    }
    return files, manifest


def generate(scenario: Scenario, outdir: str) -> dict:
    """Write reports/ontology/reference plus a manifest; returns the manifest."""
    files, manifest = render(scenario)
    os.makedirs(outdir, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(outdir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    with open(os.path.join(outdir, MANIFEST_FILE), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def verify_manifest(outdir: str) -> bool:
    """Regenerate from the manifest's scenario echo and diff against the files.

    Logs the first differing file and line; True only on an exact match.
    """
    try:
        with open(os.path.join(outdir, MANIFEST_FILE), encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        log.error("no %s in %s", MANIFEST_FILE, outdir)
        return False
    scenario = scenario_from_echo(manifest["scenario"])
    files, regenerated = render(scenario)
    for name, expected_text in files.items():
        path = os.path.join(outdir, name)
        try:
            with open(path, encoding="utf-8") as fh:
                actual_text = fh.read()
        except FileNotFoundError:
            log.error("missing generated file %s", path)
            return False
        if actual_text != expected_text:
            actual_lines = actual_text.splitlines()
            expected_lines = expected_text.splitlines()
            for i, (got, want) in enumerate(zip(actual_lines, expected_lines), start=1):
                if got != want:
                    log.error(
                        "%s line %d differs: got %r, expected %r", path, i, got, want
                    )
                    return False
            log.error(
                "%s length differs: %d lines vs %d expected",
                path,
                len(actual_lines),
                len(expected_lines),
            )
            return False
    if manifest.get("counts") != regenerated["counts"]:
        log.error("manifest counts do not match regeneration")
        return False
    return True


# -- stock scenarios -----------------------------------------------------------


def basic_scenario(seed: int = 0, **overrides) -> Scenario:
    """Small mixed scenario for demos and CLI round-trips."""
    fields = dict(
        name="basic",
        n_drugs=3,
        n_pts=48,
        n_reports=900,
        n_quarters=6,
        seed=seed,
        clusters=(ClusterSpec(CONCORDANT, size=3, target_ssm=0.3),),
        planted=(
            PlantedSignal(drug_code(0), pt_code(0), multiplier=5.0, onset=1),
            PlantedSignal(drug_code(0), pt_code(1), multiplier=5.0, onset=1),
            PlantedSignal(drug_code(1), pt_code(10), multiplier=4.0, onset=2),
        ),
        negatives_per_drug=8,
    )
    fields.update(overrides)
    return Scenario(**fields)


def concordant_scenario(seed: int = 0, **overrides) -> Scenario:
    """Five similar sibling PTs all planted on one drug."""
    cluster = ClusterSpec(CONCORDANT, size=5, target_ssm=0.35)
    fields = dict(
        name="concordant",
        n_drugs=4,
        n_pts=300,
        n_reports=3000,
        n_quarters=8,
        seed=seed,
        clusters=(cluster,),
        planted=tuple(
            PlantedSignal(drug_code(0), pt_code(j), multiplier=6.0, onset=2)
            for j in range(5)
        ),
    )
    fields.update(overrides)
    return Scenario(**fields)


def null_scenario(seed: int = 0, **overrides) -> Scenario:
    """Same shape as the concordant scenario but nothing planted."""
    fields = dict(
        name="null",
        n_drugs=4,
        n_pts=300,
        n_reports=3000,
        n_quarters=8,
        seed=seed,
        clusters=(ClusterSpec(CONCORDANT, size=5, target_ssm=0.35),),
        planted=(),
    )
    fields.update(overrides)
    return Scenario(**fields)


def discordant_scenario(seed: int = 0, **overrides) -> Scenario:
    """One strongly elevated target whose similar siblings are rare and null,
    while its well-reported HLGT group-mates carry a weaker elevation.

    Group borrowing then pools a confident prior centered well below the
    target's own signal; similarity borrowing sees only the uninformative
    siblings. Group-mate codes follow the layout rule: cluster members take
    the first ``size`` PT codes, group-mates the next ``n_groupmates``.
    """
    cluster = ClusterSpec(DISCORDANT, size=5, target_ssm=0.35, n_groupmates=4)
    groupmates = tuple(pt_code(cluster.size + j) for j in range(cluster.n_groupmates))
    fields = dict(
        name="discordant",
        n_drugs=4,
        n_pts=300,
        n_reports=3000,
        n_quarters=8,
        seed=seed,
        clusters=(cluster,),
        planted=(PlantedSignal(drug_code(0), pt_code(0), multiplier=6.0, onset=2),)
        + tuple(
            PlantedSignal(drug_code(0), gm, multiplier=2.5, onset=0)
            for gm in groupmates
        ),
    )
    fields.update(overrides)
    return Scenario(**fields)
