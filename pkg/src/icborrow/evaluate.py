"""Scoring screening runs against a time-stamped reference set.

Positive controls carry the quarter their product label changed; an alert
only counts as a true positive when it lands strictly before that quarter
(configurable to non-strict). Positives alerted at or after their label
quarter are excluded from the confusion counts entirely. Negative controls
count as false positives when alerted at any time.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .errors import ValidationError
from .ontology import Ontology, SimilarityMatrix, build_similarity
from .pipeline import METHOD_SSM, RunConfig, RunContext, run_quarters
from .quarters import Quarter
from .reports import ReportStore

log = logging.getLogger(__name__)

POSITIVE = "POSITIVE"
NEGATIVE = "NEGATIVE"

Alerts = Mapping[tuple[str, str], Quarter]


@dataclass(frozen=True)
class ReferenceEntry:
    drug: str
    pt: str
    kind: str
    label_quarter: Quarter | None = None


def load_reference(path: str) -> list[ReferenceEntry]:
    """Parse ``<drug> <pt> <POSITIVE|NEGATIVE> [YYYYQn]`` rows (tab-separated).

    Duplicate (drug, pt) entries, positives without a label quarter, and
    negatives with one are all rejected.
    """
    entries: list[ReferenceEntry] = []
    seen: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) not in (3, 4):
                raise ValidationError(
                    f"{path}:{lineno}: reference row needs 3 or 4 tab-separated fields"
                )
            drug, pt, kind = fields[0], fields[1], fields[2]
            if kind not in (POSITIVE, NEGATIVE):
                raise ValidationError(f"{path}:{lineno}: unknown control kind {kind!r}")
            label = None
            if len(fields) == 4 and fields[3]:
                try:
                    label = Quarter.parse(fields[3])
                except ValidationError as exc:
                    raise ValidationError(f"{path}:{lineno}: {exc}") from None
            if kind == POSITIVE and label is None:
                raise ValidationError(
                    f"{path}:{lineno}: positive control needs a label quarter"
                )
            if kind == NEGATIVE and label is not None:
                raise ValidationError(
                    f"{path}:{lineno}: negative control must not carry a quarter"
                )
            key = (drug, pt)
            if key in seen:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate reference pair {key}, "
                    f"first at line {seen[key]}"
                )
            seen[key] = lineno
            entries.append(ReferenceEntry(drug, pt, kind, label))
    return entries


def check_negative_controls(
    entries: list[ReferenceEntry], ontology: Ontology
) -> list[str]:
    """Flag negatives whose PT shares an HLT with any positive control PT."""
    positive_hlts: dict[str, set[str]] = {}
    for e in entries:
        if e.kind == POSITIVE:
            for h in ontology.hlt_of(e.pt):
                positive_hlts.setdefault(h, set()).add(e.pt)
    flags = []
    for e in entries:
        if e.kind != NEGATIVE:
            continue
        for h in sorted(ontology.hlt_of(e.pt)):
            if h in positive_hlts:
                flags.append(
                    f"negative ({e.drug}, {e.pt}) shares HLT {h} with positive "
                    f"PT(s) {', '.join(sorted(positive_hlts[h]))}"
                )
    return flags


# -- confusion counts and summary metrics -------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    sensitivity: float | None
    specificity: float | None
    ppv: float | None
    f1: float | None
    youden: float | None

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "MetricsReport":
        se = tp / (tp + fn) if tp + fn else None
        sp = tn / (tn + fp) if tn + fp else None
        ppv = tp / (tp + fp) if tp + fp else None
        f1 = None
        if ppv is not None and se is not None and ppv + se > 0:
            f1 = 2 * ppv * se / (ppv + se)
        youden = se + sp - 1 if se is not None and sp is not None else None
        return cls(tp, fp, tn, fn, se, sp, ppv, f1, youden)


_TP, _FN, _IGNORED = "tp", "fn", "ignored"


def _classify_positive(
    entry: ReferenceEntry, alert: Quarter | None, strict_before: bool
) -> str:
    if alert is None:
        return _FN
    assert entry.label_quarter is not None
    hit = alert < entry.label_quarter if strict_before else alert <= entry.label_quarter
    return _TP if hit else _IGNORED


def score(
    alerts: Alerts, entries: list[ReferenceEntry], strict_before: bool = True
) -> MetricsReport:
    """Confusion counts of a run's first alerts against the reference set.

    Reference pairs never alerted are false negatives (positives) or true
    negatives (negatives); positives alerted at/after their label quarter
    drop out of all four cells.
    """
    tp = fp = tn = fn = 0
    for e in entries:
        alert = alerts.get((e.drug, e.pt))
        if e.kind == POSITIVE:
            cls = _classify_positive(e, alert, strict_before)
            if cls == _TP:
                tp += 1
            elif cls == _FN:
                fn += 1
        else:
            if alert is None:
                tn += 1
            else:
                fp += 1
    return MetricsReport.from_counts(tp, fp, tn, fn)


def quarterly_curves(
    alerts: Alerts, entries: list[ReferenceEntry], quarters: list[Quarter]
) -> dict[Quarter, MetricsReport]:
    """Metrics at each cutoff using only knowledge available then.

    At cutoff q the positive pool keeps only entries whose label quarter is
    still in the future; an alert counts when it happened at or before q.
    """
    out: dict[Quarter, MetricsReport] = {}
    for q in sorted(quarters):
        tp = fp = tn = fn = 0
        for e in entries:
            alert = alerts.get((e.drug, e.pt))
            alerted = alert is not None and alert <= q
            if e.kind == POSITIVE:
                assert e.label_quarter is not None
                if e.label_quarter <= q:
                    continue
                if alerted:
                    tp += 1
                else:
                    fn += 1
            else:
                if alerted:
                    fp += 1
                else:
                    tn += 1
        out[q] = MetricsReport.from_counts(tp, fp, tn, fn)
    return out


# -- head-to-head comparison ---------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    """Positive-control detection overlap between two methods."""

    method_a: str
    method_b: str
    both: int
    only_a: int
    only_b: int
    neither: int
    mean_delta: float | None
    deltas_observed: Counter
    deltas_imputed: Counter
    n_imputed: int

    @property
    def evaluated(self) -> int:
        return self.both + self.only_a + self.only_b + self.neither


def compare_methods(
    alerts_a: Alerts,
    alerts_b: Alerts,
    entries: list[ReferenceEntry],
    method_a: str = "A",
    method_b: str = "B",
    imputed_quarter: Quarter | None = None,
    strict_before: bool = True,
) -> Comparison:
    """Detection overlap and timing deltas on the shared positive universe.

    Positives ignored by either method (alerted at or after their label) drop
    out. Delta is first_alert_b - first_alert_a in quarters; one-sided
    detections impute imputed_quarter (default: one quarter past the latest
    label quarter) for the missing side and are tallied separately.
    """
    positives = [e for e in entries if e.kind == POSITIVE]
    if imputed_quarter is None:
        latest = max((e.label_quarter for e in positives), default=None)
        if latest is None:
            raise ValidationError("comparison needs at least one positive control")
        imputed_quarter = latest + 1
    both = only_a = only_b = neither = 0
    observed: Counter = Counter()
    imputed: Counter = Counter()
    deltas: list[int] = []
    for e in positives:
        fa = alerts_a.get((e.drug, e.pt))
        fb = alerts_b.get((e.drug, e.pt))
        ca = _classify_positive(e, fa, strict_before)
        cb = _classify_positive(e, fb, strict_before)
        if _IGNORED in (ca, cb):
            continue
        hit_a, hit_b = ca == _TP, cb == _TP
        if hit_a and hit_b:
            both += 1
            delta = fb - fa  # type: ignore[operator]
            observed[delta] += 1
            deltas.append(delta)
        elif hit_a:
            only_a += 1
            delta = imputed_quarter - fa  # type: ignore[operator]
            imputed[delta] += 1
            deltas.append(delta)
        elif hit_b:
            only_b += 1
            delta = fb - imputed_quarter  # type: ignore[operator]
            imputed[delta] += 1
            deltas.append(delta)
        else:
            neither += 1
    mean_delta = float(np.mean(deltas)) if deltas else None
    return Comparison(
        method_a=method_a,
        method_b=method_b,
        both=both,
        only_a=only_a,
        only_b=only_b,
        neither=neither,
        mean_delta=mean_delta,
        deltas_observed=observed,
        deltas_imputed=imputed,
        n_imputed=sum(imputed.values()),
    )


# -- bootstrap ------------------------------------------------------------------

_BOOT_METRICS = ("sensitivity", "specificity", "ppv", "f1", "youden")


def bootstrap(
    alerts_by_method: dict[str, Alerts],
    entries: list[ReferenceEntry],
    n_iter: int = 1000,
    seed: int = 0,
    strict_before: bool = True,
) -> dict:
    """Resample reference entries with replacement; tally pairwise superiority.

    For each ordered method pair and metric, reports the fraction of
    iterations where the first method's value beats the second's; ties (and
    undefined values on both sides) count one half, so identical inputs give
    exactly 0.5. Deterministic for a given seed.
    """
    if n_iter < 100:
        raise ValueError(f"n_iter must be >= 100, got {n_iter}")
    methods = sorted(alerts_by_method)
    rng = np.random.Generator(np.random.Philox(seed))
    n = len(entries)
    if n == 0:
        raise ValidationError("bootstrap needs a non-empty reference set")
    wins: dict[tuple[str, str, str], float] = {
        (a, b, m): 0.0 for a in methods for b in methods if a != b for m in _BOOT_METRICS
    }
    for _ in range(n_iter):
        idx = rng.integers(0, n, size=n)
        sample = [entries[i] for i in idx]
        reports = {
            m: score(alerts_by_method[m], sample, strict_before=strict_before)
            for m in methods
        }
        for a in methods:
            for b in methods:
                if a == b:
                    continue
                for metric in _BOOT_METRICS:
                    va = getattr(reports[a], metric)
                    vb = getattr(reports[b], metric)
                    if va is None and vb is None:
                        wins[(a, b, metric)] += 0.5
                    elif va is None or vb is None:
                        wins[(a, b, metric)] += 0.5
                    elif va > vb:
                        wins[(a, b, metric)] += 1.0
                    elif va == vb:
                        wins[(a, b, metric)] += 0.5
    fractions: dict[str, dict[str, float]] = {}
    for a in methods:
        for b in methods:
            if a == b:
                continue
            fractions[f"{a}>{b}"] = {
                m: wins[(a, b, m)] / n_iter for m in _BOOT_METRICS
            }
    return {"n_iter": n_iter, "seed": seed, "fractions": fractions}


# -- parameter sweep -------------------------------------------------------------

SWEEP_PARAMS = ("min_ssm", "w", "vague_sd", "threshold")


@dataclass(frozen=True)
class SweepRow:
    param: str
    value: str
    method: str
    report: MetricsReport


def parameter_sweep(
    store: ReportStore,
    entries: list[ReferenceEntry],
    config: RunConfig,
    grid: dict[str, list],
    ontology: Ontology | None = None,
    similarity: SimilarityMatrix | None = None,
    strict_before: bool = True,
) -> list[SweepRow]:
    """One-at-a-time sweep around the reference configuration.

    grid maps a subset of {min_ssm, w, vague_sd, threshold} to value lists;
    ``w`` accepts numbers (fixed weight) or the string "max_ssm". The
    reference point is prepended to every axis so each sweep contains it.
    Monte Carlo work is shared across points through a common cache.
    """
    for key in grid:
        if key not in SWEEP_PARAMS:
            raise ValidationError(f"unknown sweep parameter {key!r}")
    needs_sim = METHOD_SSM in config.methods
    if needs_sim and similarity is None:
        if ontology is None:
            raise ValidationError("sweep needs an ontology or a similarity matrix")
        floor = min([config.min_ssm] + [v for v in grid.get("min_ssm", [])])
        similarity = build_similarity(ontology, min_ssm=floor)

    reference_value = {
        "min_ssm": config.min_ssm,
        "w": "max_ssm" if config.w_policy == "max_ssm" else config.w_fixed,
        "vague_sd": config.vague_sd,
        "threshold": config.threshold,
    }

    shared_cache: dict | None = None
    rows: list[SweepRow] = []
    for param in SWEEP_PARAMS:
        if param not in grid:
            continue
        values = list(grid[param])
        if reference_value[param] not in values:
            values = [reference_value[param]] + values
        for value in values:
            cfg = _apply_sweep_value(config, param, value)
            ctx = RunContext(
                store=store, config=cfg, similarity=similarity, ontology=ontology
            )
            if shared_cache is None:
                shared_cache = ctx.cache.memo
            else:
                ctx.cache.memo = shared_cache
            run = run_quarters(ctx)
            for method in cfg.methods:
                report = score(
                    run.first_alerts[method], entries, strict_before=strict_before
                )
                rows.append(
                    SweepRow(
                        param=param, value=_sweep_label(value), method=method,
                        report=report,
                    )
                )
    return rows


def _apply_sweep_value(config: RunConfig, param: str, value) -> RunConfig:
    if param == "w":
        if value == "max_ssm":
            return replace(config, w_policy="max_ssm")
        return replace(config, w_policy="fixed", w_fixed=float(value))
    return replace(config, **{param: float(value)})


def _sweep_label(value) -> str:
    return value if isinstance(value, str) else f"{float(value):g}"


# -- serialization ---------------------------------------------------------------


def _metric_fields(report: MetricsReport) -> str:
    def fmt(x: float | None) -> str:
        return "" if x is None else f"{x:.6f}"

    return (
        f"{report.tp},{report.fp},{report.tn},{report.fn},"
        f"{fmt(report.sensitivity)},{fmt(report.specificity)},"
        f"{fmt(report.ppv)},{fmt(report.f1)},{fmt(report.youden)}"
    )


_METRIC_COLUMNS = "tp,fp,tn,fn,sensitivity,specificity,ppv,f1,youden"


def write_metrics_csv(
    curves_by_method: dict[str, dict[Quarter, MetricsReport]], path: str
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"quarter,method,{_METRIC_COLUMNS}\n")
        for method in sorted(curves_by_method):
            for q in sorted(curves_by_method[method]):
                fh.write(f"{q},{method},{_metric_fields(curves_by_method[method][q])}\n")


def write_compare_csv(comparison: Comparison, path: str, deltas_path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(
            "method_a,method_b,both,only_a,only_b,neither,evaluated,"
            "n_imputed,mean_delta_quarters\n"
        )
        mean = "" if comparison.mean_delta is None else f"{comparison.mean_delta:.6f}"
        fh.write(
            f"{comparison.method_a},{comparison.method_b},{comparison.both},"
            f"{comparison.only_a},{comparison.only_b},{comparison.neither},"
            f"{comparison.evaluated},{comparison.n_imputed},{mean}\n"
        )
    all_deltas = sorted(
        set(comparison.deltas_observed) | set(comparison.deltas_imputed)
    )
    with open(deltas_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("delta_quarters,observed_count,imputed_count\n")
        for d in all_deltas:
            fh.write(
                f"{d},{comparison.deltas_observed.get(d, 0)},"
                f"{comparison.deltas_imputed.get(d, 0)}\n"
            )


def write_sweep_csv(rows: list[SweepRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"param,value,method,{_METRIC_COLUMNS}\n")
        for row in rows:
            fh.write(
                f"{row.param},{row.value},{row.method},{_metric_fields(row.report)}\n"
            )


def write_bootstrap_json(result: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
