"""Spontaneous-report storage and cumulative 2x2 contingency tables."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

from .errors import ValidationError
from .ontology import Ontology
from .quarters import Quarter

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Report:
    report_id: str
    quarter: Quarter
    drugs: frozenset[str]
    events: frozenset[str]

    def __post_init__(self) -> None:
        if not self.drugs or not self.events:
            raise ValidationError(
                f"report {self.report_id!r} needs at least one drug and one event"
            )


@dataclass(frozen=True)
class ContingencyTable:
    """Counts for one (drug, event) pair: a=both, b=drug only, c=event only, d=rest."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError(f"negative cell in {self}")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    @property
    def drug_margin(self) -> int:
        return self.a + self.b

    @property
    def event_margin(self) -> int:
        return self.a + self.c

    def observed_expected(self) -> float | None:
        """O/E ratio, or None when a zero margin leaves it undefined."""
        expected = self.drug_margin * self.event_margin / self.n if self.n else 0.0
        if expected == 0.0:
            return None
        return self.a / expected


class _Snapshot:
    """Cumulative counts over all reports up to an inclusive cutoff."""

    __slots__ = ("pair", "drug", "event", "n")

    def __init__(self) -> None:
        self.pair: Counter = Counter()
        self.drug: Counter = Counter()
        self.event: Counter = Counter()
        self.n = 0

    def copy(self) -> "_Snapshot":
        out = _Snapshot()
        out.pair = self.pair.copy()
        out.drug = self.drug.copy()
        out.event = self.event.copy()
        out.n = self.n
        return out

    def add(self, report: Report) -> None:
        self.n += 1
        for d in report.drugs:
            self.drug[d] += 1
        for e in report.events:
            self.event[e] += 1
        for d in report.drugs:
            for e in report.events:
                self.pair[(d, e)] += 1


class ReportStore:
    """Reports bucketed by quarter with cached cumulative snapshots."""

    def __init__(self, reports: list[Report], warnings: list[str] | None = None):
        self.reports = reports
        self.load_warnings = warnings or []
        self._buckets: dict[Quarter, list[Report]] = {}
        for r in reports:
            self._buckets.setdefault(r.quarter, []).append(r)
        self._snapshots: dict[Quarter, _Snapshot] = {}

    def __len__(self) -> int:
        return len(self.reports)

    def quarters(self) -> list[Quarter]:
        return sorted(self._buckets)

    def _snapshot(self, cutoff: Quarter) -> _Snapshot:
        hit = self._snapshots.get(cutoff)
        if hit is not None:
            return hit
        snap = _Snapshot()
        # Build from the latest cached earlier snapshot when there is one.
        base = max(
            (q for q in self._snapshots if q < cutoff), default=None
        )
        start = Quarter(1, 1)
        if base is not None:
            snap = self._snapshots[base].copy()
            start = base + 1
        for q in self.quarters():
            if start <= q <= cutoff:
                for r in self._buckets[q]:
                    snap.add(r)
        self._snapshots[cutoff] = snap
        return snap

    def contingency(self, drug: str, event: str, cutoff: Quarter) -> ContingencyTable:
        """2x2 table over all reports with quarter <= cutoff."""
        snap = self._snapshot(cutoff)
        if snap.n == 0:
            raise ValidationError(f"no reports at or before {cutoff}")
        a = snap.pair.get((drug, event), 0)
        b = snap.drug.get(drug, 0) - a
        c = snap.event.get(event, 0) - a
        return ContingencyTable(a=a, b=b, c=c, d=snap.n - a - b - c)

    def active_pairs(self, cutoff: Quarter, min_a: int = 1) -> list[tuple[str, str]]:
        """(drug, event) pairs with a >= min_a at cutoff, sorted."""
        snap = self._snapshot(cutoff)
        return sorted(p for p, count in snap.pair.items() if count >= min_a)


def load_reports(path: str, ontology: Ontology | None = None) -> ReportStore:
    """Parse a tab-separated report file into a ReportStore.

    Rows are ``<report_id> <YYYYQn> <drug1;drug2;...> <pt1;pt2;...>``;
    ``#`` starts a comment line. Duplicate report ids keep the last record
    (logged). Unknown PT codes are kept but warned about when an ontology
    is supplied. Malformed rows reject the whole file with a line number.
    """
    records: dict[str, Report] = {}
    warnings: list[str] = []
    dup_lines: dict[str, int] = {}
    unknown_pts: set[str] = set()
    known_pts = set(ontology.pts()) if ontology is not None else None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValidationError(
                    f"{path}:{lineno}: report row needs 4 tab-separated fields"
                )
            report_id, quarter_text, drug_field, event_field = fields
            if not report_id:
                raise ValidationError(f"{path}:{lineno}: empty report id")
            try:
                quarter = Quarter.parse(quarter_text)
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            drugs = frozenset(tok for tok in drug_field.split(";") if tok)
            events = frozenset(tok for tok in event_field.split(";") if tok)
            if not drugs or not events:
                raise ValidationError(
                    f"{path}:{lineno}: report needs at least one drug and one event"
                )
            if known_pts is not None:
                unknown_pts |= events - known_pts
            if report_id in records:
                msg = (
                    f"duplicate report id {report_id!r} at line {lineno} replaces "
                    f"line {dup_lines[report_id]}"
                )
                log.warning("%s: %s", path, msg)
                warnings.append(msg)
            records[report_id] = Report(report_id, quarter, drugs, events)
            dup_lines[report_id] = lineno
    for code in sorted(unknown_pts):
        msg = f"event code {code!r} not present in the ontology"
        log.warning("%s: %s", path, msg)
        warnings.append(msg)
    return ReportStore(list(records.values()), warnings)
