"""Batch screening runs: every active pair, every quarter, every method.

Per-pair Monte Carlo streams are keyed by a hash of (run seed, drug, event,
cutoff), so a batch gives bit-identical results regardless of worker count
or evaluation order, and the plain information component computed for a pair
can be reused both as a target and as a borrowing source.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from ._version import __version__
from .borrow import (
    MODE_HLGT,
    MODE_SSM,
    BorrowSource,
    WeightPolicy,
    borrow,
    candidate_neighbors,
)
from .errors import ValidationError
from .ic import IcPosterior, posterior_ic, signal_flag
from .ontology import Ontology, SimilarityMatrix
from .quarters import Quarter
from .reports import ReportStore

log = logging.getLogger(__name__)

METHOD_IC = "IC"
METHOD_SSM = "IC_SSM"
METHOD_HLGT = "IC_HLGT"
METHODS = (METHOD_IC, METHOD_SSM, METHOD_HLGT)

RNG_ALGORITHM = "philox"


@dataclass(frozen=True)
class RunConfig:
    """Everything a screening run needs besides the data itself.

    Defaults follow the reference parametrization: similarity cutoff 0.3,
    informative-component weight = max source similarity, vague prior sd 2.0,
    random-effects pooling, signal threshold 0.
    """

    methods: tuple[str, ...] = (METHOD_IC, METHOD_SSM)
    min_ssm: float = 0.3
    w_policy: str = "max_ssm"
    w_fixed: float = 0.8
    vague_sd: float = 2.0
    effects: str = "random"
    include_target_in_reml: bool = False
    threshold: float = 0.0
    n_samples: int = 100_000
    seed: int = 0
    min_a: int = 1
    threads: int = 1
    start: Quarter | None = None
    end: Quarter | None = None
    drug_filter: frozenset[str] | None = None

    def __post_init__(self) -> None:
        for m in self.methods:
            if m not in METHODS:
                raise ValidationError(f"unknown method {m!r}")
        if self.w_policy not in ("max_ssm", "fixed"):
            raise ValidationError(f"unknown weight policy {self.w_policy!r}")
        if self.effects not in ("random", "fixed"):
            raise ValidationError(f"unknown effects model {self.effects!r}")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")

    def weight_policy(self) -> WeightPolicy:
        return WeightPolicy(kind=self.w_policy, value=self.w_fixed)


@dataclass(frozen=True)
class PairResult:
    """One method's verdict on one (drug, event) pair at one cutoff."""

    method: str
    drug: str
    event: str
    cutoff: Quarter
    a: int
    b: int
    c: int
    d: int
    oe: float | None
    pme: float
    variance: float
    ci_low: float
    ci_high: float
    signal: bool
    s_count: int = 0
    tau2: float | None = None
    w: float | None = None
    w_tilde: float | None = None
    map_mu: float | None = None
    map_v: float | None = None


def derive_seed(seed: int, drug: str, event: str, cutoff: Quarter) -> int:
    """Stable 64-bit stream key for one pair at one cutoff."""
    text = f"{seed}|{drug}|{event}|{cutoff}"
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class IcCache:
    """Memoized plain information components, shared across methods.

    Values depend only on (drug, event, cutoff, run seed, n_samples), so
    concurrent recomputation is harmless: every writer stores the same value.
    """

    def __init__(
        self,
        store: ReportStore,
        seed: int,
        n_samples: int,
        memo: dict[tuple[str, str, Quarter], IcPosterior] | None = None,
    ):
        self._store = store
        self._seed = seed
        self._n_samples = n_samples
        self.memo = {} if memo is None else memo

    def posterior(self, drug: str, event: str, cutoff: Quarter) -> IcPosterior:
        key = (drug, event, cutoff)
        hit = self.memo.get(key)
        if hit is None:
            table = self._store.contingency(drug, event, cutoff)
            hit = posterior_ic(
                table,
                n_samples=self._n_samples,
                seed=derive_seed(self._seed, drug, event, cutoff),
            )
            self.memo[key] = hit
        return hit


@dataclass
class RunContext:
    """Shared state for one or more batches over the same store and config."""

    store: ReportStore
    config: RunConfig
    similarity: SimilarityMatrix | None = None
    ontology: Ontology | None = None
    cache: IcCache = field(init=False)
    _neighbor_memo: dict[tuple[str, str], list[tuple[str, float]]] = field(
        default_factory=dict
    )

    def __post_init__(self) -> None:
        needs_sim = METHOD_SSM in self.config.methods
        if needs_sim and self.similarity is None:
            raise ValidationError("IC_SSM requires a similarity matrix")
        if METHOD_HLGT in self.config.methods and self.ontology is None:
            raise ValidationError("IC_HLGT requires an ontology")
        self.cache = IcCache(self.store, self.config.seed, self.config.n_samples)

    def neighbors(self, pt: str, mode: str) -> list[tuple[str, float]]:
        key = (pt, mode)
        hit = self._neighbor_memo.get(key)
        if hit is None:
            hit = candidate_neighbors(
                pt,
                mode,
                similarity=self.similarity,
                ontology=self.ontology,
                min_ssm=self.config.min_ssm,
            )
            self._neighbor_memo[key] = hit
        return hit


def _gather_sources(
    ctx: RunContext, drug: str, event: str, cutoff: Quarter, mode: str
) -> list[BorrowSource]:
    sources = []
    for pt, ssm in ctx.neighbors(event, mode):
        table = ctx.store.contingency(drug, pt, cutoff)
        if table.a < 1:
            continue
        post = ctx.cache.posterior(drug, pt, cutoff)
        if post.variance <= 0.0:
            log.warning(
                "skipping degenerate source (%s, %s) at %s", drug, pt, cutoff
            )
            continue
        sources.append(BorrowSource(pt=pt, ic=post.pme, vic=post.variance, ssm=ssm))
    return sources


def analyze_pair(
    ctx: RunContext, drug: str, event: str, cutoff: Quarter
) -> list[PairResult]:
    """All configured methods applied to one pair at one cutoff."""
    cfg = ctx.config
    table = ctx.store.contingency(drug, event, cutoff)
    target = ctx.cache.posterior(drug, event, cutoff)
    base = dict(
        drug=drug,
        event=event,
        cutoff=cutoff,
        a=table.a,
        b=table.b,
        c=table.c,
        d=table.d,
        oe=table.observed_expected(),
    )
    results = []
    for method in cfg.methods:
        if method == METHOD_IC:
            results.append(
                PairResult(
                    method=method,
                    pme=target.pme,
                    variance=target.variance,
                    ci_low=target.ci_low,
                    ci_high=target.ci_high,
                    signal=signal_flag(target, cfg.threshold),
                    **base,
                )
            )
            continue
        mode = MODE_SSM if method == METHOD_SSM else MODE_HLGT
        sources = _gather_sources(ctx, drug, event, cutoff, mode)
        adjusted = borrow(
            target,
            sources,
            effects=cfg.effects,
            policy=cfg.weight_policy(),
            vague_sd=cfg.vague_sd,
            include_target_in_reml=cfg.include_target_in_reml,
        )
        post = adjusted.posterior
        results.append(
            PairResult(
                method=method,
                pme=post.pme,
                variance=post.variance,
                ci_low=post.ci_low,
                ci_high=post.ci_high,
                signal=post.ci_low > cfg.threshold,
                s_count=len(sources),
                tau2=adjusted.map_prior.tau2 if adjusted.map_prior else None,
                w=adjusted.w,
                w_tilde=post.w_tilde if sources else None,
                map_mu=adjusted.map_prior.mu if adjusted.map_prior else None,
                map_v=adjusted.map_prior.v if adjusted.map_prior else None,
                **base,
            )
        )
    return results


def run_batch(
    ctx: RunContext,
    cutoffs: list[Quarter],
    pairs: list[tuple[str, str]] | None = None,
) -> list[PairResult]:
    """Screen pairs at each cutoff; results sorted (method, cutoff, drug, event).

    With pairs=None the pair set at each cutoff is every pair active there
    (a >= config.min_a), restricted to the configured drug filter.
    """
    cfg = ctx.config
    tasks: list[tuple[Quarter, str, str]] = []
    for cutoff in sorted(cutoffs):
        at_cutoff = (
            pairs
            if pairs is not None
            else ctx.store.active_pairs(cutoff, min_a=cfg.min_a)
        )
        for drug, event in at_cutoff:
            if cfg.drug_filter is not None and drug not in cfg.drug_filter:
                continue
            tasks.append((cutoff, drug, event))

    def work(task: tuple[Quarter, str, str]) -> list[PairResult]:
        cutoff, drug, event = task
        return analyze_pair(ctx, drug, event, cutoff)

    if cfg.threads == 1:
        chunks = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            chunks = list(pool.map(work, tasks))
    flat = [r for chunk in chunks for r in chunk]
    flat.sort(key=lambda r: (r.method, r.cutoff.ordinal, r.drug, r.event))
    return flat


@dataclass
class QuarterlyRun:
    results: list[PairResult]
    first_alerts: dict[str, dict[tuple[str, str], Quarter]]
    quarters: list[Quarter]


def run_quarters(ctx: RunContext, quarters: list[Quarter] | None = None) -> QuarterlyRun:
    """Cumulative screening at each quarter, recording first alerts per method."""
    if quarters is None:
        all_q = ctx.store.quarters()
        if not all_q:
            raise ValidationError("report store is empty")
        lo = ctx.config.start or all_q[0]
        hi = ctx.config.end or all_q[-1]
        quarters = [q for q in all_q if lo <= q <= hi]
        if not quarters:
            raise ValidationError(f"no report quarters within {lo}..{hi}")
    quarters = sorted(quarters)
    results = run_batch(ctx, quarters)
    first: dict[str, dict[tuple[str, str], Quarter]] = {
        m: {} for m in ctx.config.methods
    }
    for r in results:  # already sorted by cutoff within each method
        if r.signal:
            first[r.method].setdefault((r.drug, r.event), r.cutoff)
    return QuarterlyRun(results=results, first_alerts=first, quarters=quarters)


# -- output -------------------------------------------------------------------

_BASE_COLUMNS = (
    "drug,event,cutoff,a,b,c,d,oe,pme,var,ci_low,ci_high,signal"
)
_BORROW_COLUMNS = _BASE_COLUMNS + ",method,s_count,tau2,w,w_tilde,map_mu,map_v"


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def result_rows(results: list[PairResult], method: str) -> list[str]:
    rows = []
    for r in results:
        if r.method != method:
            continue
        base = (
            f"{r.drug},{r.event},{r.cutoff},{r.a},{r.b},{r.c},{r.d},"
            f"{_fmt(r.oe)},{_fmt(r.pme)},{_fmt(r.variance)},"
            f"{_fmt(r.ci_low)},{_fmt(r.ci_high)},{int(r.signal)}"
        )
        if method == METHOD_IC:
            rows.append(base)
        else:
            rows.append(
                base
                + f",{method},{r.s_count},{_fmt(r.tau2)},{_fmt(r.w)},"
                + f"{_fmt(r.w_tilde)},{_fmt(r.map_mu)},{_fmt(r.map_v)}"
            )
    return rows


def write_results_csv(results: list[PairResult], method: str, path: str) -> None:
    header = _BASE_COLUMNS if method == METHOD_IC else _BORROW_COLUMNS
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for row in result_rows(results, method):
            fh.write(row + "\n")


def config_snapshot(cfg: RunConfig) -> str:
    """Effective configuration as sorted key = value lines."""
    items = {
        "methods": ",".join(cfg.methods),
        "min_ssm": repr(cfg.min_ssm),
        "w_policy": cfg.w_policy,
        "w_fixed": repr(cfg.w_fixed),
        "vague_sd": repr(cfg.vague_sd),
        "effects": cfg.effects,
        "include_target_in_reml": str(cfg.include_target_in_reml).lower(),
        "threshold": repr(cfg.threshold),
        "n_samples": str(cfg.n_samples),
        "seed": str(cfg.seed),
        "min_a": str(cfg.min_a),
        "threads": str(cfg.threads),
        "start": "" if cfg.start is None else str(cfg.start),
        "end": "" if cfg.end is None else str(cfg.end),
        "drug_filter": ""
        if cfg.drug_filter is None
        else ";".join(sorted(cfg.drug_filter)),
        "rng": RNG_ALGORITHM,
        "version": __version__,
    }
    return "".join(f"{k} = {v}\n" for k, v in sorted(items.items()))


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    return replace(cfg, **overrides)
