"""Similarity-weighted Bayesian borrowing for the information component.

A target pair's neighbors (either semantically similar PTs or PTs sharing a
MedDRA HLGT) contribute normal summaries of their own information components.
Those are pooled into a meta-analytic-predictive style prior, robustified
with a vague mixture component, and conjugately updated with the target's
own normal summary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from .errors import NumericalError
from .ic import IcPosterior
from .ontology import Ontology, SimilarityMatrix

log = logging.getLogger(__name__)

REML_TOL = 1e-8
REML_MAX_ITER = 200


@dataclass(frozen=True)
class BorrowSource:
    """One neighbor PT's contribution: its ic summary and its similarity weight."""

    pt: str
    ic: float
    vic: float
    ssm: float

    def __post_init__(self) -> None:
        if self.vic <= 0.0:
            raise ValueError(f"source variance must be positive, got {self.vic}")
        if not 0.0 < self.ssm <= 1.0:
            raise ValueError(f"source similarity must be in (0, 1], got {self.ssm}")


@dataclass(frozen=True)
class MapPrior:
    """Pooled prior N(mu, v) with the heterogeneity estimate that produced it."""

    mu: float
    v: float
    tau2: float
    s_count: int
    converged: bool = True


def fixed_effect_map(sources: list[BorrowSource]) -> MapPrior:
    """Similarity-weighted fixed-effect pooling of the sources.

    mu = sum(ssm_s/vic_s * ic_s) / sum(ssm_s/vic_s)
    v  = sum(ssm_s^2/vic_s) / (sum(ssm_s/vic_s))^2
    """
    if not sources:
        raise ValueError("fixed_effect_map needs at least one source")
    w = np.array([s.ssm / s.vic for s in sources])
    ic = np.array([s.ic for s in sources])
    w2 = np.array([s.ssm * s.ssm / s.vic for s in sources])
    denom = w.sum()
    return MapPrior(
        mu=float((w * ic).sum() / denom),
        v=float(w2.sum() / denom**2),
        tau2=0.0,
        s_count=len(sources),
    )


def _reml_score(tau2: float, y: np.ndarray, v: np.ndarray) -> float:
    """Derivative of the restricted log-likelihood (intercept model) in tau^2."""
    w = 1.0 / (v + tau2)
    mu = (w * y).sum() / w.sum()
    r2 = (y - mu) ** 2
    return 0.5 * ((w**2 * r2).sum() - w.sum() + (w**2).sum() / w.sum())


def reml_tau2(
    ics: list[float] | np.ndarray,
    vics: list[float] | np.ndarray,
    tol: float = REML_TOL,
    max_iter: int = REML_MAX_ITER,
) -> tuple[float, bool]:
    """REML between-source heterogeneity for the marginal model N(mu, vic_s + tau^2).

    Solved as a Brent root of the profiled score; a non-positive score at
    zero means tau^2 = 0 exactly (homogeneous sources). Returns
    (tau2, converged); callers fall back to fixed-effect pooling on failure.
    """
    y = np.asarray(ics, dtype=np.float64)
    v = np.asarray(vics, dtype=np.float64)
    if y.size != v.size or y.size == 0:
        raise ValueError("ics and vics must be equal-length and non-empty")
    if y.size == 1:
        return 0.0, True
    if _reml_score(0.0, y, v) <= 0.0:
        return 0.0, True
    hi = 1.0
    for _ in range(80):
        if _reml_score(hi, y, v) < 0.0:
            break
        hi *= 2.0
    else:
        return math.nan, False
    try:
        root = brentq(
            _reml_score, 0.0, hi, args=(y, v), xtol=tol, maxiter=max_iter
        )
    except RuntimeError:
        return math.nan, False
    return float(root), True


def random_effects_map(
    sources: list[BorrowSource],
    target: tuple[float, float] | None = None,
    include_target_in_reml: bool = False,
) -> MapPrior:
    """Random-effects pooling: REML tau^2, then the fixed-effect formulas
    with each vic_s replaced by vic_s + tau^2.

    The optional target (ic, vic) enters the tau^2 estimation only when
    include_target_in_reml is set; it never enters the pooled mean. With a
    single source the result reduces to fixed_effect_map exactly.
    """
    if not sources:
        raise ValueError("random_effects_map needs at least one source")
    ics = [s.ic for s in sources]
    vics = [s.vic for s in sources]
    if include_target_in_reml and target is not None:
        ics = ics + [target[0]]
        vics = vics + [target[1]]
    tau2, converged = reml_tau2(ics, vics)
    if not converged:
        log.warning(
            "REML heterogeneity estimate did not converge over %d sources; "
            "falling back to fixed-effect pooling",
            len(sources),
        )
        fixed = fixed_effect_map(sources)
        return MapPrior(fixed.mu, fixed.v, 0.0, fixed.s_count, converged=False)
    w = np.array([s.ssm / (s.vic + tau2) for s in sources])
    w2 = np.array([s.ssm * s.ssm / (s.vic + tau2) for s in sources])
    ic = np.array([s.ic for s in sources])
    denom = w.sum()
    return MapPrior(
        mu=float((w * ic).sum() / denom),
        v=float(w2.sum() / denom**2),
        tau2=tau2,
        s_count=len(sources),
    )


# -- robustification and the mixture update ----------------------------------

MAX_SSM = "max_ssm"
FIXED = "fixed"


@dataclass(frozen=True)
class WeightPolicy:
    """How much mass the informative component gets: max source similarity,
    or a fixed value."""

    kind: str = MAX_SSM
    value: float = 0.8

    def __post_init__(self) -> None:
        if self.kind not in (MAX_SSM, FIXED):
            raise ValueError(f"unknown weight policy {self.kind!r}")
        if self.kind == FIXED and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"fixed weight must be in [0, 1], got {self.value}")

    def weight(self, sources: list[BorrowSource]) -> float:
        if self.kind == FIXED:
            return self.value
        return max(s.ssm for s in sources)


@dataclass(frozen=True)
class RobustPrior:
    """w * N(mu, v) + (1 - w) * N(0, vague_sd^2)."""

    mu: float
    v: float
    w: float
    vague_sd: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"mixture weight must be in [0, 1], got {self.w}")
        if self.vague_sd <= 0.0 or self.v <= 0.0:
            raise ValueError("prior variances must be positive")


def robustify(
    map_prior: MapPrior,
    sources: list[BorrowSource],
    policy: WeightPolicy | None = None,
    vague_sd: float = 2.0,
) -> RobustPrior:
    policy = policy or WeightPolicy()
    return RobustPrior(
        mu=map_prior.mu, v=map_prior.v, w=policy.weight(sources), vague_sd=vague_sd
    )


@dataclass(frozen=True)
class MixturePosterior:
    """Two-component normal mixture posterior for the target's ic."""

    pme: float
    variance: float
    ci_low: float
    ci_high: float
    w_tilde: float
    mean_informative: float
    var_informative: float
    mean_vague: float
    var_vague: float


def _log_norm_pdf(x: float, mean: float, var: float) -> float:
    return -0.5 * (math.log(2.0 * math.pi * var) + (x - mean) ** 2 / var)


def mixture_posterior(
    prior: RobustPrior, ic_target: float, vic_target: float
) -> MixturePosterior:
    """Conjugate update of the robust mixture prior with N(ic_target, vic_target).

    Each component updates by precision addition; the mixture weight updates
    by the components' marginal likelihoods of the observed ic. Interval
    bounds invert the mixture CDF numerically.
    """
    if vic_target <= 0.0:
        raise NumericalError("target variance must be positive")
    prec_t = 1.0 / vic_target
    # Informative component.
    prec_1 = 1.0 / prior.v + prec_t
    mean_1 = (prior.mu / prior.v + ic_target * prec_t) / prec_1
    var_1 = 1.0 / prec_1
    # Vague component, centered at zero.
    vague_var = prior.vague_sd**2
    prec_2 = 1.0 / vague_var + prec_t
    mean_2 = (ic_target * prec_t) / prec_2
    var_2 = 1.0 / prec_2
    # Posterior mixture weight via the marginal likelihoods.
    if prior.w in (0.0, 1.0):
        w_tilde = prior.w
    else:
        log_m1 = _log_norm_pdf(ic_target, prior.mu, prior.v + vic_target)
        log_m2 = _log_norm_pdf(ic_target, 0.0, vague_var + vic_target)
        log_odds = math.log(prior.w) - math.log1p(-prior.w) + log_m1 - log_m2
        w_tilde = 1.0 / (1.0 + math.exp(-log_odds))
    pme = w_tilde * mean_1 + (1.0 - w_tilde) * mean_2
    second = w_tilde * (var_1 + mean_1**2) + (1.0 - w_tilde) * (var_2 + mean_2**2)
    variance = second - pme**2
    ci_low = _mixture_quantile(0.025, w_tilde, mean_1, var_1, mean_2, var_2)
    ci_high = _mixture_quantile(0.975, w_tilde, mean_1, var_1, mean_2, var_2)
    return MixturePosterior(
        pme=pme,
        variance=variance,
        ci_low=ci_low,
        ci_high=ci_high,
        w_tilde=w_tilde,
        mean_informative=mean_1,
        var_informative=var_1,
        mean_vague=mean_2,
        var_vague=var_2,
    )


def _mixture_quantile(
    q: float, w: float, mean_1: float, var_1: float, mean_2: float, var_2: float
) -> float:
    sd_1, sd_2 = math.sqrt(var_1), math.sqrt(var_2)

    def cdf(x: float) -> float:
        return w * norm.cdf(x, mean_1, sd_1) + (1.0 - w) * norm.cdf(x, mean_2, sd_2)

    lo = min(mean_1 - 10.0 * sd_1, mean_2 - 10.0 * sd_2)
    hi = max(mean_1 + 10.0 * sd_1, mean_2 + 10.0 * sd_2)
    return float(brentq(lambda x: cdf(x) - q, lo, hi, xtol=1e-12, rtol=8.9e-16))


# -- neighbor selection and the full adjustment -------------------------------

MODE_SSM = "ssm"
MODE_HLGT = "hlgt"


def candidate_neighbors(
    target_pt: str,
    mode: str,
    similarity: SimilarityMatrix | None = None,
    ontology: Ontology | None = None,
    min_ssm: float = 0.3,
) -> list[tuple[str, float]]:
    """(pt, ssm) borrowing candidates for the target PT, sorted by code.

    ``ssm`` mode takes similarity-matrix neighbors above min_ssm; ``hlgt``
    mode takes all PTs sharing an HLGT, each with similarity 1. The target
    itself is never a candidate.
    """
    if mode == MODE_SSM:
        if similarity is None:
            raise ValueError("ssm mode needs a similarity matrix")
        return [
            (pt, s) for pt, s in similarity.neighbors(target_pt) if s > min_ssm
        ]
    if mode == MODE_HLGT:
        if ontology is None:
            raise ValueError("hlgt mode needs an ontology")
        return [(pt, 1.0) for pt in ontology.hlgt_neighbors(target_pt)]
    raise ValueError(f"unknown borrowing mode {mode!r}")


RANDOM_EFFECTS = "random"
FIXED_EFFECTS = "fixed"


@dataclass(frozen=True)
class BorrowResult:
    posterior: MixturePosterior
    map_prior: MapPrior | None
    w: float | None


def borrow(
    target: IcPosterior,
    sources: list[BorrowSource],
    effects: str = RANDOM_EFFECTS,
    policy: WeightPolicy | None = None,
    vague_sd: float = 2.0,
    include_target_in_reml: bool = False,
) -> BorrowResult:
    """Full borrowing step for one target pair.

    With no sources the target's Monte Carlo posterior is passed through
    unchanged as a single-component result: no vague-prior update happens.
    """
    if not sources:
        passthrough = MixturePosterior(
            pme=target.pme,
            variance=target.variance,
            ci_low=target.ci_low,
            ci_high=target.ci_high,
            w_tilde=0.0,
            mean_informative=target.pme,
            var_informative=target.variance,
            mean_vague=target.pme,
            var_vague=target.variance,
        )
        return BorrowResult(posterior=passthrough, map_prior=None, w=None)
    if effects == RANDOM_EFFECTS:
        pooled = random_effects_map(
            sources,
            target=(target.pme, target.variance),
            include_target_in_reml=include_target_in_reml,
        )
    elif effects == FIXED_EFFECTS:
        pooled = fixed_effect_map(sources)
    else:
        raise ValueError(f"unknown effects model {effects!r}")
    robust = robustify(pooled, sources, policy=policy, vague_sd=vague_sd)
    posterior = mixture_posterior(robust, target.pme, target.variance)
    return BorrowResult(posterior=posterior, map_prior=pooled, w=robust.w)
