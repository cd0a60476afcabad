"""Command-line interface.

Subcommands: validate, run, evaluate, compare, sweep, generate. Exit codes:
0 success, 1 I/O failure, 2 validation failure, 3 numerical failure. Errors
are emitted as one-line JSON objects on stderr; stdout carries data only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from ._version import __version__
from .errors import NumericalError, ValidationError
from .evaluate import (
    bootstrap,
    check_negative_controls,
    compare_methods,
    load_reference,
    parameter_sweep,
    quarterly_curves,
    score,
    write_bootstrap_json,
    write_compare_csv,
    write_metrics_csv,
    write_sweep_csv,
)
from .ontology import build_similarity, load_ontology
from .pipeline import (
    METHOD_SSM,
    METHODS,
    RunConfig,
    RunContext,
    config_snapshot,
    run_quarters,
    write_results_csv,
)
from .quarters import Quarter
from .reports import load_reports
from .synth import (
    basic_scenario,
    concordant_scenario,
    discordant_scenario,
    generate,
    null_scenario,
    verify_manifest,
)

log = logging.getLogger(__name__)

_CONFIG_KEYS = {
    "methods",
    "min_ssm",
    "w",
    "vague_sd",
    "effects",
    "include_target_in_reml",
    "threshold",
    "n_samples",
    "seed",
    "min_a",
    "threads",
    "start",
    "end",
}

_PRESETS = {
    "basic": basic_scenario,
    "concordant": concordant_scenario,
    "discordant": discordant_scenario,
    "null": null_scenario,
}


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = value.strip()
    return values


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


def _build_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, str] = {}
    if getattr(args, "config", None):
        values.update(_read_config_file(args.config))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = str(flag)

    kwargs: dict = {}
    if "methods" in values:
        methods = tuple(m.strip() for m in values["methods"].split(",") if m.strip())
        kwargs["methods"] = methods
    if "w" in values:
        if values["w"] == "max_ssm":
            kwargs["w_policy"] = "max_ssm"
        else:
            kwargs["w_policy"] = "fixed"
            kwargs["w_fixed"] = float(values["w"])
    for key, conv in (
        ("min_ssm", float),
        ("vague_sd", float),
        ("threshold", float),
        ("n_samples", int),
        ("seed", int),
        ("min_a", int),
        ("threads", int),
    ):
        if key in values:
            kwargs[key] = conv(values[key])
    if "effects" in values:
        kwargs["effects"] = values["effects"]
    if "include_target_in_reml" in values:
        kwargs["include_target_in_reml"] = _parse_bool(values["include_target_in_reml"])
    for key in ("start", "end"):
        if values.get(key):
            kwargs[key] = Quarter.parse(values[key])
    if getattr(args, "drug_filter", None):
        kwargs["drug_filter"] = frozenset(_read_code_list(args.drug_filter))
    return RunConfig(**kwargs)


def _read_code_list(path: str) -> list[str]:
    codes = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line and not line.startswith("#"):
                codes.append(line)
    return codes


def _make_context(args: argparse.Namespace, config: RunConfig) -> RunContext:
    ontology = load_ontology(args.ontology) if args.ontology else None
    store = load_reports(args.reports, ontology)
    similarity = None
    if METHOD_SSM in config.methods:
        if ontology is None:
            raise ValidationError("IC_SSM needs --ontology")
        log.info("building similarity matrix (threshold %.3g)", config.min_ssm)
        similarity = build_similarity(ontology, min_ssm=config.min_ssm)
    return RunContext(
        store=store, config=config, similarity=similarity, ontology=ontology
    )


def _write_snapshot(outdir: str, config: RunConfig) -> None:
    with open(
        os.path.join(outdir, "effective_config.txt"), "w", encoding="utf-8"
    ) as fh:
        fh.write(config_snapshot(config))


_OUTPUT_DOCS = {
    "results_<METHOD>.csv": (
        "one row per screened (drug, event) pair per cutoff quarter; columns "
        "drug, event, cutoff, a, b, c, d (contingency cells), oe (observed/"
        "expected, empty when a margin is zero), pme (posterior mean), var, "
        "ci_low, ci_high (central 95% bounds), signal (1 when ci_low clears "
        "the threshold); borrowing methods add method, s_count (sources "
        "used), tau2 (heterogeneity), w (prior weight), w_tilde (posterior "
        "weight), map_mu, map_v (pooled prior)"
    ),
    "metrics.csv": (
        "per-quarter confusion counts and metrics per method; columns "
        "quarter, method, tp, fp, tn, fn, sensitivity, specificity, ppv, f1, "
        "youden (empty when a denominator is zero)"
    ),
    "compare.csv": (
        "detection overlap between two methods on positive controls: both, "
        "only_a, only_b, neither, evaluated, n_imputed, mean_delta_quarters"
    ),
    "compare_deltas.csv": (
        "detection-delay histogram; delta_quarters, observed_count (both "
        "methods detected), imputed_count (one side imputed past the window)"
    ),
    "sweep.csv": (
        "one-at-a-time parameter sweep; param, value, method plus the "
        "metrics.csv metric columns, aggregated over the full run"
    ),
    "bootstrap.json": (
        "reference-set bootstrap: per ordered method pair and metric, the "
        "fraction of resamples where the first method beats the second "
        "(ties count one half)"
    ),
    "effective_config.txt": "the fully resolved configuration for this run",
}


def _write_outputs_readme(outdir: str, files: list[str]) -> None:
    lines = ["# Output files", ""]
    for name in files:
        lines.append(f"- `{name}`: {_OUTPUT_DOCS[name]}")
    lines.append("")
    with open(os.path.join(outdir, "README.md"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def _cmd_validate(args: argparse.Namespace) -> int:
    ontology = load_ontology(args.ontology) if args.ontology else None
    store = load_reports(args.reports, ontology)
    summary: dict = {
        "reports": len(store),
        "quarters": [str(q) for q in store.quarters()],
        "load_warnings": store.load_warnings,
    }
    if ontology is not None:
        summary["concepts"] = len(ontology)
        summary["pts"] = len(ontology.pts())
    if args.reference:
        entries = load_reference(args.reference)
        summary["reference"] = {
            "positives": sum(e.kind == "POSITIVE" for e in entries),
            "negatives": sum(e.kind == "NEGATIVE" for e in entries),
        }
        if ontology is not None:
            summary["negative_control_flags"] = check_negative_controls(
                entries, ontology
            )
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config = _build_config(args)
    ctx = _make_context(args, config)
    run = run_quarters(ctx)
    os.makedirs(args.out, exist_ok=True)
    written = []
    for method in config.methods:
        name = f"results_{method}.csv"
        write_results_csv(run.results, method, os.path.join(args.out, name))
        written.append("results_<METHOD>.csv")
    _write_snapshot(args.out, config)
    _write_outputs_readme(
        args.out, sorted(set(written)) + ["effective_config.txt"]
    )
    log.info("wrote %d result rows to %s", len(run.results), args.out)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _build_config(args)
    entries = load_reference(args.reference)
    ctx = _make_context(args, config)
    run = run_quarters(ctx)
    curves = {
        method: quarterly_curves(run.first_alerts[method], entries, run.quarters)
        for method in config.methods
    }
    os.makedirs(args.out, exist_ok=True)
    write_metrics_csv(curves, os.path.join(args.out, "metrics.csv"))
    files = ["metrics.csv"]
    if args.bootstrap:
        result = bootstrap(
            {m: run.first_alerts[m] for m in config.methods},
            entries,
            n_iter=args.bootstrap,
            seed=config.seed,
            strict_before=not args.non_strict,
        )
        write_bootstrap_json(result, os.path.join(args.out, "bootstrap.json"))
        files.append("bootstrap.json")
    _write_snapshot(args.out, config)
    _write_outputs_readme(args.out, files + ["effective_config.txt"])
    for method in config.methods:
        report = score(run.first_alerts[method], entries,
                       strict_before=not args.non_strict)
        log.info(
            "%s: tp=%d fp=%d tn=%d fn=%d", method, report.tp, report.fp,
            report.tn, report.fn,
        )
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    config = _build_config(args)
    if len(config.methods) != 2:
        raise ValidationError("compare needs exactly two methods")
    entries = load_reference(args.reference)
    ctx = _make_context(args, config)
    run = run_quarters(ctx)
    method_a, method_b = config.methods
    comparison = compare_methods(
        run.first_alerts[method_a],
        run.first_alerts[method_b],
        entries,
        method_a=method_a,
        method_b=method_b,
        strict_before=not args.non_strict,
    )
    os.makedirs(args.out, exist_ok=True)
    write_compare_csv(
        comparison,
        os.path.join(args.out, "compare.csv"),
        os.path.join(args.out, "compare_deltas.csv"),
    )
    _write_snapshot(args.out, config)
    _write_outputs_readme(
        args.out, ["compare.csv", "compare_deltas.csv", "effective_config.txt"]
    )
    return 0


def _parse_grid(items: list[str]) -> dict[str, list]:
    grid: dict[str, list] = {}
    for item in items:
        if "=" not in item:
            raise ValidationError(f"bad --grid {item!r}, expected key=v1,v2,...")
        key, _, values = item.partition("=")
        parsed: list = []
        for tok in values.split(","):
            tok = tok.strip()
            parsed.append(tok if tok == "max_ssm" else float(tok))
        grid[key.strip()] = parsed
    return grid


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _build_config(args)
    entries = load_reference(args.reference)
    ontology = load_ontology(args.ontology) if args.ontology else None
    store = load_reports(args.reports, ontology)
    grid = _parse_grid(args.grid)
    rows = parameter_sweep(
        store,
        entries,
        config,
        grid,
        ontology=ontology,
        strict_before=not args.non_strict,
    )
    os.makedirs(args.out, exist_ok=True)
    write_sweep_csv(rows, os.path.join(args.out, "sweep.csv"))
    _write_snapshot(args.out, config)
    _write_outputs_readme(args.out, ["sweep.csv", "effective_config.txt"])
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    if args.verify:
        ok = verify_manifest(args.verify)
        print(json.dumps({"verified": ok, "dir": args.verify}))
        return 0 if ok else 2
    factory = _PRESETS[args.preset]
    overrides = {}
    for field in ("n_drugs", "n_pts", "n_reports", "n_quarters", "negatives_per_drug"):
        value = getattr(args, field)
        if value is not None:
            overrides[field] = value
    scenario = factory(seed=args.seed, **overrides)
    manifest = generate(scenario, args.out)
    print(
        json.dumps(
            {
                "dir": args.out,
                "scenario": manifest["scenario"]["name"],
                "seed": scenario.seed,
                "totals": manifest["totals"],
            },
            sort_keys=True,
        )
    )
    return 0


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--methods", help=f"comma list from {{{','.join(METHODS)}}}")
    p.add_argument("--min-ssm", dest="min_ssm", type=float, help="similarity cutoff")
    p.add_argument("--w", help="informative-prior weight: max_ssm or a number")
    p.add_argument("--vague-sd", dest="vague_sd", type=float,
                   help="vague component standard deviation")
    p.add_argument("--effects", choices=("random", "fixed"),
                   help="pooling model for the borrow prior")
    p.add_argument("--include-target-in-reml", dest="include_target_in_reml",
                   action="store_const", const=True, default=None,
                   help="let the target pair inform the heterogeneity estimate")
    p.add_argument("--threshold", type=float, help="signal threshold on ci_low")
    p.add_argument("--n-samples", dest="n_samples", type=int,
                   help="Monte Carlo draws per pair")
    p.add_argument("--seed", type=int, help="run seed")
    p.add_argument("--min-a", dest="min_a", type=int,
                   help="minimum joint count for screening")
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--start", help="first cutoff quarter (YYYYQn)")
    p.add_argument("--end", help="last cutoff quarter (YYYYQn)")
    p.add_argument("--drug-filter", dest="drug_filter",
                   help="file listing drug codes to screen (one per line)")
    p.add_argument("--non-strict", dest="non_strict", action="store_true",
                   help="count alerts landing on the label quarter as hits")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icborrow",
        description="adverse-event signal detection with similarity-informed "
        "Bayesian borrowing",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="progress logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check input files and summarize them")
    p.add_argument("--reports", required=True)
    p.add_argument("--ontology")
    p.add_argument("--reference")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="screen all active pairs quarter by quarter")
    p.add_argument("--reports", required=True)
    p.add_argument("--ontology")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("evaluate", help="score a run against a reference set")
    p.add_argument("--reports", required=True)
    p.add_argument("--ontology")
    p.add_argument("--reference", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bootstrap", type=int, default=0,
                   help="bootstrap iterations (0 disables)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("compare", help="head-to-head overlap of two methods")
    p.add_argument("--reports", required=True)
    p.add_argument("--ontology")
    p.add_argument("--reference", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sweep", help="one-at-a-time parameter sweep")
    p.add_argument("--reports", required=True)
    p.add_argument("--ontology")
    p.add_argument("--reference", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", action="append", default=[],
                   help="axis as key=v1,v2,... (repeatable); keys: min_ssm, "
                   "w, vague_sd, threshold")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("generate", help="emit a synthetic data set")
    p.add_argument("--preset", choices=sorted(_PRESETS), default="basic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synthetic")
    p.add_argument("--n-drugs", dest="n_drugs", type=int)
    p.add_argument("--n-pts", dest="n_pts", type=int)
    p.add_argument("--n-reports", dest="n_reports", type=int)
    p.add_argument("--n-quarters", dest="n_quarters", type=int)
    p.add_argument("--negatives-per-drug", dest="negatives_per_drug", type=int)
    p.add_argument("--verify", metavar="DIR",
                   help="instead of generating, re-derive DIR from its "
                   "manifest and verify it matches")
    p.set_defaults(func=_cmd_generate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ValidationError as exc:
        return _fail(2, exc)
    except NumericalError as exc:
        return _fail(3, exc)
    except ValueError as exc:
        return _fail(2, exc)
    except OSError as exc:
        return _fail(1, exc)


def _fail(code: int, exc: Exception) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
