import math

import pytest

from icborrow import (
    METHOD_HLGT,
    METHOD_IC,
    METHOD_SSM,
    Quarter,
    RunConfig,
    RunContext,
    ValidationError,
    build_similarity,
    load_ontology,
    load_reports,
    run_batch,
    run_quarters,
)
from icborrow.pipeline import (
    IcCache,
    config_snapshot,
    derive_seed,
    result_rows,
    with_overrides,
    write_results_csv,
)
from icborrow.synth import basic_scenario, concordant_scenario, generate

Q = Quarter.parse


@pytest.fixture(scope="module")
def basic_run(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("basic")
    generate(basic_scenario(seed=3), str(outdir))
    store = load_reports(str(outdir / "reports.tsv"))
    ontology = load_ontology(str(outdir / "ontology.tsv"))
    similarity = build_similarity(ontology)
    return store, ontology, similarity


@pytest.fixture(scope="module")
def concordant_run(tmp_path_factory):
    """Full quarterly run of IC and IC_SSM over the concordant scenario.

    Restricted to the planted drug to keep the pair set small; planted
    pairs sit with their cluster siblings, so borrowing has real sources.
    """
    outdir = tmp_path_factory.mktemp("concordant")
    manifest = generate(concordant_scenario(seed=7), str(outdir))
    store = load_reports(str(outdir / "reports.tsv"))
    ontology = load_ontology(str(outdir / "ontology.tsv"))
    similarity = build_similarity(ontology)
    cfg = RunConfig(
        methods=(METHOD_IC, METHOD_SSM),
        n_samples=10_000,
        seed=7,
        drug_filter=frozenset({"D000"}),
    )
    ctx = RunContext(store, cfg, similarity=similarity, ontology=ontology)
    return manifest, run_quarters(ctx)


def small_config(**overrides):
    base = dict(n_samples=2_000, seed=5, methods=(METHOD_IC, METHOD_SSM))
    base.update(overrides)
    return RunConfig(**base)


def test_derive_seed_is_stable_and_keyed():
    q = Q("2015Q1")
    assert derive_seed(0, "D", "E", q) == derive_seed(0, "D", "E", q)
    keys = {
        derive_seed(0, "D", "E", q),
        derive_seed(1, "D", "E", q),
        derive_seed(0, "X", "E", q),
        derive_seed(0, "D", "Y", q),
        derive_seed(0, "D", "E", Q("2015Q2")),
    }
    assert len(keys) == 5
    assert all(0 <= k < 2**64 for k in keys)


def test_ic_cache_memoizes(six_report_store):
    cache = IcCache(six_report_store, seed=0, n_samples=1_500)
    a = cache.posterior("DRUG", "EV", Q("2015Q3"))
    b = cache.posterior("DRUG", "EV", Q("2015Q3"))
    assert a is b
    shared = {}
    c1 = IcCache(six_report_store, 0, 1_500, memo=shared)
    c2 = IcCache(six_report_store, 0, 1_500, memo=shared)
    assert c1.posterior("DRUG", "EV", Q("2015Q3")) is c2.posterior(
        "DRUG", "EV", Q("2015Q3")
    )


@pytest.mark.parametrize(
    "overrides",
    [
        {"methods": ("IC_BOGUS",)},
        {"w_policy": "median"},
        {"effects": "mixed"},
        {"threads": 0},
    ],
)
def test_config_validation(overrides):
    with pytest.raises(ValidationError):
        RunConfig(**overrides)


def test_context_requires_method_inputs(six_report_store):
    with pytest.raises(ValidationError):
        RunContext(six_report_store, small_config(methods=(METHOD_SSM,)))
    with pytest.raises(ValidationError):
        RunContext(six_report_store, small_config(methods=(METHOD_HLGT,)))


def test_run_batch_sorted_and_thread_invariant(basic_run):
    store, ontology, similarity = basic_run
    cutoffs = [Q("2015Q2"), Q("2015Q4")]
    runs = []
    for threads in (1, 4):
        ctx = RunContext(
            store, small_config(threads=threads), similarity=similarity
        )
        runs.append(run_batch(ctx, cutoffs))
    one, four = runs
    assert one == four
    keys = [(r.method, r.cutoff.ordinal, r.drug, r.event) for r in one]
    assert keys == sorted(keys)
    assert {r.method for r in one} == {METHOD_IC, METHOD_SSM}


def test_run_batch_drug_filter(basic_run):
    store, _, similarity = basic_run
    ctx = RunContext(
        store,
        small_config(methods=(METHOD_IC,), drug_filter=frozenset({"D001"})),
    )
    results = run_batch(ctx, [Q("2015Q4")])
    assert results and all(r.drug == "D001" for r in results)


def test_run_batch_explicit_pairs(six_report_store):
    ctx = RunContext(six_report_store, small_config(methods=(METHOD_IC,)))
    results = run_batch(ctx, [Q("2015Q4")], pairs=[("DRUG", "EV")])
    assert len(results) == 1
    r = results[0]
    assert (r.a, r.b, r.c, r.d) == (2, 1, 1, 2)
    assert r.oe == pytest.approx(6 * 2 / (3 * 3))


def test_run_quarters_first_alerts(basic_run):
    store, _, similarity = basic_run
    ctx = RunContext(store, small_config(), similarity=similarity)
    run = run_quarters(ctx)
    assert run.quarters == store.quarters()
    for method, alerts in run.first_alerts.items():
        for pair, quarter in alerts.items():
            flagged = [
                r.cutoff
                for r in run.results
                if r.method == method and (r.drug, r.event) == pair and r.signal
            ]
            assert quarter == min(flagged)


def test_run_quarters_threshold_inf_silences(basic_run):
    store, _, similarity = basic_run
    ctx = RunContext(
        store, small_config(threshold=math.inf), similarity=similarity
    )
    run = run_quarters(ctx)
    assert all(not alerts for alerts in run.first_alerts.values())
    assert not any(r.signal for r in run.results)


def test_run_quarters_subrange_agrees(basic_run):
    store, _, similarity = basic_run
    full = run_quarters(
        RunContext(store, small_config(), similarity=similarity)
    )
    late = run_quarters(
        RunContext(
            store, small_config(start=Q("2015Q3")), similarity=similarity
        )
    )
    assert late.quarters == [q for q in full.quarters if q >= Q("2015Q3")]
    # a pair first alerted in the shared window alerts at the same quarter
    for pair, quarter in full.first_alerts[METHOD_IC].items():
        if quarter >= Q("2015Q3"):
            assert late.first_alerts[METHOD_IC].get(pair) == quarter


def test_run_quarters_empty_window(six_report_store):
    ctx = RunContext(
        six_report_store,
        small_config(
            methods=(METHOD_IC,), start=Q("2020Q1"), end=Q("2020Q4")
        ),
    )
    with pytest.raises(ValidationError):
        run_quarters(ctx)


def test_result_rows_and_csv(tmp_path, six_report_store, chain_ontology):
    similarity = build_similarity(chain_ontology, min_ssm=0.1)
    ctx = RunContext(
        six_report_store,
        small_config(min_ssm=0.1),
        similarity=similarity,
    )
    results = run_batch(ctx, [Q("2015Q4")], pairs=[("DRUG", "EV")])

    ic_rows = result_rows(results, METHOD_IC)
    assert len(ic_rows) == 1
    fields = ic_rows[0].split(",")
    assert fields[:8] == ["DRUG", "EV", "2015Q4", "2", "1", "1", "2", "1.333333"]
    assert fields[12] in {"0", "1"}

    ssm_rows = result_rows(results, METHOD_SSM)
    assert len(ssm_rows) == 1
    ssm_fields = ssm_rows[0].split(",")
    assert ssm_fields[13] == METHOD_SSM
    assert len(ssm_fields) == 20

    path = tmp_path / "out.csv"
    write_results_csv(results, METHOD_SSM, str(path))
    lines = path.read_text().splitlines()
    assert lines[0].endswith(",method,s_count,tau2,w,w_tilde,map_mu,map_v")
    assert lines[1] == ssm_rows[0]


def test_no_sources_leaves_borrow_columns_blank(six_report_store, chain_ontology):
    # at the default 0.3 cutoff the chain ontology has no qualifying pairs
    similarity = build_similarity(chain_ontology)
    ctx = RunContext(six_report_store, small_config(), similarity=similarity)
    results = run_batch(ctx, [Q("2015Q4")], pairs=[("DRUG", "EV")])
    ssm = next(r for r in results if r.method == METHOD_SSM)
    ic = next(r for r in results if r.method == METHOD_IC)
    assert ssm.s_count == 0
    assert ssm.tau2 is None and ssm.w is None and ssm.w_tilde is None
    assert (ssm.pme, ssm.variance) == (ic.pme, ic.variance)
    row = result_rows(results, METHOD_SSM)[0]
    assert row.endswith(f",{METHOD_SSM},0,,,,,")


def test_config_snapshot_round_trip():
    cfg = small_config(drug_filter=frozenset({"D2", "D1"}), start=Q("2015Q1"))
    snap = config_snapshot(cfg)
    lines = snap.splitlines()
    assert lines == sorted(lines)
    got = dict(line.split(" = ", 1) for line in lines)
    assert got["rng"] == "philox"
    assert got["drug_filter"] == "D1;D2"
    assert got["start"] == "2015Q1"
    assert got["end"] == ""
    assert got["n_samples"] == "2000"
    assert got["methods"] == "IC,IC_SSM"


def test_with_overrides():
    cfg = small_config()
    bumped = with_overrides(cfg, threshold=1.5)
    assert bumped.threshold == 1.5
    assert cfg.threshold == 0.0
    assert bumped.n_samples == cfg.n_samples


def test_planted_pairs_alert_near_onset(concordant_run):
    manifest, run = concordant_run
    start = Q(manifest["scenario"]["start"])
    for entry in manifest["scenario"]["planted"]:
        pair = (entry["drug"], entry["pt"])
        label = Q(
            next(
                p["label_quarter"]
                for p in manifest["positives"]
                if (p["drug"], p["pt"]) == pair
            )
        )
        alert = run.first_alerts[METHOD_SSM][pair]
        assert abs((alert.ordinal - start.ordinal) - entry["onset"]) <= 1, pair
        assert alert < label, pair


def test_borrowing_raises_ci_low_on_fresh_signals(concordant_run):
    # At the onset cutoff the planted counts are still small, which is
    # exactly where pooling the elevated siblings should pay off.
    manifest, run = concordant_run
    start = Q(manifest["scenario"]["start"])
    onset_cutoff = start.ordinal + manifest["scenario"]["planted"][0]["onset"]
    by_key = {(r.method, r.cutoff.ordinal, r.drug, r.event): r for r in run.results}
    for entry in manifest["scenario"]["planted"]:
        pair = (entry["drug"], entry["pt"])
        plain = by_key[(METHOD_IC, onset_cutoff) + pair]
        borrowed = by_key[(METHOD_SSM, onset_cutoff) + pair]
        assert borrowed.ci_low > plain.ci_low, pair
