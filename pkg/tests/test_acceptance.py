"""Acceptance criteria, each checked at its stated tolerance and time bound.

Every test records one PASS/FAIL line; the lines are printed in the terminal
summary whether or not output is captured.
"""

import os
import random
import statistics
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, FIXTURES
from instances import random_instance
from obdastream import bench, ir
from obdastream.distribution import ParallelScanner, format_rows, partition
from obdastream.engine import Metrics, WindowStore, compute_mws, cosine, evaluate_archive, pearson
from obdastream.engine import metrics as mt
from obdastream.engine.planner import SimilarityCondition, SignatureIndex, plan_hybrid
from obdastream.mappings import dataset_tables, identity_mappings
from obdastream.ontology import (
    canonicalize,
    certain_answers_oracle,
    check_satisfiability,
    load_dataset,
    load_ontology,
    parse_cq,
    parse_ucq,
)
from obdastream.rewriter import rewrite
from obdastream.starql import RULES, parse_file, validate
from obdastream.unfold import unfold_static

CORES = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def record(n, ok: bool, detail: str, status: str | None = None):
    status = status or ("PASS" if ok else "FAIL")
    ACCEPTANCE[str(n)] = f"criterion {n}: {status} {detail}"
    print(ACCEPTANCE[str(n)])
    assert ok, detail


def _scans(node) -> list:
    return sorted(n.table for n in ir.walk(node) if isinstance(n, ir.Scan))


# ---------------------------------------------------------------------------


def test_1_running_example(running_ontology, running_dataset):
    t0 = time.perf_counter()
    q = parse_cq("q(x) :- Reliable(x)")
    oracle = certain_answers_oracle(q, running_ontology, running_dataset).answers
    m = identity_mappings(running_ontology, running_dataset)
    plan = unfold_static(rewrite(q, running_ontology, m.vocabulary), m, running_ontology)
    unfolded = ir.evaluate(plan, dataset_tables(running_dataset, running_ontology)).rows
    dt = time.perf_counter() - t0
    want = {("s1",), ("s2",)}
    record(1, oracle == want and unfolded == want and dt < 1,
           f"oracle={sorted(oracle)} unfolded={sorted(unfolded)} {dt:.3f}s")


def test_2_rewriting_example(running_ontology, running_mappings):
    t0 = time.perf_counter()
    u = rewrite(parse_cq("q(x) :- Reliable(x)"), running_ontology, running_mappings.vocabulary)
    expected = parse_ucq("q(x) :- Reliable(x)\nq(x) :- [agg:min testScore >= 0.9](x)")
    same = {canonicalize(c) for c in u} == {canonicalize(c) for c in expected} and len(u) == 2
    plan = unfold_static(u, running_mappings, running_ontology)
    plain = [p for p in plan.inputs if not isinstance(p, ir.GroupHaving)] if isinstance(plan, ir.Union) else []
    grouped = [p for p in plan.inputs if isinstance(p, ir.GroupHaving)] if isinstance(plan, ir.Union) else []
    structure = (
        len(plain) == 1 and _scans(plain[0]) == ["reliable_sensors"]
        and len(grouped) == 1 and (grouped[0].agg, grouped[0].cmp, float(grouped[0].threshold)) == ("min", ">=", 0.9)
        and _scans(grouped[0].child) == ["field_tests", "lab_tests", "precision_tests"]
    )
    dt = time.perf_counter() - t0
    record(2, same and structure and dt < 1, f"disjuncts={len(u)} plan-match={structure} {dt:.3f}s")


def test_3_oracle_equivalence():
    t0 = time.perf_counter()
    rng = random.Random(20240601)
    n, mismatches = 250, 0
    for _ in range(n):
        o, d, q = random_instance(rng)
        m = identity_mappings(o, d)
        got = ir.evaluate(unfold_static(rewrite(q, o, m.vocabulary), m, o), dataset_tables(d, o)).rows
        if got != certain_answers_oracle(q, o, d, max_depth=5).answers:
            mismatches += 1
    dt = time.perf_counter() - t0
    record(3, mismatches == 0 and dt < 60, f"instances={n} mismatches={mismatches} {dt:.2f}s")


def test_4_mws_numeric_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    n = 1200
    live = rng.normal(0, 1, (n, 60))
    # a spread of correlations so the 0.75 threshold splits the pairs
    mix = rng.uniform(0, 1, n)[:, None]
    archived = 500 + 20 * (mix * live + np.sqrt(1 - mix ** 2) * rng.normal(0, 1, (n, 60)))
    worst = 0.0
    direct_set, mws_set = set(), set()
    for i in range(n):
        sig = compute_mws(archived[i])
        a, b = pearson(live[i], archived[i], sig), pearson(live[i], archived[i])
        c, d = cosine(live[i], archived[i], sig), cosine(live[i], archived[i])
        worst = max(worst, abs(a - b), abs(c - d))
        if a > 0.75:
            mws_set.add(i)
        if b > 0.75:
            direct_set.add(i)
    # vectorised path: one live window against the whole archive
    store = WindowStore.from_matrix(archived)
    pos = np.arange(n)
    plan = plan_hybrid([SimilarityCondition("pearson", ">", 0.75)])
    set_diffs = len(direct_set ^ mws_set)
    for k in range(5):
        on = evaluate_archive(live[k], store, pos, plan, mws=True, index=SignatureIndex(store, pos))
        off = evaluate_archive(live[k], store, pos, plan, mws=False)
        set_diffs += len({r[0] for r in on.rows} ^ {r[0] for r in off.rows})
        worst = max([worst] + [abs(x[1] - y[1]) for x, y in zip(on.rows, off.rows)])
    dt = time.perf_counter() - t0
    record(4, worst <= 1e-9 and set_diffs == 0 and dt < 30,
           f"pairs={n} max|diff|={worst:.2e} set-diffs={set_diffs} qualifying={len(mws_set)} {dt:.2f}s")


@pytest.fixture(scope="module")
def archive():
    return bench.synthetic_archive(windows=10_000, length=60, seed=0)


def test_5_signature_only_pruning(archive):
    t0 = time.perf_counter()
    problems = []
    pplan = partition(archive.store, 1)
    with ParallelScanner(archive.store, pplan, mws=True) as sc:
        for q in ("avg", "min"):
            sig_metrics, hyb_metrics = Metrics(), Metrics()
            for cycle in range(15):
                live = archive.live(cycle)
                sc.metrics = sig_metrics
                a, _ = sc.run(live, bench.access_for(q), cycle)
                sc.metrics = hyb_metrics
                b, _ = sc.run(live, bench.forced_hybrid(q), cycle)
                if a != b:
                    problems.append(f"{q} cycle {cycle} differs")
            if sig_metrics.get(mt.MEASUREMENT_SCANS) != 0:
                problems.append(f"{q} scanned {sig_metrics.get(mt.MEASUREMENT_SCANS)} measurements")
            if hyb_metrics.get(mt.MEASUREMENT_SCANS) == 0:
                problems.append(f"{q} forced hybrid did not scan")
    dt = time.perf_counter() - t0
    record(5, not problems and dt < 60, f"windows=10000 {'; '.join(problems) or 'scans=0, identical'} {dt:.2f}s")


@pytest.fixture(scope="module")
def pearson_cells(archive):
    workers = (1, 2, 4)
    cells = bench.run_bench(queries=("pearson",), mws_modes=(True, False), workers=workers, cycles=15,
                            synthetic=archive)
    return {(c.mws, c.workers): c for c in cells}


def test_6_mws_pearson_direction(pearson_cells):
    on, off = pearson_cells[(True, 1)], pearson_cells[(False, 1)]
    t_on, t_off = on.median("total_ms"), off.median("total_ms")
    j_on, j_off = on.median("join_ms"), off.median("join_ms")
    reduction = 1 - t_on / t_off
    record(6, t_on <= t_off,
           f"median total on={t_on:.2f}ms off={t_off:.2f}ms reduction={reduction:.1%} "
           f"join share on={j_on / t_on:.0%} off={j_off / t_off:.0%}")


def test_7a_partition_invariance(pearson_cells):
    digests = {(mode, n): c.digest() for (mode, n), c in pearson_cells.items()}
    rows = {n: "".join(format_rows(r) for r in pearson_cells[(True, n)].results) for n in (1, 2, 4)}
    same = len(set(rows.values())) == 1 and len(set(digests.values())) == 1
    results = pearson_cells[(True, 1)].rows[0][8]
    record("7a", same and results > 0, f"workers 1/2/4 byte-identical={same} rows/cycle={results}")


def test_7b_parallel_direction(pearson_cells):
    medians = {n: statistics.median(r[6] for r in pearson_cells[(True, n)].rows) for n in (1, 2, 4)}
    detail = " ".join(f"w{n}={t:.2f}ms" for n, t in medians.items())
    if CORES < 4:
        ACCEPTANCE["7b"] = f"criterion 7b: N/A host has {CORES} core(s), needs >= 4 ({detail})"
        pytest.skip(f"timing direction needs a host with >= 4 cores, this one has {CORES}")
    record("7b", medians[1] >= medians[2] >= medians[4], detail)


def test_8_frontend_corpus():
    t0 = time.perf_counter()
    q = parse_file(FIXTURES / "critical_mode.starql")
    ref = q.streams[1]
    ast_ok = (q.pulse.frequency_ms == 60_000 and all(s.range_ms == 60_000 and s.slide_ms == 1000 for s in q.streams)
              and ref.setback_ms == 31_536_000_000 and q.having.having.right.value == 0.75 and validate(q) == [])
    invalid = sorted((FIXTURES / "starql" / "invalid").glob("*.starql"))
    missed = [p.stem for p in invalid if p.stem not in [v.rule for v in validate(parse_file(p))]]
    dt = time.perf_counter() - t0
    ok = ast_ok and not missed and len(invalid) >= 10 and {p.stem for p in invalid} == set(RULES) and dt < 1
    record(8, ok, f"ast={ast_ok} negative={len(invalid) - len(missed)}/{len(invalid)} missed={missed} {dt:.3f}s")


def test_9_satisfiability():
    t0 = time.perf_counter()
    sat = FIXTURES / "sat"
    problems = []
    expect = {"functionality": ("s1", "4/5", "9/10"), "disjointness": ("s2",)}
    for kind, witness in expect.items():
        o = load_ontology(sat / f"{kind}.onto")
        bad = check_satisfiability(o, load_dataset(sat / f"{kind}_violation.csv"))
        good = check_satisfiability(o, load_dataset(sat / f"{kind}_valid.csv"))
        if bad.satisfiable or [v.rule for v in bad.violations] != [kind]:
            problems.append(f"{kind}: violation not detected")
        elif not all(w in bad.violations[0].detail for w in witness):
            problems.append(f"{kind}: wrong witness {bad.violations[0].detail!r}")
        if not good.satisfiable:
            problems.append(f"{kind}: valid fixture rejected")
    dt = time.perf_counter() - t0
    record(9, not problems and dt < 1, f"{'; '.join(problems) or 'witnesses correct, valid fixtures pass'} {dt:.3f}s")
