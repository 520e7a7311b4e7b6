"""Acceptance checks. Each test registers one PASS/FAIL line that is printed
in the "acceptance criteria" section of the pytest summary."""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from igsp.bench import ExperimentPlan, run_experiment, write_results
from igsp.cli import main
from igsp.enumeration import cross_validate_theorems, default_battery, enumerate_dags, random_conservative_families
from igsp.graph import Dag, Permutation, is_covered
from igsp.interventions import (
    TargetFamily,
    build_idag,
    i_markov_equivalent,
    i_markov_equivalent_conservative,
    relabeled_family,
)
from igsp.rng import make_rng
from igsp.search import SearchConfig, igsp_search, is_i_covered
from igsp.semsim import InterventionSpec, SemModel, sample_data, sample_random_dag
from igsp.stats import (
    DsepCiOracle,
    FisherZDecider,
    IdagInvarianceOracle,
    dsep_ci_oracle,
    fisher_z_ci,
    gaussian_invariance,
    hsic_index_invariance,
    idag_invariance_oracle,
    pool_eligible_blocks,
)

GOLDEN = Path(__file__).parent / "golden" / "finite_sample.json"


def _report(k: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[k] = f"[{'PASS' if ok else 'FAIL'}] {k}. {title}: {detail}"


# ---------------------------------------------------------------------------
# 1. equivalence criteria agree exhaustively


def test_criterion_1_equivalence_criteria_battery():
    t0 = time.perf_counter()
    reports = [cross_validate_theorems(enumerate_dags(p), default_battery(p, n_random=20, seed=p)) for p in (2, 3, 4)]
    elapsed = time.perf_counter() - t0
    mism = sum(len(r.mismatches) for r in reports)
    fams = sum(r.n_families for r in reports)
    ok = mism == 0 and elapsed < 60
    _report(1, "criteria battery p<=4", ok, f"{fams} families, {mism} mismatches, {elapsed:.1f}s (limit 60s)")
    assert mism == 0
    assert elapsed < 60


# ---------------------------------------------------------------------------
# 2. worked examples


def test_criterion_2_worked_examples():
    chain = Dag(3, [(1, 2), (2, 3)])
    fam1 = TargetFamily(3, [[], [2], [3]])
    idag = build_idag(chain, fam1)
    checks = {}
    checks["I-DAG construction"] = idag.augmented.edges == chain.edges | {(4, 2), (5, 3)}
    checks["X1 invariant under {2} and {3}"] = all(idag_invariance_oracle(chain, fam1, 1, [], b) for b in (1, 2))
    checks["X3|X2 invariant under {2}"] = idag_invariance_oracle(chain, fam1, 3, [2], 1)
    checks["X2|X1 invariant under {3}"] = idag_invariance_oracle(chain, fam1, 2, [1], 2)

    a, b, c = Dag(3, [(1, 2), (2, 3)]), Dag(3, [(2, 1), (2, 3)]), Dag(3, [(3, 2), (2, 1)])
    fam2 = TargetFamily(3, [[], [1], [2, 3]])
    checks["three-node graphs split by {0,{1},{2,3}}"] = (
        not i_markov_equivalent(a, b, fam2) and not i_markov_equivalent(a, c, fam2) and i_markov_equivalent(b, c, fam2)
    )
    fam3 = TargetFamily(3, [[2], [3]])
    checks["relabelled family of {{2},{3}}"] = relabeled_family(fam3, 0).targets == (frozenset(), frozenset({2, 3}))
    checks["{{2},{3}} separates a from b"] = not i_markov_equivalent_conservative(a, b, fam3)
    checks["1->2 ~ 2->1 under {{1},{2}}"] = i_markov_equivalent_conservative(
        Dag(2, [(1, 2)]), Dag(2, [(2, 1)]), TargetFamily(2, [[1], [2]])
    )
    failed = [k for k, v in checks.items() if not v]
    _report(2, "worked examples", not failed, f"{len(checks) - len(failed)}/{len(checks)} exact" + (f"; failed {failed}" if failed else ""))
    assert not failed


# ---------------------------------------------------------------------------
# 3 and 4. oracle consistency and trace audit


def _oracle_instances():
    rng = make_rng(2718)
    out = []
    k = 0
    for p in (4, 5, 6):
        for density in (1.0, 1.5):
            n = 34 if (p, density) != (6, 1.5) else 30
            for _ in range(n):
                truth = sample_random_dag(p, density, 10_000 + k)
                fam = random_conservative_families(p, 1, seed=10_000 + k, with_empty=True)[0]
                starts = [Permutation(tuple(int(v) + 1 for v in rng.permutation(p))) for _ in range(5)]
                out.append((truth, fam, starts))
                k += 1
    return out


@pytest.fixture(scope="module")
def oracle_runs():
    t0 = time.perf_counter()
    runs = []
    for truth, fam, starts in _oracle_instances():
        for pi0 in starts:
            cfg = SearchConfig(DsepCiOracle(truth), IdagInvarianceOracle(truth, fam), fam)
            runs.append((truth, fam, igsp_search(None, cfg, pi0)))
    return runs, time.perf_counter() - t0


def test_criterion_3_oracle_consistency(oracle_runs):
    runs, elapsed = oracle_runs
    n_inst = len(runs) // 5
    bad = {idx // 5 for idx, (truth, fam, res) in enumerate(runs) if not i_markov_equivalent(res.g, truth, fam)}
    ok = not bad and n_inst == 200 and elapsed < 300
    _report(3, "oracle consistency", ok, f"{n_inst - len(bad)}/{n_inst} instances in the true I-MEC from all 5 starts, {elapsed:.1f}s (limit 300s)")
    assert n_inst == 200
    assert not bad
    assert elapsed < 300


def test_criterion_4_trace_monotone_and_i_covered(oracle_runs):
    runs, _ = oracle_runs
    bad = 0
    for truth, fam, res in runs:
        counts = [s.n_edges for s in res.trace.restarts(0)]
        good = counts == sorted(counts, reverse=True)
        inv = IdagInvarianceOracle(truth, fam)
        for s in res.trace.moves():
            host = Dag(truth.p, s.host_edges)
            good = good and is_covered(host, *s.move) and is_i_covered(host, *s.move, inv, fam)
        bad += not good
    _report(4, "search monotonicity", bad == 0, f"{len(runs) - bad}/{len(runs)} traces monotone with only I-covered reversals")
    assert bad == 0


# ---------------------------------------------------------------------------
# 5. null calibration


def _rates(pvals):
    pvals = np.asarray(pvals)
    return {a: float(np.mean(pvals < a)) for a in (0.01, 0.05)}


def _calibration_pvalues(trials=2000, n=1000):
    out = {"fisher_z": [], "gaussian": [], "hsic": []}
    for r in range(trials):
        rng = make_rng(7, r)
        xy = rng.standard_normal((n, 2))
        out["fisher_z"].append(fisher_z_ci(xy, 1, 2).p_value)
        # X2 | X1 has the same law in both blocks while X1 changes scale
        blocks = []
        for scale in (1.0, 1.5):
            x = np.empty((n, 2))
            x[:, 0] = scale * rng.standard_normal(n)
            x[:, 1] = 0.7 * x[:, 0] + rng.standard_normal(n)
            blocks.append(x)
        out["gaussian"].append(gaussian_invariance(blocks, 2, [1]).p_value)
        # HSIC on n stacked samples (n/2 per block)
        same = rng.standard_normal((n, 1))
        out["hsic"].append(hsic_index_invariance([same[: n // 2], same[n // 2 :]], 1).p_value)
    return out


@pytest.mark.slow
def test_criterion_5_calibration():
    pvals = _calibration_pvalues()
    parts, ok = [], True
    for name, ps in pvals.items():
        rates = _rates(ps)
        for a, rate in rates.items():
            ok &= abs(rate - a) <= 0.025
        parts.append(f"{name} " + "/".join(f"{rates[a]:.4f}@{a}" for a in rates))
    _report(5, "null calibration (2000 trials)", ok, "; ".join(parts) + " (tolerance 0.025)")
    assert ok


# ---------------------------------------------------------------------------
# 6. finite-sample behaviour


def _arm(**kw):
    res = run_experiment(ExperimentPlan(p=10, replicates=100, seed=0, **kw))
    assert res.summary["n_failed"] == 0
    return res


@pytest.mark.slow
def test_criterion_6_finite_sample():
    golden = json.loads(GOLDEN.read_text())
    perfect = {n: _arm(n_per_block=n) for n in (500, 2000, 10000)}
    medians = {n: perfect[n].median_hamming() for n in perfect}
    rate = perfect[10000].summary["imec_rate"]
    obs = _arm(n_per_block=10000, family="observational").median_hamming()
    inhib = _arm(n_per_block=10000, kind="inhibiting", factor=10.0).median_hamming()
    imperf = _arm(n_per_block=10000, kind="imperfect", mix_alpha=0.5).median_hamming()
    monotone = medians[500] >= medians[2000] >= medians[10000]
    ok_a = rate >= golden["imec_rate_threshold"] and monotone
    ok_b = inhib < obs and imperf < obs
    _report(
        6, "finite-sample reproduction", ok_a and ok_b,
        f"(a) I-MEC rate {rate:.2f} >= {golden['imec_rate_threshold']}, median Hamming n=500/2000/10000: "
        f"{medians[500]:g}/{medians[2000]:g}/{medians[10000]:g}; (b) median Hamming inhibiting {inhib:g}, "
        f"imperfect {imperf:g} vs observational-only {obs:g}",
    )
    assert rate >= golden["imec_rate_threshold"]
    assert monotone
    assert inhib < obs and imperf < obs


# ---------------------------------------------------------------------------
# 7. pooling


def _pooling_fixture(truth, targets, g_pi, i, k, trials=2000, n=500, alpha=0.05):
    m = SemModel(truth, {e: 0.8 for e in truth.edges}, (1.0,) * truth.p)
    specs = [InterventionSpec("perfect", t) for t in targets]
    fam = TargetFamily(truth.p, [[]] + targets)
    eligible = pool_eligible_blocks(g_pi, Permutation((1, 2, 3)), fam, i, k)
    cond = sorted(g_pi.ancestors(i) - {k})
    assert dsep_ci_oracle(truth, i, k, cond)
    rej = np.zeros(len(fam))
    for t in range(trials):
        d = sample_data(m, specs, n, 10_000 + t)
        ci = FisherZDecider(d, alpha)
        for b in range(1, len(fam)):
            rej[b] += not ci.independent(k, i, cond, pool=[b])
    return eligible, {b: rej[b] / trials for b in range(1, len(fam))}


@pytest.mark.slow
def test_criterion_7_pooling():
    full = Dag(3, [(1, 2), (1, 3), (2, 3)])
    alpha = 0.05
    chain = _pooling_fixture(Dag(3, [(1, 2), (2, 3)]), [[1], [2], [3], [2, 3]], full, 3, 1)
    collider = _pooling_fixture(Dag(3, [(1, 3), (2, 3)]), [[1], [2], [3], [1, 2]], full, 2, 1)
    eligible_ok, inflated = True, []
    for name, (elig, rates) in (("chain", chain), ("collider", collider)):
        eligible_ok &= bool(elig) and all(abs(rates[b] - alpha) <= 0.025 for b in elig)
        inflated += [(name, b, rates[b]) for b in rates if b not in elig and rates[b] > 3 * alpha]
    ok = eligible_ok and bool(inflated)
    fmt = lambda e, r: ",".join(f"{b}{'*' if b in e else ''}:{r[b]:.3f}" for b in r)
    _report(
        7, "pooling soundness", ok,
        f"rejection at alpha 0.05, eligible blocks starred: chain {fmt(*chain)}; collider {fmt(*collider)}; "
        f"{len(inflated)} ineligible block(s) above 3*alpha",
    )
    assert eligible_ok
    assert inflated


# ---------------------------------------------------------------------------
# 8. determinism


def test_criterion_8_determinism(tmp_path):
    outs = []
    for run in ("a", "b"):
        d = tmp_path / run
        assert main(["--seed", "5", "simulate", "--p", "6", "--n", "500", "--kind", "imperfect", "--out", str(d / "sim")]) == 0
        assert main([
            "--seed", "5", "learn", "--data", str(d / "sim" / "data.csv"), "--test", "gaussian",
            "--restarts", "2", "--out", str(d / "learn.json"),
        ]) == 0
        plan = ExperimentPlan(p=6, n_per_block=300, replicates=3, seed=5)
        paths = write_results(run_experiment(plan), d / "bench")
        outs.append([d / "sim" / "data.csv", d / "sim" / "model.json", d / "learn.json", paths["rows"], paths["manifest"]])
    same = [x.read_bytes() == y.read_bytes() for x, y in zip(*outs)]
    trace = json.loads(outs[0][2].read_text())["trace"]
    _report(8, "determinism", all(same), f"{sum(same)}/{len(same)} artefacts bitwise identical (trace of {len(trace)} steps included)")
    assert all(same)
