"""Simulation studies: generate, learn, score, aggregate over replicates."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from igsp.exceptions import InvalidArgumentError
from igsp.graph import Dag, skeleton
from igsp.interventions import TargetFamily, same_imec
from igsp.rng import make_rng
from igsp.search import SearchConfig, igsp_search
from igsp.semsim import KINDS, InterventionSpec, sample_data, sample_random_dag, sample_weights
from igsp.stats import (
    DEFAULT_ALPHA_CI,
    DEFAULT_ALPHA_INV,
    DsepCiOracle,
    FisherZDecider,
    GaussianInvarianceDecider,
    HsicInvarianceDecider,
    IdagInvarianceOracle,
)

log = logging.getLogger(__name__)

FAMILY_GENERATORS = ("all-singletons", "all-pairs", "k-subset", "observational")
CI_BACKENDS = ("fisher_z", "oracle")
INV_BACKENDS = ("hsic", "gaussian", "oracle")


def hamming_distance(g1: Dag, g2: Dag) -> int:
    """Node pairs whose edge status (absent, ->, <-) differs; a reversal counts once."""
    if g1.p != g2.p:
        raise InvalidArgumentError(f"graphs have different sizes: {g1.p} vs {g2.p}")
    pairs = {tuple(sorted(e)) for e in g1.edges | g2.edges}
    return sum(1 for a, b in pairs if g1.has_edge(a, b) != g2.has_edge(a, b) or g1.has_edge(b, a) != g2.has_edge(b, a))


def skeleton_hamming(g1: Dag, g2: Dag) -> int:
    if g1.p != g2.p:
        raise InvalidArgumentError(f"graphs have different sizes: {g1.p} vs {g2.p}")
    return len(skeleton(g1) ^ skeleton(g2))


@dataclass(frozen=True)
class ExperimentPlan:
    p: int = 10
    avg_neighborhood: float = 1.5
    n_per_block: int = 1000
    kind: str = "perfect"
    factor: float = 10.0
    mix_alpha: float = 0.5
    shift_var: float = 1.0
    family: str = "all-singletons"
    k: int = 1
    replicates: int = 100
    seed: int = 0
    ci: str = "fisher_z"
    inv: str = "gaussian"
    alpha_ci: float = DEFAULT_ALPHA_CI
    alpha_inv: float = DEFAULT_ALPHA_INV
    pool: bool = False
    restarts: int = 1
    hsic_max_points: int | None = 500
    screen_targets: bool = True

    def __post_init__(self):
        if self.p < 2:
            raise InvalidArgumentError(f"plan.p must be at least 2, got {self.p}")
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"plan.kind must be one of {KINDS}, got {self.kind!r}")
        if self.family not in FAMILY_GENERATORS:
            raise InvalidArgumentError(f"plan.family must be one of {FAMILY_GENERATORS}, got {self.family!r}")
        if self.family == "k-subset" and not 1 <= self.k <= self.p:
            raise InvalidArgumentError(f"plan.k must lie in 1..{self.p}, got {self.k}")
        if self.ci not in CI_BACKENDS:
            raise InvalidArgumentError(f"plan.ci must be one of {CI_BACKENDS}, got {self.ci!r}")
        if self.inv not in INV_BACKENDS:
            raise InvalidArgumentError(f"plan.inv must be one of {INV_BACKENDS}, got {self.inv!r}")
        if self.replicates < 1 or self.n_per_block < 1 or self.restarts < 1:
            raise InvalidArgumentError("plan.replicates, plan.n_per_block and plan.restarts must be positive")
        if self.seed < 0:
            raise InvalidArgumentError("plan.seed must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentPlan:
        if not isinstance(data, dict):
            raise InvalidArgumentError("plan: expected a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"plan: unknown fields {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ExperimentPlan:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InvalidArgumentError(f"plan: malformed JSON ({e})") from None
        return cls.from_dict(data)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def replicate_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence([seed, 97, r]).generate_state(1)[0])


def family_targets(plan: ExperimentPlan, rep_seed: int) -> list[list[int]]:
    """Non-empty targets for one replicate (the observational block is implicit)."""
    nodes = range(1, plan.p + 1)
    if plan.family == "observational":
        return []
    if plan.family == "all-singletons":
        return [[v] for v in nodes]
    if plan.family == "all-pairs":
        return [[a, b] for a in nodes for b in nodes if a < b]
    chosen = make_rng(rep_seed, 4).choice(plan.p, size=plan.k, replace=False)
    return [[int(v) + 1] for v in sorted(chosen)]


@dataclass
class ReplicateRow:
    replicate: int
    seed: int
    n_true_edges: int = -1
    n_learned_edges: int = -1
    hamming: int = -1
    skeleton_hamming: int = -1
    in_true_imec: bool | None = None
    n_contradictory: int = -1
    n_ci_tests: int = 0
    n_inv_tests: int = 0
    truncated: bool = False
    status: str = "ok"
    error: str = ""
    wall_time: float = 0.0
    learned_edges: str = ""


RESULT_COLUMNS = [f.name for f in fields(ReplicateRow) if f.name != "wall_time"]


def run_replicate(plan: ExperimentPlan, r: int) -> ReplicateRow:
    seed = replicate_seed(plan.seed, r)
    row = ReplicateRow(r, seed)
    t0 = time.perf_counter()
    try:
        truth = sample_random_dag(plan.p, plan.avg_neighborhood, seed)
        model = sample_weights(truth, seed)
        specs = [
            InterventionSpec(plan.kind, t, factor=plan.factor, alpha=plan.mix_alpha, shift_var=plan.shift_var)
            for t in family_targets(plan, seed)
        ]
        data = sample_data(model, specs, plan.n_per_block, seed)
        fam = data.fam
        ci = DsepCiOracle(truth) if plan.ci == "oracle" else FisherZDecider(data, plan.alpha_ci)
        if plan.inv == "oracle":
            inv = IdagInvarianceOracle(truth, fam)
        elif plan.inv == "gaussian":
            inv = GaussianInvarianceDecider(data, plan.alpha_inv)
        else:
            inv = HsicInvarianceDecider(data, plan.alpha_inv, max_points=plan.hsic_max_points)
        cfg = SearchConfig(
            ci, inv, fam, pool=plan.pool, rng_seed=seed, max_restarts=plan.restarts,
            screen_targets=plan.screen_targets,
        )
        res = igsp_search(data, cfg)
        row.n_true_edges = truth.num_edges()
        row.n_learned_edges = res.g.num_edges()
        row.hamming = hamming_distance(truth, res.g)
        row.skeleton_hamming = skeleton_hamming(truth, res.g)
        row.in_true_imec = same_imec(truth, res.g, fam)
        row.n_contradictory = res.n_contradictory
        row.n_ci_tests = ci.n_tests
        row.n_inv_tests = inv.n_tests
        row.truncated = res.truncated
        row.learned_edges = ";".join(f"{a}->{b}" for a, b in res.g.sorted_edges())
    except Exception as e:  # a failed replicate is recorded, the run goes on
        log.warning("replicate %d failed: %s", r, e)
        row.status = "failed"
        row.error = f"{type(e).__name__}: {e}"
    row.wall_time = time.perf_counter() - t0
    return row


def _quartiles(values) -> dict:
    if not len(values):
        return {"q1": None, "median": None, "q3": None}
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return {"q1": float(q1), "median": float(med), "q3": float(q3)}


def summarize(rows: list[ReplicateRow]) -> dict:
    """Aggregates recomputed from the per-replicate rows alone."""
    ok = [r for r in rows if r.status == "ok"]
    imec = [r.in_true_imec for r in ok if r.in_true_imec is not None]
    return {
        "n_replicates": len(rows),
        "n_ok": len(ok),
        "n_failed": len(rows) - len(ok),
        "hamming": _quartiles([r.hamming for r in ok]),
        "skeleton_hamming": _quartiles([r.skeleton_hamming for r in ok]),
        "n_learned_edges": _quartiles([r.n_learned_edges for r in ok]),
        "imec_rate": float(np.mean(imec)) if imec else None,
    }


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    rows: list[ReplicateRow]
    summary: dict = field(default_factory=dict)

    def hammings(self) -> list[int]:
        return [r.hamming for r in self.rows if r.status == "ok"]

    def median_hamming(self) -> float | None:
        return self.summary["hamming"]["median"]


def run_experiment(plan: ExperimentPlan, threads: int = 1) -> ExperimentResult:
    """Run every replicate of ``plan``; rows come back ordered by replicate index."""
    if threads < 1:
        raise InvalidArgumentError("threads must be at least 1")
    reps = range(plan.replicates)
    if threads == 1:
        rows = [run_replicate(plan, r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda r: run_replicate(plan, r), reps))
    return ExperimentResult(plan, rows, summarize(rows))


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return v


def write_results(result: ExperimentResult, out_dir, name: str = "experiment") -> dict[str, Path]:
    """Write ``<name>.csv`` (per-replicate rows), ``<name>.json`` (manifest)
    and ``<name>.timing.csv``. The first two are deterministic given the plan;
    wall times live in the third file only."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"rows": out / f"{name}.csv", "manifest": out / f"{name}.json", "timing": out / f"{name}.timing.csv"}
    with open(paths["rows"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in result.rows:
            w.writerow([_cell(getattr(r, c)) for c in RESULT_COLUMNS])
    with open(paths["timing"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "wall_time"])
        for r in result.rows:
            w.writerow([r.replicate, f"{r.wall_time:.6f}"])
    manifest = {
        "plan": result.plan.to_dict(),
        "config_hash": result.plan.config_hash(),
        "rows_file": paths["rows"].name,
        "summary": result.summary,
    }
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths


def read_rows(path) -> list[ReplicateRow]:
    """Parse a rows CSV back into :class:`ReplicateRow` objects (wall time 0)."""
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = ReplicateRow(int(rec["replicate"]), int(rec["seed"]))
            for c in RESULT_COLUMNS[2:]:
                v = rec[c]
                cur = getattr(row, c)
                if c == "in_true_imec":
                    setattr(row, c, None if v == "" else v == "true")
                elif isinstance(cur, bool):
                    setattr(row, c, v == "true")
                elif isinstance(cur, int):
                    setattr(row, c, int(v))
                else:
                    setattr(row, c, v)
            out.append(row)
    return out
