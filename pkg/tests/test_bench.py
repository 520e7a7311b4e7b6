import json

import pytest

from igsp.bench import (
    ExperimentPlan,
    family_targets,
    hamming_distance,
    read_rows,
    run_experiment,
    skeleton_hamming,
    summarize,
    write_results,
)
from igsp.exceptions import InvalidArgumentError
from igsp.graph import Dag

CHAIN = Dag(3, [(1, 2), (2, 3)])


def test_hamming_examples():
    assert hamming_distance(CHAIN, CHAIN) == 0
    assert hamming_distance(Dag(2, [(1, 2)]), Dag(2, [(2, 1)])) == 1
    assert hamming_distance(CHAIN, Dag(3)) == 2
    assert skeleton_hamming(Dag(2, [(1, 2)]), Dag(2, [(2, 1)])) == 0
    assert hamming_distance(CHAIN, Dag(3, [(2, 1), (1, 3)])) == 3
    with pytest.raises(InvalidArgumentError):
        hamming_distance(CHAIN, Dag(2))


def test_plan_round_trip_and_validation():
    plan = ExperimentPlan(p=6, kind="imperfect", mix_alpha=0.3, family="k-subset", k=2, seed=4, hsic_max_points=None)
    assert ExperimentPlan.from_json(plan.to_json()) == plan
    assert ExperimentPlan.from_json(plan.to_json()).to_json() == plan.to_json()
    assert plan.config_hash() != ExperimentPlan().config_hash()
    with pytest.raises(InvalidArgumentError, match="unknown"):
        ExperimentPlan.from_dict({"p": 5, "colour": "red"})
    with pytest.raises(InvalidArgumentError):
        ExperimentPlan(family="triples")
    with pytest.raises(InvalidArgumentError):
        ExperimentPlan(family="k-subset", k=0)
    with pytest.raises(InvalidArgumentError):
        ExperimentPlan.from_json("{")


def test_family_targets():
    assert family_targets(ExperimentPlan(p=3), 0) == [[1], [2], [3]]
    assert family_targets(ExperimentPlan(p=3, family="all-pairs"), 0) == [[1, 2], [1, 3], [2, 3]]
    assert family_targets(ExperimentPlan(p=3, family="observational"), 0) == []
    sub = family_targets(ExperimentPlan(p=8, family="k-subset", k=3), 11)
    assert len(sub) == 3 and all(len(t) == 1 for t in sub)
    assert sub == family_targets(ExperimentPlan(p=8, family="k-subset", k=3), 11)


@pytest.mark.parametrize("family", ["all-singletons", "all-pairs", "k-subset"])
def test_oracle_plan_always_in_imec(family):
    plan = ExperimentPlan(p=6, family=family, k=2, replicates=15, ci="oracle", inv="oracle", n_per_block=20)
    res = run_experiment(plan)
    assert res.summary["n_failed"] == 0 and res.summary["imec_rate"] == 1.0


def test_repeated_runs_write_identical_files(tmp_path):
    plan = ExperimentPlan(p=5, n_per_block=300, replicates=2, seed=9)
    a = write_results(run_experiment(plan), tmp_path / "a")
    b = write_results(run_experiment(plan, threads=2), tmp_path / "b")
    for key in ("rows", "manifest"):
        assert a[key].read_bytes() == b[key].read_bytes()
    manifest = json.loads(a["manifest"].read_text())
    assert manifest["config_hash"] == plan.config_hash() and manifest["rows_file"] == "experiment.csv"


def test_failed_replicate_is_recorded():
    plan = ExperimentPlan(p=4, n_per_block=2, replicates=2)
    res = run_experiment(plan)
    assert res.summary["n_failed"] == 2
    assert all(r.status == "failed" and "NotEnoughSamples" in r.error for r in res.rows)


def test_aggregates_recomputable_from_rows(tmp_path):
    plan = ExperimentPlan(p=5, n_per_block=500, replicates=4, seed=1)
    res = run_experiment(plan)
    paths = write_results(res, tmp_path)
    rows = read_rows(paths["rows"])
    assert summarize(rows) == json.loads(paths["manifest"].read_text())["summary"]
    assert [r.learned_edges for r in rows] == [r.learned_edges for r in res.rows]
