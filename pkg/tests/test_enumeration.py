from collections import Counter

import pytest

from igsp.enumeration import (
    KNOWN_COUNTS,
    cross_validate_theorems,
    default_battery,
    enumerate_dags,
    generate_by_filtering,
    generate_by_orders,
    pair_families,
    partition_imec,
    partition_mec,
    random_conservative_families,
    singleton_families,
)
from igsp.exceptions import InvalidArgumentError, UnsupportedFamilyError
from igsp.graph import Dag
from igsp.interventions import TargetFamily
from igsp.rng import make_rng


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_counts_and_generators_agree(p):
    cat = enumerate_dags(p)
    assert len(cat) == KNOWN_COUNTS[p]
    assert generate_by_orders(p) == generate_by_filtering(p)
    assert len({g.edges for g in cat}) == len(cat)


def test_p2_catalogue_and_skeleton_index():
    cat = enumerate_dags(2)
    assert [g.edges for g in cat] == [frozenset(), frozenset({(1, 2)}), frozenset({(2, 1)})]
    assert sum(len(v) for v in enumerate_dags(3).by_skeleton.values()) == 25


def test_enumerate_range_errors():
    for p in (0, 6, 7):
        with pytest.raises(InvalidArgumentError):
            enumerate_dags(p)


def test_partition_examples():
    cat3 = enumerate_dags(3)
    assert partition_imec(cat3, TargetFamily(3, [[]])) == partition_mec(cat3)
    cat2 = enumerate_dags(2)
    classes = partition_imec(cat2, TargetFamily(2, [[], [1]]))
    assert [1] in classes and [2] in classes
    with pytest.raises(UnsupportedFamilyError):
        partition_imec(cat3, TargetFamily(3, [[1, 2], [1]]))
    with pytest.raises(InvalidArgumentError):
        partition_imec(cat3, TargetFamily(2, [[]]))


def _check_partition(classes, n):
    members = sorted(k for c in classes for k in c)
    assert members == list(range(n))


@pytest.mark.parametrize("p", [2, 3, 4])
def test_imec_refines_mec(p):
    cat = enumerate_dags(p)
    mec_of = {k: c for c, members in enumerate(partition_mec(cat)) for k in members}
    fams = singleton_families(p) + pair_families(p) + random_conservative_families(p, 5, seed=1, with_empty=False)
    for fam in fams:
        classes = partition_imec(cat, fam)
        _check_partition(classes, len(cat))
        for c in classes:
            assert len({mec_of[k] for k in c}) == 1


def _relabel(g: Dag, sigma: dict) -> Dag:
    return Dag(g.p, [(sigma[a], sigma[b]) for a, b in g.edges])


def test_class_sizes_invariant_under_relabelling():
    cat = enumerate_dags(4)
    rng = make_rng(6)
    fams = random_conservative_families(4, 20, seed=6, with_empty=True)
    for fam in fams:
        perm = [int(v) + 1 for v in rng.permutation(4)]
        sigma = dict(zip(range(1, 5), perm))
        moved = TargetFamily(4, [[sigma[v] for v in t] for t in fam])
        sizes = Counter(len(c) for c in partition_imec(cat, fam))
        assert sizes == Counter(len(c) for c in partition_imec(cat, moved))
        # and the relabelling maps classes onto classes
        index = {g.edges: k for k, g in enumerate(cat)}
        cls_of = {k: c for c, members in enumerate(partition_imec(cat, moved)) for k in members}
        for c in partition_imec(cat, fam):
            assert len({cls_of[index[_relabel(cat[k], sigma).edges]] for k in c}) == 1


@pytest.mark.parametrize("p", [2, 3, 4])
def test_singleton_complete_families_identify_everything(p):
    cat = enumerate_dags(p)
    fam = TargetFamily(p, [[]] + [[v] for v in range(1, p + 1)])
    assert all(len(c) == 1 for c in partition_imec(cat, fam))


def test_observational_family_has_no_mismatches():
    rep = cross_validate_theorems(enumerate_dags(3), [TargetFamily(3, [[]])])
    assert rep.ok and rep.n_pairs_checked == 300 and not rep.expected_divergences


def test_no_empty_target_divergence_on_two_nodes():
    rep = cross_validate_theorems(enumerate_dags(2), [TargetFamily(2, [[1], [2]])])
    assert rep.ok
    assert len(rep.expected_divergences) == 1
    d = rep.expected_divergences[0].to_dict()
    assert {tuple(map(tuple, d["g1"]["edges"])), tuple(map(tuple, d["g2"]["edges"]))} == {((1, 2),), ((2, 1),)}


def test_battery_report_serialises():
    rep = cross_validate_theorems(enumerate_dags(3), default_battery(3, n_random=3))
    out = rep.to_dict()
    assert out["n_mismatches"] == 0 and out["n_families"] == rep.n_families
    assert len(out["classes"]) == rep.n_families
