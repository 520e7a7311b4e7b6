import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import path_dsep, random_dag
from igsp.enumeration import enumerate_dags
from igsp.exceptions import InternalError, InvalidArgumentError
from igsp.graph import (
    Dag,
    Permutation,
    covered_edges,
    d_separated,
    is_covered,
    load_graph,
    markov_equivalent,
    parse_graph_dict,
    reverse_edge,
    skeleton,
    v_structures,
)
from igsp.rng import make_rng


def test_construction_rejects_bad_edges():
    with pytest.raises(InvalidArgumentError):
        Dag(3, [(1, 1)])
    with pytest.raises(InvalidArgumentError):
        Dag(3, [(1, 2), (2, 1)])
    with pytest.raises(InvalidArgumentError):
        Dag(3, [(1, 2), (1, 2)])
    with pytest.raises(InvalidArgumentError, match="cycle"):
        Dag(3, [(1, 2), (2, 3), (3, 1)])
    with pytest.raises(InvalidArgumentError):
        Dag(3, [(1, 4)])
    with pytest.raises(InvalidArgumentError):
        Dag(0)


def test_dsep_examples(chain3, collider3):
    assert d_separated(chain3, {1}, {3}, {2})
    assert not d_separated(chain3, {1}, {3}, set())
    assert d_separated(collider3, {1}, {3}, set())
    assert not d_separated(collider3, {1}, {3}, {2})


def test_dsep_descendant_of_collider_opens():
    g = Dag(4, [(1, 2), (3, 2), (2, 4)])
    assert d_separated(g, [1], [3], [])
    assert not d_separated(g, [1], [3], [4])


def test_dsep_errors(chain3):
    with pytest.raises(InvalidArgumentError):
        d_separated(chain3, {1}, {1}, set())
    with pytest.raises(InvalidArgumentError):
        d_separated(chain3, {1}, {3}, {1})
    with pytest.raises(InvalidArgumentError):
        d_separated(chain3, {1}, {4}, set())


def test_dsep_matches_path_oracle():
    rng = make_rng(11)
    checked = 0
    for k in range(40):
        p = int(rng.integers(2, 6))
        g = random_dag(p, 0.5, k)
        for _ in range(5):
            a, b = (int(v) + 1 for v in rng.choice(p, 2, replace=False))
            rest = [v for v in g.nodes if v not in (a, b)]
            cond = [v for v in rest if rng.random() < 0.4]
            expected = path_dsep(g, a, b, cond)
            assert d_separated(g, [a], [b], cond) == expected
            assert d_separated(g, [b], [a], cond) == expected
            checked += 1
    assert checked == 200


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.floats(0.1, 0.9), st.integers(0, 10_000), st.data())
def test_dsep_symmetric(p, prob, seed, data):
    g = random_dag(p, prob, seed)
    a = data.draw(st.sets(st.integers(1, p), min_size=1, max_size=p))
    rest = [v for v in g.nodes if v not in a]
    if not rest:
        return
    b = data.draw(st.sets(st.sampled_from(rest), min_size=1))
    c = data.draw(st.sets(st.sampled_from(rest)).map(lambda s: s - b))
    assert d_separated(g, a, b, c) == d_separated(g, b, a, c)


def test_skeleton_and_vstructures(chain3):
    fork = Dag(3, [(2, 1), (2, 3)])
    assert skeleton(chain3) == {frozenset((1, 2)), frozenset((2, 3))}
    assert skeleton(fork) == skeleton(chain3)
    assert skeleton(Dag(3)) == frozenset()
    assert v_structures(Dag(3, [(1, 2), (3, 2)])) == {(1, 2, 3)}
    assert v_structures(Dag(3, [(1, 2), (3, 2), (1, 3)])) == frozenset()
    assert v_structures(chain3) == frozenset()


def test_markov_equivalence_examples(chain3, collider3):
    assert markov_equivalent(chain3, Dag(3, [(2, 1), (2, 3)]))
    assert not markov_equivalent(chain3, collider3)
    assert markov_equivalent(chain3, chain3)
    with pytest.raises(InvalidArgumentError):
        markov_equivalent(chain3, Dag(4))


def _dsep_statements(g: Dag):
    out = set()
    for a, b in itertools.combinations(g.nodes, 2):
        rest = [v for v in g.nodes if v not in (a, b)]
        for r in range(len(rest) + 1):
            for c in itertools.combinations(rest, r):
                if d_separated(g, [a], [b], c):
                    out.add((a, b, c))
    return frozenset(out)


@pytest.mark.parametrize("p", [2, 3, 4])
def test_markov_equivalence_iff_same_dseps(p):
    cat = enumerate_dags(p)
    by_stmt = {}
    by_sig = {}
    for g in cat:
        by_stmt.setdefault(_dsep_statements(g), set()).add(g)
        by_sig.setdefault((skeleton(g), v_structures(g)), set()).add(g)
    assert sorted(map(frozenset, by_stmt.values()), key=len) == sorted(map(frozenset, by_sig.values()), key=len)
    # and every class really is one relation
    for cls in by_stmt.values():
        g0 = next(iter(cls))
        assert all(markov_equivalent(g0, h) for h in cls)


def test_markov_equivalence_is_equivalence_relation_p3():
    dags = list(enumerate_dags(3))
    rel = {(x, y): markov_equivalent(x, y) for x in dags for y in dags}
    for x in dags:
        assert rel[x, x]
        for y in dags:
            assert rel[x, y] == rel[y, x]
            if rel[x, y]:
                assert all(rel[x, z] == rel[y, z] for z in dags)


def test_covered_edges(chain3):
    assert is_covered(Dag(2, [(1, 2)]), 1, 2)
    assert not is_covered(Dag(3, [(1, 2), (3, 2)]), 1, 2)
    assert not is_covered(chain3, 2, 3)
    assert covered_edges(chain3) == {(1, 2)}


def test_reverse_edge(chain3):
    assert reverse_edge(Dag(2, [(1, 2)]), 1, 2) == Dag(2, [(2, 1)])
    assert reverse_edge(chain3, 1, 2) == Dag(3, [(2, 1), (2, 3)])
    with pytest.raises(InvalidArgumentError):
        reverse_edge(chain3, 1, 3)
    with pytest.raises(InternalError):
        reverse_edge(Dag(3, [(1, 2), (2, 3), (1, 3)]), 1, 3)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 7), st.floats(0.2, 0.9), st.integers(0, 10_000))
def test_covered_reversal_keeps_acyclic_and_mec(p, prob, seed):
    g = random_dag(p, prob, seed)
    for i, j in covered_edges(g):
        h = reverse_edge(g, i, j)
        assert skeleton(h) == skeleton(g)
        assert markov_equivalent(g, h)


def test_relations(chain3):
    assert chain3.ancestors(3) == {1, 2}
    assert chain3.descendants(1) == {2, 3}
    g = Dag(3, [(1, 2)])
    assert g.ancestors(3) == g.descendants(3) == g.parents(3) == g.children(3) == g.neighbors(3) == frozenset()
    with pytest.raises(InvalidArgumentError):
        chain3.parents(4)
    single = Dag(1)
    assert single.ancestors(1) == frozenset() and single.topological_order() == (1,)


def test_permutation():
    pi = Permutation((2, 1, 3))
    assert pi.position(3) == 2
    assert pi.predecessors(3) == {1, 2}
    assert pi.move_before(3, 1).order == (2, 3, 1)
    with pytest.raises(InvalidArgumentError):
        Permutation((1, 1, 2))


def test_graph_json(tmp_path):
    g = Dag(3, [(1, 2), (2, 3)])
    assert parse_graph_dict(json.loads(json.dumps(g.to_dict()))) == g
    path = tmp_path / "g.json"
    path.write_text('{"p": 3, "edges": [[1, 2], [2, 3], [3, 1]]}')
    with pytest.raises(InvalidArgumentError, match=r"edges\[2\].*cycle"):
        load_graph(path)
    path.write_text('{"p": 3, "edges": [[1, 2], [1, 2]]}')
    with pytest.raises(InvalidArgumentError, match=r"edges\[1\]"):
        load_graph(path)
    path.write_text('{"p": 3, "edges": [[1, 2],,]}')
    with pytest.raises(InvalidArgumentError, match="line 1"):
        load_graph(path)
