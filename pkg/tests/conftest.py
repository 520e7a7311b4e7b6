import itertools

import pytest

from igsp.graph import Dag
from igsp.rng import make_rng

# acceptance checks register one line each here; printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def random_dag(p: int, prob: float, seed: int) -> Dag:
    rng = make_rng(seed, 900)
    order = rng.permutation(p) + 1
    edges = [(int(order[a]), int(order[b])) for a, b in itertools.combinations(range(p), 2) if rng.random() < prob]
    return Dag(p, edges)


def path_dsep(g: Dag, a: int, b: int, cond) -> bool:
    """Brute force: enumerate every simple undirected path from a to b and
    check each for blocking."""
    cond = set(cond)
    anc_cond = set(cond)
    for c in cond:
        anc_cond |= g.ancestors(c)
    nbrs = {v: g.neighbors(v) for v in g.nodes}

    def blocked(path) -> bool:
        for x, m, y in zip(path, path[1:], path[2:]):
            collider = g.has_edge(x, m) and g.has_edge(y, m)
            if collider and m not in anc_cond:
                return True
            if not collider and m in cond:
                return True
        return False

    def walk(path):
        v = path[-1]
        if v == b:
            yield list(path)
            return
        for w in nbrs[v]:
            if w not in path:
                path.append(w)
                yield from walk(path)
                path.pop()

    return all(blocked(pth) for pth in walk([a]))


@pytest.fixture
def chain3():
    return Dag(3, [(1, 2), (2, 3)])


@pytest.fixture
def collider3():
    return Dag(3, [(1, 2), (3, 2)])
