"""Directed acyclic graphs and the graphical criteria used throughout the package.

Nodes are labelled ``1..p`` at the public surface. Adjacency is stored in
0-based lists internally so that node ``i`` maps to column ``i - 1`` of any
data matrix.
"""

from __future__ import annotations

import json
from collections import deque
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from numbers import Integral
from typing import Any

from igsp.exceptions import InternalError, InvalidArgumentError

Edge = tuple[int, int]
NodeSet = frozenset


def as_nodeset(nodes: Iterable[int] | None, p: int, name: str = "nodes") -> frozenset[int]:
    """Validate ``nodes`` against ``1..p`` and return them as a frozenset."""
    if nodes is None:
        return frozenset()
    members = []
    for node in nodes:
        if isinstance(node, bool) or not isinstance(node, int):
            try:
                node = int(node)
            except (TypeError, ValueError):
                raise InvalidArgumentError(f"{name}: non-integer node label {node!r}") from None
        if not 1 <= node <= p:
            raise InvalidArgumentError(f"{name}: node {node} outside 1..{p}")
        members.append(node)
    return frozenset(members)


class Dag:
    """Immutable labelled DAG over nodes ``1..p``.

    Parents and children are both stored so that parent/child lookups are
    constant time. Construction rejects self-loops, two-cycles and any
    directed cycle.
    """

    __slots__ = ("_p", "_edges", "_parents", "_children", "_topo", "_hash")

    def __init__(self, p: int, edges: Iterable[Sequence[int]] = ()):
        if isinstance(p, bool) or not isinstance(p, int) or p < 1:
            raise InvalidArgumentError(f"p must be a positive integer, got {p!r}")
        self._p = p
        parents: list[set[int]] = [set() for _ in range(p)]
        children: list[set[int]] = [set() for _ in range(p)]
        edge_set = set()
        for edge in edges:
            i, j = (int(v) for v in edge)
            if not (1 <= i <= p and 1 <= j <= p):
                raise InvalidArgumentError(f"edge ({i}, {j}) has a node outside 1..{p}")
            if i == j:
                raise InvalidArgumentError(f"self-loop on node {i}")
            if (i, j) in edge_set:
                raise InvalidArgumentError(f"duplicate edge ({i}, {j})")
            if (j, i) in edge_set:
                raise InvalidArgumentError(f"both ({i}, {j}) and ({j}, {i}) present")
            edge_set.add((i, j))
            parents[j - 1].add(i)
            children[i - 1].add(j)
        self._edges = frozenset(edge_set)
        self._parents = tuple(frozenset(s) for s in parents)
        self._children = tuple(frozenset(s) for s in children)
        topo = _kahn(p, self._parents, self._children)
        if topo is None:
            raise InvalidArgumentError(f"edges contain a directed cycle: {find_cycle(p, self._edges)}")
        self._topo = topo
        self._hash = None

    # -- basic accessors -------------------------------------------------
    @property
    def p(self) -> int:
        return self._p

    @property
    def edges(self) -> frozenset[Edge]:
        return self._edges

    @property
    def nodes(self) -> range:
        return range(1, self._p + 1)

    def __len__(self) -> int:
        return len(self._edges)

    def num_edges(self) -> int:
        return len(self._edges)

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self._edges

    def adjacent(self, i: int, j: int) -> bool:
        return (i, j) in self._edges or (j, i) in self._edges

    def _check(self, i: int) -> None:
        if isinstance(i, bool) or not isinstance(i, Integral) or not 1 <= i <= self._p:
            raise InvalidArgumentError(f"node {i!r} outside 1..{self._p}")

    def parents(self, i: int) -> frozenset[int]:
        self._check(i)
        return self._parents[i - 1]

    def children(self, i: int) -> frozenset[int]:
        self._check(i)
        return self._children[i - 1]

    def neighbors(self, i: int) -> frozenset[int]:
        self._check(i)
        return self._parents[i - 1] | self._children[i - 1]

    def ancestors(self, i: int) -> frozenset[int]:
        self._check(i)
        return self._reach(i, self._parents)

    def descendants(self, i: int) -> frozenset[int]:
        self._check(i)
        return self._reach(i, self._children)

    def ancestors_of_set(self, nodes: Iterable[int]) -> frozenset[int]:
        """Ancestors of a node set, the set itself included."""
        seen = set()
        stack = list(nodes)
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(self._parents[v - 1])
        return frozenset(seen)

    def _reach(self, i: int, table: tuple[frozenset[int], ...]) -> frozenset[int]:
        seen: set[int] = set()
        stack = list(table[i - 1])
        while stack:
            v = stack.pop()
            if v not in seen:
                seen.add(v)
                stack.extend(table[v - 1])
        return frozenset(seen)

    def topological_order(self) -> tuple[int, ...]:
        return self._topo

    def is_consistent_with(self, order: Sequence[int]) -> bool:
        pos = {v: k for k, v in enumerate(order)}
        return all(pos[i] < pos[j] for i, j in self._edges)

    def sorted_edges(self) -> list[Edge]:
        return sorted(self._edges)

    # -- value semantics -------------------------------------------------
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return self._p == other._p and self._edges == other._edges

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._p, self._edges))
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{i}->{j}" for i, j in self.sorted_edges())
        return f"Dag(p={self._p}, [{body}])"

    def to_dict(self) -> dict[str, Any]:
        return {"p": self._p, "edges": [list(e) for e in self.sorted_edges()]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Dag:
        return parse_graph_dict(data)


def _kahn(p, parents, children) -> tuple[int, ...] | None:
    indeg = [len(parents[v]) for v in range(p)]
    ready = [v + 1 for v in range(p) if indeg[v] == 0]
    ready.sort(reverse=True)
    order = []
    while ready:
        v = ready.pop()
        order.append(v)
        for c in sorted(children[v - 1], reverse=True):
            indeg[c - 1] -= 1
            if indeg[c - 1] == 0:
                ready.append(c)
        ready.sort(reverse=True)
    if len(order) != p:
        return None
    return tuple(order)


def find_cycle(p: int, edges: Iterable[Edge]) -> list[int] | None:
    """Return one directed cycle as a node list (first node repeated at the end), or None."""
    succ: dict[int, list[int]] = {v: [] for v in range(1, p + 1)}
    for i, j in edges:
        succ[i].append(j)
    color = dict.fromkeys(succ, 0)
    stack_path: list[int] = []

    def visit(v: int) -> list[int] | None:
        color[v] = 1
        stack_path.append(v)
        for w in sorted(succ[v]):
            if color[w] == 1:
                k = stack_path.index(w)
                return stack_path[k:] + [w]
            if color[w] == 0:
                found = visit(w)
                if found:
                    return found
        stack_path.pop()
        color[v] = 2
        return None

    for v in sorted(succ):
        if color[v] == 0:
            found = visit(v)
            if found:
                return found
    return None


# ---------------------------------------------------------------------------
# graphical criteria


def d_separated(g: Dag, a: Iterable[int], b: Iterable[int], c: Iterable[int] = ()) -> bool:
    """True iff ``c`` d-separates ``a`` from ``b`` in ``g``.

    Uses the reachability ("Bayes-ball") traversal, linear in the size of g.
    """
    a = as_nodeset(a, g.p, "a")
    b = as_nodeset(b, g.p, "b")
    c = as_nodeset(c, g.p, "c")
    if a & b or a & c or b & c:
        raise InvalidArgumentError("a, b and c must be pairwise disjoint")
    if not a or not b:
        return True
    return not (reachable(g, a, c) & b)


def reachable(g: Dag, sources: frozenset[int], cond: frozenset[int]) -> set[int]:
    """Nodes d-connected to ``sources`` given ``cond`` (conditioned nodes excluded)."""
    parents, children = g._parents, g._children
    anc_cond = g.ancestors_of_set(cond)
    # direction flag: True = arrived from a child (travelling up)
    queue = deque((s, True) for s in sources)
    visited: set[tuple[int, bool]] = set()
    result: set[int] = set()
    while queue:
        v, up = queue.popleft()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        blocked = v in cond
        if not blocked:
            result.add(v)
        if up:
            if not blocked:
                for u in parents[v - 1]:
                    queue.append((u, True))
                for w in children[v - 1]:
                    queue.append((w, False))
        else:
            if not blocked:
                for w in children[v - 1]:
                    queue.append((w, False))
            if v in anc_cond:
                for u in parents[v - 1]:
                    queue.append((u, True))
    return result - sources


def skeleton(g: Dag) -> frozenset[frozenset[int]]:
    return frozenset(frozenset(e) for e in g.edges)


def v_structures(g: Dag) -> frozenset[tuple[int, int, int]]:
    """All unshielded colliders ``i -> j <- k`` as triples with ``i < k``."""
    out = set()
    for j in g.nodes:
        pa = sorted(g._parents[j - 1])
        for x in range(len(pa)):
            for y in range(x + 1, len(pa)):
                i, k = pa[x], pa[y]
                if not g.adjacent(i, k):
                    out.add((i, j, k))
    return frozenset(out)


def mec_signature(g: Dag) -> tuple[frozenset, frozenset]:
    return skeleton(g), v_structures(g)


def markov_equivalent(g1: Dag, g2: Dag) -> bool:
    if g1.p != g2.p:
        raise InvalidArgumentError(f"graphs have different node counts ({g1.p} vs {g2.p})")
    return mec_signature(g1) == mec_signature(g2)


def is_covered(g: Dag, i: int, j: int) -> bool:
    return g.has_edge(i, j) and g._parents[i - 1] == g._parents[j - 1] - {i}


def covered_edges(g: Dag) -> frozenset[Edge]:
    return frozenset(e for e in g.edges if is_covered(g, *e))


def reverse_edge(g: Dag, i: int, j: int) -> Dag:
    """Return a copy of ``g`` with ``i -> j`` replaced by ``j -> i``.

    Callers performing search moves are expected to reverse covered edges
    only; a reversal that closes a cycle raises :class:`InternalError`.
    """
    if not g.has_edge(i, j):
        raise InvalidArgumentError(f"edge ({i}, {j}) not in graph")
    new_edges = (g.edges - {(i, j)}) | {(j, i)}
    try:
        return Dag(g.p, new_edges)
    except InvalidArgumentError as exc:
        raise InternalError(f"reversing ({i}, {j}) creates a cycle; edge was not covered") from exc


# ---------------------------------------------------------------------------
# permutations


@dataclass(frozen=True)
class Permutation:
    """A total order of the nodes ``1..p``."""

    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(v) for v in self.order)
        if sorted(order) != list(range(1, len(order) + 1)):
            raise InvalidArgumentError(f"not a permutation of 1..{len(order)}: {order}")
        object.__setattr__(self, "order", order)

    def __iter__(self) -> Iterator[int]:
        return iter(self.order)

    def __len__(self) -> int:
        return len(self.order)

    def __getitem__(self, k):
        return self.order[k]

    def position(self, node: int) -> int:
        """0-based index of ``node`` in the order."""
        return self.order.index(node)

    def positions(self) -> dict[int, int]:
        return {v: k for k, v in enumerate(self.order)}

    def predecessors(self, node: int) -> frozenset[int]:
        return frozenset(self.order[: self.position(node)])

    def move_before(self, node: int, anchor: int) -> Permutation:
        """Remove ``node`` and reinsert it immediately before ``anchor``."""
        rest = [v for v in self.order if v != node]
        k = rest.index(anchor)
        return Permutation(tuple(rest[:k] + [node] + rest[k:]))

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.order)) + ")"


# ---------------------------------------------------------------------------
# JSON


def parse_graph_dict(data: Any, source: str = "graph") -> Dag:
    """Build a Dag from ``{"p": int, "edges": [[i, j], ...]}`` with field-precise errors."""
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{source}: expected a JSON object")
    if "p" not in data:
        raise InvalidArgumentError(f"{source}: missing field 'p'")
    p = data["p"]
    if isinstance(p, bool) or not isinstance(p, int) or p < 1:
        raise InvalidArgumentError(f"{source}.p: expected a positive integer, got {p!r}")
    raw = data.get("edges", [])
    if not isinstance(raw, list):
        raise InvalidArgumentError(f"{source}.edges: expected a list")
    seen: dict[Edge, int] = {}
    for k, e in enumerate(raw):
        where = f"{source}.edges[{k}]"
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in e)):
            raise InvalidArgumentError(f"{where}: expected [i, j] with integer labels, got {e!r}")
        i, j = e
        if not (1 <= i <= p and 1 <= j <= p):
            raise InvalidArgumentError(f"{where}: node outside 1..{p} in {e!r}")
        if i == j:
            raise InvalidArgumentError(f"{where}: self-loop on node {i}")
        if (i, j) in seen:
            raise InvalidArgumentError(f"{where}: duplicate of {source}.edges[{seen[(i, j)]}] {e!r}")
        if (j, i) in seen:
            raise InvalidArgumentError(f"{where}: {e!r} reverses {source}.edges[{seen[(j, i)]}] (two-cycle)")
        seen[(i, j)] = k
        cycle = find_cycle(p, seen)
        if cycle:
            raise InvalidArgumentError(f"{where}: {e!r} closes the cycle {'->'.join(map(str, cycle))}")
    return Dag(p, seen)


def load_graph(path) -> Dag:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_graph_dict(data, source=str(path))


def dump_graph(g: Dag, path) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_dict(), fh)
        fh.write("\n")
