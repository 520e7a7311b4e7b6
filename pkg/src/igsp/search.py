"""Greedy sparsest-permutation search with general interventions (IGSP).

The search walks over minimal I-maps. A move reverses an I-covered edge of
the current I-map, which corresponds to transposing two nodes of the
permutation; moves through I-contradictory edges are tried first. A
depth-first search looks for a strictly sparser I-map, restarting from it
when found. At the local optimum the I-map with the fewest I-contradictory
edges among the equally sparse ones visited is returned.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field

from igsp.exceptions import InvalidArgumentError, PreconditionError
from igsp.graph import Dag, Permutation, covered_edges, is_covered, reverse_edge
from igsp.interventions import TargetFamily
from igsp.rng import make_rng
from igsp.semsim import MultiDataset
from igsp.stats import CiDecider, InvarianceDecider, pool_eligible_blocks

log = logging.getLogger(__name__)

DEFAULT_DEGREE_CAP = 8
CONTRADICTORY = "i-contradictory"
PLAIN = "plain i-covered"


@dataclass(frozen=True)
class MinimalIMap:
    pi: Permutation
    g: Dag
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.g)


def minimal_imap(pi: Permutation | Iterable[int], ci: CiDecider) -> MinimalIMap:
    """Sparsest DAG consistent with ``pi``: keep ``a -> b`` (a before b) unless
    ``a`` and ``b`` are independent given the other predecessors of ``b``."""
    pi = pi if isinstance(pi, Permutation) else Permutation(tuple(pi))
    edges = []
    for pos, b in enumerate(pi.order):
        pre = pi.order[:pos]
        for a in pre:
            if not ci.independent(a, b, [v for v in pre if v != a]):
                edges.append((a, b))
    return MinimalIMap(pi, Dag(len(pi), edges), ci.backing)


def update_imap_after_reversal(
    m: MinimalIMap,
    i: int,
    j: int,
    ci: CiDecider,
    fam: TargetFamily | None = None,
    pool: bool = False,
) -> MinimalIMap:
    """Reverse the covered edge ``i -> j`` of ``m`` and drop parent edges of
    ``i`` and ``j`` that the decider now declares independent.

    Each candidate ``k -> b`` (``b`` in {i, j}) is tested given the
    ancestors of ``b`` minus ``k`` in the reversed graph. With ``pool`` the
    test also uses every interventional block eligible for pooling.
    """
    if not is_covered(m.g, i, j):
        raise InvalidArgumentError(f"edge ({i}, {j}) is not a covered edge of the I-map")
    g = reverse_edge(m.g, i, j)
    tau = m.pi.move_before(j, i)
    drop = []
    for b in (i, j):
        anc = g.ancestors(b)
        for k in sorted(g.parents(b)):
            blocks = pool_eligible_blocks(g, tau, fam, b, k) if pool and fam is not None else ()
            if ci.independent(k, b, anc - {k}, pool=blocks):
                drop.append((k, b))
    if drop:
        g = Dag(g.p, g.edges - set(drop))
    return MinimalIMap(tau, g, m.provenance)


# ---------------------------------------------------------------------------
# edge predicates


def is_i_covered(g: Dag, i: int, j: int, inv: InvarianceDecider, fam: TargetFamily) -> bool:
    """Covered edge whose head keeps its marginal when the tail alone is intervened on."""
    if not is_covered(g, i, j):
        raise InvalidArgumentError(f"({i}, {j}) is not a covered edge")
    return all(inv.invariant(j, (), k) for k in fam.singleton_positions(i))


def _subsets(nodes: list[int]):
    return itertools.chain.from_iterable(itertools.combinations(nodes, r) for r in range(len(nodes) + 1))


def is_i_contradictory_general(
    g: Dag,
    i: int,
    j: int,
    inv: InvarianceDecider,
    fam: TargetFamily,
    degree_cap: int = DEFAULT_DEGREE_CAP,
    bonferroni: bool = False,
) -> bool:
    """``i -> j`` contradicts the invariance pattern of the data.

    (1) some ``S`` in the neighbourhood of ``j`` (without ``i``) makes
    ``X_j | X_S`` invariant for every target containing ``i`` but not ``j``
    (only checked when such targets exist), or (2) for every ``S`` in the
    neighbourhood of ``i`` (without ``j``), ``X_i | X_S`` varies for some
    target containing ``j`` but not ``i``.
    """
    if not g.has_edge(i, j):
        raise InvalidArgumentError(f"edge ({i}, {j}) not in graph")
    i_not_j = fam.positions_containing_not(i, j)
    j_not_i = fam.positions_containing_not(j, i)
    if i_not_j:
        nbrs = sorted(g.neighbors(j) - {i})
        if len(nbrs) > degree_cap:
            log.warning("degree cap %d exceeded at node %d; edge (%d, %d) treated as not contradictory", degree_cap, j, i, j)
            return False
        alpha = _split_alpha(inv, len(i_not_j), bonferroni)
        for s in _subsets(nbrs):
            if all(inv.invariant(j, s, k, alpha) for k in i_not_j):
                return True
    if j_not_i:
        nbrs = sorted(g.neighbors(i) - {j})
        if len(nbrs) > degree_cap:
            log.warning("degree cap %d exceeded at node %d; edge (%d, %d) treated as not contradictory", degree_cap, i, i, j)
            return False
        alpha = _split_alpha(inv, len(j_not_i), bonferroni)
        if all(any(not inv.invariant(i, s, k, alpha) for k in j_not_i) for s in _subsets(nbrs)):
            return True
    return False


def _split_alpha(inv: InvarianceDecider, m: int, bonferroni: bool) -> float | None:
    if not bonferroni or inv.alpha is None or m <= 1:
        return None
    return inv.alpha / m


def is_i_contradictory_single(g: Dag, i: int, j: int, inv: InvarianceDecider, fam: TargetFamily) -> bool:
    """Single-node-target version: marginal invariance checks only."""
    if not g.has_edge(i, j):
        raise InvalidArgumentError(f"edge ({i}, {j}) not in graph")
    on_i, on_j = fam.singleton_positions(i), fam.singleton_positions(j)
    if not on_i and not on_j:
        raise InvalidArgumentError(f"neither {{{i}}} nor {{{j}}} is a target")
    if on_i and all(inv.invariant(j, (), k) for k in on_i):
        return True
    return bool(on_j) and any(not inv.invariant(i, (), k) for k in on_j)


def is_i_contradictory(g, i, j, inv, fam, single_node_mode=False, degree_cap=DEFAULT_DEGREE_CAP, bonferroni=False) -> bool:
    if single_node_mode:
        if not fam.singleton_positions(i) and not fam.singleton_positions(j):
            return False
        return is_i_contradictory_single(g, i, j, inv, fam)
    return is_i_contradictory_general(g, i, j, inv, fam, degree_cap, bonferroni)


def count_i_contradictory(g: Dag, inv: InvarianceDecider, fam: TargetFamily, single_node_mode: bool | None = None, **kw) -> int:
    if single_node_mode is None:
        single_node_mode = fam.is_single_node()
    return sum(is_i_contradictory(g, i, j, inv, fam, single_node_mode, **kw) for i, j in g.sorted_edges())


# ---------------------------------------------------------------------------
# search


@dataclass
class SearchConfig:
    ci: CiDecider
    inv: InvarianceDecider
    fam: TargetFamily
    dfs_depth_limit: int | None = None
    single_node_mode: bool | None = None
    pool: bool = False
    rng_seed: int = 0
    max_restarts: int = 1
    degree_cap: int = DEFAULT_DEGREE_CAP
    bonferroni: bool = False
    screen_targets: bool = True

    def __post_init__(self):
        if not self.fam.has_empty():
            raise PreconditionError("the search needs observational data: the empty target must be in the family")
        if self.single_node_mode is None:
            self.single_node_mode = self.fam.is_single_node()
        if self.dfs_depth_limit is None:
            self.dfs_depth_limit = self.fam.p * (self.fam.p - 1) // 2
        if self.max_restarts < 1:
            raise InvalidArgumentError("max_restarts must be at least 1")


@dataclass(frozen=True)
class TraceStep:
    kind: str  # "start", "move", "restart" or "final"
    run: int
    permutation: tuple[int, ...]
    n_edges: int
    move: tuple[int, int] | None = None
    move_class: str | None = None
    n_contradictory: int | None = None
    host_edges: frozenset | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "run": self.run,
            "permutation": list(self.permutation),
            "n_edges": self.n_edges,
            "move": list(self.move) if self.move else None,
            "move_class": self.move_class,
            "n_contradictory": self.n_contradictory,
        }


@dataclass
class SearchTrace:
    steps: list[TraceStep] = field(default_factory=list)

    def add(self, step: TraceStep) -> None:
        self.steps.append(step)

    def restarts(self, run: int | None = None) -> list[TraceStep]:
        return [s for s in self.steps if s.kind in ("start", "restart") and (run is None or s.run == run)]

    def moves(self) -> list[TraceStep]:
        return [s for s in self.steps if s.kind == "move"]

    def summary(self) -> dict:
        return {
            "n_steps": len(self.steps),
            "n_moves": len(self.moves()),
            "n_contradictory_moves": sum(s.move_class == CONTRADICTORY for s in self.moves()),
            "restart_edge_counts": [s.n_edges for s in self.restarts()],
        }


@dataclass
class SearchResult:
    pi: Permutation
    g: Dag
    trace: SearchTrace
    truncated: bool = False
    n_contradictory: int = 0

    def __iter__(self):
        return iter((self.pi, self.g, self.trace))


def screened_family(fam: TargetFamily, inv: InvarianceDecider) -> TargetFamily:
    """Drop from each target the nodes whose own marginal is not detectably
    changed by it. An intervention that leaves its target untouched (e.g. a
    perfect intervention on a parentless node) carries no orientation
    information, and keeping it makes both orientations of the target's
    edges look contradictory."""
    return TargetFamily(fam.p, [[t for t in sorted(tg) if not inv.invariant(t, (), k)] if tg else [] for k, tg in enumerate(fam)])


class _Searcher:
    def __init__(self, cfg: SearchConfig):
        self.cfg = cfg
        self.fam = screened_family(cfg.fam, cfg.inv) if cfg.screen_targets else cfg.fam
        self.single = cfg.single_node_mode
        self._contra: dict[tuple, bool] = {}
        self._count: dict[frozenset, int] = {}
        self.truncated = False

    def contradictory(self, g: Dag, i: int, j: int) -> bool:
        key = (i, j, g.neighbors(i) - {j}, g.neighbors(j) - {i})
        res = self._contra.get(key)
        if res is None:
            c = self.cfg
            res = is_i_contradictory(g, i, j, c.inv, self.fam, self.single, c.degree_cap, c.bonferroni)
            self._contra[key] = res
        return res

    def count(self, g: Dag) -> int:
        res = self._count.get(g.edges)
        if res is None:
            res = self._count[g.edges] = sum(self.contradictory(g, i, j) for i, j in g.sorted_edges())
        return res

    def moves(self, g: Dag) -> list[tuple[int, int, bool]]:
        c = self.cfg
        out = []
        for i, j in sorted(covered_edges(g)):
            if is_i_covered(g, i, j, c.inv, self.fam):
                out.append((i, j, self.contradictory(g, i, j)))
        # contradictory reversals first, then lexicographic by (source, sink)
        out.sort(key=lambda t: (not t[2], t[0], t[1]))
        return out

    def step(self, m: MinimalIMap, i: int, j: int) -> MinimalIMap:
        c = self.cfg
        return update_imap_after_reversal(m, i, j, c.ci, c.fam, c.pool)

    def dfs(self, root: MinimalIMap, run: int, trace: SearchTrace) -> tuple[MinimalIMap | None, list[MinimalIMap]]:
        """Look for a strictly sparser I-map reachable by I-covered reversals.

        Returns ``(better, stratum)`` where ``stratum`` lists every
        equally sparse I-map visited (root included).
        """
        size = len(root.g)
        visited = {root.g.edges}
        stratum = [root]
        limit = self.cfg.dfs_depth_limit

        def visit(m: MinimalIMap, depth: int) -> MinimalIMap | None:
            for i, j, contra in self.moves(m.g):
                new = self.step(m, i, j)
                trace.add(
                    TraceStep(
                        "move", run, new.pi.order, len(new.g), (i, j),
                        CONTRADICTORY if contra else PLAIN, None, m.g.edges,
                    )
                )
                if len(new.g) < size:
                    return new
                if new.g.edges in visited:
                    continue
                visited.add(new.g.edges)
                stratum.append(new)
                if depth + 1 >= limit:
                    self.truncated = True
                    continue
                found = visit(new, depth + 1)
                if found is not None:
                    return found
            return None

        return visit(root, 0), stratum

    def run(self, pi0: Permutation, run: int, trace: SearchTrace) -> tuple[MinimalIMap, int]:
        c = self.cfg
        current = minimal_imap(pi0, c.ci)
        trace.add(TraceStep("start", run, current.pi.order, len(current.g), n_contradictory=self.count(current.g)))
        while True:
            better, stratum = self.dfs(current, run, trace)
            if better is None:
                break
            current = better
            trace.add(TraceStep("restart", run, current.pi.order, len(current.g), n_contradictory=self.count(current.g)))
        best = min(stratum, key=lambda m: (self.count(m.g), m.g.sorted_edges()))
        n_contra = self.count(best.g)
        trace.add(TraceStep("final", run, best.pi.order, len(best.g), n_contradictory=n_contra))
        return best, n_contra


def igsp_search(
    data: MultiDataset | None,
    cfg: SearchConfig,
    pi0: Permutation | Iterable[int] | None = None,
) -> SearchResult:
    """Run IGSP from ``pi0`` (and ``cfg.max_restarts - 1`` further random starts).

    ``data`` is only used to check that its target family matches the
    configuration; the deciders in ``cfg`` carry the data. Pass ``None`` for
    oracle runs.
    """
    if data is not None and data.fam != cfg.fam:
        raise InvalidArgumentError("dataset target family does not match the search configuration")
    p = cfg.fam.p
    rng = make_rng(cfg.rng_seed, 3)
    starts = []
    if pi0 is not None:
        starts.append(pi0 if isinstance(pi0, Permutation) else Permutation(tuple(pi0)))
    while len(starts) < cfg.max_restarts:
        starts.append(Permutation(tuple(int(v) + 1 for v in rng.permutation(p))))
    searcher = _Searcher(cfg)
    trace = SearchTrace()
    results = [searcher.run(pi, k, trace) for k, pi in enumerate(starts)]
    best, n_contra = min(results, key=lambda r: (len(r[0].g), r[1], r[0].g.sorted_edges()))
    return SearchResult(best.pi, best.g, trace, searcher.truncated, n_contra)
