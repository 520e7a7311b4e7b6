"""Exhaustive enumeration of small labelled DAGs and cross-checks of the
equivalence criteria on them."""

from __future__ import annotations

import itertools
from collections import defaultdict
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field

from igsp.exceptions import InvalidArgumentError, UnsupportedFamilyError
from igsp.graph import Dag, d_separated, find_cycle, mec_signature, skeleton
from igsp.interventions import (
    IDag,
    TargetFamily,
    conservative_signature,
    imec_signature,
    perfect_signature,
    relabeled_family,
)
from igsp.rng import make_rng

MAX_P = 5
MAX_P_OPT_IN = 6
KNOWN_COUNTS = {1: 1, 2: 3, 3: 25, 4: 543, 5: 29281, 6: 3781503}


def _sort_key(edges: frozenset) -> tuple:
    return (len(edges), sorted(edges))


def generate_by_orders(p: int) -> list[frozenset]:
    """Every permutation times every subset of order-respecting edges, deduplicated."""
    pairs = list(itertools.combinations(range(p), 2))
    seen = set()
    for order in itertools.permutations(range(1, p + 1)):
        for mask in range(1 << len(pairs)):
            seen.add(frozenset((order[a], order[b]) for k, (a, b) in enumerate(pairs) if mask >> k & 1))
    return sorted(seen, key=_sort_key)


def generate_by_filtering(p: int) -> list[frozenset]:
    """Every orientation pattern (absent / -> / <-) on each pair, kept when acyclic."""
    pairs = list(itertools.combinations(range(1, p + 1), 2))
    out = []
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = [(a, b) if s == 1 else (b, a) for (a, b), s in zip(pairs, states) if s]
        if find_cycle(p, edges) is None:
            out.append(frozenset(edges))
    return sorted(out, key=_sort_key)


@dataclass
class DagCatalog:
    p: int
    dags: list[Dag]
    by_skeleton: dict[frozenset, list[int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.dags)

    def __iter__(self):
        return iter(self.dags)

    def __getitem__(self, k: int) -> Dag:
        return self.dags[k]


def enumerate_dags(p: int, allow_large: bool = False, cross_check: bool = True) -> DagCatalog:
    """All labelled DAGs on ``p`` nodes, each once, in a fixed order.

    With ``cross_check`` the catalogue built from orders x edge masks is
    compared against direct enumeration of acyclic orientations.
    """
    cap = MAX_P_OPT_IN if allow_large else MAX_P
    if isinstance(p, bool) or not isinstance(p, int) or not 1 <= p <= cap:
        raise InvalidArgumentError(f"p must lie in 1..{cap}, got {p!r}")
    primary = generate_by_orders(p)
    if cross_check and p <= MAX_P:
        secondary = generate_by_filtering(p)
        if primary != secondary:
            raise InvalidArgumentError(f"DAG generators disagree for p={p}: {len(primary)} vs {len(secondary)}")
    dags = [Dag(p, e) for e in primary]
    index: dict[frozenset, list[int]] = defaultdict(list)
    for k, g in enumerate(dags):
        index[skeleton(g)].append(k)
    return DagCatalog(p, dags, dict(index))


def partition_by(cat: DagCatalog, key: Callable[[Dag], object]) -> list[list[int]]:
    """Classes of catalogue indices sharing the same key, ordered by first member."""
    groups: dict[object, list[int]] = {}
    for k, g in enumerate(cat.dags):
        groups.setdefault(key(g), []).append(k)
    return sorted(groups.values(), key=lambda c: c[0])


def partition_imec(cat: DagCatalog, fam: TargetFamily) -> list[list[int]]:
    """I-MECs of the catalogue: the skeleton/v-structure criterion when the
    empty target is present, the relabelled criterion for other conservative
    families."""
    if fam.p != cat.p:
        raise InvalidArgumentError(f"family over {fam.p} nodes, catalogue over {cat.p}")
    if fam.has_empty():
        return partition_by(cat, lambda g: imec_signature(g, fam))
    if fam.is_conservative():
        return partition_by(cat, lambda g: conservative_signature(g, fam))
    raise UnsupportedFamilyError("family neither contains the empty target nor is conservative")


def partition_mec(cat: DagCatalog) -> list[list[int]]:
    return partition_by(cat, mec_signature)


# ---------------------------------------------------------------------------
# statement-level oracle


def imarkov_statements(g: Dag, fam: TargetFamily) -> frozenset:
    """All pairwise d-separation facts the interventional Markov property reads
    off the I-DAG: ``(a, b, C)`` among variables, and ``(a, zeta_k, C)`` with
    the other parameter vertices conditioned on. Independent of the
    skeleton/v-structure route; used as a brute-force oracle."""
    idag = IDag(g, fam)
    p = g.p
    nodes = list(range(1, p + 1))
    facts = []
    for a, b in itertools.combinations(nodes, 2):
        rest = [v for v in nodes if v not in (a, b)]
        for r in range(len(rest) + 1):
            for c in itertools.combinations(rest, r):
                if d_separated(g, [a], [b], c):
                    facts.append(("ci", a, b, c))
    for k in idag.zeta_label:
        for a in nodes:
            rest = [v for v in nodes if v != a]
            for r in range(len(rest) + 1):
                for c in itertools.combinations(rest, r):
                    if idag.invariance_dsep([a], c, k):
                        facts.append(("inv", a, k, c))
    return frozenset(facts)


def statement_signature(g: Dag, fam: TargetFamily) -> tuple:
    """Statement oracle for any supported family (relabelled per target when the
    empty target is absent)."""
    if fam.has_empty():
        return (imarkov_statements(g, fam),)
    return tuple(imarkov_statements(g, relabeled_family(fam, k)) for k in range(len(fam)))


# ---------------------------------------------------------------------------
# family batteries


def singleton_families(p: int) -> list[TargetFamily]:
    """``{∅} ∪ S`` for every non-empty set ``S`` of single-node targets."""
    out = []
    for r in range(1, p + 1):
        for nodes in itertools.combinations(range(1, p + 1), r):
            out.append(TargetFamily(p, [[]] + [[v] for v in nodes]))
    return out


def pair_families(p: int) -> list[TargetFamily]:
    """``{∅, {a, b}}`` for every pair, plus ``{∅}`` with all pairs."""
    pairs = list(itertools.combinations(range(1, p + 1), 2))
    out = [TargetFamily(p, [[], list(pr)]) for pr in pairs]
    if len(pairs) > 1:
        out.append(TargetFamily(p, [[]] + [list(pr) for pr in pairs]))
    return out


def random_conservative_families(p: int, count: int, seed: int, with_empty: bool) -> list[TargetFamily]:
    """Random conservative families of 1..p+1 targets with sizes 1..p-1.

    ``with_empty`` forces the empty target in; otherwise it is excluded.
    """
    rng = make_rng(seed, 11, p, int(with_empty))
    out: list[TargetFamily] = []
    while len(out) < count:
        k = int(rng.integers(1, p + 2))
        targets = [] if not with_empty else [[]]
        for _ in range(k):
            size = int(rng.integers(1, max(p, 2)))
            targets.append(sorted(int(v) + 1 for v in rng.choice(p, size=min(size, p), replace=False)))
        fam = TargetFamily(p, targets)
        if fam.is_conservative() and (with_empty or not fam.has_empty()):
            out.append(fam)
    return out


def default_battery(p: int, n_random: int = 20, seed: int = 0) -> list[TargetFamily]:
    fams = [TargetFamily(p, [[]])]
    fams += singleton_families(p)
    if p >= 2:
        fams += pair_families(p)
        fams += random_conservative_families(p, n_random, seed, with_empty=True)
        fams += random_conservative_families(p, n_random, seed, with_empty=False)
    return fams


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class Mismatch:
    family: TargetFamily
    criteria: tuple[str, str]
    g1: Dag
    g2: Dag
    verdicts: tuple[bool, bool]

    def to_dict(self) -> dict:
        return {
            "family": self.family.to_dict(),
            "criteria": list(self.criteria),
            "g1": self.g1.to_dict(),
            "g2": self.g2.to_dict(),
            "verdicts": list(self.verdicts),
            "idag1": IDag(self.g1, self.family).augmented.to_dict() if self.family.has_empty() else None,
            "idag2": IDag(self.g2, self.family).augmented.to_dict() if self.family.has_empty() else None,
        }


@dataclass
class ValidationReport:
    p: int
    n_dags: int
    n_families: int = 0
    n_pairs_checked: int = 0
    mismatches: list[Mismatch] = field(default_factory=list)
    expected_divergences: list[Mismatch] = field(default_factory=list)
    class_counts: list[tuple[TargetFamily, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_dict(self, max_listed: int = 20) -> dict:
        return {
            "p": self.p,
            "n_dags": self.n_dags,
            "n_families": self.n_families,
            "n_pairs_checked": self.n_pairs_checked,
            "n_mismatches": len(self.mismatches),
            "mismatches": [m.to_dict() for m in self.mismatches[:max_listed]],
            "n_expected_divergences": len(self.expected_divergences),
            "expected_divergences": [m.to_dict() for m in self.expected_divergences[:max_listed]],
            "classes": [{"family": f.to_dict(), "n_classes": n} for f, n in self.class_counts],
        }


def _compare_keys(
    cat: DagCatalog, fam: TargetFamily, names: tuple[str, str], k1: Sequence, k2: Sequence, out: list[Mismatch]
) -> None:
    """Record one witness pair for every disagreement between two class keys.

    Two key lists induce the same relation iff the map from (key1) classes to
    (key2) classes is a bijection; each violation yields a witness pair.
    """
    first_by_1: dict = {}
    first_by_2: dict = {}
    for idx, (a, b) in enumerate(zip(k1, k2)):
        j = first_by_1.setdefault(a, idx)
        if k2[j] != b:
            out.append(Mismatch(fam, names, cat[j], cat[idx], (True, False)))
        j = first_by_2.setdefault(b, idx)
        if k1[j] != a:
            out.append(Mismatch(fam, names, cat[j], cat[idx], (False, True)))


def cross_validate_theorems(
    cat: DagCatalog, fam_battery: Iterable[TargetFamily], statement_oracle_max_p: int = 3
) -> ValidationReport:
    """Compare the equivalence criteria on every family of the battery.

    With the empty target: skeleton/v-structure criterion vs relabelled
    criterion vs perfect-intervention criterion (and the statement oracle
    for small p). Without it (conservative): relabelled criterion vs the
    statement oracle; the skeleton/v-structure criterion applied naively is
    compared too, but its disagreements are filed as expected divergences.
    """
    report = ValidationReport(cat.p, len(cat))
    n = len(cat)
    for fam in fam_battery:
        report.n_families += 1
        conservative = [conservative_signature(g, fam) for g in cat] if fam.is_conservative() else None
        naive = [imec_signature(g, fam) for g in cat]
        stmt = [statement_signature(g, fam) for g in cat] if cat.p <= statement_oracle_max_p else None
        if fam.has_empty():
            perfect = [perfect_signature(g, fam) for g in cat]
            _compare_keys(cat, fam, ("skeleton-vstructure", "relabeled"), naive, conservative, report.mismatches)
            _compare_keys(cat, fam, ("skeleton-vstructure", "perfect"), naive, perfect, report.mismatches)
            if stmt is not None:
                _compare_keys(cat, fam, ("skeleton-vstructure", "statements"), naive, stmt, report.mismatches)
            report.n_pairs_checked += n * (n - 1) // 2
            report.class_counts.append((fam, len(set(naive))))
        elif conservative is not None:
            if stmt is not None:
                _compare_keys(cat, fam, ("relabeled", "statements"), conservative, stmt, report.mismatches)
            _compare_keys(cat, fam, ("relabeled", "skeleton-vstructure"), conservative, naive, report.expected_divergences)
            report.n_pairs_checked += n * (n - 1) // 2
            report.class_counts.append((fam, len(set(conservative))))
    return report
