"""Intervention targets, interventional DAGs and the I-MEC criteria."""

from __future__ import annotations

import json
from collections.abc import Iterable
from dataclasses import dataclass
from functools import cached_property
from typing import Any

from igsp.exceptions import InvalidArgumentError, PreconditionError, UnsupportedFamilyError
from igsp.graph import Dag, as_nodeset, d_separated, mec_signature


@dataclass(frozen=True)
class TargetFamily:
    """Ordered multiset of intervention targets over nodes ``1..p``.

    Positions matter: duplicated targets are distinct interventions and the
    interventional DAG gives each its own vertex.
    """

    p: int
    targets: tuple[frozenset[int], ...]

    def __init__(self, p: int, targets: Iterable[Iterable[int]]):
        if isinstance(p, bool) or not isinstance(p, int) or p < 1:
            raise InvalidArgumentError(f"p must be a positive integer, got {p!r}")
        tgts = tuple(as_nodeset(t, p, f"targets[{k}]") for k, t in enumerate(targets))
        if not tgts:
            raise InvalidArgumentError("target family must contain at least one target")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "targets", tgts)

    def __len__(self) -> int:
        return len(self.targets)

    def __iter__(self):
        return iter(self.targets)

    def __getitem__(self, k: int) -> frozenset[int]:
        return self.targets[k]

    def has_empty(self) -> bool:
        return frozenset() in self.targets

    def is_conservative(self) -> bool:
        return all(any(j not in t for t in self.targets) for j in range(1, self.p + 1))

    def is_single_node(self) -> bool:
        """True when every non-empty target is a singleton."""
        return all(len(t) <= 1 for t in self.targets)

    def nonempty_positions(self) -> list[int]:
        return [k for k, t in enumerate(self.targets) if t]

    def singleton_positions(self, i: int) -> list[int]:
        return [k for k, t in enumerate(self.targets) if t == frozenset((i,))]

    def positions_containing_not(self, i: int, j: int) -> list[int]:
        """Positions of targets that contain ``i`` but not ``j``."""
        return [k for k, t in enumerate(self.targets) if i in t and j not in t]

    def normalized(self) -> tuple[TargetFamily, list[int]]:
        """Move the first empty target to position 0.

        Returns the reordered family and ``order`` with
        ``new.targets[k] == self.targets[order[k]]``.
        """
        if not self.has_empty():
            raise PreconditionError("family has no empty target to place first")
        first = self.targets.index(frozenset())
        order = [first] + [k for k in range(len(self.targets)) if k != first]
        return TargetFamily(self.p, [self.targets[k] for k in order]), order

    def to_dict(self) -> dict[str, Any]:
        return {"p": self.p, "targets": [sorted(t) for t in self.targets]}

    def __repr__(self) -> str:
        parts = ["{" + ",".join(map(str, sorted(t))) + "}" if t else "∅" for t in self.targets]
        return f"TargetFamily(p={self.p}, [{', '.join(parts)}])"


def parse_family_dict(data: Any, source: str = "targets") -> TargetFamily:
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{source}: expected a JSON object")
    p = data.get("p")
    if isinstance(p, bool) or not isinstance(p, int) or p < 1:
        raise InvalidArgumentError(f"{source}.p: expected a positive integer, got {p!r}")
    raw = data.get("targets")
    if not isinstance(raw, list) or not raw:
        raise InvalidArgumentError(f"{source}.targets: expected a non-empty list of lists")
    for k, t in enumerate(raw):
        if not isinstance(t, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in t):
            raise InvalidArgumentError(f"{source}.targets[{k}]: expected a list of integer labels, got {t!r}")
        if len(set(t)) != len(t):
            raise InvalidArgumentError(f"{source}.targets[{k}]: repeated node in {t!r}")
    return TargetFamily(p, raw)


def load_family(path) -> TargetFamily:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_family_dict(data, source=str(path))


class IDag:
    """A DAG augmented with one parameter vertex per non-empty target.

    The augmented graph is an ordinary :class:`Dag` on ``p + m`` nodes; the
    vertex for target position ``k`` gets label ``zeta_label[k]``.
    """

    def __init__(self, base: Dag, fam: TargetFamily):
        if fam.p != base.p:
            raise InvalidArgumentError(f"family is over {fam.p} nodes, graph over {base.p}")
        self.base = base
        self.fam = fam
        self.zeta_label: dict[int, int] = {}
        edges = set(base.edges)
        next_label = base.p + 1
        for k, t in enumerate(fam.targets):
            if not t:
                continue
            self.zeta_label[k] = next_label
            edges.update((next_label, i) for i in t)
            next_label += 1
        self.augmented = Dag(next_label - 1, edges)

    @property
    def zeta_vertices(self) -> list[int]:
        return list(self.zeta_label.values())

    @property
    def zeta_edges(self) -> frozenset[tuple[int, int]]:
        z = set(self.zeta_vertices)
        return frozenset(e for e in self.augmented.edges if e[0] in z)

    @cached_property
    def signature(self) -> tuple[frozenset, frozenset]:
        return mec_signature(self.augmented)

    def invariance_dsep(self, nodes: Iterable[int], cond: Iterable[int], position: int) -> bool:
        """d-separation of ``nodes`` from the vertex of target ``position``,
        given ``cond`` plus every other parameter vertex."""
        if position not in self.zeta_label:
            raise InvalidArgumentError(f"target position {position} is empty or out of range")
        z = self.zeta_label[position]
        others = [v for k, v in self.zeta_label.items() if k != position]
        return d_separated(self.augmented, nodes, [z], list(cond) + others)


def build_idag(g: Dag, fam: TargetFamily) -> IDag:
    return IDag(g, fam)


def _check_pair(g1: Dag, g2: Dag, fam: TargetFamily) -> None:
    if g1.p != g2.p or g1.p != fam.p:
        raise InvalidArgumentError(f"node counts differ: g1={g1.p}, g2={g2.p}, family={fam.p}")


def imec_signature(g: Dag, fam: TargetFamily) -> tuple:
    """Skeleton and v-structures of the interventional DAG (no domain check)."""
    return IDag(g, fam).signature


def i_markov_equivalent(g1: Dag, g2: Dag, fam: TargetFamily) -> bool:
    """Equivalence under general interventions when observational data is present."""
    _check_pair(g1, g2, fam)
    if not fam.has_empty():
        raise PreconditionError(
            "i_markov_equivalent needs the empty target in the family; "
            "use i_markov_equivalent_conservative for families without observational data"
        )
    return imec_signature(g1, fam) == imec_signature(g2, fam)


def relabeled_family(fam: TargetFamily, index: int) -> TargetFamily:
    """Treat target ``index`` as the observational regime.

    Result: ``[∅] + [I ∪ J for J at every other position]``.
    """
    if not 0 <= index < len(fam):
        raise InvalidArgumentError(f"target index {index} out of range 0..{len(fam) - 1}")
    base = fam.targets[index]
    rest = [base | t for k, t in enumerate(fam.targets) if k != index]
    return TargetFamily(fam.p, [frozenset()] + rest)


def conservative_signature(g: Dag, fam: TargetFamily) -> tuple:
    return tuple(imec_signature(g, relabeled_family(fam, k)) for k in range(len(fam)))


def i_markov_equivalent_conservative(g1: Dag, g2: Dag, fam: TargetFamily) -> bool:
    _check_pair(g1, g2, fam)
    if not fam.is_conservative():
        raise PreconditionError("family is not conservative: some node is targeted by every intervention")
    return conservative_signature(g1, fam) == conservative_signature(g2, fam)


def mutilated(g: Dag, target: frozenset[int]) -> Dag:
    """Sub-DAG keeping only edges whose head is outside ``target``."""
    return Dag(g.p, [(a, b) for a, b in g.edges if b not in target])


def perfect_signature(g: Dag, fam: TargetFamily) -> tuple:
    return tuple(mec_signature(mutilated(g, t)) for t in fam.targets)


def perfect_i_mec_equivalent(g1: Dag, g2: Dag, fam: TargetFamily) -> bool:
    """Equivalence under perfect interventions (mutilated graphs Markov equivalent for every target)."""
    _check_pair(g1, g2, fam)
    if not fam.is_conservative():
        raise PreconditionError("family is not conservative: some node is targeted by every intervention")
    return perfect_signature(g1, fam) == perfect_signature(g2, fam)


def imec_class_key(g: Dag, fam: TargetFamily) -> tuple:
    """Hashable key identifying the I-MEC of ``g``; picks the applicable criterion."""
    if fam.has_empty():
        return imec_signature(g, fam)
    if fam.is_conservative():
        return conservative_signature(g, fam)
    raise UnsupportedFamilyError("family neither contains the empty target nor is conservative")


def same_imec(g1: Dag, g2: Dag, fam: TargetFamily) -> bool:
    _check_pair(g1, g2, fam)
    return imec_class_key(g1, fam) == imec_class_key(g2, fam)

