"""Linear Gaussian structural equation models with general interventions.

Convention: ``X_j = sum_i W[i, j] X_i + eps_j`` with ``W[i, j] != 0`` only for
edges ``i -> j`` (0-based indices in the matrix). For row-vector samples this
is ``X = X W + E``, so ``X = E (I - W)^{-1}`` and

    Sigma = (I - W^T)^{-1} D (I - W)^{-1},   D = diag(noise_var).
"""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from igsp.exceptions import InternalError, InvalidArgumentError
from igsp.graph import Dag, as_nodeset, parse_graph_dict
from igsp.interventions import TargetFamily
from igsp.rng import make_rng

log = logging.getLogger(__name__)

WEIGHT_LOW = 0.25
WEIGHT_HIGH = 1.0
KINDS = ("perfect", "inhibiting", "imperfect", "shift")


@dataclass(frozen=True)
class SemModel:
    g: Dag
    weights: Mapping[tuple[int, int], float]
    noise_var: tuple[float, ...]

    def __post_init__(self):
        w = {(int(i), int(j)): float(v) for (i, j), v in self.weights.items()}
        if set(w) != set(self.g.edges):
            raise InvalidArgumentError("weights must be keyed exactly by the graph's edges")
        nv = tuple(float(v) for v in self.noise_var)
        if len(nv) != self.g.p:
            raise InvalidArgumentError(f"noise_var has {len(nv)} entries, expected {self.g.p}")
        if any(not v > 0 for v in nv):
            raise InvalidArgumentError("noise variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "noise_var", nv)

    @property
    def p(self) -> int:
        return self.g.p

    def weight_matrix(self) -> np.ndarray:
        W = np.zeros((self.p, self.p))
        for (i, j), v in self.weights.items():
            W[i - 1, j - 1] = v
        return W

    def weights_out_of_range(self) -> list[tuple[int, int]]:
        """Edges whose |weight| lies outside the generation range; flagged, not rejected."""
        return sorted(e for e, v in self.weights.items() if not WEIGHT_LOW <= abs(v) <= WEIGHT_HIGH)

    def with_weights(self, weights: Mapping[tuple[int, int], float]) -> SemModel:
        return SemModel(self.g, weights, self.noise_var)

    def to_dict(self) -> dict:
        d = self.g.to_dict()
        d["weights"] = [[i, j, self.weights[(i, j)]] for i, j in self.g.sorted_edges()]
        d["noise_var"] = list(self.noise_var)
        return d

    @classmethod
    def from_dict(cls, data: dict, source: str = "model") -> SemModel:
        g = parse_graph_dict(data, source)
        raw = data.get("weights")
        if not isinstance(raw, list):
            raise InvalidArgumentError(f"{source}.weights: expected a list of [i, j, w]")
        weights = {}
        for k, item in enumerate(raw):
            if not (isinstance(item, list) and len(item) == 3):
                raise InvalidArgumentError(f"{source}.weights[{k}]: expected [i, j, w], got {item!r}")
            weights[(int(item[0]), int(item[1]))] = float(item[2])
        noise = data.get("noise_var", [1.0] * g.p)
        model = cls(g, weights, tuple(noise))
        bad = model.weights_out_of_range()
        if bad:
            log.warning("%s: %d weights outside [0.25, 1] in magnitude: %s", source, len(bad), bad)
        return model


@dataclass(frozen=True)
class InterventionSpec:
    kind: str
    targets: frozenset[int]
    factor: float = 10.0
    alpha: float = 0.5
    shift_var: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown intervention kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "targets", frozenset(int(t) for t in self.targets))
        if not self.targets:
            raise InvalidArgumentError("intervention targets must be non-empty")
        if not 0 < self.alpha < 1:
            raise InvalidArgumentError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.factor > 1:
            raise InvalidArgumentError(f"factor must exceed 1, got {self.factor}")


@dataclass(frozen=True)
class Mixture:
    """Per-sample mixture of models; ``components[0]`` is the 'success' branch."""

    components: tuple[tuple[float, SemModel], ...]


def sample_random_dag(p: int, avg_neighborhood: float, rng_seed: int) -> Dag:
    """Erdos-Renyi DAG: random topological order, each forward pair kept with
    probability ``avg_neighborhood / (p - 1)``."""
    if p < 2:
        raise InvalidArgumentError(f"p must be at least 2, got {p}")
    if not 0 < avg_neighborhood < p:
        raise InvalidArgumentError(f"avg_neighborhood must lie in (0, {p}), got {avg_neighborhood}")
    rng = make_rng(rng_seed, 0)
    order = rng.permutation(p) + 1
    prob = avg_neighborhood / (p - 1)
    keep = rng.random(p * (p - 1) // 2) < prob
    edges = []
    k = 0
    for a in range(p):
        for b in range(a + 1, p):
            if keep[k]:
                edges.append((int(order[a]), int(order[b])))
            k += 1
    return Dag(p, edges)


def sample_weights(g: Dag, rng_seed: int) -> SemModel:
    """Edge weights uniform on [-1, -0.25] U [0.25, 1]; unit noise variances."""
    rng = make_rng(rng_seed, 1)
    edges = g.sorted_edges()
    mags = rng.uniform(WEIGHT_LOW, WEIGHT_HIGH, size=len(edges))
    signs = np.where(rng.random(len(edges)) < 0.5, -1.0, 1.0)
    return SemModel(g, {e: float(s * m) for e, s, m in zip(edges, signs, mags)}, (1.0,) * g.p)


def apply_intervention(m: SemModel, spec: InterventionSpec, rng_seed: int | None = None) -> SemModel | Mixture:
    """Intervened model. ``imperfect`` yields a :class:`Mixture` resolved per sample at draw time.

    ``rng_seed`` is accepted for interface symmetry; none of the kinds draws
    randomness here.
    """
    targets = as_nodeset(spec.targets, m.p, "targets")
    if spec.kind in ("perfect", "imperfect"):
        cut = m.with_weights({e: (0.0 if e[1] in targets else v) for e, v in m.weights.items()})
        if spec.kind == "perfect":
            return cut
        return Mixture(((spec.alpha, cut), (1.0 - spec.alpha, m)))
    if spec.kind == "inhibiting":
        return m.with_weights({e: (v / spec.factor if e[1] in targets else v) for e, v in m.weights.items()})
    noise = tuple(v + spec.shift_var if k + 1 in targets else v for k, v in enumerate(m.noise_var))
    return SemModel(m.g, m.weights, noise)


def implied_covariance(m: SemModel) -> np.ndarray:
    W = m.weight_matrix()
    A = np.eye(m.p) - W
    try:
        inv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise InternalError("I - W is singular; model is not acyclic") from exc
    return inv.T @ np.diag(m.noise_var) @ inv


def mixture_covariance(mix: SemModel | Mixture) -> np.ndarray:
    if isinstance(mix, SemModel):
        return implied_covariance(mix)
    return sum(w * implied_covariance(c) for w, c in mix.components)


@dataclass(frozen=True, eq=False)
class MultiDataset:
    """One sample matrix per target; block 0 is observational.

    ``latent[k]`` holds the per-sample success flag for imperfect blocks
    (None otherwise). It exists for tests and must not be used by learners.
    """

    fam: TargetFamily
    blocks: tuple[np.ndarray, ...]
    latent: tuple[np.ndarray | None, ...] = ()
    kinds: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.blocks) != len(self.fam):
            raise InvalidArgumentError(f"{len(self.blocks)} blocks for {len(self.fam)} targets")
        for k, b in enumerate(self.blocks):
            if b.ndim != 2 or b.shape[1] != self.fam.p:
                raise InvalidArgumentError(f"block {k} has shape {b.shape}, expected (n, {self.fam.p})")
            if b.shape[0] < 1:
                raise InvalidArgumentError(f"block {k} is empty")
        if not self.latent:
            object.__setattr__(self, "latent", (None,) * len(self.blocks))
        if not self.kinds:
            object.__setattr__(self, "kinds", ("obs",) + ("unknown",) * (len(self.blocks) - 1))

    @property
    def p(self) -> int:
        return self.fam.p

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.blocks)

    def observational_index(self) -> int:
        return self.fam.targets.index(frozenset())

    def observational_only(self) -> MultiDataset:
        k = self.observational_index()
        return MultiDataset(TargetFamily(self.p, [[]]), (self.blocks[k],), (self.latent[k],), ("obs",))

    def identical_to(self, other: MultiDataset) -> bool:
        return self.fam == other.fam and all(
            a.shape == b.shape and a.tobytes() == b.tobytes() for a, b in zip(self.blocks, other.blocks)
        )


def _draw(model: SemModel, eps: np.ndarray) -> np.ndarray:
    A = np.eye(model.p) - model.weight_matrix()
    # rows satisfy X (I - W) = E
    return np.linalg.solve(A.T, eps.T).T


def sample_block(model: SemModel | Mixture, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray | None]:
    """Draw ``n`` rows. For a mixture, also return the per-row success flags."""
    base = model.components[0][1] if isinstance(model, Mixture) else model
    std = np.sqrt(np.asarray(base.noise_var))
    eps = rng.standard_normal((n, base.p)) * std
    if isinstance(model, SemModel):
        return _draw(model, eps), None
    (alpha, success), (_, failure) = model.components
    flags = rng.random(n) < alpha
    x = np.where(flags[:, None], _draw(success, eps), _draw(failure, eps))
    return x, flags


def sample_data(
    m: SemModel, specs: Sequence[InterventionSpec], n_per_block: int | Sequence[int], rng_seed: int
) -> MultiDataset:
    """Observational block followed by one block per intervention spec."""
    sizes = [n_per_block] * (len(specs) + 1) if isinstance(n_per_block, (int, np.integer)) else list(n_per_block)
    if len(sizes) != len(specs) + 1:
        raise InvalidArgumentError(f"need {len(specs) + 1} block sizes, got {len(sizes)}")
    if any(int(n) < 1 for n in sizes):
        raise InvalidArgumentError("n_per_block must be at least 1")
    models: list[SemModel | Mixture] = [m] + [apply_intervention(m, s) for s in specs]
    blocks, latent = [], []
    for k, (model, n) in enumerate(zip(models, sizes)):
        x, flags = sample_block(model, int(n), make_rng(rng_seed, 2, k))
        blocks.append(x)
        latent.append(flags)
    fam = TargetFamily(m.p, [[]] + [sorted(s.targets) for s in specs])
    kinds = ("obs",) + tuple(s.kind for s in specs)
    return MultiDataset(fam, tuple(blocks), tuple(latent), kinds)


# ---------------------------------------------------------------------------
# file formats


def _target_label(t: frozenset[int]) -> str:
    return ";".join(map(str, sorted(t))) if t else "obs"


def write_dataset_csv(data: MultiDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["block", "target"] + [f"X{i}" for i in range(1, data.p + 1)])
        for k, (t, block) in enumerate(zip(data.fam.targets, data.blocks)):
            label = _target_label(t)
            for row in block:
                w.writerow([k, label] + [repr(float(v)) for v in row])


def read_dataset_csv(path, fam: TargetFamily | None = None) -> MultiDataset:
    """Read a dataset CSV. Block targets come from the ``target`` column unless ``fam`` is given."""
    rows: dict[int, list[list[float]]] = {}
    labels: dict[int, str] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["block", "target"]:
            raise InvalidArgumentError(f"{path}: line 1: header must start with 'block,target'")
        p = len(header) - 2
        if header[2:] != [f"X{i}" for i in range(1, p + 1)]:
            raise InvalidArgumentError(f"{path}: line 1: expected columns X1..X{p}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != p + 2:
                raise InvalidArgumentError(f"{path}: line {lineno}: expected {p + 2} fields, got {len(rec)}")
            try:
                k = int(rec[0])
                vals = [float(v) for v in rec[2:]]
            except ValueError as exc:
                raise InvalidArgumentError(f"{path}: line {lineno}: {exc}") from None
            if labels.setdefault(k, rec[1]) != rec[1]:
                raise InvalidArgumentError(f"{path}: line {lineno}: block {k} has inconsistent target label")
            rows.setdefault(k, []).append(vals)
    if sorted(rows) != list(range(len(rows))):
        raise InvalidArgumentError(f"{path}: block indices must be 0..K-1, got {sorted(rows)}")
    if fam is None:
        targets = [[] if labels[k] == "obs" else [int(v) for v in labels[k].split(";")] for k in range(len(rows))]
        fam = TargetFamily(p, targets)
    elif len(fam) != len(rows) or fam.p != p:
        raise InvalidArgumentError(f"{path}: {len(rows)} blocks over {p} nodes do not match the target family")
    blocks = tuple(np.asarray(rows[k], dtype=float) for k in range(len(rows)))
    return MultiDataset(fam, blocks)


def write_model_json(m: SemModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(m.to_dict(), fh)
        fh.write("\n")


def read_model_json(path) -> SemModel:
    with open(path) as fh:
        return SemModel.from_dict(json.load(fh), source=str(path))
