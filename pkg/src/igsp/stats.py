"""Conditional-independence and invariance tests, their graphical oracles, and pooling.

Every decider answers a boolean question ("independent?", "invariant?").
Statistical deciders memoise through a :class:`TestCache` and can append each
fresh evaluation to a CSV audit log.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import threading
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from igsp.exceptions import DegenerateDataError, InvalidArgumentError, NotEnoughSamplesError
from igsp.graph import Dag, Permutation, d_separated
from igsp.interventions import IDag, TargetFamily
from igsp.semsim import MultiDataset

log = logging.getLogger(__name__)

DEFAULT_ALPHA_CI = 1e-3
DEFAULT_ALPHA_INV = 1e-3
HSIC_MIN_BLOCK = 20
_R_CLIP = 1.0 - 1e-12
_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    decision: bool  # True means independent / invariant
    stat: float
    p_value: float
    degenerate: bool = False


# ---------------------------------------------------------------------------
# sufficient statistics


@dataclass(frozen=True)
class BlockStats:
    """Sample size, mean and centred scatter matrix of one block (or a pool of blocks)."""

    n: int
    mean: np.ndarray
    scatter: np.ndarray

    @classmethod
    def from_data(cls, x: np.ndarray) -> BlockStats:
        x = np.asarray(x, dtype=float)
        mean = x.mean(axis=0)
        xc = x - mean
        return cls(x.shape[0], mean, xc.T @ xc)

    @classmethod
    def pool(cls, parts: Sequence[BlockStats]) -> BlockStats:
        if len(parts) == 1:
            return parts[0]
        n = sum(s.n for s in parts)
        mean = sum(s.n * s.mean for s in parts) / n
        scatter = sum(s.scatter + s.n * np.outer(s.mean - mean, s.mean - mean) for s in parts)
        return cls(n, mean, scatter)

    def rss(self, y: int, cols: Sequence[int]) -> float:
        """Residual sum of squares of column ``y`` regressed on ``cols`` (0-based) plus intercept."""
        syy = self.scatter[y, y]
        if not cols:
            return float(syy)
        idx = list(cols)
        szz = self.scatter[np.ix_(idx, idx)]
        szy = self.scatter[idx, y]
        if _ill_conditioned(szz):
            raise DegenerateDataError(f"singular conditioning scatter for columns {idx}")
        return float(syy - szy @ np.linalg.solve(szz, szy))


def _ill_conditioned(m: np.ndarray) -> bool:
    d = np.diag(m)
    if np.any(d <= _DEGENERATE_TOL * max(1.0, float(np.max(np.abs(m))))):
        return True
    s = d ** -0.5
    return np.linalg.cond(m * np.outer(s, s)) > 1e12


def partial_correlation(stats: BlockStats, a: int, b: int, cond: Sequence[int]) -> float:
    """Partial correlation of 0-based columns ``a`` and ``b`` given ``cond``."""
    idx = [a, b, *cond]
    sub = stats.scatter[np.ix_(idx, idx)]
    if _ill_conditioned(sub):
        raise DegenerateDataError(f"singular covariance for columns {idx}")
    prec = np.linalg.inv(sub)
    r = -prec[0, 1] / np.sqrt(prec[0, 0] * prec[1, 1])
    return float(np.clip(r, -_R_CLIP, _R_CLIP))


def _fisher_z(stats: BlockStats, i: int, j: int, cond: Sequence[int], alpha: float) -> TestResult:
    n = stats.n
    if n <= len(cond) + 3:
        raise NotEnoughSamplesError(f"need n > |cond| + 3 = {len(cond) + 3}, got n = {n}")
    try:
        r = partial_correlation(stats, i - 1, j - 1, [c - 1 for c in cond])
    except DegenerateDataError as exc:
        log.warning("fisher-z (%d, %d | %s): %s; treating as dependent", i, j, sorted(cond), exc)
        return TestResult(False, float("inf"), 0.0, degenerate=True)
    z = np.arctanh(r) * np.sqrt(n - len(cond) - 3)
    p = float(2 * sps.norm.sf(abs(z)))
    return TestResult(p >= alpha, float(z), p)


def fisher_z_ci(data: np.ndarray, i: int, j: int, cond: Iterable[int] = (), alpha: float = DEFAULT_ALPHA_CI) -> TestResult:
    """Gaussian CI test of ``X_i`` and ``X_j`` given ``X_cond`` (1-based node labels)."""
    cond = sorted(set(cond))
    if i == j or i in cond or j in cond:
        raise InvalidArgumentError("i, j and cond must be distinct")
    return _fisher_z(BlockStats.from_data(data), i, j, cond, alpha)


def dsep_ci_oracle(g: Dag, i: int, j: int, cond: Iterable[int] = ()) -> bool:
    """Independent iff ``{i}`` and ``{j}`` are d-separated by ``cond`` in ``g``."""
    return d_separated(g, [i], [j], cond)


# ---------------------------------------------------------------------------
# invariance tests


def _rbf_gram(x: np.ndarray) -> np.ndarray:
    d2 = (x[:, None] - x[None, :]) ** 2
    upper = d2[np.triu_indices(len(x), k=1)]
    med = np.median(upper[upper > 0]) if np.any(upper > 0) else 1.0
    return np.exp(-d2 / med)


def _centre(k: np.ndarray) -> np.ndarray:
    return k - k.mean(axis=0)[None, :] - k.mean(axis=1)[:, None] + k.mean()


def hsic_gamma(x: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """HSIC between a real sample and a discrete label, gamma-approximated null.

    Gaussian kernel (median-distance bandwidth) on ``x``, delta kernel on
    ``labels``. Returns ``(m * HSIC_b, p_value)``.
    """
    x = np.asarray(x, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    m = len(x)
    if m < 6:
        raise NotEnoughSamplesError(f"HSIC needs at least 6 samples, got {m}")
    K = _rbf_gram(x)
    L = (labels[:, None] == labels[None, :]).astype(float)
    Kc, Lc = _centre(K), _centre(L)
    stat = float(np.sum(Kc * Lc) / m)

    v = (Kc * Lc / 6.0) ** 2
    var = (v.sum() - np.trace(v)) / m / (m - 1)
    var *= 72.0 * (m - 4) * (m - 5) / m / (m - 1) / (m - 2) / (m - 3)
    np.fill_diagonal(K, 0.0)
    np.fill_diagonal(L, 0.0)
    mu_x = K.sum() / m / (m - 1)
    mu_y = L.sum() / m / (m - 1)
    mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / m
    if var <= 0 or mean <= 0:
        return stat, 1.0
    shape = mean**2 / var
    scale = var * m / mean
    return stat, float(sps.gamma.sf(stat, shape, scale=scale))


def _subsample(x: np.ndarray, cap: int | None) -> np.ndarray:
    if cap is None or len(x) <= cap:
        return x
    idx = np.floor(np.linspace(0, len(x) - 1, cap)).astype(int)
    return x[idx]


def hsic_index_invariance(
    blocks: Sequence[np.ndarray],
    i: int,
    cond: Iterable[int] = (),
    alpha: float = DEFAULT_ALPHA_INV,
    max_points: int | None = None,
) -> TestResult:
    """Is the distribution of ``X_i`` given ``X_cond`` the same in both blocks?

    Tests independence of ``X_i`` from the block index with HSIC. A non-empty
    conditioning set is handled by first residualising ``X_i`` on ``X_cond``
    with pooled least squares. ``max_points`` caps the sample per block.
    """
    if len(blocks) != 2:
        raise InvalidArgumentError("exactly two blocks are compared")
    a, b = (_subsample(np.asarray(x, dtype=float), max_points) for x in blocks)
    if len(a) < 1 or len(b) < 1:
        raise InvalidArgumentError("both blocks must be non-empty")
    if min(len(a), len(b)) < HSIC_MIN_BLOCK:
        log.warning("HSIC invariance: block of size %d < %d; p-value unreliable", min(len(a), len(b)), HSIC_MIN_BLOCK)
    cond = sorted(set(cond))
    stacked = np.vstack([a, b])
    labels = np.r_[np.zeros(len(a)), np.ones(len(b))]
    y = stacked[:, i - 1]
    if cond:
        Z = np.column_stack([np.ones(len(y)), stacked[:, [c - 1 for c in cond]]])
        coef, *_ = np.linalg.lstsq(Z, y, rcond=None)
        y = y - Z @ coef
    if np.std(y) <= _DEGENERATE_TOL:
        log.warning("HSIC invariance: residual of X%d has zero variance; treating as varying", i)
        return TestResult(False, float("inf"), 0.0, degenerate=True)
    stat, p = hsic_gamma(y, labels)
    return TestResult(p >= alpha, stat, p)


def _gaussian_invariance(s0: BlockStats, s1: BlockStats, i: int, cond: Sequence[int], alpha: float) -> TestResult:
    y, cols = i - 1, [c - 1 for c in cond]
    k = len(cols) + 1
    n0, n1 = s0.n, s1.n
    if min(n0, n1) <= k:
        raise NotEnoughSamplesError(f"each block needs more than {k} samples")
    try:
        r0, r1 = s0.rss(y, cols), s1.rss(y, cols)
        rp = BlockStats.pool([s0, s1]).rss(y, cols)
    except DegenerateDataError as exc:
        log.warning("gaussian invariance X%d | %s: %s; treating as varying", i, list(cond), exc)
        return TestResult(False, float("inf"), 0.0, degenerate=True)
    if min(r0, r1) <= _DEGENERATE_TOL:
        log.warning("gaussian invariance X%d | %s: zero residual variance; treating as varying", i, list(cond))
        return TestResult(False, float("inf"), 0.0, degenerate=True)
    # Chow test for equal regression coefficients (intercept included)
    df_den = n0 + n1 - 2 * k
    f_coef = max(rp - r0 - r1, 0.0) / k / ((r0 + r1) / df_den)
    p_coef = float(sps.f.sf(f_coef, k, df_den))
    # two-sided F test for equal residual variances
    f_var = (r0 / (n0 - k)) / (r1 / (n1 - k))
    p_var = float(min(1.0, 2 * min(sps.f.cdf(f_var, n0 - k, n1 - k), sps.f.sf(f_var, n0 - k, n1 - k))))
    p = min(1.0, 2 * min(p_coef, p_var))
    return TestResult(p >= alpha, max(f_coef, f_var), p)


def gaussian_invariance(
    blocks: Sequence[np.ndarray], i: int, cond: Iterable[int] = (), alpha: float = DEFAULT_ALPHA_INV
) -> TestResult:
    """Parametric invariance test: equal regression coefficients and residual variance.

    Combines a Chow F-test and a variance-ratio F-test with a Bonferroni
    correction over the two.
    """
    if len(blocks) != 2:
        raise InvalidArgumentError("exactly two blocks are compared")
    s0, s1 = (BlockStats.from_data(b) for b in blocks)
    return _gaussian_invariance(s0, s1, i, sorted(set(cond)), alpha)


# ---------------------------------------------------------------------------
# cache and audit log


class TestCache:
    """Memo table for test outcomes.

    Reads are lock-free dict lookups; inserts take a lock. Recomputing a key
    concurrently is allowed and harmless because evaluation is deterministic.
    """

    __test__ = False

    def __init__(self):
        self._store: dict[tuple, TestResult] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: tuple) -> TestResult | None:
        res = self._store.get(key)
        if res is None:
            self.misses += 1
        else:
            self.hits += 1
        return res

    def put(self, key: tuple, result: TestResult) -> None:
        with self._lock:
            self._store[key] = result

    def __len__(self) -> int:
        return len(self._store)

    def __contains__(self, key: tuple) -> bool:
        return key in self._store


class TestLog:
    """Append-only CSV of fresh test evaluations: ``kind,i,j_or_block,cond,stat,p,decision``."""

    __test__ = False
    HEADER = ["kind", "i", "j_or_block", "cond", "stat", "p", "decision"]

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()
        with open(path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(self.HEADER)

    def record(self, kind: str, i: int, j_or_block: str, cond: Iterable[int], result: TestResult) -> None:
        row = [
            kind,
            i,
            j_or_block,
            ";".join(map(str, sorted(cond))),
            repr(result.stat),
            repr(result.p_value),
            "accept" if result.decision else "reject",
        ]
        with self._lock, open(self.path, "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(row)


def dataset_key(data: MultiDataset) -> str:
    h = hashlib.sha1()
    for b in data.blocks:
        h.update(np.ascontiguousarray(b).tobytes())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# deciders


class CiDecider:
    """Answers ``independent(i, j, cond, pool)`` on the observational regime.

    ``pool`` lists extra interventional block indices whose samples may be
    combined with the observational block.
    """

    alpha: float | None = None
    backing = "abstract"

    def __init__(self):
        self.n_queries = 0
        self.n_tests = 0

    def independent(self, i: int, j: int, cond: Iterable[int], pool: Iterable[int] = ()) -> bool:
        raise NotImplementedError


class DsepCiOracle(CiDecider):
    backing = "dsep_oracle"

    def __init__(self, g: Dag):
        super().__init__()
        self.g = g
        self._memo: dict[tuple, bool] = {}

    def independent(self, i, j, cond, pool=()):
        self.n_queries += 1
        key = (min(i, j), max(i, j), frozenset(cond))
        res = self._memo.get(key)
        if res is None:
            self.n_tests += 1
            res = self._memo[key] = dsep_ci_oracle(self.g, i, j, cond)
        return res


class FisherZDecider(CiDecider):
    backing = "fisher_z"

    def __init__(
        self,
        data: MultiDataset,
        alpha: float = DEFAULT_ALPHA_CI,
        cache: TestCache | None = None,
        test_log: TestLog | None = None,
    ):
        super().__init__()
        self.data = data
        self.alpha = alpha
        self.cache = cache if cache is not None else TestCache()
        self.test_log = test_log
        self._obs = data.observational_index()
        self._stats = [BlockStats.from_data(b) for b in data.blocks]
        self._key = dataset_key(data)

    def result(self, i: int, j: int, cond: Iterable[int], pool: Iterable[int] = ()) -> TestResult:
        i, j = min(i, j), max(i, j)
        cond = frozenset(cond)
        pool = tuple(sorted(set(pool) - {self._obs}))
        key = ("fisher_z", i, j, cond, self._key, pool, self.alpha)
        res = self.cache.get(key)
        if res is None:
            self.n_tests += 1
            stats = BlockStats.pool([self._stats[self._obs]] + [self._stats[k] for k in pool])
            res = _fisher_z(stats, i, j, sorted(cond), self.alpha)
            self.cache.put(key, res)
            if self.test_log is not None:
                tag = str(j) if not pool else f"{j}@pool:{';'.join(map(str, pool))}"
                self.test_log.record("ci", i, tag, cond, res)
        return res

    def independent(self, i, j, cond, pool=()):
        self.n_queries += 1
        return self.result(i, j, cond, pool).decision


class InvarianceDecider:
    """Answers ``invariant(i, cond, block)``: is ``X_i | X_cond`` the same in
    target ``block`` as in the observational regime?"""

    alpha: float | None = None
    backing = "abstract"

    def __init__(self):
        self.n_queries = 0
        self.n_tests = 0

    def invariant(self, i: int, cond: Iterable[int], block: int, alpha: float | None = None) -> bool:
        raise NotImplementedError


class IdagInvarianceOracle(InvarianceDecider):
    """Invariance read off d-separation in the interventional DAG of a known graph."""

    backing = "idag_dsep_oracle"

    def __init__(self, g: Dag, fam: TargetFamily):
        super().__init__()
        self.idag = IDag(g, fam)
        self._memo: dict[tuple, bool] = {}

    def invariant(self, i, cond, block, alpha=None):
        self.n_queries += 1
        key = (i, frozenset(cond), block)
        res = self._memo.get(key)
        if res is None:
            self.n_tests += 1
            res = self._memo[key] = idag_invariance_oracle(self.idag.base, self.idag.fam, i, cond, block, idag=self.idag)
        return res


def idag_invariance_oracle(g: Dag, fam: TargetFamily, i: int, cond: Iterable[int], block: int, idag: IDag | None = None) -> bool:
    """Invariant iff ``i`` is d-separated from the vertex of target ``block``
    given ``cond`` and all other parameter vertices."""
    if not 0 <= block < len(fam) or not fam.targets[block]:
        raise InvalidArgumentError(f"block {block} does not index a non-empty target")
    idag = idag or IDag(g, fam)
    return idag.invariance_dsep([i], cond, block)


class _StatInvariance(InvarianceDecider):
    kind = "abstract"

    def __init__(self, data: MultiDataset, alpha: float, cache: TestCache | None, test_log: TestLog | None):
        super().__init__()
        self.data = data
        self.alpha = alpha
        self.cache = cache if cache is not None else TestCache()
        self.test_log = test_log
        self._obs = data.observational_index()
        self._key = dataset_key(data)

    def result(self, i: int, cond: Iterable[int], block: int, alpha: float | None = None) -> TestResult:
        if block == self._obs or not 0 <= block < len(self.data.blocks):
            raise InvalidArgumentError(f"block {block} is not an interventional block")
        alpha = self.alpha if alpha is None else alpha
        cond = frozenset(cond)
        key = (self.kind, i, block, cond, self._key, alpha)
        res = self.cache.get(key)
        if res is None:
            self.n_tests += 1
            res = self._compute(i, sorted(cond), block, alpha)
            self.cache.put(key, res)
            if self.test_log is not None:
                self.test_log.record(self.kind, i, f"block:{block}", cond, res)
        return res

    def invariant(self, i, cond, block, alpha=None):
        self.n_queries += 1
        return self.result(i, cond, block, alpha).decision

    def _compute(self, i, cond, block, alpha) -> TestResult:
        raise NotImplementedError


class GaussianInvarianceDecider(_StatInvariance):
    backing = kind = "gaussian"

    def __init__(self, data, alpha=DEFAULT_ALPHA_INV, cache=None, test_log=None):
        super().__init__(data, alpha, cache, test_log)
        self._stats = [BlockStats.from_data(b) for b in data.blocks]

    def _compute(self, i, cond, block, alpha):
        return _gaussian_invariance(self._stats[self._obs], self._stats[block], i, cond, alpha)


class HsicInvarianceDecider(_StatInvariance):
    backing = kind = "hsic"

    def __init__(self, data, alpha=DEFAULT_ALPHA_INV, cache=None, test_log=None, max_points: int | None = 500):
        super().__init__(data, alpha, cache, test_log)
        self.max_points = max_points

    def _compute(self, i, cond, block, alpha):
        pair = (self.data.blocks[self._obs], self.data.blocks[block])
        return hsic_index_invariance(pair, i, cond, alpha, max_points=self.max_points)


# ---------------------------------------------------------------------------
# pooling


def pool_eligible_blocks(g_pi: Dag, pi: Permutation, fam: TargetFamily, i: int, k: int) -> frozenset[int]:
    """Target positions whose data may be pooled with observational data to test
    ``X_i _||_ X_k | X_{an(i) \\ {k}}`` for a parent ``k`` of ``i`` in ``g_pi``.

    A target qualifies when every node ``j`` in it (a) equals ``i`` or is
    neither an ancestor nor a descendant of ``i``, and (b) either precedes
    ``k`` and is not a child of ``k``, or follows ``k`` and is not an
    ancestor of ``k``. All relations are taken in ``g_pi``.
    """
    if k not in g_pi.parents(i):
        raise InvalidArgumentError(f"{k} is not a parent of {i} in the current graph")
    pos = pi.positions()
    anc_i, desc_i = g_pi.ancestors(i), g_pi.descendants(i)
    anc_k, ch_k = g_pi.ancestors(k), g_pi.children(k)

    def ok(j: int) -> bool:
        if j != i and (j in anc_i or j in desc_i):
            return False
        if pos[k] > pos[j]:
            return j not in ch_k
        if pos[j] > pos[k]:
            return j not in anc_k
        return False

    return frozenset(idx for idx, t in enumerate(fam.targets) if t and all(ok(j) for j in t))
