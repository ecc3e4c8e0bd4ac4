"""Block trees of block-weighted tree-rooted maps.

The block tree of a map of size n drawn with weight u^{#blocks} is a
Galton-Watson tree with 2n+1 nodes, conditioned on 2n edges, whose offspring
law puts mass mu(2j) = b_j y^j u^{[j>0]} / (u B(y) + 1 - u) on even numbers.
Internally values are kept in "j units" (half the offspring count), so a
tree of size n is 2n+1 values summing to n.

Conditioning on the sum is done in one of two exact ways.  When the law has
exponential moments (supercritical u) plain rejection on multinomial counts
accepts with probability of order n^-1/2.  Otherwise the multiset of values
is built by recursive halving: convolution powers of the law decide how the
target sum splits between the halves, and halves whose target is typical are
filled by a cheaper accept/reject step.  The convolution powers are floats,
which is the only approximation in the second path.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from mpmath import mp, mpf
from scipy.signal import fftconvolve

from . import analytics
from .analytics import Regime
from .enumeration import extract_B
from .mapcraft import BlockTree, LEAF, TreeRootedMap, catalog_2connected, reconstruct
from .rng import STREAM_DECORATE, STREAM_TREE, stream_rng

log = logging.getLogger(__name__)

DEFAULT_N_EXACT = 2000
DEFAULT_J_MAX = 10**6
DEFECT_BOUND = 1e-6


class SamplerError(RuntimeError):
    pass


class BlockTooLarge(SamplerError):
    def __init__(self, size: int, K: int):
        super().__init__(f"sampled a block of size {size}, larger than the catalog bound K={K}")
        self.size = size
        self.K = K


@dataclass(frozen=True, eq=False)
class OffspringDist:
    """The law mu^{y,u} on {0, 2, 4, ...}, indexed by j = offspring / 2.

    ``probs[j]`` holds mu(2j) after renormalization; ``renorm_defect`` is the
    mass missing before renormalization (the tail beyond ``j_max`` plus the
    mismatch between the tail model and the true coefficients).
    """

    u: float
    y: float
    regime: Regime
    probs: np.ndarray
    normalizer: float
    n_exact: int
    j_max: int
    renorm_defect: float
    tail_constant: float
    mean: float
    mean_closed: float
    mean_bound: float
    _cache: dict = field(default_factory=dict, repr=False)

    def mass(self, k: int) -> float:
        """mu(k) for an offspring count k."""
        if k % 2 or k < 0 or k // 2 >= len(self.probs):
            return 0.0
        return float(self.probs[k // 2])

    @property
    def cdf(self) -> np.ndarray:
        if "cdf" not in self._cache:
            c = np.cumsum(self.probs)
            c /= c[-1]
            self._cache["cdf"] = c
        return self._cache["cdf"]

    def variance(self) -> float:
        j = np.arange(len(self.probs), dtype=float)
        return float(np.sum(4 * j * j * self.probs) - (2 * np.sum(j * self.probs)) ** 2)


def build_mu(u, mode: str = "at_y_of_u", N_exact: int = DEFAULT_N_EXACT, J_max: int = DEFAULT_J_MAX,
             defect_bound: float = DEFECT_BOUND, dps: int = 30) -> OffspringDist:
    """Offspring law at weight ``u``.

    ``mode`` is ``at_rho_B`` (y = rho_B whatever u) or ``at_y_of_u``.  The
    exact head uses b_j for j <= N_exact; beyond that the tail model
    C_b (y/rho_B)^j j^-3 u / q is used up to J_max, or until it falls below
    1e-30 of the head when y < rho_B.
    """
    analytics._check_u(u)
    if mode not in ("at_rho_B", "at_y_of_u"):
        raise ValueError(f"unknown mode {mode!r}")
    regime = analytics.classify(u, dps)
    with mp.workdps(dps):
        c = analytics._closed(dps)
        rho = c["rho_B"]
        um = analytics.as_mpf(u)
        y = rho if mode == "at_rho_B" else analytics.solve_y_of_u(um, N_exact=N_exact, dps=dps)
        B = analytics.B_eval_tail_corrected(y, 0, N_exact, dps)
        B1 = analytics.B_eval_tail_corrected(y, 1, N_exact, dps)
        q = um * B.value + 1 - um
        if q <= 0:
            raise SamplerError(f"normalizer uB(y)+1-u = {q} is not positive")
        b = extract_B(N_exact).coeffs
        head = [mpf(1) / q] + [mpf(int(b[j])) * y**j * um / q for j in range(1, N_exact + 1)]
        x = y / rho
        tail_c = c["C_b"] * um / q
        mean_closed = 2 * y * um * B1.value / q
        if regime is not Regime.SUPERCRITICAL and mode == "at_rho_B":
            mean_closed = analytics.E_closed(um, dps) if regime is Regime.SUBCRITICAL else mpf(1)
        head_f = np.array([float(v) for v in head])
        tail_cf = float(tail_c)
        log_x = float(mpmath.log(x))
    if log_x < 0:
        # geometric decay: stop once the model tail is negligible
        j_stop = N_exact + int(np.ceil(75 / -log_x))
        J = min(J_max, max(j_stop, N_exact))
    else:
        J = J_max
    js = np.arange(N_exact + 1, J + 1, dtype=float)
    tail = tail_cf * np.exp(js * log_x) / js**3
    probs = np.concatenate([head_f, tail])
    total = float(probs.sum())
    defect = abs(1.0 - total)
    if defect > defect_bound:
        raise SamplerError(f"renormalization defect {defect:.3g} exceeds {defect_bound:.3g}")
    probs = probs / total
    jj = np.arange(len(probs), dtype=float)
    mean = float(2 * np.sum(jj * probs))
    # error budget: tail-model deviation, truncation beyond J, and the mass defect
    dev = float(analytics._last_deviation(N_exact, dps))
    tail_mean = float(2 * np.sum(js * tail))
    beyond = 2 * tail_cf * (np.exp(J * log_x) if log_x < 0 else 1.0) / max(J, 1)
    bound = 2 * dev * tail_mean + beyond + defect * 2 + 1e-12
    return OffspringDist(
        u=float(um),
        y=float(y),
        regime=regime,
        probs=probs,
        normalizer=float(q),
        n_exact=N_exact,
        j_max=J,
        renorm_defect=defect,
        tail_constant=tail_cf,
        mean=mean,
        mean_closed=float(mean_closed),
        mean_bound=bound,
    )


# ---------------------------------------------------------------------------
# conditioned sums


def _split_sizes(m: int) -> list[int]:
    sizes = {m}
    frontier = [m]
    while frontier:
        s = frontier.pop()
        for t in (s // 2, s - s // 2):
            if t >= 1 and t not in sizes:
                sizes.add(t)
                frontier.append(t)
    return sorted(sizes)


class _Powers:
    """Convolution powers of a law truncated to [0, n], for the halving sizes of m."""

    def __init__(self, p: np.ndarray, m: int, n: int):
        base = np.zeros(n + 1)
        k = min(len(p), n + 1)
        base[:k] = p[:k]
        self.n = n
        self.pw: dict[int, np.ndarray] = {1: base}
        for s in _split_sizes(m):
            if s == 1:
                continue
            a, b = s // 2, s - s // 2
            v = fftconvolve(self.pw[a], self.pw[b])[: n + 1]
            np.maximum(v, 0.0, out=v)
            self.pw[s] = v
        self.prefix_max = {s: np.maximum.accumulate(v) for s, v in self.pw.items()}


def _fill(m: int, k: int, P: _Powers, cdf: np.ndarray, rng: np.random.Generator, out: list,
          accept_floor: float = 0.02) -> None:
    stack = [(m, k)]
    while stack:
        m_, k_ = stack.pop()
        if k_ == 0:
            out.append(np.zeros(m_, dtype=np.int64))
            continue
        if m_ == 1:
            out.append(np.array([k_], dtype=np.int64))
            continue
        h = m_ // 2
        r = m_ - h
        top = P.prefix_max[r][k_]
        if top <= 0:
            raise SamplerError("conditioned sum has zero mass in float arithmetic")
        rate = P.pw[m_][k_] / top
        if rate >= accept_floor:
            tries = int(np.ceil(20 / rate))
            done = False
            for _ in range(tries):
                vals = np.searchsorted(cdf, rng.random(h), side="right")
                s1 = int(vals.sum())
                if s1 <= k_ and rng.random() * top < P.pw[r][k_ - s1]:
                    out.append(vals.astype(np.int64))
                    stack.append((r, k_ - s1))
                    done = True
                    break
            if done:
                continue
        w = P.pw[h][: k_ + 1] * P.pw[r][k_::-1]
        tot = w.sum()
        if not tot > 0:
            raise SamplerError("conditioned sum has zero mass in float arithmetic")
        t = int(np.searchsorted(np.cumsum(w), rng.random() * tot, side="right"))
        t = min(t, k_)
        stack.append((h, t))
        stack.append((r, k_ - t))


def _powers_for(dist: OffspringDist, m: int, n: int) -> _Powers:
    key = ("powers", m, n)
    if key not in dist._cache:
        dist._cache[key] = _Powers(dist.probs, m, n)
    return dist._cache[key]


def _cdf_upto(dist: OffspringDist, n: int) -> np.ndarray:
    key = ("cdf", n)
    if key not in dist._cache:
        c = np.cumsum(dist.probs[: n + 1])
        c /= c[-1]
        dist._cache[key] = c
    return dist._cache[key]


def conditioned_values_dc(dist: OffspringDist, n: int, rng: np.random.Generator) -> np.ndarray:
    """2n+1 values (j units) i.i.d. from the law conditioned to sum to n, by halving."""
    m = 2 * n + 1
    P = _powers_for(dist, m, n)
    out: list = []
    _fill(m, n, P, _cdf_upto(dist, n), rng, out)
    vals = np.concatenate(out)
    if len(vals) != m or int(vals.sum()) != n:  # pragma: no cover
        raise AssertionError("halving sampler broke its own contract")
    return vals


def _effective_support(dist: OffspringDist, n: int, eps: float = 1e-18) -> np.ndarray:
    key = ("support", n)
    if key not in dist._cache:
        p = dist.probs[: n + 1]
        keep = np.nonzero(p >= eps * p.max())[0]
        p = p[: keep[-1] + 1].copy()
        dist._cache[key] = p / p.sum()
    return dist._cache[key]


def conditioned_values_rejection(dist: OffspringDist, n: int, rng: np.random.Generator,
                                 retry_cap: int) -> np.ndarray | None:
    """Multinomial rejection; None when the cap runs out."""
    m = 2 * n + 1
    p = _effective_support(dist, n)
    js = np.arange(len(p))
    for _ in range(retry_cap):
        counts = rng.multinomial(m, p)
        if int(counts @ js) == n:
            return np.repeat(js, counts)
    return None


def conditioned_values(dist: OffspringDist, n: int, rng: np.random.Generator,
                       retry_cap: int | None = None, fallback: bool = True) -> np.ndarray:
    """Multiset (unordered) of the 2n+1 offspring values in j units.

    Supercritical laws go through rejection first (default cap 20000 tries);
    otherwise rejection is hopeless and the cap defaults to 0.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return np.zeros(1, dtype=np.int64)
    if retry_cap is None:
        retry_cap = 20000 if dist.regime is Regime.SUPERCRITICAL and dist.y < analytics_rho_B() else 0
    vals = conditioned_values_rejection(dist, n, rng, retry_cap) if retry_cap else None
    if vals is None:
        if not fallback:
            raise SamplerError(f"rejection gave up after {retry_cap} tries and the fallback is disabled")
        vals = conditioned_values_dc(dist, n, rng)
    return vals


@lru_cache(maxsize=1)
def analytics_rho_B() -> float:
    return float(analytics.closed_constants(30).rho_B)


def cycle_lemma(vals: np.ndarray) -> np.ndarray:
    """Rotate offspring counts (sum = len - 1) into a depth-first sequence."""
    steps = vals.astype(np.int64) - 1
    walk = np.cumsum(steps)
    if walk[-1] != -1:
        raise ValueError("offspring counts must sum to one less than their number")
    start = int(np.argmin(walk)) + 1
    return np.roll(vals, -start)


@dataclass(frozen=True, eq=False)
class OffspringTree:
    """Plane tree as its depth-first (preorder) sequence of child counts."""

    offspring: np.ndarray

    @property
    def num_edges(self) -> int:
        return int(self.offspring.sum())

    def height(self) -> int:
        pending = [0]
        best = 0
        rep = itertools.repeat
        for x in self.offspring.tolist():
            d = pending.pop()
            if d > best:
                best = d
            if x:
                pending.extend(rep(d + 1, x))
        return best

    def to_block_tree(self, blocks) -> BlockTree:
        """Attach block words (one per internal node, in preorder) to the tree."""
        off = self.offspring.tolist()
        words = iter(blocks)
        pos = 0

        def build():
            nonlocal pos
            x = off[pos]
            pos += 1
            if x == 0:
                return LEAF
            word = next(words)
            return BlockTree(word, tuple(build() for _ in range(x)))

        return build()


def sample_block_tree(n: int, u=None, seed=0, dist: OffspringDist | None = None, *, replica: int = 0,
                      retry_cap: int | None = None, fallback: bool = True) -> OffspringTree:
    """Exact sample of the block tree: GW(mu^u) conditioned on 2n edges."""
    if dist is None:
        if u is None:
            raise ValueError("need u or a prebuilt offspring law")
        dist = build_mu(u)
    rng = seed if isinstance(seed, np.random.Generator) else stream_rng(seed, STREAM_TREE, replica)
    vals = conditioned_values(dist, n, rng, retry_cap, fallback)
    rng.shuffle(vals)
    return OffspringTree(cycle_lemma(2 * vals))


@dataclass(frozen=True)
class BlockSizeSample:
    n: int
    u: float
    sizes: tuple
    tree_height: int | None = None

    def __post_init__(self):
        if sum(self.sizes) != self.n or any(s <= 0 for s in self.sizes):
            raise AssertionError("block sizes must be positive and sum to n")

    def LB(self, j: int) -> int:
        return self.sizes[j - 1] if j <= len(self.sizes) else 0

    @property
    def b_count(self) -> int:
        return len(self.sizes)


def sizes_from_values(vals: np.ndarray) -> tuple:
    v = vals[vals > 0]
    return tuple(int(x) for x in np.sort(v)[::-1])


def block_sizes(tree: OffspringTree, u=float("nan"), with_height: bool = True) -> BlockSizeSample:
    n = tree.num_edges // 2
    return BlockSizeSample(
        n=n,
        u=u,
        sizes=sizes_from_values(tree.offspring // 2),
        tree_height=tree.height() if with_height else None,
    )


def sample_decorated_map(n: int, u, seed=0, K: int = 5, dist: OffspringDist | None = None, *,
                         replica: int = 0) -> TreeRootedMap:
    """Map of size n with probability proportional to u^{#blocks}, for blocks up to size K."""
    if dist is None:
        dist = build_mu(u, N_exact=max(64, K))
    tree = sample_block_tree(n, seed=stream_rng(seed, STREAM_TREE, replica), dist=dist)
    sizes = [x // 2 for x in tree.offspring.tolist() if x]
    big = max(sizes, default=0)
    if big > K:
        raise BlockTooLarge(big, K)
    catalog = catalog_2connected(K) if sizes else {}
    rng = stream_rng(seed, STREAM_DECORATE, replica)
    words = [catalog[k][int(rng.integers(len(catalog[k])))] for k in sizes]
    return reconstruct(tree.to_block_tree(words))


# ---------------------------------------------------------------------------
# exhaustive oracle for small n


def exact_tree_law(dist: OffspringDist, n: int) -> dict[tuple, float]:
    """Law of the conditioned tree for small n by enumerating all offspring sequences."""
    m = 2 * n + 1
    out: dict[tuple, float] = {}
    for seq in itertools.product(range(n + 1), repeat=m):
        if sum(seq) != n:
            continue
        walk = np.cumsum(np.array(seq) * 2 - 1)
        if walk[-1] != -1 or (walk[:-1] < 0).any():
            continue
        w = 1.0
        for j in seq:
            w *= dist.probs[j]
        out[tuple(2 * j for j in seq)] = w
    total = sum(out.values())
    return {k: v / total for k, v in out.items()}
