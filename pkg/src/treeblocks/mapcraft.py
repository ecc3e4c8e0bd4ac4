"""Concrete tree-rooted maps.

A map with ``n`` edges lives on half-edges ``0..2n-1`` with two permutations:
``alpha`` pairs the halves of each edge and ``sigma`` turns counterclockwise
around a vertex.  Maps are serialized as Mullin words over ``A a B b``: walking
around the spanning tree, ``A``/``a`` go down/up a tree edge and ``B``/``b``
cross a non-tree edge for the first/second time.  Half-edge ``i`` of a decoded
map is the one read at position ``i`` of its word, so decoded maps are
canonically labelled and compare equal exactly when their words do.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Iterator, Sequence

import numpy as np

from .enumeration import catalan, mullin_count
from .rng import STREAM_WALK, randbelow, replica_rngs

MAX_CENSUS = 6


class CodecError(ValueError):
    pass


def check_word(word: str) -> None:
    """Raise CodecError unless both letter projections are balanced."""
    depth = {"A": 0, "B": 0}
    for ch in word:
        if ch in "AB":
            depth[ch] += 1
        elif ch in "ab":
            depth[ch.upper()] -= 1
            if depth[ch.upper()] < 0:
                raise CodecError(f"unbalanced {ch!r} projection in {word!r}")
        else:
            raise CodecError(f"letter {ch!r} outside the alphabet AaBb")
    if depth["A"] or depth["B"]:
        raise CodecError(f"unclosed letters in {word!r}")


@dataclass(frozen=True, eq=False)
class TreeRootedMap:
    alpha: tuple
    sigma: tuple
    root: int
    tree: frozenset  # half-edges whose edge belongs to the spanning tree
    _word: str | None = field(default=None, repr=False, compare=False)

    @property
    def size(self) -> int:
        return len(self.alpha) // 2

    @property
    def word(self) -> str:
        if self._word is None:
            object.__setattr__(self, "_word", encode(self))
        return self._word

    def __eq__(self, other):
        if not isinstance(other, TreeRootedMap):
            return NotImplemented
        return self.word == other.word

    def __hash__(self):
        return hash(self.word)

    def __repr__(self):
        return f"TreeRootedMap({self.word!r})"

    def vertex_of(self) -> list[int]:
        """Vertex index of each half-edge (vertices numbered by first visit)."""
        n2 = len(self.alpha)
        vid = [-1] * n2
        nv = 0
        for h in range(n2):
            if vid[h] < 0:
                g = h
                while vid[g] < 0:
                    vid[g] = nv
                    g = self.sigma[g]
                nv += 1
        return vid

    def num_vertices(self) -> int:
        return max(self.vertex_of(), default=0) + 1

    def faces(self) -> list[list[int]]:
        n2 = len(self.alpha)
        seen = [False] * n2
        out = []
        for h in range(n2):
            if not seen[h]:
                cyc = []
                g = h
                while not seen[g]:
                    seen[g] = True
                    cyc.append(g)
                    g = self.sigma[self.alpha[g]]
                out.append(cyc)
        return out

    def vertex_degrees(self) -> list[int]:
        vid = self.vertex_of()
        deg = [0] * (max(vid, default=0) + 1)
        for v in vid:
            deg[v] += 1
        return deg

    def tree_height(self) -> int:
        depth = best = 0
        for ch in self.word:
            if ch == "A":
                depth += 1
                best = max(best, depth)
            elif ch == "a":
                depth -= 1
        return best


VERTEX_MAP = TreeRootedMap((), (), 0, frozenset(), "")


def decode(word: str) -> TreeRootedMap:
    check_word(word)
    n2 = len(word)
    alpha = [0] * n2
    at = [[] for _ in range(n2 // 2 + 1)]
    open_a: list[int] = []
    open_b: list[int] = []
    path = [0]
    nv = 1
    tree = set()
    for i, ch in enumerate(word):
        at[path[-1]].append(i)
        if ch == "A":
            open_a.append(i)
            path.append(nv)
            nv += 1
        elif ch == "a":
            j = open_a.pop()
            alpha[i], alpha[j] = j, i
            tree.update((i, j))
            path.pop()
        elif ch == "B":
            open_b.append(i)
        else:
            j = open_b.pop()
            alpha[i], alpha[j] = j, i
    sigma = [0] * n2
    for hs in at[:nv]:
        for k, h in enumerate(hs):
            sigma[h] = hs[(k + 1) % len(hs)]
    return TreeRootedMap(tuple(alpha), tuple(sigma), 0, frozenset(tree), word)


def _tour(alpha: Sequence[int], sigma: Sequence[int], root: int, tree) -> tuple[str, list[int]]:
    n2 = len(alpha)
    letters = []
    order = []
    seen_edge = set()
    h = root
    for _ in range(n2):
        e = min(h, alpha[h])
        first = e not in seen_edge
        seen_edge.add(e)
        order.append(h)
        if h in tree:
            letters.append("A" if first else "a")
            h = sigma[alpha[h]]
        else:
            letters.append("B" if first else "b")
            h = sigma[h]
    return "".join(letters), order


def encode(m: TreeRootedMap) -> str:
    n2 = len(m.alpha)
    if n2 == 0:
        return ""
    for h in range(n2):
        if m.alpha[h] == h or m.alpha[m.alpha[h]] != h:
            raise CodecError("alpha must be a fixed-point-free involution")
        if (h in m.tree) != (m.alpha[h] in m.tree):
            raise CodecError("tree marks must cover both halves of an edge")
    word, order = _tour(m.alpha, m.sigma, m.root, m.tree)
    if sorted(order) != list(range(n2)):
        raise CodecError("contour tour misses half-edges: marked edges are not a spanning tree")
    try:
        check_word(word)
    except CodecError as exc:
        raise CodecError(f"marked edges are not a spanning tree ({exc})") from None
    # the tour is a bijection; check it carries the structure onto the decoded map
    pos = {h: i for i, h in enumerate(order)}
    ref = decode(word)
    for h in range(n2):
        if pos[m.alpha[h]] != ref.alpha[pos[h]] or pos[m.sigma[h]] != ref.sigma[pos[h]]:
            raise CodecError("map is not the one described by its own contour word")
    return word


def from_parts(alpha, sigma, root, tree) -> TreeRootedMap:
    """Canonically relabel an arbitrary half-edge structure."""
    return decode(encode(TreeRootedMap(tuple(alpha), tuple(sigma), root, frozenset(tree))))


# ---------------------------------------------------------------------------
# enumeration and uniform sampling


def _words(n: int) -> Iterator[str]:
    out = []

    def rec(left: int, da: int, db: int):
        if left == 0:
            yield "".join(out)
            return
        if da + db < left:
            if (left - da - db) >= 2:
                for ch in "AB":
                    out.append(ch)
                    yield from rec(left - 1, da + (ch == "A"), db + (ch == "B"))
                    out.pop()
        if da:
            out.append("a")
            yield from rec(left - 1, da - 1, db)
            out.pop()
        if db:
            out.append("b")
            yield from rec(left - 1, da, db - 1)
            out.pop()

    yield from rec(2 * n, 0, 0)


def enumerate_words(n: int) -> list[str]:
    if n > MAX_CENSUS:
        raise ValueError(f"census is capped at n <= {MAX_CENSUS}")
    return sorted(_words(n))


def enumerate_all(n: int) -> list[TreeRootedMap]:
    maps = [decode(w) for w in enumerate_words(n)]
    if len(maps) != mullin_count(n):
        raise AssertionError(f"census at n={n} has {len(maps)} maps, expected {mullin_count(n)}")
    return maps


@lru_cache(maxsize=64)
def _split_weights(n: int) -> tuple[int, ...]:
    return tuple(comb(2 * n, 2 * k) * catalan(k) * catalan(n - k) for k in range(n + 1))


def sample_tree_size(n: int, rng: np.random.Generator) -> int:
    """Number of spanning-tree edges of a uniform tree-rooted map of size n."""
    r = randbelow(rng, mullin_count(n))
    for k, w in enumerate(_split_weights(n)):
        if r < w:
            return k
        r -= w
    raise AssertionError("inverse CDF overran the total")  # pragma: no cover


def dyck_steps(k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform Dyck path with k up-steps as a +1/-1 array (cycle lemma, no rejection)."""
    steps = np.concatenate([np.ones(k, dtype=np.int64), -np.ones(k + 1, dtype=np.int64)])
    rng.shuffle(steps)
    start = int(np.argmin(np.cumsum(steps))) + 1
    return np.roll(steps, -start)[:-1]


def sample_word(n: int, rng: np.random.Generator) -> str:
    k = sample_tree_size(n, rng)
    tree_steps = dyck_steps(k, rng)
    dual_steps = dyck_steps(n - k, rng)
    mask = np.zeros(2 * n, dtype=bool)
    mask[rng.choice(2 * n, size=2 * k, replace=False)] = True
    letters = []
    ti = di = 0
    for is_tree in mask:
        if is_tree:
            letters.append("A" if tree_steps[ti] > 0 else "a")
            ti += 1
        else:
            letters.append("B" if dual_steps[di] > 0 else "b")
            di += 1
    return "".join(letters)


def sample_uniform(n: int, seed) -> TreeRootedMap:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return decode(sample_word(n, rng))


def walk_max_abscissa(n: int, seed: int, replicas: int) -> np.ndarray:
    """Spanning-tree heights of independent uniform tree-rooted maps of size n.

    Only the tree projection of the Mullin word is needed: its running depth is
    the abscissa of the quadrant walk, and its maximum is the tree height.
    """
    out = np.empty(replicas, dtype=np.int64)
    for i, rng in enumerate(replica_rngs(seed, replicas, STREAM_WALK)):
        k = sample_tree_size(n, rng)
        out[i] = int(np.cumsum(dyck_steps(k, rng)).max()) if k else 0
    return out


# ---------------------------------------------------------------------------
# blocks


def edge_blocks(m: TreeRootedMap) -> list[int]:
    """Block label of every half-edge (biconnected components of the multigraph).

    Loops form their own blocks; parallel edges are told apart by edge id, so
    a second copy of an edge is a back edge and never a bridge.
    """
    n2 = len(m.alpha)
    if n2 == 0:
        return []
    vid = m.vertex_of()
    nv = max(vid) + 1
    label = [-1] * n2
    nblocks = 0
    adj: list[list[int]] = [[] for _ in range(nv)]
    for h in range(n2):
        if m.alpha[h] == h:
            raise CodecError("broken involution")
        if vid[h] == vid[m.alpha[h]]:
            if h < m.alpha[h]:
                label[h] = label[m.alpha[h]] = nblocks
                nblocks += 1
        else:
            adj[vid[h]].append(h)
    disc = [-1] * nv
    low = [0] * nv
    timer = 0
    edge_stack: list[int] = []
    for start in range(nv):
        if disc[start] >= 0:
            continue
        disc[start] = low[start] = timer
        timer += 1
        # frames: (vertex, half-edge used to enter, iterator position)
        stack = [(start, -1, 0)]
        while stack:
            v, via, i = stack[-1]
            if i < len(adj[v]):
                stack[-1] = (v, via, i + 1)
                h = adj[v][i]
                if via >= 0 and h == m.alpha[via]:
                    continue
                w = vid[m.alpha[h]]
                if disc[w] < 0:
                    edge_stack.append(h)
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, h, 0))
                elif disc[w] < disc[v]:
                    edge_stack.append(h)
                    low[v] = min(low[v], disc[w])
            else:
                stack.pop()
                if stack:
                    p = stack[-1][0]
                    low[p] = min(low[p], low[v])
                    if low[v] >= disc[p]:
                        while True:
                            h = edge_stack.pop()
                            label[h] = label[m.alpha[h]] = nblocks
                            if h == via:
                                break
                        nblocks += 1
    if any(x < 0 for x in label):  # pragma: no cover
        raise AssertionError("unlabelled half-edge; map is disconnected")
    return label


def num_blocks(m: TreeRootedMap) -> int:
    return len(set(edge_blocks(m)))


def block_sizes_of(m: TreeRootedMap) -> list[int]:
    lab = edge_blocks(m)
    counts: dict[int, int] = {}
    for x in lab:
        counts[x] = counts.get(x, 0) + 1
    return sorted((c // 2 for c in counts.values()), reverse=True)


@dataclass(frozen=True)
class BlockTree:
    """Decomposition tree: an internal node carries the Mullin word of its
    block and one ordered child per half-edge of that block; leaves stand for
    the vertex map."""

    block: str | None = None
    children: tuple = ()

    def __post_init__(self):
        if self.block is None:
            if self.children:
                raise ValueError("a leaf cannot have children")
        elif len(self.children) != len(self.block):
            raise ValueError(
                f"block of size {len(self.block) // 2} needs {len(self.block)} children, "
                f"got {len(self.children)}"
            )

    @property
    def is_leaf(self) -> bool:
        return self.block is None

    def nodes(self) -> Iterator["BlockTree"]:
        stack = [self]
        while stack:
            t = stack.pop()
            yield t
            stack.extend(reversed(t.children))

    def num_blocks(self) -> int:
        return sum(1 for t in self.nodes() if not t.is_leaf)

    def num_edges(self) -> int:
        return sum(len(t.children) for t in self.nodes())

    def offspring(self) -> list[int]:
        """Child counts in depth-first preorder."""
        return [len(t.children) for t in self.nodes()]

    def block_sizes(self) -> list[int]:
        return sorted((len(t.children) // 2 for t in self.nodes() if not t.is_leaf), reverse=True)


LEAF = BlockTree()


def _restrict(m: TreeRootedMap, halves: set, at_vertex: int | None, corner: list[int]):
    """Induced sub-structure on ``halves``; at ``at_vertex`` the rotation is ``corner``."""
    idx = sorted(halves)
    new = {h: i for i, h in enumerate(idx)}
    vid = m.vertex_of()
    alpha = [new[m.alpha[h]] for h in idx]
    sigma = [0] * len(idx)
    for h in idx:
        if at_vertex is not None and vid[h] == at_vertex:
            k = corner.index(h)
            sigma[new[h]] = new[corner[(k + 1) % len(corner)]]
        else:
            g = m.sigma[h]
            while g not in halves:
                g = m.sigma[g]
            sigma[new[h]] = new[g]
    tree = {new[h] for h in idx if h in m.tree}
    return alpha, sigma, tree, new


def block_decompose(m: TreeRootedMap) -> BlockTree:
    if m.size == 0:
        return LEAF
    label = edge_blocks(m)
    vid = m.vertex_of()
    root_block = label[m.root]
    bh = {h for h in range(len(m.alpha)) if label[h] == root_block}
    alpha, sigma, tree, new = _restrict(m, bh, None, [])
    block = from_parts(alpha, sigma, new[m.root], tree)
    if len(block.tree) // 2 != block.num_vertices() - 1:
        raise AssertionError("spanning tree does not restrict to a spanning tree of the block")
    # block half-edges in the block's canonical order
    _, order = _tour(alpha, sigma, new[m.root], tree)
    inv = {i: h for h, i in new.items()}
    children = []
    for bpos in order:
        e = inv[bpos]
        v = vid[e]
        corner = []
        g = m.sigma[e]
        while g not in bh:
            corner.append(g)
            g = m.sigma[g]
        if not corner:
            children.append(LEAF)
            continue
        halves = set(corner)
        frontier = list(corner)
        while frontier:
            h = frontier.pop()
            a = m.alpha[h]
            if a not in halves:
                halves.add(a)
                if vid[a] != v:
                    g = a
                    while True:
                        if g not in halves:
                            halves.add(g)
                            frontier.append(g)
                        g = m.sigma[g]
                        if g == a:
                            break
                else:
                    frontier.append(a)
        sa, ss, st, snew = _restrict(m, halves, v, corner)
        sub = from_parts(sa, ss, snew[corner[0]], st)
        children.append(block_decompose(sub))
    return BlockTree(block.word, tuple(children))


def reconstruct(t: BlockTree) -> TreeRootedMap:
    if t.is_leaf:
        return VERTEX_MAP
    b = decode(t.block)
    k2 = len(b.alpha)
    alpha = list(b.alpha)
    sigma = list(b.sigma)
    tree = set(b.tree)
    for i, child in enumerate(t.children):
        if child.is_leaf:
            continue
        sub = reconstruct(child)
        off = len(alpha)
        alpha.extend(a + off for a in sub.alpha)
        sigma.extend(s + off for s in sub.sigma)
        tree.update(h + off for h in sub.tree)
        r = sub.root + off
        last = r
        while sigma[last] != r:
            last = sigma[last]
        sigma[i], sigma[last] = r, sigma[i]
    if len(alpha) < k2:  # pragma: no cover
        raise AssertionError
    return from_parts(alpha, sigma, 0, tree)


@lru_cache(maxsize=8)
def catalog_2connected(K: int) -> dict[int, tuple[str, ...]]:
    """Mullin words of 2-connected tree-rooted maps of each size 1..K."""
    from .enumeration import extract_B

    if K > MAX_CENSUS:
        raise ValueError(f"catalog is capped at K <= {MAX_CENSUS}")
    b = extract_B(max(K, 1), method="triangular")
    out = {}
    for k in range(1, K + 1):
        words = tuple(m.word for m in enumerate_all(k) if num_blocks(m) == 1)
        if len(words) != b[k]:
            raise AssertionError(f"{len(words)} blocks of size {k}, but b_{k} = {b[k]}")
        out[k] = words
    return out


def census_rows(n: int) -> list[tuple[str, int, list[int]]]:
    return [(m.word, num_blocks(m), block_sizes_of(m)) for m in enumerate_all(n)]


def is_core(m: TreeRootedMap) -> bool:
    """2-connected with no vertex and no face of degree 2."""
    return (
        num_blocks(m) == 1
        and min(m.vertex_degrees()) != 2
        and all(len(f) != 2 for f in m.faces())
    )


__all__ = [
    "BlockTree",
    "CodecError",
    "LEAF",
    "TreeRootedMap",
    "VERTEX_MAP",
    "block_decompose",
    "block_sizes_of",
    "catalog_2connected",
    "census_rows",
    "check_word",
    "decode",
    "dyck_steps",
    "edge_blocks",
    "encode",
    "enumerate_all",
    "enumerate_words",
    "from_parts",
    "is_core",
    "num_blocks",
    "reconstruct",
    "sample_uniform",
    "sample_word",
    "walk_max_abscissa",
]
