from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treeblocks import enumeration as en
from treeblocks import mapcraft as mc


def test_census_sizes():
    for n in range(5):
        assert len(mc.enumerate_all(n)) == en.mullin_count(n)
    assert len(mc.enumerate_words(3)) == 70


def test_census_guard():
    with pytest.raises(ValueError):
        mc.enumerate_all(mc.MAX_CENSUS + 1)


@pytest.mark.parametrize("bad", ["Ab", "aA", "AAa", "AxBb", "Bba"])
def test_check_word_rejects(bad):
    with pytest.raises(mc.CodecError):
        mc.check_word(bad)


def test_single_edge_maps():
    bridge, loop = mc.decode("Aa"), mc.decode("Bb")
    assert bridge.num_vertices() == 2 and loop.num_vertices() == 1
    assert mc.num_blocks(bridge) == mc.num_blocks(loop) == 1
    assert mc.encode(bridge) == "Aa" and mc.encode(loop) == "Bb"


def test_vertex_map():
    assert mc.encode(mc.VERTEX_MAP) == ""
    assert mc.block_decompose(mc.VERTEX_MAP).num_blocks() == 0


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_euler_and_spanning_tree(n):
    for m in mc.enumerate_all(n):
        assert m.num_vertices() - n + len(m.faces()) == 2
        assert len(m.tree) == 2 * (m.num_vertices() - 1)
        assert sum(m.vertex_degrees()) == 2 * n


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_codec_and_blocks_roundtrip(n):
    for m in mc.enumerate_all(n):
        assert mc.decode(mc.encode(m)) == m
        t = mc.block_decompose(m)
        assert t.num_edges() == 2 * n
        assert sum(t.block_sizes()) == n
        assert mc.reconstruct(t) == m


def test_block_polynomials_match_series():
    BM = en.bivariate_M(4)
    for n in range(1, 5):
        c = Counter(mc.num_blocks(m) for m in mc.enumerate_all(n))
        assert tuple(c.get(k, 0) for k in range(BM[n].degree + 1)) == BM[n].coeffs


def test_two_connected_catalog():
    cat = mc.catalog_2connected(5)
    assert [len(cat[k]) for k in range(1, 6)] == [2, 2, 6, 28, 160]


def test_encode_rejects_non_spanning_marks():
    m = mc.decode("ABba")
    with pytest.raises(mc.CodecError):
        mc.encode(mc.TreeRootedMap(m.alpha, m.sigma, 0, frozenset()))


def test_from_parts_relabels():
    m = mc.decode("AaBABbab")
    perm = [5, 2, 7, 0, 3, 6, 1, 4]
    inv = {p: i for i, p in enumerate(perm)}
    alpha = [0] * 8
    sigma = [0] * 8
    for h in range(8):
        alpha[perm[h]] = perm[m.alpha[h]]
        sigma[perm[h]] = perm[m.sigma[h]]
    tree = {perm[h] for h in m.tree}
    assert mc.from_parts(alpha, sigma, perm[0], tree) == m
    assert inv[perm[0]] == 0


def test_blocks_of_path_and_bouquet():
    path = mc.decode("AAaa")
    assert mc.block_sizes_of(path) == [1, 1]
    bouquet = mc.decode("BbBb")
    assert mc.block_sizes_of(bouquet) == [1, 1]
    assert mc.num_blocks(mc.decode("ABab")) == 1


def test_block_tree_validates_child_count():
    with pytest.raises((ValueError, AssertionError)):
        mc.BlockTree("Aa", (mc.LEAF,))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32))
def test_sampled_maps_roundtrip(n, seed):
    m = mc.sample_uniform(n, seed)
    assert m.size == n
    assert mc.encode(m) == m.word
    t = mc.block_decompose(m)
    assert mc.reconstruct(t) == m
    assert sorted(t.block_sizes(), reverse=True) == sorted(mc.block_sizes_of(m), reverse=True)
    assert t.num_blocks() == mc.num_blocks(m)


def test_sample_word_balanced():
    rng = np.random.default_rng(3)
    for n in (1, 10, 200):
        mc.check_word(mc.sample_word(n, rng))


def test_walk_max_abscissa_reproducible():
    a = mc.walk_max_abscissa(50, 1, 20)
    b = mc.walk_max_abscissa(50, 1, 20)
    assert (a == b).all() and (a >= 0).all() and (a <= 50).all()


def test_core_count():
    assert sum(mc.is_core(mc.decode(w)) for w in mc.catalog_2connected(6)[6]) == 16
