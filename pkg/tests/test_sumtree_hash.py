import random

import pytest

from conftest import brute_sibling_counts, random_keywords
from sumroute.errors import CapacityExceeded, ExceedsStoredBits, RootHasNoParent
from sumroute.sumtree import (
    bitcode_level,
    build_hash,
    grow_depth,
    hash_parent,
    minimal_depth,
)


def test_hash_parent_fig1_example():
    assert hash_parent(0b1000100, 2) == 0b10001


def test_hash_parent_level_one_reaches_root():
    assert hash_parent(0b111, 2) == 1


def test_hash_parent_root_raises():
    with pytest.raises(RootHasNoParent):
        hash_parent(1, 2)


def test_hash_parent_agrees_with_floor_division(rng):
    # truncation and integer-division forms of the parent rule agree
    for _ in range(1000):
        c = rng.choice([1, 2, 3])
        level = rng.randint(1, 10)
        code = (1 << (c * level)) | rng.getrandbits(c * level)
        assert hash_parent(code, c) == code // (1 << c)


def test_code_lengths_and_capacity():
    # 100K keywords at 2^c = 4 need depth 9 and 19-bit codes
    assert minimal_depth(100_000, 2) == 9
    assert 2 * 9 + 1 == 19
    # stored length with extra_levels=2: 23 bits generated, 19 active
    tree = build_hash({"a", "b"}, c=2, d=9, extra_levels=2, seed=1)
    stored_bits = max(code.bit_length() for code in tree.stored_codes.values())
    assert stored_bits == 23
    code, _ = tree.encode("a")
    assert code.bit_length() == 19


def test_capacity_exceeded():
    with pytest.raises(CapacityExceeded):
        build_hash({"a", "b", "c", "d", "e"}, c=1, d=2)


def test_single_keyword_tree():
    tree = build_hash({"only"}, c=2, d=1, extra_levels=0, seed=3)
    assert tree.depth == 1
    (leaf,) = [n for n in tree._node_of.values() if n.is_leaf]
    assert leaf.keywords == ("only",)
    assert leaf.ns == tree.root.nc - 1 == 0


def test_every_keyword_resolves_and_levels_match(rng):
    kws = random_keywords(rng, 300)
    tree = build_hash(kws, c=2, d=5, extra_levels=2, seed=9)
    for kw in kws:
        code, scv = tree.encode(kw)
        assert bitcode_level(code, 2) == 5
        assert len(scv) == 5
        assert code.bit_length() == 2 * 5 + 1


def test_collisions_share_a_leaf():
    # 16 keywords into 16 slots: some slot collides for some seed
    rng = random.Random(5)
    kws = random_keywords(rng, 16)
    tree = None
    for seed in range(20):
        candidate = build_hash(kws, c=2, d=2, extra_levels=0, seed=seed)
        if any(len(n.keywords) > 1 for n in candidate._node_of.values()):
            tree = candidate
            break
    assert tree is not None, "no colliding seed in range"
    leaves = [n for n in tree._node_of.values() if n.is_leaf]
    assert sum(len(n.keywords) for n in leaves) == len(kws)
    assert any(len(n.keywords) > 1 for n in leaves)
    # colliding keywords encode to the same code
    multi = next(n for n in leaves if len(n.keywords) > 1)
    codes = {tree.encode(kw)[0] for kw in multi.keywords}
    assert len(codes) == 1


def test_ns_matches_brute_force(rng):
    kws = random_keywords(rng, 200)
    tree = build_hash(kws, c=2, d=4, extra_levels=1, seed=4)
    truth = brute_sibling_counts(tree)
    for code, ns in truth.items():
        assert tree.node(code).ns == ns
        scv = tree.scv_of(code)
        assert scv[-1] == ns


def test_sibling_codes_share_all_but_last_c_bits(rng):
    kws = random_keywords(rng, 150)
    c = 2
    tree = build_hash(kws, c=c, d=4, extra_levels=0, seed=8)

    def walk(node):
        for a in node.children:
            for b in node.children:
                if a is not b:
                    assert a.code >> c == b.code >> c
                    assert a.code != b.code
            walk(a)

    walk(tree.root)


def test_hash_parent_chain_reaches_root(rng):
    kws = random_keywords(rng, 50)
    c = 2
    tree = build_hash(kws, c=c, d=6, extra_levels=0, seed=2)
    for kw in kws:
        code, _ = tree.encode(kw)
        for _ in range(6):
            code = hash_parent(code, c)
        assert code == 1


def test_unseen_keyword_still_codes_deterministically():
    tree = build_hash({"a", "b"}, c=2, d=3, extra_levels=1, seed=11)
    code1, scv1 = tree.encode("never-seen")
    code2, _ = tree.encode("never-seen")
    assert code1 == code2
    assert scv1 is None  # no SCV for codes outside the tree
    assert code1.bit_length() == 2 * 3 + 1


# -- growth handling ---------------------------------------------------------


def test_grow_depth_keeps_old_codes_as_prefixes(rng):
    kws = random_keywords(rng, 400)
    tree = build_hash(kws, c=2, d=5, extra_levels=2, seed=6)
    grown = grow_depth(tree, 7)
    assert grown.d == 7 and grown.extra_levels == 0
    for kw in kws:
        old, _ = tree.encode(kw)
        new, _ = grown.encode(kw)
        # old code is a prefix: truncating the grown code recovers it
        assert new >> (2 * (7 - 5)) == old
        assert grown.has_code(old)  # old codes remain valid internal codes


def test_grow_depth_active_length_example():
    # d 9 -> 10 with 23 stored bits (c=2): active length 19 -> 21
    tree = build_hash({"a", "b", "c"}, c=2, d=9, extra_levels=2, seed=0)
    grown = grow_depth(tree, 10)
    code, _ = grown.encode("a")
    assert code.bit_length() == 21


def test_grow_depth_separates_colliding_keywords():
    # find two keywords colliding at d but distinct in stored bits
    rng = random.Random(13)
    c, d, extra = 2, 2, 3
    pool = random_keywords(rng, 200)
    tree = build_hash(pool[:16], c=c, d=d, extra_levels=extra, seed=1)
    shift = c * extra
    pair = None
    for i, a in enumerate(pool):
        for b in pool[i + 1 :]:
            sa = tree._stored_code(a, c, d + extra, 1)
            sb = tree._stored_code(b, c, d + extra, 1)
            if sa >> shift == sb >> shift and sa != sb:
                pair = (a, b)
                break
        if pair:
            break
    assert pair, "no colliding pair found in pool"
    tree = build_hash(set(pair), c=c, d=d, extra_levels=extra, seed=1)
    a_code, _ = tree.encode(pair[0])
    assert a_code == tree.encode(pair[1])[0]
    grown = grow_depth(tree, d + extra)
    assert grown.encode(pair[0])[0] != grown.encode(pair[1])[0]


def test_grow_depth_without_collisions_preserves_leaf_set():
    kws = {"u", "v", "w"}
    tree = build_hash(kws, c=2, d=6, extra_levels=2, seed=21)
    if any(len(n.keywords) > 1 for n in tree._node_of.values()):
        pytest.skip("unexpected collision at this seed")
    grown = grow_depth(tree, 7)
    assert grown.n_keywords == tree.n_keywords
    for kw in kws:
        old, _ = tree.encode(kw)
        new, _ = grown.encode(kw)
        assert new >> 2 == old


def test_grow_depth_beyond_stored_bits():
    tree = build_hash({"a"}, c=2, d=3, extra_levels=1, seed=0)
    with pytest.raises(ExceedsStoredBits):
        grow_depth(tree, 5)
