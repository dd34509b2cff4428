import random

import pytest

from conftest import random_keywords
from sumroute.embedding import fallback_embeddings
from sumroute.errors import MalformedTreeFile
from sumroute.sumtree import (
    build_alph,
    build_hash,
    build_meaning,
    deserialize_tree,
    serialize_tree,
    trees_equal,
)


def roundtrip(tree):
    data = serialize_tree(tree)
    back = deserialize_tree(data)
    assert trees_equal(tree, back)
    # byte-exact: reserializing yields identical bytes
    assert serialize_tree(back) == data
    return back


def test_singleton_tree_roundtrips():
    roundtrip(build_alph({"x"}))
    roundtrip(build_hash({"x"}, c=2, d=1, extra_levels=0, seed=0))


def test_alph_roundtrip(rng):
    roundtrip(build_alph(random_keywords(rng, 80)))


def test_hash_roundtrip_10k_keywords():
    rng = random.Random(2)
    kws = random_keywords(rng, 10_000)
    tree = build_hash(kws, c=2, d=7, extra_levels=2, seed=5)
    back = roundtrip(tree)
    # stored codes survive, so growth still works after a reload
    assert back.stored_codes == tree.stored_codes


def test_meaning_roundtrip(rng):
    kws = random_keywords(rng, 60)
    tree = build_meaning(kws, fallback_embeddings(kws), c=2, seed=3)
    back = roundtrip(tree)
    for kw in kws:
        assert back.encode(kw) == tree.encode(kw)


def test_bad_magic_rejected():
    data = serialize_tree(build_alph({"a"}))
    with pytest.raises(MalformedTreeFile):
        deserialize_tree(b"XXXX" + data[4:])


def test_version_mismatch_rejected():
    data = bytearray(serialize_tree(build_alph({"a"})))
    data[4] = 99  # version byte
    with pytest.raises(MalformedTreeFile):
        deserialize_tree(bytes(data))


def test_truncated_file_rejected():
    data = serialize_tree(build_alph({"abc", "abd"}))
    with pytest.raises(MalformedTreeFile):
        deserialize_tree(data[: len(data) // 2])


def test_trailing_garbage_rejected():
    data = serialize_tree(build_alph({"a"}))
    with pytest.raises(MalformedTreeFile):
        deserialize_tree(data + b"\x00")


def test_serialization_deterministic(rng):
    kws = random_keywords(rng, 100)
    t1 = build_hash(kws, c=2, d=5, extra_levels=1, seed=1)
    t2 = build_hash(kws, c=2, d=5, extra_levels=1, seed=1)
    assert serialize_tree(t1) == serialize_tree(t2)
