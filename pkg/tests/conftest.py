"""Shared oracles and fixtures.

The oracles here are deliberately independent of the package's
implementations: a plain character-trie builder for the alph policy
and exhaustive sibling counting for built trees.
"""

from __future__ import annotations

import random

import pytest


class CharTrieOracle:
    """Uncompressed character trie over keyword + '$', then chain
    compression: the reference shape for the path-compressed trie."""

    def __init__(self, keywords):
        self.root = {}
        for kw in sorted(keywords):
            node = self.root
            for ch in kw + "$":
                node = node.setdefault(ch, {})

    def compressed(self):
        """Return {code: sorted child codes} for root and branch nodes."""
        out = {}

        def walk(node, prefix):
            # follow single-child chains to the next branch point or leaf
            while len(node) == 1:
                ch = next(iter(node))
                prefix += ch
                node = node[ch]
            if not node:
                return prefix  # leaf (prefix ends with '$')
            out[prefix] = sorted(walk(child, prefix + ch) for ch, child in node.items())
            return prefix

        top = sorted(walk(child, ch) for ch, child in self.root.items())
        out[""] = top
        return out


def tree_shape(tree):
    """{code: sorted child codes} of a built SumTree, root as ''."""
    out = {}

    def walk(node):
        if node.children:
            out[node.code] = sorted(child.code for child in node.children)
            for child in node.children:
                walk(child)

    walk(tree.root)
    return out


def brute_sibling_counts(tree):
    """{code: true ns} for every non-root node, by counting children."""
    out = {}

    def walk(node):
        for child in node.children:
            out[child.code] = node.nc - 1
            walk(child)

    walk(tree.root)
    return out


def lcp(a: str, b: str) -> str:
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return a[:i]
    return a[:n]


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)


def random_keywords(rng, count, min_len=3, max_len=12):
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789-"
    out = set()
    while len(out) < count:
        n = rng.randint(min_len, max_len)
        out.add("".join(rng.choice(alphabet) for _ in range(n)))
    return sorted(out)
