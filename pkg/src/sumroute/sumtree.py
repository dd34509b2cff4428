"""Summarization trees: per-attribute keyword hierarchies and codes.

Three policies build a tree over an attribute's system keyword set:

* alph    -- path-compressed trie; a parent is the longest common
             prefix (LCP) of its children, leaves are keyword + '$'.
* hash    -- keywords hashed to fixed-width bit codes (a leading 1 bit
             followed by c*d bits); a parent drops the last c bits.
* meaning -- recursive k-means over keyword embeddings; child j of a
             parent coded p gets p * 2^c + j.

Every node carries a sibling count (ns = parent child count - 1); the
root-to-node sequence of sibling counts is the node's SCV, which lets
routing tables compute exact full-sibling-set sizes without hosting
the tree.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .annotation import TERMINATOR
from .embedding import EmbeddingSet, kmeans
from .errors import (
    CapacityExceeded,
    EmptyKeywordSet,
    EmptySCV,
    ExceedsStoredBits,
    MalformedTreeFile,
    ReservedCharacter,
    RootHasNoParent,
    UnknownKeyword,
)
from .hashutil import hash64, hash_bits

ALPH = "alph"
HASH = "hash"
MEANING = "meaning"
POLICIES = (ALPH, HASH, MEANING)

#: Default alphabet size assumed for alph sibling counts (lowercased
#: letters, digits, common separators, and the terminator).
DEFAULT_N_CHAR = 64

#: Default spare hash-tree levels kept in stored codes for growth.
DEFAULT_EXTRA_LEVELS = 2

Code = int | str  # bit code (int) for hash/meaning, string for alph
SCV = tuple[int, ...]


def bitcode_level(code: int, c: int) -> int:
    """Tree level of a bit code: root (1) is level 0, leaves level d."""
    return (code.bit_length() - 1) // c


def bitcode_str(code: int) -> str:
    return format(code, "b")


def hash_parent(code: int, c: int) -> int:
    """Parent of a bit code: drop the last c bits (= floor(code / 2^c))."""
    if code < 1:
        raise ValueError(f"invalid bit code {code}")
    if (code.bit_length() - 1) % c != 0:
        raise ValueError(f"code {bitcode_str(code)} is not aligned to c={c}")
    if code == 1:
        raise RootHasNoParent("root code 1 has no parent")
    return code >> c


def alph_parent_prefix(code: str) -> str:
    """String-level parent guess for alph codes: strip one character.

    Only used for estimator-level bookkeeping; the real tree parent is
    the LCP of the full sibling set and comes from the tree itself.
    """
    if not code:
        raise RootHasNoParent("alph root '' has no parent")
    return code[:-1]


def scv_parent(scv: SCV) -> SCV:
    """SCV of the parent node: drop the last sibling count.

    For the meaning policy the result is all 2^c - 1 entries, because
    every internal node ends up in a full sibling set by construction.
    """
    if not scv:
        raise EmptySCV("root SCV is empty; no parent")
    return scv[:-1]


@dataclass
class SumTreeNode:
    code: Code
    children: list["SumTreeNode"] = field(default_factory=list)
    ns: int = 0
    keywords: tuple[str, ...] = ()

    @property
    def nc(self) -> int:
        return len(self.children)

    @property
    def is_leaf(self) -> bool:
        return not self.children


class SumTree:
    """One attribute's summarization tree plus its keyword index."""

    def __init__(
        self,
        policy: str,
        root: SumTreeNode,
        c: Optional[int] = None,
        d: Optional[int] = None,
        n_char: int = DEFAULT_N_CHAR,
        extra_levels: int = 0,
        seed: int = 0,
        stored_codes: Optional[dict[str, int]] = None,
    ):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        self.policy = policy
        self.root = root
        self.c = c
        self.d = d
        self.n_char = n_char
        self.extra_levels = extra_levels
        self.seed = seed
        self.stored_codes = stored_codes or {}
        self._leaf_of: dict[str, SumTreeNode] = {}
        self._node_of: dict[Code, SumTreeNode] = {}
        self._parent_of: dict[Code, Code] = {}
        self._scv_of: dict[Code, SCV] = {}
        self._index()

    def _index(self) -> None:
        self._leaf_of.clear()
        self._node_of.clear()
        self._parent_of.clear()
        self._scv_of.clear()
        stack: list[tuple[SumTreeNode, SCV]] = [(self.root, ())]
        while stack:
            node, scv = stack.pop()
            self._node_of[node.code] = node
            self._scv_of[node.code] = scv
            for kw in node.keywords:
                self._leaf_of[kw] = node
            child_ns = node.nc - 1
            for child in node.children:
                child.ns = child_ns
                self._parent_of[child.code] = node.code
                stack.append((child, scv + (child_ns,)))

    # -- lookups ----------------------------------------------------------

    def keywords(self) -> list[str]:
        return sorted(self._leaf_of)

    @property
    def n_keywords(self) -> int:
        return len(self._leaf_of)

    @property
    def n_nodes(self) -> int:
        return len(self._node_of)

    @property
    def depth(self) -> int:
        return max(len(scv) for scv in self._scv_of.values())

    def has_code(self, code: Code) -> bool:
        return code in self._node_of

    def node(self, code: Code) -> SumTreeNode:
        return self._node_of[code]

    def scv_of(self, code: Code) -> SCV:
        return self._scv_of[code]

    def parent_code(self, code: Code) -> Optional[Code]:
        """Tree parent of a known code; None for the root."""
        if code == self.root.code:
            return None
        return self._parent_of[code]

    def encode(self, keyword: str) -> tuple[Code, Optional[SCV]]:
        """Leaf code and its SCV for a keyword.

        Hash trees can code keywords never seen at build time (queries
        for unknown values); those carry no SCV.  The other policies
        require tree membership.
        """
        leaf = self._leaf_of.get(keyword)
        if leaf is not None:
            return leaf.code, self._scv_of[leaf.code]
        if self.policy == HASH:
            return self._hash_code(keyword), None
        raise UnknownKeyword(keyword)

    def _hash_code(self, keyword: str) -> int:
        stored = self._stored_code(keyword, self.c, self.d + self.extra_levels, self.seed)
        return stored >> (self.c * self.extra_levels)

    @staticmethod
    def _stored_code(keyword: str, c: int, levels: int, seed: int) -> int:
        nbits = c * levels
        return (1 << nbits) | hash_bits(keyword, nbits, seed)

    # -- level accounting (estimator support) ------------------------------

    def code_level(self, code: Code) -> int:
        """Estimator level of a code.

        Bit codes: tree level (root 0 .. leaves d).  Alph codes: the
        prefix length in characters, with the leaf terminator excluded
        so a leaf's level is its keyword length.
        """
        if self.policy == ALPH:
            assert isinstance(code, str)
            if code.endswith(TERMINATOR):
                return len(code) - 1
            return len(code)
        assert isinstance(code, int)
        return bitcode_level(code, self.c)


# ---------------------------------------------------------------------------
# alph: path-compressed trie over keyword + terminator
# ---------------------------------------------------------------------------


def build_alph(keywords: Iterable[str], n_char: int = DEFAULT_N_CHAR) -> SumTree:
    kws = sorted(set(keywords))
    if not kws:
        raise EmptyKeywordSet("alph tree needs at least one keyword")
    for kw in kws:
        if TERMINATOR in kw:
            raise ReservedCharacter(f"keyword {kw!r} contains {TERMINATOR!r}")
        if not kw:
            raise ValueError("empty keyword")
    codes = [kw + TERMINATOR for kw in kws]

    root = SumTreeNode(code="")
    for group in _group_by_next_char(codes, 0):
        root.children.append(_build_radix(group))
    _check_alph_widths(root, n_char)
    return SumTree(ALPH, root, n_char=n_char)


def _group_by_next_char(codes: list[str], pos: int) -> list[list[str]]:
    """Split sorted codes into runs sharing the character at `pos`."""
    groups: list[list[str]] = []
    last = None
    for code in codes:
        ch = code[pos]
        if ch != last:
            groups.append([])
            last = ch
        groups[-1].append(code)
    return groups


def _build_radix(codes: list[str]) -> SumTreeNode:
    """Radix subtree over sorted leaf codes sharing >= 1 leading char."""
    if len(codes) == 1:
        code = codes[0]
        return SumTreeNode(code=code, keywords=(code[: -len(TERMINATOR)],))
    lcp = _lcp(codes[0], codes[-1])  # sorted input: ends bound the LCP
    node = SumTreeNode(code=lcp)
    for group in _group_by_next_char(codes, len(lcp)):
        node.children.append(_build_radix(group))
    return node


def _lcp(a: str, b: str) -> str:
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return a[:i]
    return a[:n]


def _check_alph_widths(root: SumTreeNode, n_char: int) -> None:
    stack = [root]
    while stack:
        node = stack.pop()
        if node.nc > n_char:
            raise ValueError(
                f"node {node.code!r} has {node.nc} children; "
                f"sibling counts do not fit N_char={n_char}"
            )
        stack.extend(node.children)


# ---------------------------------------------------------------------------
# hash: seeded uniform codes, parents by truncation
# ---------------------------------------------------------------------------


def build_hash(
    keywords: Iterable[str],
    c: int,
    d: int,
    extra_levels: int = DEFAULT_EXTRA_LEVELS,
    seed: int = 0,
) -> SumTree:
    kws = sorted(set(keywords))
    if not kws:
        raise EmptyKeywordSet("hash tree needs at least one keyword")
    if c < 1 or d < 1 or extra_levels < 0:
        raise ValueError("need c >= 1, d >= 1, extra_levels >= 0")
    if (1 << c) ** d < len(kws):
        raise CapacityExceeded(
            f"(2^{c})^{d} = {(1 << c) ** d} < {len(kws)} keywords"
        )
    stored_bits = c * (d + extra_levels)
    if stored_bits + 1 > 64:
        raise ValueError(f"stored code needs {stored_bits + 1} bits; max is 64")

    stored = {kw: SumTree._stored_code(kw, c, d + extra_levels, seed) for kw in kws}
    return SumTree(
        HASH,
        _assemble_bit_tree(stored, c, shift=c * extra_levels),
        c=c,
        d=d,
        extra_levels=extra_levels,
        seed=seed,
        stored_codes=stored,
    )


def _assemble_bit_tree(stored: dict[str, int], c: int, shift: int) -> SumTreeNode:
    """Materialize internal nodes by truncating active leaf codes."""
    by_leaf: dict[int, list[str]] = {}
    for kw in sorted(stored):
        by_leaf.setdefault(stored[kw] >> shift, []).append(kw)

    children_of: dict[int, set[int]] = {}
    for code in by_leaf:
        cur = code
        while cur != 1:
            parent = cur >> c
            kids = children_of.setdefault(parent, set())
            if cur in kids:
                break
            kids.add(cur)
            cur = parent

    def make(code: int) -> SumTreeNode:
        kids = children_of.get(code)
        if not kids:
            return SumTreeNode(code=code, keywords=tuple(by_leaf[code]))
        return SumTreeNode(code=code, children=[make(k) for k in sorted(kids)])

    if 1 not in children_of:  # single leaf hashed straight under root
        return SumTreeNode(code=1, children=[make(code) for code in sorted(by_leaf)])
    return make(1)


def grow_depth(tree: SumTree, new_d: int) -> SumTree:
    """Re-derive a hash tree at a larger depth from the stored codes.

    Existing active codes stay prefixes of the longer codes, so routing
    entries built at the old depth remain valid internal codes.
    """
    if tree.policy != HASH:
        raise ValueError("grow_depth applies to hash trees only")
    if new_d <= tree.d:
        raise ValueError(f"new_d must exceed current depth {tree.d}")
    stored_levels = tree.d + tree.extra_levels
    if new_d > stored_levels:
        raise ExceedsStoredBits(
            f"stored codes cover {stored_levels} levels; cannot grow to {new_d}"
        )
    new_extra = stored_levels - new_d
    return SumTree(
        HASH,
        _assemble_bit_tree(tree.stored_codes, tree.c, shift=tree.c * new_extra),
        c=tree.c,
        d=new_d,
        extra_levels=new_extra,
        seed=tree.seed,
        stored_codes=dict(tree.stored_codes),
    )


# ---------------------------------------------------------------------------
# meaning: recursive k-means over embeddings
# ---------------------------------------------------------------------------


def build_meaning(
    keywords: Iterable[str],
    emb: EmbeddingSet,
    c: int,
    seed: int = 0,
) -> SumTree:
    kws = sorted(set(keywords))
    if not kws:
        raise EmptyKeywordSet("meaning tree needs at least one keyword")
    if c < 1:
        raise ValueError("need 2^c >= 2")
    for kw in kws:
        emb.get(kw)  # raises MissingEmbedding early

    fanout = 1 << c
    root = _grow_meaning(1, kws, emb, c, fanout, seed)
    return SumTree(MEANING, root, c=c, seed=seed)


def _grow_meaning(
    code: int,
    kws: list[str],
    emb: EmbeddingSet,
    c: int,
    fanout: int,
    seed: int,
) -> SumTreeNode:
    k = len(kws)
    if k == 1:
        return SumTreeNode(code=code, keywords=(kws[0],))
    node = SumTreeNode(code=code)
    if k <= fanout:
        # Few enough keywords: spawn leaves directly, no clustering.
        for j, kw in enumerate(kws):
            node.children.append(
                SumTreeNode(code=(code << c) | j, keywords=(kw,))
            )
        return node
    clusters = kmeans(emb.matrix(kws), fanout, seed=hash64(f"m{code}", seed))
    groups = [sorted(kws[i] for i in idx) for idx in clusters]
    # Child index j: largest cluster first, ties by smallest keyword, so
    # codes are stable across runs.
    groups.sort(key=lambda g: (-len(g), g[0]))
    for j, group in enumerate(groups):
        node.children.append(_grow_meaning((code << c) | j, group, emb, c, fanout, seed))
    return node


# ---------------------------------------------------------------------------
# binary tree files
# ---------------------------------------------------------------------------

_MAGIC = b"STRE"
_VERSION = 1
_POLICY_IDS = {ALPH: 1, HASH: 2, MEANING: 3}
_POLICY_NAMES = {v: k for k, v in _POLICY_IDS.items()}


def serialize_tree(tree: SumTree) -> bytes:
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(
        struct.pack(
            ">BBBHI",
            _VERSION,
            _POLICY_IDS[tree.policy],
            tree.c or 0,
            tree.d or 0,
            tree.n_keywords,
        )
    )
    meta = json.dumps(
        {
            "n_char": tree.n_char,
            "extra_levels": tree.extra_levels,
            "seed": tree.seed,
        },
        sort_keys=True,
    ).encode("ascii")
    buf.write(struct.pack(">H", len(meta)))
    buf.write(meta)
    _write_node(buf, tree, tree.root)
    return buf.getvalue()


def _write_node(buf: io.BytesIO, tree: SumTree, node: SumTreeNode) -> None:
    if tree.policy == ALPH:
        raw = str(node.code).encode("utf-8")
    else:
        code = int(node.code)
        raw = code.to_bytes((code.bit_length() + 7) // 8, "big")
    buf.write(struct.pack(">H", len(raw)))
    buf.write(raw)
    buf.write(struct.pack(">HH", node.nc, len(node.keywords)))
    for kw in node.keywords:
        kw_raw = kw.encode("utf-8")
        buf.write(struct.pack(">H", len(kw_raw)))
        buf.write(kw_raw)
        if tree.policy == HASH:
            buf.write(struct.pack(">Q", tree.stored_codes[kw]))
    for child in node.children:
        _write_node(buf, tree, child)


def deserialize_tree(data: bytes) -> SumTree:
    buf = io.BytesIO(data)
    if buf.read(4) != _MAGIC:
        raise MalformedTreeFile("bad magic")
    try:
        version, policy_id, c, d, n_keywords = struct.unpack(">BBBHI", buf.read(9))
    except struct.error:
        raise MalformedTreeFile("truncated header")
    if version != _VERSION:
        raise MalformedTreeFile(f"unsupported version {version}")
    if policy_id not in _POLICY_NAMES:
        raise MalformedTreeFile(f"unknown policy id {policy_id}")
    policy = _POLICY_NAMES[policy_id]
    try:
        (meta_len,) = struct.unpack(">H", buf.read(2))
        meta = json.loads(buf.read(meta_len).decode("ascii"))
        stored: dict[str, int] = {}
        root = _read_node(buf, policy, stored)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise MalformedTreeFile(f"corrupt tree body: {exc}") from None
    if buf.read(1):
        raise MalformedTreeFile("trailing bytes after tree")
    tree = SumTree(
        policy,
        root,
        c=c or None,
        d=d or None,
        n_char=meta["n_char"],
        extra_levels=meta["extra_levels"],
        seed=meta["seed"],
        stored_codes=stored,
    )
    if tree.n_keywords != n_keywords:
        raise MalformedTreeFile(
            f"header says {n_keywords} keywords, tree holds {tree.n_keywords}"
        )
    return tree


def _read_node(buf: io.BytesIO, policy: str, stored: dict[str, int]) -> SumTreeNode:
    (code_len,) = struct.unpack(">H", buf.read(2))
    raw = buf.read(code_len)
    if len(raw) != code_len:
        raise MalformedTreeFile("truncated code")
    code: Code
    if policy == ALPH:
        code = raw.decode("utf-8")
    else:
        code = int.from_bytes(raw, "big") if raw else 0
        if code < 1:
            raise MalformedTreeFile("bit code must be >= 1")
    nc, nkw = struct.unpack(">HH", buf.read(4))
    keywords = []
    for _ in range(nkw):
        (kw_len,) = struct.unpack(">H", buf.read(2))
        kw = buf.read(kw_len).decode("utf-8")
        keywords.append(kw)
        if policy == HASH:
            (stored_code,) = struct.unpack(">Q", buf.read(8))
            stored[kw] = stored_code
    node = SumTreeNode(code=code, keywords=tuple(keywords))
    node.children = [_read_node(buf, policy, stored) for _ in range(nc)]
    return node


def trees_equal(a: SumTree, b: SumTree) -> bool:
    """Structural equality: codes, child order, ns, keywords."""
    if (a.policy, a.c, a.d, a.n_char, a.extra_levels, a.seed) != (
        b.policy,
        b.c,
        b.d,
        b.n_char,
        b.extra_levels,
        b.seed,
    ):
        return False
    if a.stored_codes != b.stored_codes:
        return False

    def eq(x: SumTreeNode, y: SumTreeNode) -> bool:
        if (x.code, x.ns, x.keywords, x.nc) != (y.code, y.ns, y.keywords, y.nc):
            return False
        return all(eq(xc, yc) for xc, yc in zip(x.children, y.children))

    return eq(a.root, b.root)


def minimal_depth(n_keywords: int, c: int) -> int:
    """Smallest d with (2^c)^d >= n_keywords."""
    if n_keywords < 1:
        raise EmptyKeywordSet("need at least one keyword")
    d = 1
    while (1 << c) ** d < n_keywords:
        d += 1
    return d
