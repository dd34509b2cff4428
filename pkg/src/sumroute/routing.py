"""Per-node routing state: tables, coverage-driven summarization, and
the advertisement / query-forwarding handlers.

Tables map coded descriptors to forwarding neighbors.  On insertion a
sibling group (same attribute, same neighbor) merges into its tree
parent once the present count rc reaches ``cov`` times the full
sibling-set size; the check repeats upward, so tables hold the highest
codes the coverage threshold allows.  Sibling-set sizes come from SCVs
(exact) or from the estimator module.

Codes are interned into dense integer ids (one ``CodeSpace`` per run)
so the simulator's hot path works on ints; the public helpers accept
and return plain (attr, code) pairs.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .annotation import TERMINATOR
from .errors import PolicyMismatch
from .estimator import HashEstimatorParams, est_alph_ns, est_hash_ns
from .sumtree import ALPH, HASH, MEANING, SumTree, bitcode_str

NONE = "none"
RT_POLICIES = (NONE, ALPH, HASH, MEANING)

SCV_SOURCE = "scv"
ESTIMATOR_SOURCE = "estimator"

# insert outcome kinds
DUPLICATE = 0
ADDED = 1
ABSORBED = 2
SUMMARIZED = 3
_KIND_NAMES = {DUPLICATE: "duplicate", ADDED: "added", ABSORBED: "absorbed",
               SUMMARIZED: "summarized"}


@dataclass(frozen=True)
class SummarizationConfig:
    policy: str = NONE
    cov: float = 1.0
    coverage_source: str = SCV_SOURCE

    def __post_init__(self):
        if self.policy not in RT_POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if not 0.0 <= self.cov <= 1.0:
            raise ValueError(f"cov must be in [0, 1], got {self.cov}")
        if self.coverage_source not in (SCV_SOURCE, ESTIMATOR_SOURCE):
            raise ValueError(f"unknown coverage source {self.coverage_source!r}")


class CodeSpace:
    """Interns (attr, code) pairs and answers structural questions.

    This is the shared summarization-tree-server view: parent codes,
    levels, SCVs, child sets, and sibling-set sizes.  Hash and meaning
    parents are pure code arithmetic; alph parents consult the tree,
    since an LCP parent is not derivable from a single code.
    """

    def __init__(
        self,
        policy: str,
        trees: Optional[dict[int, SumTree]] = None,
        est_params: Optional[dict[int, HashEstimatorParams]] = None,
    ):
        if policy not in RT_POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        self.policy = policy
        self.trees = trees or {}
        self.est_params = est_params or {}
        self._gid: dict[tuple[int, int | str], int] = {}
        self._attr: list[int] = []
        self._code: list[int | str] = []
        self._scv: list[Optional[tuple[int, ...]]] = []
        self._parent: list[int] = []  # -1 = not computed, -2 = no parent
        self._children: dict[int, tuple[int, ...]] = {}
        self._depth: list[int] = []

    def intern(self, attr: int, code: int | str) -> int:
        key = (attr, code)
        gid = self._gid.get(key)
        if gid is not None:
            return gid
        if self.policy in (HASH, MEANING):
            if not isinstance(code, int) or code < 1:
                raise PolicyMismatch(
                    f"policy {self.policy} needs bit codes, got {code!r}"
                )
        elif not isinstance(code, str):
            raise PolicyMismatch(
                f"policy {self.policy} needs string codes, got {code!r}"
            )
        gid = len(self._code)
        self._gid[key] = gid
        self._attr.append(attr)
        self._code.append(code)
        self._parent.append(-1)  # lazy
        tree = self.trees.get(attr)
        scv = None
        if tree is not None and tree.has_code(code):
            scv = tree.scv_of(code)
        self._scv.append(scv)
        self._depth.append(self._depth_key(attr, code))
        return gid

    def _depth_key(self, attr: int, code: int | str) -> int:
        if self.policy == NONE:
            return 0
        if self.policy == ALPH:
            return len(code)
        tree = self.trees.get(attr)
        c = tree.c if tree is not None else 1
        return (code.bit_length() - 1) // c

    def attr(self, gid: int) -> int:
        return self._attr[gid]

    def code(self, gid: int) -> int | str:
        return self._code[gid]

    def scv(self, gid: int) -> Optional[tuple[int, ...]]:
        return self._scv[gid]

    def depth_key(self, gid: int) -> int:
        return self._depth[gid]

    def parent(self, gid: int) -> Optional[int]:
        p = self._parent[gid]
        if p >= 0:
            return p
        if p == -2:
            return None
        attr = self._attr[gid]
        code = self._code[gid]
        parent_gid: Optional[int] = None
        if self.policy in (HASH, MEANING):
            if code != 1:
                tree = self.trees.get(attr)
                if tree is None or tree.c is None:
                    raise PolicyMismatch(f"no tree for attribute {attr}")
                parent_gid = self.intern(attr, code >> tree.c)
        elif self.policy == ALPH:
            tree = self.trees.get(attr)
            if tree is None:
                raise PolicyMismatch(f"no tree for attribute {attr}")
            pcode = tree.parent_code(code) if tree.has_code(code) else None
            if pcode is not None:
                parent_gid = self.intern(attr, pcode)
        self._parent[gid] = -2 if parent_gid is None else parent_gid
        return parent_gid

    def children(self, gid: int) -> tuple[int, ...]:
        """Tree children of a code (empty for leaves and unknown codes)."""
        cached = self._children.get(gid)
        if cached is not None:
            return cached
        attr = self._attr[gid]
        code = self._code[gid]
        tree = self.trees.get(attr)
        kids: tuple[int, ...] = ()
        if tree is not None and tree.has_code(code):
            kids = tuple(
                self.intern(attr, child.code) for child in tree.node(code).children
            )
        self._children[gid] = kids
        return kids

    def is_strict_ancestor(self, anc: int, gid: int) -> bool:
        if self._attr[anc] != self._attr[gid]:
            return False
        if self.policy == NONE:
            return False
        a_code, g_code = self._code[anc], self._code[gid]
        if self.policy == ALPH:
            return len(a_code) < len(g_code) and g_code.startswith(a_code)
        tree = self.trees.get(self._attr[gid])
        c = tree.c if tree is not None else 1
        gap = self._depth[gid] - self._depth[anc]
        return gap > 0 and (g_code >> (gap * c)) == a_code

    def is_leaf_code(self, gid: int) -> bool:
        """True when the code cannot cover anything deeper."""
        if self.policy == NONE:
            return True
        attr, code = self._attr[gid], self._code[gid]
        tree = self.trees.get(attr)
        if tree is not None and tree.has_code(code):
            return tree.node(code).is_leaf
        if self.policy == HASH and tree is not None:
            return self._depth[gid] >= tree.d
        if self.policy == ALPH:
            return code.endswith(TERMINATOR)
        return False

    def fscs_size(self, gid: int, source: str) -> Optional[int]:
        """Full sibling-set size of the group containing gid, or None
        when it cannot be determined (no summarization then)."""
        if self.policy == MEANING or source == SCV_SOURCE:
            scv = self._scv[gid]
            if not scv:
                return None
            return scv[-1] + 1
        attr = self._attr[gid]
        level = self._depth[gid]
        if self.policy == HASH:
            params = self.est_params.get(attr)
            if params is None or not 1 <= level <= params.d:
                return None
            return est_hash_ns(params.omega, params.c, level, params.d) + 1
        if self.policy == ALPH:
            code = self._code[gid]
            est_level = level - 1 if code.endswith(TERMINATOR) else level
            if est_level < 1:
                return None
            return est_alph_ns(est_level) + 1
        return None

    def format_code(self, gid: int) -> str:
        code = self._code[gid]
        return bitcode_str(code) if isinstance(code, int) else code


@dataclass
class RTEntry:
    """Read-only view of one routing-table entry."""

    attr: int
    code: int | str
    neighbor: int
    scv: Optional[tuple[int, ...]]
    summarized: bool


@dataclass
class InsertOutcome:
    kind: str
    final_code: int | str
    removed: list[tuple[int | str, int]] = field(default_factory=list)


class RoutingTable:
    """One node's routing state over a shared CodeSpace."""

    def __init__(
        self,
        space: CodeSpace,
        cfg: SummarizationConfig,
        max_entries: Optional[int] = None,
    ):
        if cfg.policy != space.policy:
            raise PolicyMismatch(
                f"table policy {cfg.policy!r} vs code space {space.policy!r}"
            )
        self.space = space
        self.cfg = cfg
        self.max_entries = max_entries
        self._mask: dict[int, int] = {}  # gid -> neighbor slot bitmask
        self._size = 0
        self._nb_slot: dict[int, int] = {}
        self._nb_ids: list[int] = []
        # per (attr, slot): depth -> present gids; drives descendant removal
        self._buckets: dict[tuple[int, int], dict[int, set[int]]] = {}
        self._lru: "OrderedDict[tuple[int, int], None]" = OrderedDict()
        self._summarize = cfg.policy != NONE

    # -- bookkeeping --------------------------------------------------------

    def _slot(self, neighbor: int) -> int:
        slot = self._nb_slot.get(neighbor)
        if slot is None:
            slot = len(self._nb_ids)
            self._nb_slot[neighbor] = slot
            self._nb_ids.append(neighbor)
        return slot

    @property
    def size(self) -> int:
        return self._size

    def __len__(self) -> int:
        return self._size

    def _add(self, gid: int, slot: int) -> None:
        self._mask[gid] = self._mask.get(gid, 0) | (1 << slot)
        self._size += 1
        if self._summarize:
            space = self.space
            key = (space.attr(gid), slot)
            depth = space.depth_key(gid)
            self._buckets.setdefault(key, {}).setdefault(depth, set()).add(gid)
        if self.max_entries is not None:
            self._lru[(gid, slot)] = None

    def _remove(self, gid: int, slot: int) -> None:
        bit = 1 << slot
        mask = self._mask.get(gid, 0)
        if not mask & bit:
            return
        mask &= ~bit
        if mask:
            self._mask[gid] = mask
        else:
            del self._mask[gid]
        self._size -= 1
        if self._summarize:
            space = self.space
            levels = self._buckets.get((space.attr(gid), slot))
            if levels is not None:
                depth = space.depth_key(gid)
                bucket = levels.get(depth)
                if bucket is not None:
                    bucket.discard(gid)
                    if not bucket:
                        del levels[depth]
        if self.max_entries is not None:
            self._lru.pop((gid, slot), None)

    def _touch(self, gid: int, slot: int) -> None:
        if self.max_entries is not None:
            key = (gid, slot)
            if key in self._lru:
                self._lru.move_to_end(key)

    # -- core operations ----------------------------------------------------

    def insert(self, gid: int, neighbor: int) -> tuple[int, int, Optional[list]]:
        """Insert a coded descriptor for a forwarding neighbor.

        Returns (kind, final_gid, removed) where final_gid is the code
        representing the descriptor after absorption or summarization
        and removed lists (gid, neighbor) pairs dropped by merges.
        """
        space = self.space
        slot = self._slot(neighbor)
        bit = 1 << slot
        if self._mask.get(gid, 0) & bit:
            self._touch(gid, slot)
            return DUPLICATE, gid, None
        # an ancestor entry already covers this code for the neighbor
        anc = space.parent(gid) if self._summarize else None
        while anc is not None:
            if self._mask.get(anc, 0) & bit:
                self._touch(anc, slot)
                return ABSORBED, anc, None
            anc = space.parent(anc)
        removed: Optional[list] = None
        # an incoming internal code absorbs any present descendants
        if self._summarize and not space.is_leaf_code(gid):
            removed = self._drop_descendants(gid, slot)
        self._add(gid, slot)
        final = gid
        if self._summarize:
            final, merged = self._summarize_up(gid, slot)
            if merged:
                removed = (removed or []) + merged
                self._evict_overflow()
                return SUMMARIZED, final, removed
        self._evict_overflow()
        return ADDED, final, removed

    def _drop_descendants(self, gid: int, slot: int) -> Optional[list]:
        space = self.space
        levels = self._buckets.get((space.attr(gid), slot))
        if not levels:
            return None
        my_depth = space.depth_key(gid)
        victims = [
            g
            for depth, bucket in levels.items()
            if depth > my_depth
            for g in bucket
            if space.is_strict_ancestor(gid, g)
        ]
        if not victims:
            return None
        for g in victims:
            self._remove(g, slot)
        nb = self._nb_ids[slot]
        return [(g, nb) for g in victims]

    def _group_members(self, parent: int, slot: int) -> list[int]:
        bit = 1 << slot
        mask = self._mask
        return [g for g in self.space.children(parent) if mask.get(g, 0) & bit]

    def _summarize_up(self, gid: int, slot: int) -> tuple[int, list]:
        """Merge full-enough sibling groups upward from gid."""
        space = self.space
        cov = self.cfg.cov
        source = self.cfg.coverage_source
        removed: list = []
        cur = gid
        while True:
            parent = space.parent(cur)
            if parent is None:
                break
            size = space.fscs_size(cur, source)
            if size is None:
                break
            members = self._group_members(parent, slot)
            rc = len(members)
            if rc < 1 or rc < cov * size - 1e-9:
                break
            nb = self._nb_ids[slot]
            for g in members:
                self._remove(g, slot)
                removed.append((g, nb))
            # deeper strays under the parent (e.g. received from a peer
            # that merged on a different schedule) must not survive
            # beneath the new covering entry
            strays = self._drop_descendants(parent, slot)
            if strays:
                removed.extend(strays)
            self._add(parent, slot)
            cur = parent
        return cur, removed

    def _evict_overflow(self) -> list:
        evicted = []
        if self.max_entries is not None:
            while self._size > self.max_entries and self._lru:
                (gid, slot), _ = self._lru.popitem(last=False)
                self._remove(gid, slot)
                evicted.append((gid, self._nb_ids[slot]))
        return evicted

    def covers_mask(self, gid: int) -> int:
        """Neighbor slot mask of entries equal to or an ancestor of gid."""
        mask = self._mask.get(gid, 0)
        if self._summarize:
            space = self.space
            anc = space.parent(gid)
            while anc is not None:
                mask |= self._mask.get(anc, 0)
                anc = space.parent(anc)
        return mask

    def covers(self, gid: int, neighbor: int) -> bool:
        slot = self._nb_slot.get(neighbor)
        if slot is None:
            return False
        return bool(self.covers_mask(gid) & (1 << slot))

    def lookup_neighbors(
        self,
        coded_values: dict[int, int],
        alpha: float,
        n_attrs: int,
        exclude: Optional[int] = None,
    ) -> list[int]:
        """Forwarding neighbors alpha-matching a coded query.

        A neighbor qualifies when, over all n attributes, the ones the
        query omits plus the ones this table covers toward it reach
        alpha * n.  Covering means an entry whose code equals the query
        code or is one of its tree ancestors.
        """
        base = n_attrs - len(coded_values)
        need = alpha * n_attrs - 1e-9
        masks = []
        union = 0
        for gid in coded_values.values():
            m = self.covers_mask(gid)
            masks.append(m)
            union |= m
        result = []
        exclude_slot = self._nb_slot.get(exclude) if exclude is not None else None
        for slot in range(len(self._nb_ids)):
            bit = 1 << slot
            if slot == exclude_slot or not union & bit:
                continue
            score = base + sum(1 for m in masks if m & bit)
            if score >= need:
                result.append(self._nb_ids[slot])
        if self.max_entries is not None and result:
            self._touch_hits(coded_values, result)
        return sorted(result)

    def _touch_hits(self, coded_values: dict[int, int], neighbors: list[int]) -> None:
        for nb in neighbors:
            slot = self._nb_slot[nb]
            bit = 1 << slot
            for gid in coded_values.values():
                cur = gid
                while cur is not None:
                    if self._mask.get(cur, 0) & bit:
                        self._touch(cur, slot)
                        break
                    cur = self.space.parent(cur) if self._summarize else None

    def lru_bound(self, max_entries: int) -> list:
        """Shrink the table to at most max_entries, evicting LRU first."""
        if max_entries < 0:
            raise ValueError("max_entries must be >= 0")
        if self.max_entries is None:
            # promote to a bounded table: seed recency in insertion order
            for gid in list(self._mask):
                mask = self._mask[gid]
                slot = 0
                while mask:
                    if mask & 1:
                        self._lru[(gid, slot)] = None
                    mask >>= 1
                    slot += 1
        self.max_entries = max_entries
        return [
            (self.space.code(g), nb) for g, nb in self._evict_overflow()
        ]

    # -- views ---------------------------------------------------------------

    def entries(self) -> Iterable[RTEntry]:
        space = self.space
        for gid in self._mask:
            mask = self._mask[gid]
            slot = 0
            while mask:
                if mask & 1:
                    yield RTEntry(
                        attr=space.attr(gid),
                        code=space.code(gid),
                        neighbor=self._nb_ids[slot],
                        scv=space.scv(gid),
                        summarized=not space.is_leaf_code(gid),
                    )
                mask >>= 1
                slot += 1

    def dump(self) -> str:
        """Stable text dump: one 'attr code neighbor scv summarized' line."""
        lines = []
        for entry in self.entries():
            code_txt = (
                bitcode_str(entry.code)
                if isinstance(entry.code, int)
                else (entry.code or "<root>")
            )
            scv_txt = ",".join(str(x) for x in entry.scv) if entry.scv else "-"
            lines.append(
                f"{entry.attr} {code_txt} {entry.neighbor} {scv_txt} "
                f"{int(entry.summarized)}"
            )
        return "\n".join(sorted(lines)) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# spec-shaped wrappers (tests and external callers)
# ---------------------------------------------------------------------------


def rt_insert(
    table: RoutingTable, attr: int, code: int | str, neighbor: int
) -> InsertOutcome:
    gid = table.space.intern(attr, code)
    kind, final, removed = table.insert(gid, neighbor)
    return InsertOutcome(
        kind=_KIND_NAMES[kind],
        final_code=table.space.code(final),
        removed=[(table.space.code(g), nb) for g, nb in (removed or [])],
    )


def rt_lookup(
    table: RoutingTable,
    coded_query: dict[int, int | str],
    alpha: float,
    n_attrs: int,
    exclude: Optional[int] = None,
) -> list[int]:
    coded = {
        attr: table.space.intern(attr, code) for attr, code in coded_query.items()
    }
    return table.lookup_neighbors(coded, alpha, n_attrs, exclude)


# ---------------------------------------------------------------------------
# protocol messages and per-node handlers
# ---------------------------------------------------------------------------


@dataclass
class AdvMsg:
    """One advertisement transmission: a host's coded descriptors."""

    origin: int
    sender: int
    descriptors: tuple[tuple[int, int], ...]  # (attr, gid)
    hops_remaining: Optional[int]  # None = unbounded


@dataclass
class QueryMsg:
    qid: int
    sender: Optional[int]
    values: dict[int, int]  # attr -> gid
    alpha: float
    hops_remaining: Optional[int]
    path: tuple[int, ...]  # nodes visited, source first


@dataclass
class ResponseMsg:
    qid: int
    responder: int
    stream_ids: tuple[str, ...]
    path_remaining: tuple[int, ...]  # reverse route yet to walk; last = source


class NodeState:
    """Mutable per-node protocol state."""

    __slots__ = ("node_id", "neighbors", "table", "streams", "seen_advs",
                 "query_targets")

    def __init__(self, node_id: int, neighbors: list[int], table: RoutingTable):
        self.node_id = node_id
        self.neighbors = sorted(neighbors)
        self.table = table
        # (stream_id, coded values dict) for locally hosted streams
        self.streams: list[tuple[str, dict[int, int]]] = []
        self.seen_advs: set[int] = set()
        # per query id: neighbors this node has already forwarded to
        self.query_targets: dict[int, set[int]] = {}


def handle_adv(state: NodeState, msg: AdvMsg) -> list[tuple[int, AdvMsg]]:
    """Apply an advertisement to the table; return (target, msg) forwards.

    Each node processes one advertisement per origin (repeat arrivals
    are duplicates: no table growth, no re-forward).  Forwarded
    descriptors reflect this node's post-summarization representation;
    targets exclude the neighbor this message's information came from,
    i.e. the sender.  Excluding neighbors merely *recorded* for the
    individual descriptors would cut the flood at nodes whose entries
    stem from different origins via divergent paths and silently lose
    multi-descriptor reachability.
    """
    if msg.origin == state.node_id or msg.origin in state.seen_advs:
        return []
    state.seen_advs.add(msg.origin)
    table = state.table
    space = table.space
    for _attr, gid in msg.descriptors:
        table.insert(gid, msg.sender)
    if msg.hops_remaining == 0:
        return []
    # representation after the whole message was applied: the covering
    # entry (self or ancestor) now present toward the sender
    sender_bit = 1 << table._nb_slot[msg.sender]
    reps: list[tuple[int, int]] = []
    rep_seen: set[int] = set()
    for attr, gid in msg.descriptors:
        cur: Optional[int] = gid
        rep = gid
        while cur is not None:
            if table._mask.get(cur, 0) & sender_bit:
                rep = cur
                break
            cur = space.parent(cur)
        if rep not in rep_seen:
            rep_seen.add(rep)
            reps.append((attr, rep))
    if not reps:
        return []
    next_hops = None if msg.hops_remaining is None else msg.hops_remaining - 1
    fwd_msg = AdvMsg(
        origin=msg.origin,
        sender=state.node_id,
        descriptors=tuple(reps),
        hops_remaining=next_hops,
    )
    return [(nb, fwd_msg) for nb in state.neighbors if nb != msg.sender]


def handle_query(
    state: NodeState,
    msg: QueryMsg,
    n_attrs: int,
    flood_on_miss: bool = False,
) -> tuple[Optional[list[str]], list[int]]:
    """Process one query arrival.

    Returns (matching local stream ids, or None on repeat arrivals;
    forwarding targets).  Local matchmaking happens once per query id;
    a repeat arrival can still forward, but only toward neighbors this
    node has not targeted for the query yet, so forwarding terminates
    while no search direction is lost to arrival-order races (the
    lookup excludes each copy's own arrival neighbor).  With
    ``flood_on_miss`` (the LRU-bounded cache baseline) an empty lookup
    falls back to broadcasting to all other neighbors.
    """
    done = state.query_targets.get(msg.qid)
    first = done is None
    if first:
        done = set()
        state.query_targets[msg.qid] = done
    local: Optional[list[str]] = None
    if first:
        local = []
        need = msg.alpha * n_attrs - 1e-9
        for stream_id, values in state.streams:
            matches = n_attrs
            for attr, gid in msg.values.items():
                have = values.get(attr)
                if have is not None and have != gid:
                    matches -= 1
            if matches >= need:
                local.append(stream_id)
    if msg.hops_remaining == 0:
        return local, []
    targets = state.table.lookup_neighbors(
        msg.values, msg.alpha, n_attrs, exclude=msg.sender
    )
    if not targets and flood_on_miss:
        targets = [nb for nb in state.neighbors if nb != msg.sender]
    fresh = [nb for nb in targets if nb not in done]
    done.update(fresh)
    return local, fresh
