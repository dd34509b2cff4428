"""Multi-attribute annotation (MAA) data model and matchmaking.

A data stream is described by at most one keyword descriptor per
attribute; a query gives a partial descriptor set plus a match
threshold alpha.  Matching is per-attribute equality-or-absent: a
stream matches a query when at least ``alpha * n`` of the n registered
attributes attr-match.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .errors import ReservedCharacter

#: Reserved terminator appended to leaf codes in the alphabetical tree.
#: Raw keyword values must never contain it.
TERMINATOR = "$"


def normalize_value(value: str) -> str:
    """Canonical keyword form: trimmed, case-folded at ingestion."""
    v = value.strip().lower()
    if TERMINATOR in v:
        raise ReservedCharacter(f"value {value!r} contains reserved {TERMINATOR!r}")
    return v


class AttributeRegistry:
    """Stable attribute-name -> id mapping for one run."""

    def __init__(self, names: Iterable[str]):
        self.names: list[str] = []
        self._ids: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        name = name.strip().lower()
        if name in self._ids:
            return self._ids[name]
        attr_id = len(self.names)
        self.names.append(name)
        self._ids[name] = attr_id
        return attr_id

    def id_of(self, name: str) -> int:
        return self._ids[name.strip().lower()]

    def __contains__(self, name: str) -> bool:
        return name.strip().lower() in self._ids

    @property
    def n(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class Descriptor:
    """One (attribute, value) pair.  `value` is a raw keyword before
    encoding and a tree code afterwards."""

    attr: int
    value: str


@dataclass(frozen=True)
class StreamAnnotation:
    """A stream's metadata: at most one descriptor per attribute."""

    stream_id: str
    values: dict[int, str] = field(default_factory=dict)

    def descriptors(self) -> Iterator[Descriptor]:
        for attr in sorted(self.values):
            yield Descriptor(attr, self.values[attr])

    def value(self, attr: int) -> Optional[str]:
        return self.values.get(attr)


@dataclass(frozen=True)
class Query:
    """Discovery query: partial descriptor set, threshold, source node.

    ``hop_bound`` is the forwarding bound b_q; None means unbounded.
    """

    values: dict[int, str]
    alpha: float
    src: int
    hop_bound: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.values:
            raise ValueError("query must give at least one descriptor")


def attr_match(q_value: Optional[str], ds_value: Optional[str]) -> bool:
    """Per-attribute match: equal values, or either side absent."""
    if q_value is None or ds_value is None:
        return True
    return q_value == ds_value


def match_count(q_values: dict[int, str], ds_values: dict[int, str], n: int) -> int:
    """Number of attr-matches over all n registered attributes."""
    matches = n
    for attr, qv in q_values.items():
        dv = ds_values.get(attr)
        if dv is not None and dv != qv:
            matches -= 1
    return matches


def alpha_match(query: Query, ann: StreamAnnotation, n: int) -> bool:
    """True iff the stream attr-matches the query on >= alpha*n attributes.

    Attributes absent from either side count as matches, so only the
    query's own descriptors can fail.  Ties at the threshold match.
    """
    return coded_alpha_match(query.values, ann.values, query.alpha, n)


def coded_alpha_match(
    q_values: dict[int, str | int],
    ds_values: dict[int, str | int],
    alpha: float,
    n: int,
) -> bool:
    """alpha-match over pre-encoded (or raw) per-attribute values."""
    # Small epsilon keeps exact ties (sum == alpha*n) on the match side
    # despite float representation of alpha.
    return match_count(q_values, ds_values, n) >= alpha * n - 1e-9


# ---------------------------------------------------------------------------
# Corpus file format: one stream per line,
#     stream_id<TAB>attr=value;attr=value;...
# '#' lines are comments.  Values are normalized at ingestion.
# ---------------------------------------------------------------------------


def parse_corpus(text: str, registry: Optional[AttributeRegistry] = None):
    """Parse the dataset format into (registry, list of annotations)."""
    if registry is None:
        registry = AttributeRegistry([])
    streams: list[StreamAnnotation] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            stream_id, rest = line.split("\t", 1)
        except ValueError:
            raise ValueError(f"line {lineno}: expected 'stream_id<TAB>descriptors'")
        stream_id = stream_id.strip()
        if stream_id in seen_ids:
            raise ValueError(f"line {lineno}: duplicate stream id {stream_id!r}")
        seen_ids.add(stream_id)
        values: dict[int, str] = {}
        for part in rest.split(";"):
            part = part.strip()
            if not part:
                continue
            try:
                attr_name, value = part.split("=", 1)
            except ValueError:
                raise ValueError(f"line {lineno}: bad descriptor {part!r}")
            attr = registry.add(attr_name)
            if attr in values:
                raise ValueError(
                    f"line {lineno}: attribute {attr_name!r} given twice"
                )
            values[attr] = normalize_value(value)
        streams.append(StreamAnnotation(stream_id, values))
    return registry, streams


def load_corpus(path, registry: Optional[AttributeRegistry] = None):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_corpus(fh.read(), registry)


def dump_corpus(registry: AttributeRegistry, streams: list[StreamAnnotation]) -> str:
    """Inverse of parse_corpus, stable ordering."""
    lines = []
    for ann in streams:
        parts = ";".join(
            f"{registry.names[attr]}={ann.values[attr]}" for attr in sorted(ann.values)
        )
        lines.append(f"{ann.stream_id}\t{parts}")
    return "\n".join(lines) + "\n"


def keywords_by_attr(streams: Iterable[StreamAnnotation]) -> dict[int, set[str]]:
    """System keyword set AV per attribute, from the live streams."""
    out: dict[int, set[str]] = {}
    for ann in streams:
        for attr, value in ann.values.items():
            out.setdefault(attr, set()).add(value)
    return out
