"""Keyword embeddings and seeded k-means clustering.

Embeddings normally come from a text file (one ``keyword v1 v2 ... vD``
per line).  When no file is available, a deterministic fallback embeds
each keyword by hashed character-trigram counts so the meaning-based
tree stays testable without external models.
"""

from __future__ import annotations

import numpy as np

from .errors import MissingEmbedding
from .hashutil import hash64

DEFAULT_DIM = 32


class EmbeddingSet:
    """keyword -> fixed-dimension float vector."""

    def __init__(self, dim: int):
        self.dim = dim
        self._vectors: dict[str, np.ndarray] = {}

    def __contains__(self, keyword: str) -> bool:
        return keyword in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def add(self, keyword: str, vector) -> None:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ValueError(
                f"vector for {keyword!r} has shape {vec.shape}, want ({self.dim},)"
            )
        self._vectors[keyword] = vec

    def get(self, keyword: str) -> np.ndarray:
        try:
            return self._vectors[keyword]
        except KeyError:
            raise MissingEmbedding(keyword) from None

    def matrix(self, keywords: list[str]) -> np.ndarray:
        return np.stack([self.get(k) for k in keywords])


def trigram_embedding(keyword: str, dim: int = DEFAULT_DIM, seed: int = 0) -> np.ndarray:
    """Deterministic fallback vector: hashed character-trigram counts.

    Each trigram of ``^keyword$``-style padding is feature-hashed into
    one of `dim` signed buckets; the result is L2-normalized so that
    keywords sharing character structure land close together.
    """
    padded = f"\x02{keyword}\x03"
    vec = np.zeros(dim, dtype=np.float64)
    for i in range(len(padded) - 2):
        tri = padded[i : i + 3]
        h = hash64(tri, seed)
        bucket = h % dim
        sign = 1.0 if (h >> 32) & 1 else -1.0
        vec[bucket] += sign
    norm = float(np.linalg.norm(vec))
    if norm > 0:
        vec /= norm
    return vec


def fallback_embeddings(
    keywords, dim: int = DEFAULT_DIM, seed: int = 0
) -> EmbeddingSet:
    emb = EmbeddingSet(dim)
    for kw in sorted(set(keywords)):
        emb.add(kw, trigram_embedding(kw, dim, seed))
    return emb


def parse_embeddings(text: str) -> EmbeddingSet:
    emb: EmbeddingSet | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"line {lineno}: expected 'keyword v1 ... vD'")
        keyword, values = parts[0], [float(x) for x in parts[1:]]
        if emb is None:
            emb = EmbeddingSet(len(values))
        emb.add(keyword, values)
    if emb is None:
        raise ValueError("embedding file is empty")
    return emb


def load_embeddings(path) -> EmbeddingSet:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_embeddings(fh.read())


def dump_embeddings(emb: EmbeddingSet) -> str:
    lines = []
    for kw in sorted(emb._vectors):
        vals = " ".join(repr(float(v)) for v in emb._vectors[kw])
        lines.append(f"{kw} {vals}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------


def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iter: int = 50):
    """Seeded k-means++ with guaranteed nonempty clusters.

    Returns a list of k index arrays partitioning ``points``.  When
    there are fewer points than clusters, singleton clusters come first
    and the empties are suppressed.  Empty clusters during iteration
    are repaired by splitting the largest cluster at its farthest
    point, which the recursive tree builder relies on.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n == 0:
        raise ValueError("kmeans needs at least one point")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k == 1:
        return [np.arange(n)]
    if n <= k:
        return [np.array([i]) for i in range(n)]

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(points, k, rng)

    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = _sq_dists(points, centroids)
        assign = np.argmin(d2, axis=1)
        _repair_empty(points, assign, k, d2)
        new_centroids = np.stack(
            [points[assign == j].mean(axis=0) for j in range(k)]
        )
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < 1e-6:
            break
    return [np.flatnonzero(assign == j) for j in range(k)]


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeanspp_init(points: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(points)
    first = int(rng.integers(n))
    chosen = [first]
    d2 = np.sum((points - points[first]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0:
            # All remaining points coincide with a centroid; pick any
            # not-yet-chosen index deterministically.
            remaining = sorted(set(range(n)) - set(chosen))
            chosen.append(remaining[0] if remaining else chosen[-1])
        else:
            r = float(rng.random()) * total
            idx = int(np.searchsorted(np.cumsum(d2), r))
            idx = min(idx, n - 1)
            chosen.append(idx)
        d2 = np.minimum(d2, np.sum((points - points[chosen[-1]]) ** 2, axis=1))
    return points[chosen].copy()


def _repair_empty(points: np.ndarray, assign: np.ndarray, k: int, d2: np.ndarray):
    """Move the farthest point of the largest cluster into each empty one."""
    counts = np.bincount(assign, minlength=k)
    for j in range(k):
        if counts[j] > 0:
            continue
        donor = int(np.argmax(counts))
        members = np.flatnonzero(assign == donor)
        # Farthest member from its own centroid; ties resolve to the
        # lowest index, keeping the repair deterministic.
        far = members[int(np.argmax(d2[members, donor]))]
        assign[far] = j
        counts[donor] -= 1
        counts[j] += 1
