"""Seeded 64-bit non-cryptographic hashing.

Everything that feeds coded trees or fallback embeddings goes through
these helpers so that runs are reproducible across processes regardless
of PYTHONHASHSEED.
"""

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(x: int) -> int:
    # Finalizer borrowed from splitmix64; fixes FNV's weak avalanche on
    # short inputs.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def hash64(data: str, seed: int = 0) -> int:
    """Seeded FNV-1a over UTF-8 bytes, splitmix-finalized to 64 bits."""
    h = (_FNV_OFFSET ^ (seed & _MASK64)) & _MASK64
    for b in data.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return _splitmix64(h)


def hash_bits(data: str, nbits: int, seed: int = 0) -> int:
    """Top `nbits` bits of the seeded hash (nbits <= 64)."""
    if not 0 < nbits <= 64:
        raise ValueError(f"nbits must be in 1..64, got {nbits}")
    return hash64(data, seed) >> (64 - nbits)
