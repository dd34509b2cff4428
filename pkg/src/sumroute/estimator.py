"""Closed-form sibling-count estimation for hash and alph trees.

When routing tables do not carry sibling count vectors, a node can
still gate summarization on an estimated full-sibling-set size.  For
hash trees the estimate follows from uniform slot occupancy; for alph
trees a fitted model of prefix length is used as given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def round_half_away(x: float) -> int:
    """Round to nearest integer, halves away from zero.

    Python's round() is banker's rounding; the estimation model rounds
    6.5 up to 7.
    """
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def omega(n_keywords: int, c: int, d: int) -> float:
    """Leaf-slot occupancy probability of a hash tree.

    The code format (a leading 1 bit plus c*d hashed bits) yields
    (2^c)^d leaf slots, so occupancy is n / (2^c)^d, clamped to (0, 1].
    """
    if n_keywords < 1:
        raise ValueError("need at least one keyword")
    slots = (1 << c) ** d
    return min(1.0, n_keywords / slots)


@dataclass(frozen=True)
class HashEstimatorParams:
    """Frozen estimator inputs for one attribute's hash tree."""

    omega: float
    c: int
    d: int

    def __post_init__(self):
        if not 0.0 < self.omega <= 1.0:
            raise ValueError(f"omega must be in (0, 1], got {self.omega}")

    @classmethod
    def for_corpus(cls, n_keywords: int, c: int, d: int) -> "HashEstimatorParams":
        return cls(omega(n_keywords, c, d), c, d)


def gamma(omega: float, c: int, levels_below: int) -> float:
    """Existence probability of a node `levels_below` levels above the leaves.

    gamma(omega, c, 0) is the leaf occupancy itself; a node higher up
    exists unless all (2^c)^levels_below leaf slots beneath it are empty.
    """
    if not 0.0 < omega <= 1.0:
        raise ValueError(f"omega must be in (0, 1], got {omega}")
    if levels_below < 0:
        raise ValueError("levels_below must be >= 0")
    return 1.0 - (1.0 - omega) ** (1 << (levels_below * c))


def est_hash_fscs(omega: float, c: int, level: int, d: int) -> float:
    """Expected sibling-set size f = 2^c * gamma at a tree level."""
    if not 1 <= level <= d:
        raise ValueError(f"level must be in 1..{d}, got {level}")
    return (1 << c) * gamma(omega, c, d - level)


def est_hash_ns(omega: float, c: int, level: int, d: int) -> int:
    """Estimated sibling count of a hash-tree node at `level`.

    round(f) - 1 with f the expected sibling-set size; f < 1 pins the
    estimate to zero.
    """
    f = est_hash_fscs(omega, c, level, d)
    if f < 1.0:
        return 0
    return max(0, round_half_away(f) - 1)


# Fitted prefix-length model for alph trees (sibling-set size as a
# function of code length only; the corpus size washed out of the fit).
ALPH_FSCS_SCALE = 26.0
ALPH_FSCS_POWER = -2.0


def est_alph_fscs(level: int) -> float:
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    return ALPH_FSCS_SCALE * float(level) ** ALPH_FSCS_POWER


def est_alph_ns(level: int) -> int:
    """Estimated sibling count for an alph code of `level` characters.

    A leaf descriptor's level is its keyword length (terminator
    excluded); an internal code's level is its prefix length.
    """
    f = est_alph_fscs(level)
    if f < 1.0:
        return 0
    return max(0, round_half_away(f) - 1)
