"""Seeded uniform sampling of rational points of the simplex."""
from __future__ import annotations

import hashlib
import random
from typing import Sequence

from .core import IET, Permutation, from_integer_lengths


def sample_seed(seed: int, index: int) -> int:
    """Per-sample seed derived from the run seed; stable across platforms."""
    digest = hashlib.sha256(f"ietlab/{seed}/{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def simplex_integers(rng: random.Random, d: int, bits: int) -> list:
    """``d`` positive integers summing to ``2**bits``, uniform over such compositions.

    Spacings of ``d - 1`` distinct uniform cut points in ``(0, 2**bits)``.
    """
    total = 1 << bits
    cuts = set()
    while len(cuts) < d - 1:
        c = rng.getrandbits(bits)
        if c:
            cuts.add(c)
    edges = [0, *sorted(cuts), total]
    return [b - a for a, b in zip(edges, edges[1:])]


def random_iet(rng: random.Random, perms: Sequence[Permutation], bits: int = 128) -> IET:
    perm = perms[0] if len(perms) == 1 else perms[rng.randrange(len(perms))]
    return from_integer_lengths(simplex_integers(rng, perm.d, bits), perm)


def random_point(rng: random.Random, bits: int = 128):
    from fractions import Fraction

    return Fraction(rng.getrandbits(bits), 1 << bits)
