"""Birkhoff averages of product systems ``(T x S)(x, y) = (Tx, Sy)`` over rectangles.

Orbits are integer arrays over a common denominator, advanced for all
starts at once; counts are exact, so averages are exact rationals.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Sequence

import numpy as np

from .core import IET, as_rational
from .sampling import random_point

CLAIMS = {
    "product-unique-ergodicity": ("product_orbit_average",),
    "product-projections": ("projection_check",),
}

INT64_SAFE = 2**62


@dataclass(frozen=True)
class ProductSystem:
    first: IET
    second: IET

    def __post_init__(self):
        self.first.require_nondegenerate()
        self.second.require_nondegenerate()

    def swapped(self) -> "ProductSystem":
        return ProductSystem(self.second, self.first)

    def __call__(self, point):
        x, y = point
        return self.first(x), self.second(y)


@dataclass(frozen=True)
class BirkhoffStats:
    rect: tuple  # ((a, b), (c, d)): the rectangle [a, b) x [c, d)
    starts: tuple
    N: int
    averages: tuple  # exact, one per start
    target: Fraction

    @property
    def deviations(self) -> tuple:
        return tuple(abs(a - self.target) for a in self.averages)

    @property
    def max_deviation(self) -> Fraction:
        return max(self.deviations)

    def passes(self, tol) -> bool:
        return self.max_deviation < as_rational(tol)


def _rect(rect) -> tuple:
    (a, b), (c, d) = rect
    a, b, c, d = (as_rational(t) for t in (a, b, c, d))
    if not (0 <= a <= b <= 1 and 0 <= c <= d <= 1):
        raise ValueError("rectangle must lie in [0, 1] x [0, 1]")
    return (a, b), (c, d)


class _Orbit:
    """All starts of one coordinate, as integers over a shared denominator."""

    def __init__(self, T: IET, points: Sequence[Fraction], marks: Sequence[Fraction]):
        ints = T.ints
        Q = lcm(ints.Q, *(p.denominator for p in points), *(m.denominator for m in marks))
        k = Q // ints.Q
        dtype = np.int64 if Q < INT64_SAFE else object
        self.Q = Q
        self.lefts = np.array([a * k for a in ints.lefts], dtype=dtype)
        self.shifts = np.array([s * k for s in ints.shifts], dtype=dtype)
        self.x = np.array([p.numerator * (Q // p.denominator) for p in points], dtype=dtype)

    def scale(self, t: Fraction):
        return t.numerator * (self.Q // t.denominator)

    def step(self):
        self.x = self.x + self.shifts[np.searchsorted(self.lefts, self.x, side="right") - 1]


def product_orbit_averages(P: ProductSystem, rects, starts, N: int) -> list:
    """:class:`BirkhoffStats` for several rectangles from one pass over the orbits."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rects = [_rect(r) for r in rects]
    starts = tuple((as_rational(x), as_rational(y)) for x, y in starts)
    for x, y in starts:
        if not (0 <= x < 1 and 0 <= y < 1):
            raise ValueError("starts must lie in [0, 1) x [0, 1)")
    xs = _Orbit(P.first, [x for x, _ in starts], [t for r in rects for t in r[0]])
    ys = _Orbit(P.second, [y for _, y in starts], [t for r in rects for t in r[1]])
    bounds = [
        (xs.scale(a), xs.scale(b), ys.scale(c), ys.scale(d)) for (a, b), (c, d) in rects
    ]
    counts = [np.zeros(len(starts), dtype=np.int64) for _ in rects]
    for _ in range(N):
        x, y = xs.x, ys.x
        for cnt, (a, b, c, d) in zip(counts, bounds):
            cnt += (x >= a) & (x < b) & (y >= c) & (y < d)
        xs.step()
        ys.step()
    out = []
    for (rx, ry), cnt in zip(rects, counts):
        target = (rx[1] - rx[0]) * (ry[1] - ry[0])
        averages = tuple(Fraction(int(c), N) for c in cnt)
        out.append(BirkhoffStats((rx, ry), starts, N, averages, target))
    return out


def product_orbit_average(P: ProductSystem, rect, starts, N: int) -> BirkhoffStats:
    """``N^-1 #{0 <= k < N : (T^k x, S^k y) in A x B}`` for every start."""
    return product_orbit_averages(P, [rect], starts, N)[0]


@dataclass(frozen=True)
class ProjectionReport:
    interval: tuple
    component: int
    N: int
    frequencies: tuple
    target: Fraction

    @property
    def max_deviation(self) -> Fraction:
        return max(abs(f - self.target) for f in self.frequencies)


def projection_check(P: ProductSystem, interval, N: int, starts, component: int = 0) -> ProjectionReport:
    """Marginal frequencies of one coordinate of the product orbits in ``interval``."""
    a, b = (as_rational(t) for t in interval)
    rect = ((a, b), (0, 1)) if component == 0 else ((0, 1), (a, b))
    stats = product_orbit_average(P, rect, starts, N)
    return ProjectionReport((a, b), component, N, stats.averages, b - a)


def random_starts(count: int, seed: int, bits: int = 128) -> list:
    rng = random.Random(seed)
    return [(random_point(rng, bits), random_point(rng, bits)) for _ in range(count)]
