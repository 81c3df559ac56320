"""Rokhlin towers from Rauzy-Veech induction, used for fast exact evaluation
of ``integral |T^m x - x|`` and of correlation sequences.

After ``n`` induction steps the domain ``J = [0, |v|)`` of ``R^n(T)`` is cut
into bases ``J_j`` and ``[0, 1)`` is the disjoint union of the levels
``T^k(J_j)``, ``0 <= k < h_j`` with ``h_j = |C_j(M(T, n))|``; ``T`` translates
each level rigidly.  Refining ``J`` by the itinerary of ``R`` gives cells ``Y``
on which every ``T^t`` (up to a horizon) is a single translation, so exact
integrals over ``[0, 1)`` become sums over ``(Y, level)`` pairs.  Everything
is integer arithmetic over the IET's common denominator.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from fractions import Fraction

import numpy as np

from .core import IET, _int_form
from .rauzy import StopRule, expand


class Towers:
    __slots__ = ("Q", "T_lefts", "T_shifts", "bases", "widths", "heights", "ind_shifts", "rel")

    def __init__(self, T: IET, v, p, heights, scale: int = 1):
        ints = T.ints
        self.Q = ints.Q * scale
        self.T_lefts = [a * scale for a in ints.lefts]
        self.T_shifts = [s * scale for s in ints.shifts]
        v = [x * scale for x in v]
        induced = _int_form(v, p, self.Q)
        self.bases = list(induced.lefts)
        self.widths = v
        self.heights = list(heights)
        self.ind_shifts = list(induced.shifts)
        self.rel = [self._levels(j) for j in range(len(v))]

    @classmethod
    def from_state(cls, state, n=None, scale: int = 1) -> "Towers":
        if n is None:
            n = state.steps
        return cls(state.start, state.lengths[n], state.perms[n], state.heights[n], scale)

    @classmethod
    def for_horizon(cls, T: IET, horizon: int, scale: int = 1, budget: float | None = None) -> "Towers | None":
        """Towers for times up to ``horizon`` at the cheapest induction step.

        ``None`` if the induction ties at once, or if the estimated cost
        exceeds ``budget`` (see :func:`tower_cost`).
        """
        state = expand(T, StopRule(max_norm=max(4 * horizon, 2)))
        k, cost = best_step(state, horizon)
        if k is None or (budget is not None and cost > budget):
            return None
        return cls.from_state(state, k, scale=scale)

    def _levels(self, j):
        lefts, shifts = self.T_lefts, self.T_shifts
        x = beta = self.bases[j]
        out = []
        append = out.append
        for _ in range(self.heights[j]):
            append(x - beta)
            x += shifts[bisect_right(lefts, x) - 1]
        if x != beta + self.ind_shifts[j]:
            raise AssertionError("tower does not return through the induced map")
        return np.array(out, dtype=object)

    # ---------------------------------------------------------- itineraries

    def cells(self, cuts=()):
        """Base partition of ``J``: tower bases refined by extra cut points."""
        edges = set(self.bases)
        edges.update(c for c in cuts if 0 < c < self.bases[-1] + self.widths[-1])
        lefts = sorted(edges)
        towers = [bisect_right(self.bases, a) - 1 for a in lefts]
        return lefts, towers

    def itineraries(self, cell_lefts, cell_towers, extra: int):
        """Cells ``Y = [a, b)`` of ``J`` with their ``R``-itinerary.

        Each item is ``(a, b, blocks)``; block ``u`` is ``(cell, tau, H)``:
        ``R^u`` maps ``Y`` by ``+tau`` into ``cell`` and the orbit enters it
        at time ``H``.  Itineraries are extended until they cover times
        ``[0, h_c0 + extra)``.
        """
        heights, ind = self.heights, self.ind_shifts
        end = self.bases[-1] + self.widths[-1]
        ncell = len(cell_lefts)
        bounds = list(cell_lefts) + [end]
        out = []
        stack = [
            (bounds[i], bounds[i + 1], ((i, 0, 0),)) for i in range(ncell - 1, -1, -1)
        ]
        while stack:
            a, b, blocks = stack.pop()
            ci, tau, H = blocks[-1]
            c = cell_towers[ci]
            Hn = H + heights[c]
            if Hn >= heights[cell_towers[blocks[0][0]]] + extra:
                out.append((a, b, blocks))
                continue
            shift = tau + ind[c]
            j = bisect_right(cell_lefts, a + shift) - 1
            pos = a
            pieces = []
            while True:
                right = min(b, bounds[j + 1] - shift)
                pieces.append((pos, right, blocks + ((j, shift, Hn),)))
                if right >= b:
                    break
                pos = right
                j += 1
            stack.extend(reversed(pieces))
        return out

    # ---------------------------------------------------------- integrals

    def defect(self, m: int) -> Fraction:
        """Exact ``integral over [0,1) of |T^m(x) - x|``."""
        lefts, towers = self.cells()
        heights, rel = self.heights, self.rel
        total = 0
        for a, b, blocks in self.itineraries(lefts, towers, m):
            c0 = towers[blocks[0][0]]
            h0 = heights[c0]
            base = rel[c0]
            acc = 0
            for ci, tau, H in blocks:
                c = towers[ci]
                lo = max(H, m)
                hi = min(H + heights[c], m + h0)
                if lo >= hi:
                    continue
                seg = rel[c][lo - H : hi - H] - base[lo - m : hi - m]
                if tau:
                    seg = seg + tau
                acc += np.abs(seg).sum()
            total += (b - a) * acc
        return Fraction(total, self.Q * self.Q)

    def level_values(self, lefts, towers, cut_points, cut_values):
        """For each base cell, the step-function value on each of its levels."""
        out = []
        bounds = np.array(cut_points, dtype=object)
        vals = np.array(cut_values, dtype=np.int64)
        for a, c in zip(lefts, towers):
            pos = self.rel[c] + a
            idx = np.searchsorted(bounds, pos, side="right") - 1
            out.append(vals[idx.astype(np.int64)])
        return out

    def level_cuts(self, points):
        """Base-coordinate preimages of ``points`` (in ``(0, Q)``) under the towers."""
        pos, owner = [], []
        for c, arr in enumerate(self.rel):
            beta = self.bases[c]
            pos.extend(int(x) + beta for x in arr)
            owner.extend((c, k) for k in range(len(arr)))
        order = sorted(range(len(pos)), key=pos.__getitem__)
        spos = [pos[i] for i in order]
        cuts = []
        for z in points:
            i = bisect_right(spos, z) - 1
            c, _ = owner[order[i]]
            off = z - spos[i]
            if off < self.widths[c] and off:
                cuts.append(self.bases[c] + off)
        return cuts

    def correlations(self, cut_points, cut_values, N: int) -> list:
        """``sum_Y |Y| sum_k F(k) F(k+n)`` for ``n = 0..N`` (integers, unscaled).

        ``cut_points`` are the integer left ends (over ``self.Q``) of the
        step function's cells, ``cut_values`` its integer values.
        """
        lefts, towers = self.cells(self.level_cuts([c for c in cut_points if c]))
        values = self.level_values(lefts, towers, cut_points, cut_values)
        acc = np.zeros(N + 1, dtype=object)
        for a, b, blocks in self.itineraries(lefts, towers, N):
            h0 = self.heights[towers[blocks[0][0]]]
            seq = np.concatenate([values[ci] for ci, _, _ in blocks])[: h0 + N]
            acc += (b - a) * int_correlate(seq, seq[:h0]).astype(object)
        return [int(x) for x in acc]


# rough per-operation costs in microseconds, for choosing a route
LEVEL_COST = 1.0
BLOCK_COST = 6.0
PIECE_COST = 0.3


def tower_cost(heights, m: int) -> float:
    """Estimated cost of one defect or correlation pass to time ``m``.

    Building the levels is linear in the total height; a cell needs about
    ``L = (h_max + m) / h_min`` returns, and there are about ``d L`` cells.
    """
    d = len(heights)
    L = (max(heights) + m) / min(heights) + 1
    return LEVEL_COST * sum(heights) + BLOCK_COST * d * L * L


def direct_cost(d: int, m: int) -> float:
    """Estimated cost of square-and-multiply for ``T**m`` (up to ``(d-1) m`` pieces)."""
    return PIECE_COST * (d - 1) * m * max(m.bit_length(), 1)


def best_step(state, m: int, upto: int | None = None) -> tuple:
    """``(k, cost)``: the induction step whose towers are cheapest for time ``m``."""
    best_k, best = None, float("inf")
    last = state.steps if upto is None else min(upto, state.steps)
    for k in range(1, last + 1):
        c = tower_cost(state.heights[k], m)
        if c < best:
            best_k, best = k, c
    return best_k, best


def int_correlate(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Exact ``out[n] = sum_k v[k] a[k + n]`` for integer arrays (``len(a) >= len(v)``)."""
    amax = int(np.abs(a).max(initial=0))
    vmax = int(np.abs(v).max(initial=0))
    if amax * vmax * len(v) >= 2**62:
        raise OverflowError("correlation would overflow int64")
    if len(a) * len(v) <= 4_000_000:
        return np.correlate(a, v, mode="valid")
    from scipy.signal import fftconvolve

    L = len(a) + len(v)
    # rounding error of the float FFT product, with a generous constant
    bound = 10 * np.finfo(float).eps * math.log2(L) * float(np.linalg.norm(a.astype(float))) * float(np.linalg.norm(v.astype(float)))
    if bound >= 0.25 or amax * vmax * len(v) >= 2**52:
        return np.correlate(a, v, mode="valid")
    approx = fftconvolve(a.astype(float), v[::-1].astype(float), mode="valid")
    return np.rint(approx).astype(np.int64)
