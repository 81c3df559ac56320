"""Correlation sequences ``c_n = <f, f o T^n>`` of step functions, Wiener
averages, continued fractions of rotation numbers, and the search for
rigidity times of one IET that fall where another decorrelates.

Spectral measures are only ever handled through these moment sequences.
"""
from __future__ import annotations

import csv
import io
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Callable, Sequence

from .core import IET, PiecewiseTranslation, as_rational, iterate_piecewise, to_piecewise
from .errors import FormatError, SeriesTooShort
from .rauzy import AcceptableWordTable, StopRule, expand
from .rigidity import DensityPredicate, rigidity_times
from .towers import Towers

CLAIMS = {
    "spectral-moments": ("correlation", "correlation_series"),
    "wiener-criterion": ("wiener_average",),
    "density-one-decorrelation": ("low_correlation_set",),
    "rotation-avoidance": ("rotation_rigidity", "avoidance_set", "continued_fraction"),
    "rigid-versus-decorrelated": ("disjointness_witness", "validate_witness"),
}

# series shorter than this are computed by plain refinement
DIRECT_SERIES = 64


@dataclass(frozen=True)
class StepFunction:
    """A real step function on ``[0, 1)``: ``cells`` are ``(a, b, value)``."""

    cells: tuple

    def __post_init__(self):
        cells = tuple((as_rational(a), as_rational(b), as_rational(v)) for a, b, v in self.cells)
        if not cells or cells[0][0] != 0 or cells[-1][1] != 1:
            raise FormatError("cells must cover [0, 1)")
        for (a, b, _), (c, _, _) in zip(cells, cells[1:]):
            if b != c:
                raise FormatError("cells must be contiguous")
        if any(a >= b for a, b, _ in cells):
            raise FormatError("cells must be nonempty")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def centered_indicator(cls, a, b) -> "StepFunction":
        """``1_[a, b) - (b - a)``."""
        a, b = as_rational(a), as_rational(b)
        m = b - a
        cells = []
        if a > 0:
            cells.append((0, a, -m))
        cells.append((a, b, 1 - m))
        if b < 1:
            cells.append((b, 1, -m))
        return cls(tuple(cells))

    @property
    def mean(self) -> Fraction:
        return sum(((b - a) * v for a, b, v in self.cells), Fraction(0))

    @property
    def mean_zero(self) -> bool:
        return self.mean == 0

    @property
    def norm2(self) -> Fraction:
        return sum(((b - a) * v * v for a, b, v in self.cells), Fraction(0))

    def __call__(self, x) -> Fraction:
        x = as_rational(x)
        for a, b, v in self.cells:
            if a <= x < b:
                return v
        raise ValueError(f"{x} is outside [0, 1)")

    def integer_form(self, Q: int):
        """``(Q', lefts, values, V)`` with ``f = values / V`` on cells starting at ``lefts / Q'``."""
        Qf = lcm(Q, *(a.denominator for a, _, _ in self.cells))
        V = lcm(*(v.denominator for _, _, v in self.cells))
        lefts = [a.numerator * (Qf // a.denominator) for a, _, _ in self.cells]
        values = [int(v * V) for _, _, v in self.cells]
        return Qf, lefts, values, V

    def describe(self) -> str:
        return ";".join(f"{a},{b},{v}" for a, b, v in self.cells)

    @classmethod
    def parse(cls, text: str) -> "StepFunction":
        try:
            cells = [tuple(Fraction(x) for x in part.split(",")) for part in text.split(";")]
        except (ValueError, ZeroDivisionError) as exc:
            raise FormatError(f"bad step function {text!r}") from exc
        return cls(tuple(cells))


def _overlap_sum(P: PiecewiseTranslation, Q: int, lefts, values) -> int:
    """``sum over x-cells of |cell| f(x) f(P x)``, times ``Q``, for ``P`` at scale ``Q``."""
    nf = len(lefts)
    rights = list(lefts[1:]) + [Q]
    total = 0
    for a, b, s in zip(P.lefts, P.rights, P.shifts):
        i = bisect_right(lefts, a) - 1
        j = bisect_right(lefts, a + s) - 1
        pos = a
        while pos < b:
            stop = min(b, rights[i], rights[j] - s)
            total += (stop - pos) * values[i] * values[j]
            pos = stop
            if pos == rights[i] and i + 1 < nf:
                i += 1
            if pos + s == rights[j] and j + 1 < nf:
                j += 1
    return total


def correlation(T: IET, f: StepFunction, n: int) -> Fraction:
    """Exact ``<f, f o T^n> = sum_ij v_i v_j lambda(B_i n T^-n B_j)``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return f.norm2
    Qf, lefts, values, V = f.integer_form(T.ints.Q)
    P = to_piecewise(T, n).rescaled(Qf)
    return Fraction(_overlap_sum(P, Qf, lefts, values), Qf * V * V)


@dataclass
class CorrelationSeries:
    subject: IET
    f: StepFunction
    values: list = field(default_factory=list)  # c_0 .. c_N

    @property
    def c0(self) -> Fraction:
        return self.values[0]

    @property
    def N(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, n):
        return self.values[n]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "c_n", "c_n_decimal"])
        for n, c in enumerate(self.values):
            w.writerow([n, f"{c.numerator}/{c.denominator}", f"{float(c):.12g}"])
        return buf.getvalue()


def correlation_series(T: IET, f: StepFunction, N: int, method: str = "auto") -> CorrelationSeries:
    """``c_0 .. c_N`` exactly.

    ``method="direct"`` refines ``T^n`` one step at a time; ``"towers"``
    (the default for long series) reads the correlations off Rokhlin towers
    of the Rauzy-Veech expansion.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    T.require_nondegenerate()
    if method not in ("auto", "direct", "towers"):
        raise ValueError(f"unknown method {method!r}")
    Qf, lefts, values, V = f.integer_form(T.ints.Q)
    raw = None
    if method != "direct" and (method == "towers" or N > DIRECT_SERIES):
        tw = Towers.for_horizon(T, N, scale=Qf // T.ints.Q)
        if tw is not None:
            raw = tw.correlations(lefts, values, N)
    if raw is None:
        raw = [f.norm2 * Qf * V * V]
        for P in iterate_piecewise(T, N):
            raw.append(_overlap_sum(P.rescaled(Qf), Qf, lefts, values))
    den = Qf * V * V
    return CorrelationSeries(T, f, [Fraction(x, den) for x in raw])


def wiener_average(series: CorrelationSeries, N: int) -> Fraction:
    """``N^-1 sum_{k<N} c_k^2``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > len(series.values):
        raise SeriesTooShort(f"series has {len(series.values)} terms, {N} requested")
    return sum((c * c for c in series.values[:N]), Fraction(0)) / N


def low_correlation_set(series: CorrelationSeries, threshold, k_range: int = 2) -> DensityPredicate:
    """``{1 <= n <= N - k_range : |c_{n+k}| < threshold c_0 for |k| <= k_range}``.

    Returned as a density predicate cut off at ``N - k_range`` (everything
    past the series end is outside).
    """
    threshold = as_rational(threshold)
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if k_range < 0:
        raise ValueError("k_range must be >= 0")
    N = series.N
    top = N - k_range
    if top < 1:
        raise SeriesTooShort(f"need more than {k_range} terms beyond n = 0")
    bound = threshold * series.c0
    small = [abs(c) < bound for c in series.values]
    excluded = []
    for n in range(1, top + 1):
        lo = max(0, n - k_range)
        if not all(small[lo : n + k_range + 1]):
            excluded.append(n)
    return DensityPredicate(excluded=frozenset(excluded), limit=top)


# ----------------------------------------------------- continued fractions


@dataclass(frozen=True)
class ContinuedFraction:
    quotients: tuple  # a_0; a_1, a_2, ...
    p: tuple
    q: tuple

    @property
    def value(self) -> Fraction:
        return Fraction(self.p[-1], self.q[-1])


def continued_fraction(alpha) -> ContinuedFraction:
    alpha = as_rational(alpha)
    quotients = []
    x = alpha
    while True:
        a = x.numerator // x.denominator
        quotients.append(a)
        x -= a
        if x == 0:
            break
        x = 1 / x
    p, q = [quotients[0]], [1]
    p_prev, q_prev = 1, 0
    for a in quotients[1:]:
        p_new, q_new = a * p[-1] + p_prev, a * q[-1] + q_prev
        p_prev, q_prev = p[-1], q[-1]
        p.append(p_new)
        q.append(q_new)
    return ContinuedFraction(tuple(quotients), tuple(p), tuple(q))


def rotation_rigidity(alpha, count: int) -> list:
    """The first ``count`` rigidity times of the rotation by ``alpha``: the
    distinct convergent denominators, then multiples of the exact period."""
    alpha = as_rational(alpha)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    out: list = []
    for q in continued_fraction(alpha).q:
        if not out or q > out[-1]:
            out.append(q)
    period = alpha.denominator
    k = 2
    while len(out) < count:
        out.append(k * period)
        k += 1
    return out[:count]


def avoidance_set(alpha, delta) -> DensityPredicate:
    """``{n : ||n alpha|| >= delta}``."""
    return DensityPredicate.avoiding_rotations([(alpha, delta)])


# ------------------------------------------------------------ witnesses


@dataclass(frozen=True)
class Witness:
    index: int
    S: IET
    n: int
    defect: Fraction
    max_corr: Fraction  # max |c_{n+k}(T, f)| / c_0 over |k| <= k_range
    source: str


@dataclass
class WitnessSearch:
    witnesses: list
    examined: int
    budget: int
    exhausted: bool  # budget ran out before ``want`` witnesses were found


def disjointness_witness(
    T: IET,
    f: StepFunction,
    threshold,
    sampler: Callable[[int], IET],
    budget: int,
    *,
    k_range: int = 2,
    horizon: int = 2**14,
    want: int | None = None,
    table: AcceptableWordTable | None = None,
    series: CorrelationSeries | None = None,
) -> WitnessSearch:
    """Sampled ``S`` with a rigidity time ``n`` where ``T`` decorrelates.

    A witness is ``(S, n)`` with ``r(S, n) < threshold`` and
    ``|c_{n+k}(T, f)| < threshold c_0`` for ``|k| <= k_range``.  Candidates
    for ``n`` are restricted to the low-correlation set of ``T`` up to
    ``horizon``.
    """
    threshold = as_rational(threshold)
    if series is None or series.N < horizon:
        series = correlation_series(T, f, horizon)
    A = low_correlation_set(series, threshold, k_range)
    found: list = []
    examined = 0
    if A.limit is None or A.density(A.limit) == 0:
        return WitnessSearch(found, 0, budget, want is not None)
    c0 = series.c0
    for index in range(budget):
        if want is not None and len(found) >= want:
            break
        examined += 1
        S = sampler(index)
        rep = rigidity_times(S, threshold, A, max_norm=A.limit + 1, table=table, want=1)
        for det in rep.detections:
            lags = range(max(0, det.n - k_range), det.n + k_range + 1)
            corr = max(abs(series[m]) for m in lags) / c0
            found.append(Witness(index, S, det.n, det.defect, corr, det.source))
    exhausted = want is not None and len(found) < want
    return WitnessSearch(found, examined, budget, exhausted)


def validate_witness(T: IET, f: StepFunction, w: Witness, threshold, k_range: int = 2) -> bool:
    """Recompute a witness from scratch by direct refinement."""
    threshold = as_rational(threshold)
    if to_piecewise(w.S, w.n).displacement_integral() != w.defect or not w.defect < threshold:
        return False
    c0 = f.norm2
    Qf, lefts, values, V = f.integer_form(T.ints.Q)
    one = PiecewiseTranslation.from_iet(T)
    lo = max(0, w.n - k_range)
    P = to_piecewise(T, lo)
    worst = Fraction(0)
    for m in range(lo, w.n + k_range + 1):
        c = Fraction(_overlap_sum(P.rescaled(Qf), Qf, lefts, values), Qf * V * V)
        worst = max(worst, abs(c))
        P = one.compose(P)
    return worst / c0 == w.max_corr and worst < threshold * c0
