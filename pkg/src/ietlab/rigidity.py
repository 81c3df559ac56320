"""Rigidity defects ``r(T, n) = integral |T^n x - x|`` and the searches built on them."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from math import lcm
from typing import Iterable

import numpy as np

from .core import IET, as_rational, iterate_piecewise, to_piecewise
from .errors import FormatError
from .rauzy import (
    AcceptableWordTable,
    RVState,
    StopRule,
    detect_acceptable,
    dyadic_index,
    expand,
    expected_steps,
)
from .towers import Towers, best_step, direct_cost, tower_cost

CLAIMS = {
    "rigidity-defect": ("rigidity_defect", "scan_rigidity"),
    "acceptable-windows-dense": ("dyadic_census_of",),
    "rigidity-time-in-density-set": ("rigidity_times", "DensityPredicate"),
    "expected-rigidity-time": ("detect_expected",),
}

# below this many iterates the square-and-multiply route is cheaper than towers
DIRECT_LIMIT = 256


# ------------------------------------------------------------ density sets


def _dist_to_int(n: int, alpha: Fraction) -> Fraction:
    frac = (n * alpha.numerator % alpha.denominator) / Fraction(alpha.denominator)
    return min(frac, 1 - frac)


@dataclass(frozen=True)
class DensityPredicate:
    """A set ``A`` of positive integers with exact membership.

    ``A`` is everything except: the ``excluded`` list, the integers with
    ``||n alpha|| < delta`` for each ``(alpha, delta)`` in ``rotations``, and
    the residues ``n = r (mod m)`` for each ``(r, m)`` in ``progressions``.
    ``limit`` (if set) cuts ``A`` down to ``n <= limit``; it is used for sets
    read off a finite series.
    """

    excluded: frozenset = frozenset()
    rotations: tuple = ()
    progressions: tuple = ()
    limit: int | None = None

    @classmethod
    def everything(cls) -> "DensityPredicate":
        return cls()

    @classmethod
    def cofinite(cls, excluded: Iterable[int]) -> "DensityPredicate":
        return cls(excluded=frozenset(int(n) for n in excluded))

    @classmethod
    def avoiding_rotations(cls, pairs) -> "DensityPredicate":
        rots = []
        for alpha, delta in pairs:
            alpha, delta = as_rational(alpha), as_rational(delta)
            if delta <= 0:
                raise ValueError("delta must be positive")
            rots.append((alpha - (alpha.numerator // alpha.denominator), delta))
        return cls(rotations=tuple(rots))

    @classmethod
    def avoiding_progressions(cls, pairs) -> "DensityPredicate":
        progs = []
        for r, m in pairs:
            if m < 1:
                raise ValueError("modulus must be >= 1")
            progs.append((r % m, m))
        return cls(progressions=tuple(progs))

    def __and__(self, other: "DensityPredicate") -> "DensityPredicate":
        if self.limit is None:
            limit = other.limit
        elif other.limit is None:
            limit = self.limit
        else:
            limit = min(self.limit, other.limit)
        return DensityPredicate(
            self.excluded | other.excluded,
            self.rotations + other.rotations,
            self.progressions + other.progressions,
            limit,
        )

    def __contains__(self, n: int) -> bool:
        if n < 1 or (self.limit is not None and n > self.limit):
            return False
        if n in self.excluded:
            return False
        for r, m in self.progressions:
            if n % m == r:
                return False
        for alpha, delta in self.rotations:
            if _dist_to_int(n, alpha) < delta:
                return False
        return True

    def members(self, N: int) -> np.ndarray:
        """Boolean mask over ``n = 1..N``."""
        n = np.arange(1, N + 1, dtype=np.int64)
        keep = np.ones(N, dtype=bool)
        if self.limit is not None:
            keep &= n <= self.limit
        for r, m in self.progressions:
            keep &= n % m != r
        for alpha, delta in self.rotations:
            p, q = alpha.numerator, alpha.denominator
            if q < 2**31:
                res = (n * p) % q
            else:
                res = np.array([(k * p) % q for k in range(1, N + 1)], dtype=object)
            # ||n alpha|| < delta  <=>  min(res, q - res) / q < delta
            dist = np.minimum(res, q - res)
            keep &= ~(dist * delta.denominator < delta.numerator * q)
        for x in self.excluded:
            if 1 <= x <= N:
                keep[x - 1] = False
        return keep

    def density(self, N: int) -> Fraction:
        """Empirical density ``|A n [1, N]| / N``, exact."""
        if N < 1:
            raise ValueError("N must be >= 1")
        return Fraction(int(self.members(N).sum()), N)

    def period(self) -> int | None:
        """A period of the membership pattern, when there is one."""
        if self.excluded or self.limit is not None:
            return None
        return lcm(1, *(m for _, m in self.progressions), *(a.denominator for a, _ in self.rotations))

    def natural_density(self) -> Fraction | None:
        """Exact asymptotic density for purely periodic sets."""
        P = self.period()
        if P is None:
            return None
        return self.density(P)

    def describe(self) -> str:
        parts = []
        if self.excluded:
            parts.append("not:" + " ".join(map(str, sorted(self.excluded))))
        parts += [f"rot:{a}:{d}" for a, d in self.rotations]
        parts += [f"ap:{r}:{m}" for r, m in self.progressions]
        if self.limit is not None:
            parts.append(f"max:{self.limit}")
        return ",".join(parts) or "all"

    @classmethod
    def parse(cls, text: str) -> "DensityPredicate":
        """Inverse of :meth:`describe`."""
        out = cls()
        text = text.strip()
        if text in ("", "all"):
            return out
        for part in text.split(","):
            kind, _, rest = part.partition(":")
            try:
                if kind == "not":
                    out &= cls.cofinite(int(x) for x in rest.split())
                elif kind == "rot":
                    a, d = rest.split(":")
                    out &= cls.avoiding_rotations([(Fraction(a), Fraction(d))])
                elif kind == "ap":
                    r, m = rest.split(":")
                    out &= cls.avoiding_progressions([(int(r), int(m))])
                elif kind == "max":
                    out &= cls(limit=int(rest))
                else:
                    raise ValueError(kind)
            except (ValueError, ZeroDivisionError) as exc:
                raise FormatError(f"bad density predicate part {part!r}") from exc
        return out


# ------------------------------------------------------------ defects


@lru_cache(maxsize=256)
def _few_pieces(T: IET) -> bool:
    """Do the powers of ``T`` stay short?  (Genus one: rotations and their
    induced maps.)  Then square-and-multiply beats the towers at every ``n``."""
    return len(to_piecewise(T, DIRECT_LIMIT)) <= 2 * T.d


def rigidity_defect(T: IET, n: int) -> Fraction:
    """Exact ``integral over [0, 1) of |T^n(x) - x|``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    T.require_nondegenerate()
    if n > DIRECT_LIMIT and not _few_pieces(T):
        tw = Towers.for_horizon(T, n, budget=direct_cost(T.d, n))
        if tw is not None:
            return tw.defect(n)
    return to_piecewise(T, n).displacement_integral()


def rotation_defect(alpha, n: int) -> Fraction:
    """Closed form ``2 b (1 - b)``, ``b = {n alpha}``, for the rotation by ``alpha``."""
    alpha = as_rational(alpha)
    b = n * alpha - (n * alpha).numerator // (n * alpha).denominator
    return 2 * b * (1 - b)


class DefectCache:
    """Defects of one IET at many times, reusing the towers of an expansion."""

    def __init__(self, T: IET, state: RVState | None = None):
        self.T = T
        self.state = state
        self._towers: dict = {}
        self._values: dict = {}

    def _plan(self, n: int) -> tuple:
        # prefer towers already built when they are not much worse
        k, cost = best_step(self.state, n)
        for k2 in self._towers:
            c2 = tower_cost(self.state.heights[k2], n)
            if c2 <= 2 * cost:
                return k2, c2
        return k, cost

    def __call__(self, n: int) -> Fraction:
        got = self._values.get(n)
        if got is not None:
            return got
        val = None
        st = self.state
        if n > DIRECT_LIMIT and st is not None and not _few_pieces(self.T):
            k, cost = self._plan(n)
            if k is not None and cost < direct_cost(self.T.d, n):
                tw = self._towers.get(k)
                if tw is None:
                    tw = self._towers[k] = Towers.from_state(st, k)
                val = tw.defect(n)
        if val is None:
            val = rigidity_defect(self.T, n)
        self._values[n] = val
        return val


# ------------------------------------------------------------ detections


@dataclass(frozen=True)
class Detection:
    n: int
    defect: Fraction
    source: str  # "plain", "acceptable" or "expected"
    step: int | None = None

    @property
    def dyadic(self) -> int:
        return dyadic_index(self.n)


@dataclass
class RigidityReport:
    subject: IET
    epsilon: Fraction
    detections: list = field(default_factory=list)
    first: Detection | None = None
    dyadic_hits: frozenset = frozenset()
    density: Fraction | None = None

    @property
    def times(self) -> list:
        return [d.n for d in self.detections]


def scan_rigidity(T: IET, eps, n_max: int, A: DensityPredicate | None = None) -> RigidityReport:
    """Every ``n <= n_max`` in ``A`` with ``r(T, n) < eps``."""
    eps = as_rational(eps)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    A = A or DensityPredicate.everything()
    report = RigidityReport(T, eps)
    for n, P in enumerate(iterate_piecewise(T, n_max), start=1):
        if n not in A:
            continue
        r = P.displacement_integral()
        if r < eps:
            report.detections.append(Detection(n, r, "plain"))
    if report.detections:
        report.first = report.detections[0]
    report.dyadic_hits = frozenset(d.dyadic for d in report.detections)
    return report


def detect_expected(state: RVState, table: AcceptableWordTable, eps) -> list:
    """``(n, m)``: acceptable steps ``n`` whose ``C_max`` interval has length
    ``> 1 - eps/2``; ``m = |C_max(M(S, n))|`` is the expected rigidity time."""
    eps = as_rational(eps)
    if not 0 < eps <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    return expected_steps(state, table, eps)


@dataclass(frozen=True)
class DyadicCensus:
    hits: frozenset
    proxy: Fraction
    detections: tuple  # (n, m) pairs behind the hits
    tie_step: int | None


def dyadic_census_of(
    T: IET, eps, i_max: int, table: AcceptableWordTable, kind: str = "expected"
) -> DyadicCensus:
    """Dyadic windows ``P_i`` (``i <= i_max``) holding an expected (or, with
    ``kind="acceptable"``, any acceptable) time; proxy ``|hits| / i_max``."""
    if i_max < 1:
        raise ValueError("i_max must be >= 1")
    state = expand(T, StopRule(max_norm=2 ** (i_max + 1)))
    if kind == "expected":
        found = detect_expected(state, table, eps)
    elif kind == "acceptable":
        found = detect_acceptable(state, table)
    else:
        raise ValueError(f"unknown detection kind {kind!r}")
    hits = frozenset(i for i in (dyadic_index(m) for _, m in found) if i <= i_max)
    return DyadicCensus(hits, Fraction(len(hits), i_max), tuple(found), state.tie_step)


def tower_candidates(state: RVState, limit: int | None = None) -> list:
    """Distinct tower heights of the expansion, tallest measure first.

    Each item is ``(n, step, mass)``: at ``step`` some tower of height ``n``
    carries Lebesgue mass ``mass``.  Tall towers of large mass are where
    ``T^n`` is close to the identity.
    """
    Q = state.start.ints.Q
    best: dict = {}
    for k in range(1, state.steps + 1):
        v = state.lengths[k]
        for h, w in zip(state.heights[k], v):
            if h < 2 or (limit is not None and h > limit):
                continue
            mass = h * w
            old = best.get(h)
            if old is None or mass > old[1]:
                best[h] = (k, mass)
    ranked = sorted(best.items(), key=lambda kv: (-kv[1][1], kv[0]))
    return [(h, k, Fraction(mass, Q)) for h, (k, mass) in ranked]


def rigidity_times(
    T: IET,
    eps,
    A: DensityPredicate | None = None,
    max_norm: int = 2**18,
    table: AcceptableWordTable | None = None,
    want: int = 1,
    max_checks: int = 64,
    state: RVState | None = None,
) -> RigidityReport:
    """Exactly verified ``eps``-rigidity times ``n < max_norm`` inside ``A``.

    Candidates come from the induction: expected times first, then the other
    acceptable times, then tower heights ranked by tower mass.  Each one is
    kept only if its exact defect is below ``eps``.  Stops after ``want``
    verified times or ``max_checks`` defect evaluations.
    """
    eps = as_rational(eps)
    A = A or DensityPredicate.everything()
    if state is None:
        state = expand(T, StopRule(max_norm=max_norm))
    defect = DefectCache(T, state)
    queue: list = []
    seen: set = set()
    if table is not None:
        exp = {n for n, _ in detect_expected(state, table, eps)} if eps <= 1 else set()
        acc = detect_acceptable(state, table)
        queue += [(m, k, "expected") for k, m in acc if k in exp]
        queue += [(m, k, "acceptable") for k, m in acc if k not in exp]
    queue += [(h, k, "plain") for h, k, _ in tower_candidates(state, max_norm - 1)]
    report = RigidityReport(T, eps)
    checks = 0
    for n, k, source in queue:
        if n in seen or n >= max_norm or n not in A:
            continue
        seen.add(n)
        if checks >= max_checks:
            break
        checks += 1
        r = defect(n)
        if r < eps:
            report.detections.append(Detection(n, r, source, k))
            if len(report.detections) >= want:
                break
    if report.detections:
        report.first = min(report.detections, key=lambda d: d.n)
    report.dyadic_hits = frozenset(d.dyadic for d in report.detections)
    return report
