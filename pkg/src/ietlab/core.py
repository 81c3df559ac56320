"""Exact interval exchange transformations.

An IET on ``[0, 1)`` is a length vector together with a permutation given by
its images: interval ``j`` (1-based, in domain order) is sent to slot
``perm[j]`` of the image.  All arithmetic is exact (:class:`fractions.Fraction`
at the API boundary, plain integers over a common denominator inside the hot
loops).
"""
from __future__ import annotations

from bisect import bisect_right
from functools import lru_cache
from fractions import Fraction
from math import lcm
from typing import Iterator, NamedTuple, Sequence

from .errors import (
    DegenerateLength,
    FormatError,
    NegativeLength,
    NonUnitSum,
    NotAPermutation,
    OutOfDomain,
)

CLAIMS = {
    "iet-definition": ("make_iet", "evaluate", "to_piecewise", "invert"),
    "irreducible-permutations": ("Permutation.irreducible",),
    "keane-condition": ("keane_check",),
}

Rational = Fraction


def as_rational(value) -> Fraction:
    """Coerce ints, strings like ``"3/5"`` and Fractions; reject floats."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not accepted; pass an exact rational")
    return Fraction(value)


class Permutation:
    """Permutation of ``{1..d}`` stored as its images ``(pi(1), ..., pi(d))``."""

    __slots__ = ("images", "zero", "_irreducible")

    def __init__(self, images: Sequence[int]):
        imgs = tuple(int(i) for i in images)
        d = len(imgs)
        if d < 1 or sorted(imgs) != list(range(1, d + 1)):
            raise NotAPermutation(f"{imgs!r} is not a permutation of 1..{d}")
        self.images = imgs
        self.zero = tuple(i - 1 for i in imgs)
        self._irreducible = None

    @classmethod
    def from_zero_based(cls, zero: Sequence[int]) -> "Permutation":
        return cls([i + 1 for i in zero])

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        try:
            return cls([int(tok) for tok in text.replace(",", " ").split()])
        except ValueError as exc:
            raise FormatError(f"bad permutation text {text!r}") from exc

    @property
    def d(self) -> int:
        return len(self.images)

    @property
    def irreducible(self) -> bool:
        """True iff ``pi({1..k}) != {1..k}`` for every ``k < d``."""
        if self._irreducible is None:
            running_max = 0
            ok = True
            for k, img in enumerate(self.images[:-1], start=1):
                running_max = max(running_max, img)
                if running_max == k:
                    ok = False
                    break
            self._irreducible = ok
        return self._irreducible

    def inverse(self) -> "Permutation":
        inv = [0] * self.d
        for j, img in enumerate(self.images, start=1):
            inv[img - 1] = j
        return Permutation(inv)

    def __call__(self, j: int) -> int:
        return self.images[j - 1]

    def __len__(self):
        return self.d

    def __iter__(self):
        return iter(self.images)

    def __eq__(self, other):
        return isinstance(other, Permutation) and self.images == other.images

    def __lt__(self, other):
        return self.images < other.images

    def __hash__(self):
        return hash(self.images)

    def __str__(self):
        return " ".join(map(str, self.images))

    def __repr__(self):
        return f"Permutation({list(self.images)})"


class IntForm(NamedTuple):
    """Integer data of an IET over the common denominator ``Q``."""

    Q: int
    lengths: tuple
    lefts: tuple
    shifts: tuple


def _int_form(lengths: Sequence[int], perm0: Sequence[int], Q: int) -> IntForm:
    d = len(lengths)
    lefts = []
    acc = 0
    for length in lengths:
        lefts.append(acc)
        acc += length
    slot_len = [0] * d
    for j in range(d):
        slot_len[perm0[j]] = lengths[j]
    slot_left = []
    acc = 0
    for length in slot_len:
        slot_left.append(acc)
        acc += length
    shifts = tuple(slot_left[perm0[j]] - lefts[j] for j in range(d))
    return IntForm(Q, tuple(lengths), tuple(lefts), shifts)


class IET:
    """An interval exchange ``(lengths, perm)`` on ``[0, 1)``.

    Construct through :func:`make_iet`, which validates the data.
    """

    __slots__ = ("lengths", "perm", "_ints", "_breaks", "_hash")

    def __init__(self, lengths: Sequence[Fraction], perm: Permutation):
        self.lengths = tuple(lengths)
        self.perm = perm
        Q = lcm(*(length.denominator for length in self.lengths))
        ints = [length.numerator * (Q // length.denominator) for length in self.lengths]
        self._ints = _int_form(ints, perm.zero, Q)
        self._breaks = tuple(Fraction(b, Q) for b in self._ints.lefts)
        self._hash = None

    @property
    def d(self) -> int:
        return len(self.lengths)

    @property
    def ints(self) -> IntForm:
        return self._ints

    @property
    def breakpoints(self) -> tuple:
        """``(b_0, ..., b_d)`` with ``b_0 = 0`` and ``b_d = 1``."""
        return self._breaks + (Fraction(1),)

    @property
    def shifts(self) -> tuple:
        Q = self._ints.Q
        return tuple(Fraction(s, Q) for s in self._ints.shifts)

    @property
    def irreducible(self) -> bool:
        return self.perm.irreducible

    @property
    def nondegenerate(self) -> bool:
        return all(length > 0 for length in self._ints.lengths)

    def require_nondegenerate(self) -> None:
        if not self.nondegenerate:
            raise DegenerateLength(f"zero length in {self.lengths}")

    def __call__(self, x) -> Fraction:
        return evaluate(self, x)

    def __eq__(self, other):
        return (
            isinstance(other, IET)
            and self.lengths == other.lengths
            and self.perm == other.perm
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._ints.Q, self._ints.lengths, self.perm))
        return self._hash

    def __repr__(self):
        return f"IET({format_iet(self)!r})"


def make_iet(lengths, perm) -> IET:
    """Validate and build an IET; ``perm`` may be a Permutation or image list."""
    if not isinstance(perm, Permutation):
        perm = Permutation(perm)
    vals = tuple(as_rational(v) for v in lengths)
    if len(vals) != perm.d:
        raise NotAPermutation(f"{len(vals)} lengths for a permutation on {perm.d} letters")
    if perm.d < 2:
        raise NotAPermutation("an IET needs d >= 2 intervals")
    for v in vals:
        if v < 0:
            raise NegativeLength(f"negative length {v}")
    total = sum(vals, Fraction(0))
    if total != 1:
        raise NonUnitSum(f"lengths sum to {total}, not 1")
    return IET(vals, perm)


def identity_iet(d: int = 2) -> IET:
    return make_iet([Fraction(1, d)] * d, range(1, d + 1))


def rotation(alpha) -> IET:
    """The 2-IET ``x -> x + alpha mod 1`` (lengths ``(1 - alpha, alpha)``)."""
    alpha = as_rational(alpha)
    return make_iet([1 - alpha, alpha], [2, 1])


def from_integer_lengths(ints: Sequence[int], perm) -> IET:
    total = sum(ints)
    return make_iet([Fraction(v, total) for v in ints], perm)


def evaluate(T: IET, x) -> Fraction:
    """``T(x)`` by the defining formula; ``x`` must lie in ``[0, 1)``."""
    x = as_rational(x)
    if x < 0 or x >= 1:
        raise OutOfDomain(f"{x} is outside [0, 1)")
    j = bisect_right(T._breaks, x) - 1
    ints = T._ints
    return x + Fraction(ints.shifts[j], ints.Q)


def invert(T: IET) -> IET:
    """The IET ``S`` with ``S(T(x)) = x``."""
    T.require_nondegenerate()
    inv = T.perm.inverse()
    return IET(tuple(T.lengths[inv(k) - 1] for k in range(1, T.d + 1)), inv)


# ---------------------------------------------------------------- piecewise


class PiecewiseTranslation:
    """A bijection of ``[0, 1)`` that translates finitely many intervals.

    Stored over a common denominator ``Q``: piece ``k`` is
    ``[lefts[k], lefts[k+1]) / Q`` translated by ``shifts[k] / Q``.  Adjacent
    pieces with equal shifts are always merged, so equal maps have equal data.
    """

    __slots__ = ("Q", "lefts", "shifts")

    def __init__(self, Q: int, lefts: Sequence[int], shifts: Sequence[int]):
        self.Q = Q
        self.lefts = tuple(lefts)
        self.shifts = tuple(shifts)

    @classmethod
    def identity(cls, Q: int = 1) -> "PiecewiseTranslation":
        return cls(Q, (0,), (0,))

    @classmethod
    def from_iet(cls, T: IET) -> "PiecewiseTranslation":
        ints = T.ints
        lefts, shifts = [], []
        for left, length, shift in zip(ints.lefts, ints.lengths, ints.shifts):
            if length == 0:
                continue
            if shifts and shifts[-1] == shift:
                continue
            lefts.append(left)
            shifts.append(shift)
        return cls(ints.Q, lefts, shifts)

    @classmethod
    def from_pieces(cls, pieces) -> "PiecewiseTranslation":
        """Build from ``(left, right, shift)`` rational triples, validating them."""
        triples = [tuple(as_rational(v) for v in p) for p in pieces]
        if not triples:
            raise FormatError("no pieces")
        Q = lcm(*(v.denominator for p in triples for v in p))
        lefts, shifts = [], []
        expect = Fraction(0)
        for left, right, shift in triples:
            if left != expect or right <= left:
                raise FormatError("pieces must be sorted, contiguous and nonempty")
            expect = right
            s = int(shift * Q)
            if shifts and shifts[-1] == s:
                continue
            lefts.append(int(left * Q))
            shifts.append(s)
        if expect != 1:
            raise FormatError("pieces must cover [0, 1)")
        pt = cls(Q, lefts, shifts)
        pt.validate()
        return pt

    def __len__(self):
        return len(self.lefts)

    @property
    def rights(self) -> tuple:
        return self.lefts[1:] + (self.Q,)

    @property
    def pieces(self) -> tuple:
        Q = self.Q
        return tuple(
            (Fraction(a, Q), Fraction(b, Q), Fraction(s, Q))
            for a, b, s in zip(self.lefts, self.rights, self.shifts)
        )

    def image_intervals(self) -> list:
        """Sorted integer image intervals ``(a + s, b + s)`` over ``Q``."""
        return sorted((a + s, b + s) for a, b, s in zip(self.lefts, self.rights, self.shifts))

    def validate(self) -> None:
        """Check that the images tile ``[0, 1)`` exactly (measure preservation)."""
        expect = 0
        for a, b in self.image_intervals():
            if a != expect:
                raise FormatError("image intervals do not tile [0, 1)")
            expect = b
        if expect != self.Q:
            raise FormatError("image intervals do not tile [0, 1)")

    def rescaled(self, Q: int) -> "PiecewiseTranslation":
        if Q == self.Q:
            return self
        if Q % self.Q:
            raise ValueError("new denominator must be a multiple of the old one")
        k = Q // self.Q
        return PiecewiseTranslation(Q, [a * k for a in self.lefts], [s * k for s in self.shifts])

    def __call__(self, x) -> Fraction:
        x = as_rational(x)
        if x < 0 or x >= 1:
            raise OutOfDomain(f"{x} is outside [0, 1)")
        j = bisect_right(self.lefts, x * self.Q) - 1
        return x + Fraction(self.shifts[j], self.Q)

    def compose(self, inner: "PiecewiseTranslation") -> "PiecewiseTranslation":
        """``self o inner``: apply ``inner`` first."""
        Q = lcm(self.Q, inner.Q)
        outer = self.rescaled(Q)
        inner = inner.rescaled(Q)
        lefts, shifts = _compose(outer.lefts, outer.shifts, inner.lefts, inner.shifts, Q)
        return PiecewiseTranslation(Q, lefts, shifts)

    def __matmul__(self, inner):
        return self.compose(inner)

    def inverse(self) -> "PiecewiseTranslation":
        order = sorted(zip(self.lefts, self.rights, self.shifts), key=lambda p: p[0] + p[2])
        lefts, shifts = [], []
        for a, _, s in order:
            if shifts and shifts[-1] == -s:
                continue
            lefts.append(a + s)
            shifts.append(-s)
        return PiecewiseTranslation(self.Q, lefts, shifts)

    def displacement_integral(self) -> Fraction:
        """Exact ``integral of |P(x) - x|`` over ``[0, 1)``."""
        total = 0
        for a, b, s in zip(self.lefts, self.rights, self.shifts):
            total += (b - a) * abs(s)
        return Fraction(total, self.Q * self.Q)

    def is_identity(self) -> bool:
        return self.shifts == (0,)

    def __eq__(self, other):
        if not isinstance(other, PiecewiseTranslation):
            return NotImplemented
        Q = lcm(self.Q, other.Q)
        a, b = self.rescaled(Q), other.rescaled(Q)
        return a.lefts == b.lefts and a.shifts == b.shifts

    def __hash__(self):
        return hash(self.pieces)

    def __repr__(self):
        body = ", ".join(f"[{a},{b})->{'+' if s >= 0 else ''}{s}" for a, b, s in self.pieces)
        return f"PiecewiseTranslation({body})"


def _compose(a_lefts, a_shifts, b_lefts, b_shifts, Q):
    out_l: list = []
    out_s: list = []
    na = len(a_lefts)
    nb = len(b_lefts)
    for i in range(nb):
        left = b_lefts[i]
        right = b_lefts[i + 1] if i + 1 < nb else Q
        s = b_shifts[i]
        img_right = right + s
        j = bisect_right(a_lefts, left + s) - 1
        pos = left
        while True:
            s2 = s + a_shifts[j]
            if not out_s or out_s[-1] != s2:
                out_l.append(pos)
                out_s.append(s2)
            j += 1
            if j >= na:
                break
            nxt = a_lefts[j]
            if nxt >= img_right:
                break
            pos = nxt - s
    return out_l, out_s


def to_piecewise(T: IET, n: int) -> PiecewiseTranslation:
    """Exact ``T**n`` as a piecewise translation (``n >= 0``)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    T.require_nondegenerate()
    result = PiecewiseTranslation.identity(T.ints.Q)
    # square-and-multiply over cached squares T^(2^k)
    k = 0
    while n:
        if n & 1:
            result = _dyadic_power(T, k).compose(result)
        n >>= 1
        k += 1
    return result


@lru_cache(maxsize=128)
def _dyadic_power(T: IET, k: int) -> "PiecewiseTranslation":
    if k == 0:
        return PiecewiseTranslation.from_iet(T)
    half = _dyadic_power(T, k - 1)
    return half.compose(half)


def iterate_piecewise(T: IET, n_max: int) -> Iterator[PiecewiseTranslation]:
    """Yield ``T**1, ..., T**n_max`` by successive refinement ``T o T**(n-1)``."""
    T.require_nondegenerate()
    one = PiecewiseTranslation.from_iet(T)
    Q = one.Q
    cur_l, cur_s = one.lefts, one.shifts
    for _ in range(n_max):
        yield PiecewiseTranslation(Q, cur_l, cur_s)
        cur_l, cur_s = _compose(one.lefts, one.shifts, cur_l, cur_s, Q)


class KeaneReport(NamedTuple):
    holds: bool
    violation: tuple | None  # (n, i, j): T^n(b_i) == b_j, 1-based breakpoint indices

    def __bool__(self):
        return self.holds


def discontinuities(T: IET) -> list:
    """1-based indices ``i`` of interior breakpoints ``b_i`` where ``T`` jumps."""
    p = T.perm.zero
    ints = T.ints
    return [
        i
        for i in range(1, T.d)
        if p[i] != p[i - 1] + 1 and ints.lefts[i] != ints.lefts[i - 1]
    ]


def keane_check(T: IET, depth: int) -> KeaneReport:
    """Check ``T^n(b_i) != b_j`` for all ``1 <= n <= depth`` and nontrivial breakpoints."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    ints = T.ints
    idx = discontinuities(T)
    where = {ints.lefts[i]: i for i in idx}
    points = [(i, ints.lefts[i]) for i in idx]
    lefts, shifts = ints.lefts, ints.shifts
    for n in range(1, depth + 1):
        moved = []
        for i, x in points:
            x += shifts[bisect_right(lefts, x) - 1]
            j = where.get(x)
            if j is not None:
                return KeaneReport(False, (n, i, j))
            moved.append((i, x))
        points = moved
    return KeaneReport(True, None)


# ------------------------------------------------------------ text format


def format_iet(T: IET) -> str:
    """``"l1,l2,...;p1 p2 ... pd"`` with lengths written as exact fractions."""
    return ",".join(str(v) for v in T.lengths) + ";" + str(T.perm)


def parse_lengths(text: str) -> list:
    try:
        return [Fraction(tok.strip()) for tok in text.split(",") if tok.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise FormatError(f"bad length list {text!r}") from exc


def parse_iet(text: str) -> IET:
    if text.count(";") != 1:
        raise FormatError(f"expected 'lengths;perm', got {text!r}")
    lengths, perm = text.split(";")
    return make_iet(parse_lengths(lengths), Permutation.parse(perm))
