"""Rauzy-Veech induction with exact big-integer matrices.

Conventions.  One step induces ``T`` on ``[0, 1 - min(l_d, l_e))`` where
``e = pi^{-1}(d)`` is the interval sent to the last image slot, and rescales.
Type ``A``: the last domain interval is longer (``l_d > l_e``); type ``B``:
the other way round.  Permutations are kept in reduced (position) form, so
the elementary matrix ``E`` of a step satisfies ``lengths(T) = E @ lengths(T')``
up to normalisation and the accumulated matrix is
``M(T, n) = M(T, n - 1) @ E_n``.  Column ``j`` of ``M(T, n)`` sums to the
return time of the ``j``-th interval of ``R^n(T)``.
"""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .core import IET, Permutation, as_rational, from_integer_lengths
from .errors import (
    DegenerateLength,
    FormatError,
    ReduciblePermutation,
    SearchBudgetExceeded,
    TieBreakdown,
)
from .sampling import random_iet, sample_seed

CLAIMS = {
    "induction-matrix-product": ("rv_step", "expand"),
    "balanced-matrices": ("balance",),
    "dyadic-windows": ("dyadic_index", "ExpansionEvent"),
    "acceptable-pairs": ("acceptable_words", "detect_acceptable"),
    "balance-probability": ("balance_probe",),
    "cylinder-measure": ("cylinder_measure",),
}

A, B = "A", "B"


# ------------------------------------------------------------------ matrices


class RVMatrix:
    """Square nonnegative integer matrix, stored row-major."""

    __slots__ = ("rows",)

    def __init__(self, rows: Iterable[Iterable[int]]):
        self.rows = tuple(tuple(int(v) for v in row) for row in rows)

    @classmethod
    def identity(cls, d: int) -> "RVMatrix":
        return cls([[int(i == j) for j in range(d)] for i in range(d)])

    @classmethod
    def from_columns(cls, cols: Sequence[Sequence[int]]) -> "RVMatrix":
        return cls(zip(*cols))

    @property
    def d(self) -> int:
        return len(self.rows)

    @property
    def columns(self) -> tuple:
        return tuple(zip(*self.rows))

    def column_sums(self) -> tuple:
        return tuple(sum(col) for col in zip(*self.rows))

    def cmax_index(self) -> int:
        """0-based index of the column with the largest sum (smallest index on ties)."""
        sums = self.column_sums()
        return sums.index(max(sums))

    def cmax(self) -> int:
        return max(self.column_sums())

    def is_positive(self) -> bool:
        return all(v > 0 for row in self.rows for v in row)

    def max_entry(self) -> int:
        return max(max(row) for row in self.rows)

    def min_entry(self) -> int:
        return min(min(row) for row in self.rows)

    def __matmul__(self, other):
        if isinstance(other, RVMatrix):
            cols = other.columns
            return RVMatrix(
                [[sum(a * b for a, b in zip(row, col)) for col in cols] for row in self.rows]
            )
        return tuple(sum(a * b for a, b in zip(row, other)) for row in self.rows)

    def det(self) -> int:
        """Exact determinant (fraction-free Bareiss elimination)."""
        m = [list(r) for r in self.rows]
        n = len(m)
        sign, prev = 1, 1
        for k in range(n - 1):
            if m[k][k] == 0:
                swap = next((i for i in range(k + 1, n) if m[i][k]), None)
                if swap is None:
                    return 0
                m[k], m[swap] = m[swap], m[k]
                sign = -sign
            for i in range(k + 1, n):
                for j in range(k + 1, n):
                    m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
            prev = m[k][k]
        return sign * m[-1][-1]

    def dump(self) -> str:
        return "\n".join(" ".join(str(v) for v in row) for row in self.rows)

    @classmethod
    def parse(cls, text: str) -> "RVMatrix":
        try:
            rows = [[int(t) for t in line.split()] for line in text.strip().splitlines()]
        except ValueError as exc:
            raise FormatError("matrix dump must hold decimal integers") from exc
        if not rows or any(len(r) != len(rows) for r in rows):
            raise FormatError("matrix dump must be square")
        return cls(rows)

    def __eq__(self, other):
        return isinstance(other, RVMatrix) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return f"RVMatrix({[list(r) for r in self.rows]})"


def balance(M: RVMatrix) -> Fraction:
    """``max |C_i| / min |C_j|``; ``M`` is nu-balanced iff this is ``< nu``."""
    sums = M.column_sums()
    if min(sums) < 1:
        raise ValueError("column sums must be >= 1")
    return Fraction(max(sums), min(sums))


def cylinder_measure(M: RVMatrix) -> Fraction:
    """``prod_i 1/|C_i(M)|``: measure of ``M``'s cylinder inside one simplex.

    The Lebesgue measure of the projectivised image of the standard simplex
    under a unimodular nonnegative ``M`` equals this product relative to the
    simplex itself, so cylinders of one depth from one permutation sum to 1.
    """
    prod = 1
    for s in M.column_sums():
        prod *= s
    return Fraction(1, prod)


def dyadic_index(m: int) -> int:
    """``i`` with ``2**i <= m < 2**(i+1)``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return m.bit_length() - 1


# ------------------------------------------------------------- single step


def _last_slot_owner(p) -> int:
    return p.index(len(p) - 1)


def step_permutation(p: Sequence[int], kind: str) -> tuple:
    """Permutation update (0-based images) for a step of the given type."""
    last = len(p) - 1
    e = _last_slot_owner(p)
    if kind == A:
        pd = p[last]
        q = [x + 1 if x > pd else x for x in p]
        q[e] = pd + 1
        return tuple(q)
    if kind == B:
        return tuple(p[: e + 1]) + (p[last],) + tuple(p[e + 1 : last])
    raise ValueError(f"unknown step type {kind!r}")


def step_columns(cols: list, e: int, kind: str) -> list:
    """Right-multiply a column list by the elementary matrix of a step."""
    last = len(cols) - 1
    merged = [a + b for a, b in zip(cols[e], cols[last])]
    if kind == A:
        out = list(cols)
        out[e] = merged
        return out
    return cols[: e + 1] + [merged] + cols[e + 1 : last]


def _step_ints(v: Sequence[int], p: Sequence[int]):
    last = len(v) - 1
    e = p.index(last)
    a, b = v[last], v[e]
    if a == b:
        raise TieBreakdown(f"l_d == l_e == {a}")
    if a > b:
        w = list(v)
        w[last] = a - b
        pd = p[last]
        q = [x + 1 if x > pd else x for x in p]
        q[e] = pd + 1
        return A, e, w, q
    w = list(v[:e]) + [b - a, a] + list(v[e + 1 : last])
    q = list(p[: e + 1]) + [p[last]] + list(p[e + 1 : last])
    return B, e, w, q


def elementary_matrix(d: int, e: int, kind: str) -> RVMatrix:
    ident = [[int(i == j) for i in range(d)] for j in range(d)]
    return RVMatrix.from_columns(step_columns(ident, e, kind))


def rv_step(T: IET):
    """One Rauzy-Veech step: ``(T', type, E)`` with ``lengths(T) ~ E @ lengths(T')``."""
    if not T.nondegenerate:
        raise DegenerateLength(f"zero length in {T.lengths}")
    kind, e, w, q = _step_ints(T.ints.lengths, T.perm.zero)
    return from_integer_lengths(w, Permutation.from_zero_based(q)), kind, elementary_matrix(T.d, e, kind)


# ------------------------------------------------------------- expansions


@dataclass(frozen=True)
class StopRule:
    """Stop when any given bound is reached.

    ``max_norm``: stop as soon as ``|C_max| >= max_norm``.  ``predicate`` is
    called with the partial state after every step.
    """

    max_steps: int | None = None
    max_norm: int | None = None
    predicate: Callable[["RVState"], bool] | None = None

    def __post_init__(self):
        if self.max_steps is None and self.max_norm is None and self.predicate is None:
            raise ValueError("a StopRule needs at least one bound")


@dataclass(frozen=True)
class ExpansionEvent:
    step: int
    cmax: int
    dyadic: int
    balance: Fraction
    acceptable: bool = False
    expected: tuple = ()  # the epsilons for which this step is an expected rigidity time


@dataclass
class RVState:
    """A finite Rauzy-Veech expansion of ``start``.

    ``perms[k]`` and ``lengths[k]`` describe ``R^k(start)`` (lengths as
    integers on the start's scale, so ``start.ints.lengths == M(k) @ lengths[k]``);
    ``word[k-1]`` and ``cmax[k]`` etc. record step ``k``.
    """

    start: IET
    word: str = ""
    perms: list = field(default_factory=list)
    lengths: list = field(default_factory=list)
    cmax: list = field(default_factory=list)
    cmax_index: list = field(default_factory=list)
    cmin: list = field(default_factory=list)
    heights: list = field(default_factory=list)  # column sums of M(k), per step
    columns: list = field(default_factory=list)
    degenerate: bool = False
    tie_step: int | None = None
    table: "AcceptableWordTable | None" = None
    epsilons: tuple = ()

    @property
    def steps(self) -> int:
        return len(self.word)

    @property
    def matrix(self) -> RVMatrix:
        return RVMatrix.from_columns(self.columns)

    @property
    def perm_trace(self) -> list:
        return [Permutation.from_zero_based(p) for p in self.perms]

    def current_at(self, n: int) -> IET:
        return from_integer_lengths(self.lengths[n], Permutation.from_zero_based(self.perms[n]))

    @property
    def current(self) -> IET:
        return self.current_at(self.steps)

    def balance_at(self, n: int) -> Fraction:
        return Fraction(self.cmax[n], self.cmin[n])

    @property
    def events(self) -> list:
        acc = set()
        exp: dict = {}
        if self.table is not None:
            acc = {n for n, _ in detect_acceptable(self, self.table)}
            for eps in self.epsilons:
                for n, _ in expected_steps(self, self.table, eps):
                    exp.setdefault(n, []).append(eps)
        return [
            ExpansionEvent(
                n,
                self.cmax[n],
                dyadic_index(self.cmax[n]),
                self.balance_at(n),
                n in acc,
                tuple(exp.get(n, ())),
            )
            for n in range(1, self.steps + 1)
        ]


def expand(T: IET, stop: StopRule, table=None, epsilons: Sequence = ()) -> RVState:
    """Iterate :func:`rv_step` until ``stop`` fires or the induction ties.

    A tie is a data outcome: the returned state is flagged ``degenerate`` and
    records ``tie_step`` (the step that could not be performed).
    """
    T.require_nondegenerate()
    d = T.d
    v = list(T.ints.lengths)
    p = list(T.perm.zero)
    cols = [[int(i == j) for i in range(d)] for j in range(d)]
    sums = [1] * d
    state = RVState(
        start=T,
        perms=[tuple(p)],
        lengths=[tuple(v)],
        cmax=[1],
        cmax_index=[0],
        cmin=[1],
        heights=[tuple(sums)],
        table=table,
        epsilons=tuple(as_rational(e) for e in epsilons),
    )
    word = []
    max_steps, max_norm, pred = stop.max_steps, stop.max_norm, stop.predicate
    last = d - 1
    n = 0
    while True:
        if max_steps is not None and n >= max_steps:
            break
        if max_norm is not None and state.cmax[-1] >= max_norm:
            break
        if pred is not None and n and pred(state):
            break
        e = p.index(last)
        a, b = v[last], v[e]
        if a == b:
            state.degenerate = True
            state.tie_step = n + 1
            break
        merged = [x + y for x, y in zip(cols[e], cols[last])]
        if a > b:
            v[last] = a - b
            pd = p[last]
            p = [x + 1 if x > pd else x for x in p]
            p[e] = pd + 1
            cols[e] = merged
            sums[e] += sums[last]
            word.append(A)
        else:
            v = v[:e] + [b - a, a] + v[e + 1 : last]
            p = p[: e + 1] + [p[last]] + p[e + 1 : last]
            cols = cols[: e + 1] + [merged] + cols[e + 1 : last]
            sums = sums[: e + 1] + [sums[e] + sums[last]] + sums[e + 1 : last]
            word.append(B)
        n += 1
        top = max(sums)
        state.perms.append(tuple(p))
        state.lengths.append(tuple(v))
        state.cmax.append(top)
        state.cmax_index.append(sums.index(top))
        state.cmin.append(min(sums))
        state.heights.append(tuple(sums))
        if pred is not None:
            state.word = "".join(word)
            state.columns = cols
    state.word = "".join(word)
    state.columns = cols
    return state


# ------------------------------------------------------------- Rauzy classes


@dataclass(frozen=True)
class RauzyClass:
    id: str
    permutations: tuple

    @property
    def r(self) -> int:
        return len(self.permutations)

    @property
    def d(self) -> int:
        return self.permutations[0].d

    def __contains__(self, perm):
        return perm in self.permutations


def rauzy_class(seed: Permutation) -> RauzyClass:
    """Closure of ``seed`` under both step types (breadth first)."""
    if not isinstance(seed, Permutation):
        seed = Permutation(seed)
    if seed.d < 2 or not seed.irreducible:
        raise ReduciblePermutation(f"{seed} is not irreducible")
    seen = {seed.zero}
    queue = deque([seed.zero])
    while queue:
        p = queue.popleft()
        for kind in (A, B):
            q = step_permutation(p, kind)
            if q not in seen:
                seen.add(q)
                queue.append(q)
    perms = tuple(sorted(Permutation.from_zero_based(p) for p in seen))
    return RauzyClass(id=str(perms[-1]), permutations=perms)


# ------------------------------------------------------------- acceptable words


@dataclass(frozen=True)
class AcceptableWord:
    perm: Permutation
    word: str
    matrix: RVMatrix
    measure: Fraction  # relative cylinder measure inside the simplex of ``perm``

    @property
    def nu(self) -> Fraction:
        """Balance bound for matrices ending in this word: max entry / min entry."""
        return Fraction(self.matrix.max_entry(), self.matrix.min_entry())


@dataclass(frozen=True)
class AcceptableWordTable:
    rauzy: RauzyClass
    words: dict  # 0-based image tuple -> AcceptableWord

    def __getitem__(self, perm) -> AcceptableWord:
        key = perm.zero if isinstance(perm, Permutation) else tuple(perm)
        return self.words[key]

    def __iter__(self):
        return iter(self.words.values())

    @property
    def lengths(self) -> tuple:
        return tuple(sorted({len(w.word) for w in self.words.values()}))

    @property
    def min_measure(self) -> Fraction:
        return min(w.measure for w in self.words.values())


def word_matrix(perm: Permutation, word: str) -> tuple:
    """``(matrix, final_perm)`` of a step-type word read from ``perm``."""
    d = perm.d
    cols = [[int(i == j) for i in range(d)] for j in range(d)]
    p = perm.zero
    for kind in word:
        e = _last_slot_owner(p)
        cols = step_columns(cols, e, kind)
        p = step_permutation(p, kind)
    return RVMatrix.from_columns(cols), Permutation.from_zero_based(p)


def _positive(cols) -> bool:
    return all(v > 0 for col in cols for v in col)


def shortest_positive_word(perm: Permutation, max_len: int) -> str:
    """Shortest (then lexicographically smallest, ``A < B``) positive word from ``perm``."""
    d = perm.d
    ident = [[int(i == j) for i in range(d)] for j in range(d)]
    level = [("", perm.zero, ident)]
    for _ in range(max_len):
        nxt = []
        for word, p, cols in level:
            e = _last_slot_owner(p)
            for kind in (A, B):
                c2 = step_columns(cols, e, kind)
                if _positive(c2):
                    return word + kind
                nxt.append((word + kind, step_permutation(p, kind), c2))
        level = nxt
    raise SearchBudgetExceeded(f"no positive word of length <= {max_len} from {perm}")


def acceptable_words(rc: RauzyClass, max_len: int | None = None) -> AcceptableWordTable:
    if max_len is None:
        max_len = 4 * rc.d * rc.d
    words = {}
    for perm in rc.permutations:
        w = shortest_positive_word(perm, max_len)
        M, _ = word_matrix(perm, w)
        words[perm.zero] = AcceptableWord(perm, w, M, cylinder_measure(M))
    return AcceptableWordTable(rc, words)


def detect_acceptable(state: RVState, table: AcceptableWordTable) -> list:
    """Steps ``n`` whose word ends with the acceptable word of the permutation
    held at step ``n - |w|``; returns ``(n, |C_max(M(S, n))|)`` pairs."""
    word = state.word
    out = []
    lengths = table.lengths
    words = table.words
    perms = state.perms
    for n in range(1, len(word) + 1):
        for L in lengths:
            if L > n:
                break
            w = words.get(perms[n - L])
            if w is not None and len(w.word) == L and word.startswith(w.word, n - L):
                out.append((n, state.cmax[n]))
                break
    return out


def concentrated(state: RVState, n: int, eps: Fraction) -> bool:
    """Does ``R^n(S)`` give its C_max interval length ``> 1 - eps/2``?"""
    v = state.lengths[n]
    big = v[state.cmax_index[n]]
    # big / sum(v) > 1 - eps/2
    return 2 * big * eps.denominator > (2 * eps.denominator - eps.numerator) * sum(v)


def expected_steps(state: RVState, table: AcceptableWordTable, eps) -> list:
    eps = as_rational(eps)
    return [(n, m) for n, m in detect_acceptable(state, table) if concentrated(state, n, eps)]


# ------------------------------------------------------------- balance probe


@dataclass(frozen=True)
class BalanceProbe:
    nu0: Fraction
    K: Fraction
    trials: int
    successes: int
    discarded: int

    @property
    def rho(self) -> Fraction:
        return Fraction(self.successes, self.trials) if self.trials else Fraction(0)

    @property
    def ci95(self) -> tuple:
        return wilson_interval(self.successes, self.trials)


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple:
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return (lo, hi)


def balance_windows(state: RVState, growth: Fraction, checkpoints: int) -> list:
    """Per checkpoint ``j = 1..checkpoints``: the smallest balance ratio seen
    from the first step with ``|C_max| >= growth**j`` until ``|C_max|``
    reaches ``growth`` times its checkpoint value.  ``None`` if the expansion
    stopped before the window closed."""
    out = []
    cmax, cmin = state.cmax, state.cmin
    n_steps = state.steps
    num, den = growth.numerator, growth.denominator
    n = 0
    for j in range(1, checkpoints + 1):
        target = growth**j
        while n <= n_steps and cmax[n] < target:
            n += 1
        if n > n_steps:
            out.append(None)
            continue
        bound = cmax[n] * num
        best = (cmax[n], cmin[n])
        k = n
        while k <= n_steps and cmax[k] * den < bound:
            if cmax[k] * best[1] < best[0] * cmin[k]:
                best = (cmax[k], cmin[k])
            k += 1
        out.append(Fraction(*best) if k <= n_steps else None)
    return out


def balance_probe(
    rc: RauzyClass,
    K,
    samples: int,
    seed: int,
    nu0=100,
    checkpoints: int = 3,
    bits: int = 128,
) -> list:
    """Empirical probability that nu0-balance occurs before ``|C_max|`` grows by ``K**d``.

    ``nu0`` may be a single value or a sequence; one :class:`BalanceProbe` is
    returned per value, all computed on the same sampled expansions.
    """
    K = as_rational(K)
    if K <= 1 or samples < 1:
        raise ValueError("need K > 1 and samples >= 1")
    nus = [as_rational(x) for x in (nu0 if isinstance(nu0, (list, tuple)) else [nu0])]
    d = rc.d
    growth = K**d
    mins = []
    discarded = 0
    for i in range(samples):
        rng = random.Random(sample_seed(seed, i))
        T = random_iet(rng, rc.permutations, bits)
        st = expand(T, StopRule(max_norm=math.ceil(growth ** (checkpoints + 1)) + 1))
        for b in balance_windows(st, growth, checkpoints):
            if b is None:
                discarded += 1
            else:
                mins.append(b)
    return [
        BalanceProbe(nu, K, len(mins), sum(1 for b in mins if b < nu), discarded) for nu in nus
    ]
