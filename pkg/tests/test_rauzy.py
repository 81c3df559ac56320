import random
from fractions import Fraction as F
from itertools import groupby

import pytest

import oracles
from ietlab.core import Permutation, from_integer_lengths, make_iet
from ietlab.errors import DegenerateLength, FormatError, ReduciblePermutation, SearchBudgetExceeded, TieBreakdown
from ietlab.rauzy import (
    RVMatrix,
    StopRule,
    acceptable_words,
    balance,
    balance_probe,
    concentrated,
    cylinder_measure,
    detect_acceptable,
    dyadic_index,
    elementary_matrix,
    expand,
    rauzy_class,
    rv_step,
    shortest_positive_word,
    wilson_interval,
    word_matrix,
)
from ietlab.rigidity import detect_expected
from ietlab.sampling import random_iet, random_point

P21 = Permutation([2, 1])


def rand_iet(rng, seed_perm, bits=64):
    return random_iet(rng, rauzy_class(Permutation.parse(seed_perm)).permutations, bits)


# ------------------------------------------------------------ labelled oracle


def labelled_word_matrix(images, word):
    """Matrix of a step word in the labelled two-row formalism (columns per label)."""
    top, bottom = oracles.two_row(images)
    d = len(images)
    M = [[int(i == j) for j in range(d)] for i in range(d)]
    for kind in word:
        if kind == "A":
            w, l = top[-1], bottom[-1]
            bottom = bottom[:-1]
            bottom.insert(bottom.index(w) + 1, l)
        else:
            w, l = bottom[-1], top[-1]
            top = top[:-1]
            top.insert(top.index(w) + 1, l)
        for i in range(d):
            M[i][l] += M[i][w]
    return M


def col_sums(M):
    return [sum(M[i][j] for i in range(len(M))) for j in range(len(M))]


# ------------------------------------------------------------ rv_step


def test_rv_step_example():
    T = make_iet([F(1, 3), F(2, 3)], P21)
    T1, kind, E = rv_step(T)
    assert T1 == make_iet([F(1, 2), F(1, 2)], P21)
    assert E.column_sums() == (2, 1)
    assert E == RVMatrix([[1, 0], [1, 1]])
    # lengths(T) proportional to E @ lengths(T')
    v = E @ T1.lengths
    assert [x / sum(v) for x in v] == list(T.lengths)


def test_rv_step_tie_and_degenerate():
    with pytest.raises(TieBreakdown):
        rv_step(make_iet([F(1, 2), F(1, 2)], P21))
    with pytest.raises(DegenerateLength):
        rv_step(make_iet([F(0), F(1)], P21))


def test_rv_step_is_normalised_first_return():
    rng = random.Random(11)
    for seed in ("2 1", "3 2 1", "4 3 2 1", "2 4 1 3", "5 4 3 2 1"):
        for _ in range(10):
            T = rand_iet(rng, seed, 48)
            d = T.d
            e = T.perm.images.index(d)
            J = 1 - min(T.lengths[-1], T.lengths[e])
            T1, kind, E = rv_step(T)
            assert kind == ("A" if T.lengths[-1] > T.lengths[e] else "B")
            for _ in range(8):
                x = random_point(rng, 60) * J
                y, _ = oracles.first_return_image(T.lengths, T.perm.images, x, J)
                assert T1(x / J) == y / J
            # column sums are return times of the induced intervals
            left = F(0)
            for j, length in enumerate(T1.lengths):
                x = (left + length / 2) * J
                _, steps = oracles.first_return_image(T.lengths, T.perm.images, x, J)
                assert steps == E.column_sums()[j]
                left += length
            assert abs(E.det()) == 1


def test_d2_induction_is_subtractive_continued_fraction():
    rng = random.Random(12)
    for _ in range(50):
        l = F(rng.randrange(1, 10**9), 10**9 + 7)
        st = expand(make_iet([l, 1 - l], P21), StopRule(max_steps=10**4))
        runs = [len(list(g)) for _, g in groupby(st.word)]
        cf = oracles.continued_fraction((1 - l) / l)
        quotients = cf[1:] if cf[0] == 0 else cf
        assert st.degenerate
        # every run is a partial quotient; the final one stops a step short at the tie
        assert runs[:-1] == quotients[:-1]
        assert runs[-1] == quotients[-1] - 1 or (runs[-1] == quotients[-2] and quotients[-1] == 1)


# ------------------------------------------------------------ expand


def test_expand_zero_steps():
    T = make_iet([F(1, 3), F(2, 3)], P21)
    st = expand(T, StopRule(max_steps=0))
    assert st.word == "" and st.matrix == RVMatrix.identity(2)
    assert st.current == T


def test_expand_two_steps_hits_tie():
    # step 1 gives ((1/2, 1/2), (2 1)); step 2 is a tie
    st = expand(make_iet([F(1, 3), F(2, 3)], P21), StopRule(max_steps=2))
    assert st.degenerate and st.tie_step == 2
    assert st.steps == 1
    assert st.matrix.cmax() == 2
    v = st.matrix @ st.current.lengths
    assert [x / sum(v) for x in v] == [F(1, 3), F(2, 3)]


def test_stop_rule_needs_a_bound():
    with pytest.raises(ValueError):
        StopRule()


def test_expand_matches_repeated_rv_step_and_identity():
    rng = random.Random(13)
    for seed in ("3 2 1", "4 3 2 1", "2 4 1 3"):
        T = rand_iet(rng, seed, 128)
        st = expand(T, StopRule(max_steps=60))
        M = RVMatrix.identity(T.d)
        cur = T
        for n in range(1, st.steps + 1):
            cur, kind, E = rv_step(cur)
            M = M @ E
            assert kind == st.word[n - 1]
            assert cur == st.current_at(n)
            assert st.perm_trace[n] == cur.perm
            # exact induction identity with unnormalised integer lengths
            assert M @ st.lengths[n] == T.ints.lengths
            assert M.column_sums() == st.heights[n]
            assert st.cmax[n] == M.cmax()
        assert M == st.matrix
        assert abs(M.det()) == 1


def test_expand_labelled_oracle_column_sums():
    rng = random.Random(14)
    T = rand_iet(rng, "5 4 3 2 1", 128)
    st = expand(T, StopRule(max_steps=40))
    M = labelled_word_matrix(T.perm.images, st.word)
    assert sorted(col_sums(M)) == sorted(st.matrix.column_sums())


def test_expand_max_norm_and_predicate():
    T = rand_iet(random.Random(15), "3 2 1", 128)
    st = expand(T, StopRule(max_norm=1000))
    assert st.cmax[-1] >= 1000 and st.cmax[-2] < 1000
    st2 = expand(T, StopRule(predicate=lambda s: s.steps >= 7))
    assert st2.steps == 7 and st2.word == st.word[:7]


def test_random_4iets_reach_2_30_without_tie():
    rng = random.Random(16)
    ties = sum(expand(rand_iet(rng, "4 3 2 1", 128), StopRule(max_norm=2**30)).degenerate for _ in range(100))
    assert ties == 0


# ------------------------------------------------------------ matrices


def test_balance_examples():
    assert balance(RVMatrix.identity(3)) == 1
    assert balance(RVMatrix([[1, 0], [1, 1]])) == 2


def test_matrix_dump_round_trip():
    M = RVMatrix([[1, 2**80], [3, 4]])
    assert RVMatrix.parse(M.dump()) == M
    with pytest.raises(FormatError):
        RVMatrix.parse("1 2\n3")
    with pytest.raises(FormatError):
        RVMatrix.parse("1 x\n3 4")


def test_det():
    assert RVMatrix([[2, 1], [1, 1]]).det() == 1
    assert RVMatrix([[0, 1], [1, 0]]).det() == -1
    assert RVMatrix([[1, 2], [2, 4]]).det() == 0


def test_elementary_matrices_unimodular():
    for d in (2, 3, 5):
        for e in range(d - 1):
            for kind in "AB":
                assert abs(elementary_matrix(d, e, kind).det()) == 1


@pytest.mark.parametrize("m,i", [(1, 0), (2, 1), (3, 1), (4, 2), (2**20 - 1, 19), (2**20, 20)])
def test_dyadic_index(m, i):
    assert dyadic_index(m) == i
    assert 2**i <= m < 2 ** (i + 1)


# ------------------------------------------------------------ classes


def test_rauzy_class_examples():
    assert rauzy_class(P21).r == 1
    rc = rauzy_class(Permutation([3, 2, 1]))
    assert {p.images for p in rc.permutations} == {(3, 2, 1), (2, 3, 1), (3, 1, 2)}
    assert rauzy_class(Permutation([4, 3, 2, 1])).r == 7
    assert rauzy_class(Permutation([5, 4, 3, 2, 1])).r == 15


def test_rauzy_classes_match_two_row_oracle():
    for d in (3, 4, 5):
        for p in oracles.all_irreducible(d):
            got = {q.images for q in rauzy_class(Permutation(p)).permutations}
            assert got == oracles.rauzy_class_bfs(p)


def test_reducible_seed():
    with pytest.raises(ReduciblePermutation):
        rauzy_class(Permutation([1, 3, 2]))


# ------------------------------------------------------------ acceptable words


def shortlex_positive(images, max_len):
    for n in range(1, max_len + 1):
        for w in oracles.words_of_length(n):
            if all(v > 0 for row in labelled_word_matrix(images, w) for v in row):
                return w
    return None


def test_acceptable_word_d2():
    table = acceptable_words(rauzy_class(P21))
    w = table[P21]
    assert w.word == "AB"
    assert w.matrix.is_positive()
    assert w.measure == F(1, 6)
    assert not word_matrix(P21, "A")[0].is_positive()
    assert not word_matrix(P21, "B")[0].is_positive()


@pytest.mark.parametrize("seed", ["3 2 1", "4 3 2 1", "2 4 1 3"])
def test_acceptable_words_match_exhaustive_oracle(seed):
    rc = rauzy_class(Permutation.parse(seed))
    table = acceptable_words(rc)
    for perm in rc.permutations:
        w = table[perm]
        assert w.word == shortlex_positive(perm.images, 12)
        assert w.matrix.min_entry() >= 1
        for k in range(1, len(w.word)):
            assert not word_matrix(perm, w.word[:k])[0].is_positive()
        M = labelled_word_matrix(perm.images, w.word)
        prod = 1
        for s in col_sums(M):
            prod *= s
        assert w.measure == F(1, prod)


def test_d3_words_are_short():
    table = acceptable_words(rauzy_class(Permutation([3, 2, 1])))
    assert max(table.lengths) <= 6


def test_search_budget():
    with pytest.raises(SearchBudgetExceeded):
        shortest_positive_word(Permutation([4, 3, 2, 1]), 3)


def test_cylinder_measures_sum_to_one():
    assert cylinder_measure(RVMatrix.identity(4)) == 1
    for seed in ("3 2 1", "4 3 2 1"):
        rc = rauzy_class(Permutation.parse(seed))
        for perm in rc.permutations:
            for n in (1, 2, 5):
                total = sum(cylinder_measure(word_matrix(perm, w)[0]) for w in oracles.words_of_length(n))
                assert total == 1


def test_balance_after_acceptable_word():
    rc = rauzy_class(Permutation([3, 2, 1]))
    table = acceptable_words(rc)
    rng = random.Random(17)
    checked = 0
    for _ in range(1000):
        st = expand(random_iet(rng, rc.permutations, 128), StopRule(max_norm=2**12))
        for n, _ in detect_acceptable(st, table):
            w = next(
                x for x in table
                if len(x.word) <= n and st.perms[n - len(x.word)] == x.perm.zero
                and st.word.startswith(x.word, n - len(x.word))
            )
            assert st.balance_at(n) <= w.nu <= w.nu * rc.d
            checked += 1
    assert checked > 50


# ------------------------------------------------------------ detection


def test_detect_acceptable_d2_abab():
    table = acceptable_words(rauzy_class(P21))
    T = make_iet([F(89, 233), F(144, 233)], P21)
    st = expand(T, StopRule(max_steps=4))
    assert st.word == "ABAB"
    assert [n for n, _ in detect_acceptable(st, table)] == [2, 4]
    assert expand(T, StopRule(max_steps=1)).word == "A"
    assert detect_acceptable(expand(T, StopRule(max_steps=1)), table) == []


def test_detect_acceptable_matches_suffix_scan():
    rc = rauzy_class(Permutation([4, 3, 2, 1]))
    table = acceptable_words(rc)
    rng = random.Random(18)
    for _ in range(30):
        st = expand(random_iet(rng, rc.permutations, 128), StopRule(max_norm=2**16))
        want = []
        for n in range(1, st.steps + 1):
            for w in table:
                L = len(w.word)
                if L <= n and st.perms[n - L] == w.perm.zero and st.word[n - L : n] == w.word:
                    want.append(n)
                    break
        assert [n for n, _ in detect_acceptable(st, table)] == want


def test_expected_strictness_at_one_half():
    # build T whose second induction step lands on lengths (1/2, 1/2) right after "AB"
    M, _ = word_matrix(P21, "AB")
    T = from_integer_lengths(list(M @ (1, 1)), P21)
    table = acceptable_words(rauzy_class(P21))
    st = expand(T, StopRule(max_steps=5))
    assert st.word == "AB" and st.tie_step == 3
    assert [n for n, _ in detect_acceptable(st, table)] == [2]
    assert not concentrated(st, 2, F(1))
    assert detect_expected(st, table, F(1)) == []


# ------------------------------------------------------------ balance probe


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_balance_probe_small():
    rc = rauzy_class(Permutation([3, 2, 1]))
    probes = balance_probe(rc, 2, 100, seed=3, nu0=[10, 100, 1000])
    rhos = [p.rho for p in probes]
    assert rhos == sorted(rhos)
    for p in probes:
        lo, hi = p.ci95
        assert lo <= float(p.rho) <= hi
        assert p.trials + p.discarded == 300
