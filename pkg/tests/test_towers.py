import random
from fractions import Fraction as F

import numpy as np
import pytest

import oracles
from ietlab.core import Permutation, rotation, to_piecewise
from ietlab.rauzy import StopRule, expand, rauzy_class
from ietlab.sampling import random_iet
from ietlab.towers import Towers, best_step, int_correlate, tower_cost


def sample(rng, seed, bits=64):
    return random_iet(rng, rauzy_class(Permutation.parse(seed)).permutations, bits)


@pytest.mark.parametrize("seed", ["2 1", "3 2 1", "4 3 2 1", "2 4 1 3"])
def test_towers_tile_the_interval(seed):
    T = sample(random.Random(21), seed)
    st = expand(T, StopRule(max_norm=500))
    for n in (0, 1, st.steps // 2, st.steps):
        tw = Towers.from_state(st, n)
        assert sum(h * w for h, w in zip(tw.heights, tw.widths)) == tw.Q
        levels = sorted(int(x) + b for r, b in zip(tw.rel, tw.bases) for x in r)
        assert len(set(levels)) == len(levels)


@pytest.mark.parametrize("seed", ["2 1", "3 2 1", "4 3 2 1", "3 1 2"])
def test_tower_defect_matches_piece_sum(seed):
    rng = random.Random(22)
    for _ in range(3):
        T = sample(rng, seed)
        st = expand(T, StopRule(max_norm=200))
        for n in (3, st.steps):
            tw = Towers.from_state(st, n)
            for m in (1, 2, 7, 50, 199, 333):
                assert tw.defect(m) == to_piecewise(T, m).displacement_integral()


def test_scaled_towers_agree():
    T = sample(random.Random(23), "4 3 2 1")
    st = expand(T, StopRule(max_norm=100))
    a = Towers.from_state(st)
    b = Towers.from_state(st, scale=6)
    assert a.defect(40) == b.defect(40)


def test_for_horizon_around_ties():
    # an immediate tie leaves no induction step to build on
    assert Towers.for_horizon(rotation(F(1, 2)), 100) is None
    # otherwise the steps before the tie still give exact towers
    tw = Towers.for_horizon(rotation(F(1, 3)), 10**6)
    assert tw.defect(3) == 0 and tw.defect(1000) == to_piecewise(rotation(F(1, 3)), 1000).displacement_integral()
    T = sample(random.Random(24), "3 2 1", 128)
    assert Towers.for_horizon(T, 1000) is not None
    assert Towers.for_horizon(T, 1000, budget=0) is None


def test_best_step_beats_first_tall_step():
    T = sample(random.Random(26), "4 3 2 1", 128)
    st = expand(T, StopRule(max_norm=2**16))
    k, cost = best_step(st, 5000)
    first = next(k for k, c in enumerate(st.cmax) if c >= 5000)
    assert cost <= tower_cost(st.heights[first], 5000)
    assert Towers.from_state(st, k).defect(5000) == Towers.from_state(st, first).defect(5000)


def test_rotation_defect_through_towers():
    rng = random.Random(25)
    T = sample(rng, "2 1", 128)
    beta = T.lengths[1]
    tw = Towers.for_horizon(T, 4096)
    for m in (1, 100, 999, 4000):
        assert tw.defect(m) == oracles.rotation_defect(m * beta - int(m * beta))


def test_int_correlate_direct_and_fft():
    rng = np.random.default_rng(0)
    for la, lv in ((10, 3), (3000, 2500)):
        a = rng.integers(-3, 4, size=la)
        v = rng.integers(-3, 4, size=lv)
        want = [int(sum(int(v[k]) * int(a[k + n]) for k in range(lv))) for n in range(la - lv + 1)]
        assert [int(x) for x in int_correlate(a, v)] == want
