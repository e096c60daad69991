from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sturmlab.bands import I
from sturmlab.dimension import (
    MORAN_TOL,
    box_count,
    box_counting_estimate,
    cantor_cover,
    cover_of,
    exponents_from_lengths,
    moran_exponent,
    pre_dimensions,
    subtree_pre_dimensions,
)
from sturmlab.errors import DegenerateScales, LengthOutOfRange

# golden mean, lambda = 24, 128 bits; frozen after the first verified build
GOLDEN_S = [math.nan, 0.6588537344289307, 0.45612588915435026, 0.3826677051005163, 0.3445757088254595,
            0.3252303076757812, 0.31015943197115803, 0.30090401876236683]


# --- Moran solver ---------------------------------------------------------------------


def test_two_quarters():
    assert moran_exponent([0.25, 0.25]) == pytest.approx(0.5, abs=1e-10)


def test_single_length():
    assert moran_exponent([0.3]) == 0


def test_half_quarter_quarter():
    assert moran_exponent([0.5, 0.25, 0.25]) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("bad", [[0.5, 1.0], [0.0, 0.2], [-0.1], [2.0, 0.1]])
def test_out_of_range(bad):
    with pytest.raises(LengthOutOfRange):
        moran_exponent(bad)


def test_twenty_self_similar_cases():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 50))
        length = float(rng.uniform(1e-6, 1 / n))
        assert moran_exponent([length] * n) == pytest.approx(math.log(n) / math.log(1 / length), abs=1e-10)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(1e-9, 0.99), min_size=2, max_size=40))
def test_residual_brackets(lengths):
    s = moran_exponent(lengths)
    total = lambda t: math.fsum(x ** t for x in lengths)  # noqa: E731
    assert abs(total(s) - 1) <= MORAN_TOL or total(s) > 1 > total(s + 1e-11)
    assert total(max(s - 10 * MORAN_TOL, 0)) >= 1 - MORAN_TOL
    assert total(s + 10 * MORAN_TOL) <= 1 + MORAN_TOL


def test_values_above_one_are_reported():
    # 3 copies of 1/2: s = log 3 / log 2 > 1, outside the theory's range but returned
    assert moran_exponent([0.5] * 3) == pytest.approx(math.log(3) / math.log(2), abs=1e-10)


# --- tail estimates -------------------------------------------------------------------


def _levels_with(ss):
    """Levels of two equal bands whose Moran exponent is the given ``s``."""
    return [[2 ** (-1 / s)] * 2 for s in ss]


def test_constant_sequence():
    r = exponents_from_lengths(_levels_with([0.4] * 6), tail_window=3)
    assert r.tail_min == pytest.approx(0.4, abs=1e-10)
    assert r.tail_max == pytest.approx(0.4, abs=1e-10)


def test_alternating_sequence():
    r = exponents_from_lengths(_levels_with([0.55, 0.60] * 4), tail_window=4)
    assert (r.tail_min, r.tail_max) == (pytest.approx(0.55, abs=1e-10), pytest.approx(0.60, abs=1e-10))
    assert r.tail_window == 4


def test_window_too_long():
    with pytest.raises(ValueError):
        exponents_from_lengths(_levels_with([0.5, 0.5]), tail_window=3)


def test_golden_fixture(golden_tree):
    r = pre_dimensions(golden_tree, tail_window=3)
    got = [x.s for x in r.s_by_level]
    assert math.isnan(got[0]) and r.s_by_level[0].k == 1
    assert got[1:] == pytest.approx(GOLDEN_S[1:], abs=1e-12)
    assert all(x.residual <= MORAN_TOL for x in r.s_by_level[1:])
    assert r.tail_min <= r.tail_max


def test_golden_tail_spread_decreases(golden_tree):
    r = pre_dimensions(golden_tree, tail_window=3)
    s = [x.s for x in r.s_by_level]
    spreads = [max(s[j:j + 3]) - min(s[j:j + 3]) for j in range(1, len(s) - 2)]
    assert all(b < a for a, b in zip(spreads, spreads[1:]))


def test_error_bars_are_small(golden_tree):
    r = pre_dimensions(golden_tree, tail_window=3)
    assert all(x.s_err < 1e-20 for x in r.s_by_level[1:])


# --- random per-band multipliers ---------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_multipliers(golden_tree, seed):
    C = 2.0
    rng = np.random.default_rng(seed)
    for k in range(3, 9):
        lengths = [float(b.length) for b in golden_tree.generations[k]]
        factors = np.exp(rng.uniform(-math.log(C), math.log(C), len(lengths)))
        s = moran_exponent(lengths)
        delta = moran_exponent([x * f for x, f in zip(lengths, factors)])
        assert abs(s - delta) <= 2 * math.log(C) / -math.log(max(lengths))


# --- box counting ---------------------------------------------------------------------


def test_box_count_simple():
    assert box_count([(0.0, 1.0)], 0.25) == 4
    assert box_count([(0.1, 0.2), (0.6, 0.65)], 0.5) == 2


def test_unit_interval():
    scales = [2.0 ** -j for j in range(4, 13)]
    assert box_counting_estimate([(0.0, 1.0)], scales) == pytest.approx(1.0, abs=0.02)


def test_middle_thirds():
    cover = cantor_cover(10)
    scales = [3.0 ** -j for j in range(2, 10)]
    assert box_counting_estimate(cover, scales) == pytest.approx(math.log(2) / math.log(3), abs=0.02)


def test_degenerate_scales():
    with pytest.raises(DegenerateScales):
        box_counting_estimate([(0.0, 1.0)], [0.1, 0.05])


def test_golden_box_counting(golden_tree):
    from sturmlab.cli import default_box_scales

    cover = cover_of(golden_tree.generations[8].bands)
    est = box_counting_estimate(cover, default_box_scales(golden_tree, 8))
    assert abs(est - GOLDEN_S[7]) <= 0.1


# --- subtrees -------------------------------------------------------------------------


def test_subtree_depth_zero(golden_tree):
    root = golden_tree.generations[0].bands[0]
    r = subtree_pre_dimensions(root, 0, golden_tree)
    assert len(r.s_by_level) == 1


def test_same_type_subtrees_agree(golden_tree):
    roots = [b for b in golden_tree.generations[2] if b.btype == I]
    assert len(roots) == 2
    a, b = (subtree_pre_dimensions(r, 6, golden_tree, 3) for r in roots)
    assert abs(a.tail_min - b.tail_min) <= 0.05
    assert abs(a.tail_max - b.tail_max) <= 0.05


@pytest.mark.xfail(strict=True, reason="B_III and B_I have different types; only same-type subtrees agree at finite depth")
def test_level0_subtrees_agree(golden_tree):
    b_iii, b_i = golden_tree.generations[0].bands
    a = subtree_pre_dimensions(b_iii, 6, golden_tree, 3)
    b = subtree_pre_dimensions(b_i, 6, golden_tree, 3)
    assert abs(a.tail_min - b.tail_min) <= 0.05
    assert abs(a.tail_max - b.tail_max) <= 0.05


def test_unit_relative_length_gives_undefined_row():
    r = exponents_from_lengths([[1.0], [0.25, 0.25]], tail_window=1)
    assert math.isnan(r.s[0]) and r.notes
    assert r.tail_min == pytest.approx(0.5, abs=1e-10)
