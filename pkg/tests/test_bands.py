from __future__ import annotations

import pytest
from gmpy2 import mpfr

from sturmlab.bands import (
    EDGES,
    TYPES,
    I,
    II,
    III,
    SymbolicLetter,
    admissible,
    band_of,
    build_tree,
    check_generation,
    check_word,
    child_counts,
    generation,
    level0,
    parse_word,
    refine,
    sigma_minus1_containment,
    tau,
    transition_matrix,
    type_counts,
    word_str,
)
from sturmlab.contfrac import GOLDEN, SILVER, ContinuedFraction
from sturmlab.errors import CouplingTooSmall, InadmissibleWord
from sturmlab.tracemap import Precision, TraceSpec, trace

from .conftest import LAM, cached_tree

ROW = {I: 0, II: 1, III: 2}


def _matrix_oracle(a: int) -> list[list[int]]:
    return [[0, 1, 0], [a + 1, 0, a], [a, 0, a - 1]]


def _counts_oracle(cf: ContinuedFraction, k: int) -> tuple:
    v = [1, 0, 1]
    for j in range(1, k + 1):
        m = _matrix_oracle(cf[j])
        v = [sum(v[r] * m[r][c] for r in range(3)) for c in range(3)]
    return tuple(v)


# --- combinatorics --------------------------------------------------------------------


@pytest.mark.parametrize("a", [1, 2, 5, 31])
def test_transition_matrix(a):
    assert transition_matrix(a).tolist() == _matrix_oracle(a)


@pytest.mark.parametrize("parent, a, row", [(I, 3, (0, 1, 0)), (II, 2, (3, 0, 2)), (III, 1, (1, 0, 0))])
def test_child_counts(parent, a, row):
    assert child_counts(parent, a) == row


def test_tau_values():
    n = 4
    assert [tau(e, n) for e in EDGES] == [1, n + 1, n, n, n - 1]


@pytest.mark.parametrize("literal", ["(1)", "(2)", "(1,2)", "3,1,7,2,(1)"])
def test_type_counts_oracle(literal):
    cf = ContinuedFraction.parse(literal)
    for k in range(9):
        assert type_counts(cf, k) == _counts_oracle(cf, k)


def test_golden_counts():
    assert [type_counts(GOLDEN, k) for k in (1, 2, 3)] == [(1, 1, 0), (2, 1, 1), (3, 2, 1)]


# --- words ----------------------------------------------------------------------------


def test_admissible_examples():
    assert admissible(SymbolicLetter((III, I), 1, 1), SymbolicLetter((I, II), 1, 1))
    assert not admissible(SymbolicLetter((I, II), 1, 1), SymbolicLetter((III, I), 1, 1))
    assert admissible(SymbolicLetter((II, III), 2, 1), SymbolicLetter((III, III), 1, 1))


def test_letter_guards():
    with pytest.raises(InadmissibleWord):
        SymbolicLetter((I, III), 1, 1)
    with pytest.raises(InadmissibleWord):
        SymbolicLetter((II, I), 2, 3)


def test_word_round_trip():
    w = (SymbolicLetter((III, I), 2, 1), SymbolicLetter((I, II), 1, 1), SymbolicLetter((II, III), 2, 2))
    assert parse_word(word_str(w)) == w


def test_check_word_first_letter_and_tau():
    cf = SILVER
    check_word((SymbolicLetter((III, I), 2, 2),), cf)
    with pytest.raises(InadmissibleWord):
        check_word((SymbolicLetter((II, I), 3, 1),), cf)
    with pytest.raises(InadmissibleWord):
        check_word((SymbolicLetter((III, I), 1, 1),), cf)
    with pytest.raises(InadmissibleWord):
        check_word((SymbolicLetter((III, I), 2, 1), SymbolicLetter((III, I), 2, 1)), cf)


# --- level 0 and refinement -----------------------------------------------------------


def test_level0():
    g = level0(LAM)
    assert [(b.lo, b.hi) for b in g] == [(-2, 2), (22, 26)]
    assert [b.btype for b in g] == [III, I]
    assert [b.tspec for b in g] == [TraceSpec(1, 0), TraceSpec(0, 1)]


def test_level0_traces_confirm_intervals():
    for E in ("-2", "2"):
        assert abs(trace(TraceSpec(1, 0), mpfr(E), 24, GOLDEN)) == 2
    for E in ("22", "26"):
        assert abs(trace(TraceSpec(0, 1), mpfr(E), 24, GOLDEN)) == 2


@pytest.mark.parametrize("lam", ["4", "3", "0.5"])
def test_coupling_guard(lam):
    with pytest.raises(CouplingTooSmall):
        level0(lam)


def test_refine_golden_type_i():
    b_iii, b_i = level0(LAM)
    kids = refine(b_i, 1, LAM, GOLDEN)
    assert [k.btype for k in kids] == [II]


def test_refine_golden_type_iii():
    b_iii, _ = level0(LAM)
    kids = refine(b_iii, 1, LAM, GOLDEN)
    assert [k.btype for k in kids] == [I]
    assert kids[0].word == (SymbolicLetter((III, I), 1, 1),)


def test_refine_silver_type_iii():
    b_iii, _ = level0(LAM)
    kids = refine(b_iii, 2, LAM, SILVER)
    assert [k.btype for k in kids] == [I, III, I]
    assert all(b_iii.lo < k.lo < k.hi < b_iii.hi for k in kids)


def test_generation_zero():
    assert len(generation(0, LAM, GOLDEN).bands) == 2


def test_generation_counts_golden(golden_tree):
    for k in range(1, 6):
        assert golden_tree.generations[k].type_counts() == _counts_oracle(GOLDEN, k)


@pytest.mark.parametrize("literal, depth", [("(1)", 8), ("(2)", 6), ("(1,2)", 8), ("(2,1)", 8)])
def test_per_parent_counts(literal, depth):
    tree = cached_tree(depth, LAM, literal)
    cf = tree.cf
    for k in range(depth):
        for parent in tree.generations[k]:
            kids = tree.children(parent)
            found = tuple(sum(c.btype == t for c in kids) for t in TYPES)
            assert found == child_counts(parent.btype, cf[k + 1])


@pytest.mark.parametrize("literal, depth", [("(1)", 8), ("(2)", 6), ("(1,2)", 8)])
def test_generation_geometry(literal, depth):
    tree = cached_tree(depth, LAM, literal)
    for k in range(1, depth + 1):
        assert check_generation(tree, k) == []


def test_bands_shrink(golden_tree, silver_tree):
    for tree in (golden_tree, silver_tree):
        longest = [max(b.length for b in g) for g in tree.generations[1:]]
        assert all(b < a for a, b in zip(longest, longest[1:]))


def test_type_i_parent_with_unit_quotient_is_its_own_child(golden_tree):
    for parent in golden_tree.generations[4]:
        if parent.btype == I:
            (child,) = golden_tree.children(parent)
            assert abs(child.lo - parent.lo) <= parent.err + child.err
            assert abs(child.hi - parent.hi) <= parent.err + child.err


# --- symbolic navigation --------------------------------------------------------------


def test_band_of_first_letters():
    w = (SymbolicLetter((III, I), 1, 1),)
    b = band_of(w, LAM, GOLDEN)
    assert b.btype == I and b.order == 1 and -2 < b.lo < b.hi < 2
    b = band_of((SymbolicLetter((I, II), 1, 1),), LAM, GOLDEN)
    # a_1 = 1: the II child coincides with B_I up to the bracket radius
    assert b.btype == II
    assert abs(b.lo - 22) <= b.err and abs(b.hi - 26) <= b.err


def test_band_of_two_steps(golden_tree):
    w = (SymbolicLetter((III, I), 1, 1), SymbolicLetter((I, II), 1, 1))
    b = band_of(w, LAM, GOLDEN)
    assert b.btype == II and b.order == 2
    assert b.id == golden_tree.band(word_str(w)).id


def test_band_of_leftmost_silver():
    w = (SymbolicLetter((III, I), 2, 1),)
    b = band_of(w, LAM, SILVER)
    kids = refine(level0(LAM).bands[0], 2, LAM, SILVER)
    assert (b.lo, b.hi) == (kids[0].lo, kids[0].hi)


@pytest.mark.parametrize("literal, depth", [("(1)", 6), ("(1,2)", 5)])
def test_word_bijection(literal, depth):
    tree = cached_tree(depth, LAM, literal)
    tol = tree.prec.endpoint_tolerance
    for g in tree.generations[1:]:
        for band in g:
            again = band_of(band.word, LAM, tree.cf, tree.prec)
            scale = max(abs(band.lo), 1)
            assert abs(again.lo - band.lo) <= tol * scale
            assert abs(again.hi - band.hi) <= tol * scale


def test_sigma_minus1_containment(golden_tree):
    (b_ii,) = [b for b in golden_tree.generations[1] if b.btype == II]
    assert sigma_minus1_containment(b_ii, LAM, GOLDEN)
    for k in range(1, 7):
        for b in golden_tree.generations[k]:
            if b.btype == II:
                assert sigma_minus1_containment(b, LAM, GOLDEN, golden_tree.prec)


def test_sigma_minus1_guard(golden_tree):
    b_iii = next(b for b in golden_tree.generations[2] if b.btype == III)
    with pytest.raises(ValueError):
        sigma_minus1_containment(b_iii, LAM, GOLDEN)


# --- construction engineering ---------------------------------------------------------


def test_thread_count_does_not_change_tree():
    cf = ContinuedFraction.parse("(1,2)")
    a = build_tree(6, LAM, cf, threads=1)
    b = build_tree(6, LAM, cf, threads=3)
    assert [[(x.id, x.lo, x.hi, x.err) for x in g] for g in a.generations] == \
        [[(x.id, x.lo, x.hi, x.err) for x in g] for g in b.generations]


def test_large_quotients_escalate_precision():
    cf = ContinuedFraction.parse("2,28,1,(2)")
    tree = build_tree(3, LAM, cf, Precision(128))
    assert tree.prec.mantissa_bits > 128
    assert [g.type_counts() for g in tree.generations] == [_counts_oracle(cf, k) for k in range(4)]
    for k in range(1, 4):
        assert check_generation(tree, k) == []


def test_descendants_partition(golden_tree):
    root = golden_tree.generations[0].bands[0]
    total = sum(len(golden_tree.descendants(r, 6)) for r in golden_tree.generations[0])
    assert total == len(golden_tree.generations[6].bands)
    assert all(root.lo <= d.lo and d.hi <= root.hi for d in golden_tree.descendants(root, 6))
