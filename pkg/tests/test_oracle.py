from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from sturmlab.bands import II, III
from sturmlab.contfrac import GOLDEN, SILVER, convergents
from sturmlab.oracle import (
    PotentialSpec,
    distance_to_cover,
    finite_eigenvalues,
    periodic_band_edges,
    potential,
    potential_sequence,
    sturmian_letter,
    sturmian_window_counts,
)

ALPHA = (math.sqrt(5) - 1) / 2


def test_potential_examples():
    spec = PotentialSpec(24.0, ALPHA)
    assert potential(1, spec) == 24.0
    assert potential(0, spec) == 0.0
    assert potential(0, PotentialSpec(24.0, ALPHA, 1 - ALPHA)) == 24.0


def test_spec_guards():
    with pytest.raises(ValueError):
        PotentialSpec(24.0, 1.2)
    with pytest.raises(ValueError):
        PotentialSpec(24.0, 0.5, 1.0)


def test_letters_match_floor_identity():
    # chi_[1-a,1)({n a}) = floor((n+1) a) - floor(n a), checked in exact arithmetic
    for alpha in (Fraction(ALPHA), Fraction(math.sqrt(2) - 1)):
        for n in range(0, 500):
            expected = math.floor((n + 1) * alpha) - math.floor(n * alpha)
            assert sturmian_letter(n, alpha) == expected


def test_balanced_windows():
    for cf, alpha in ((GOLDEN, ALPHA), (SILVER, math.sqrt(2) - 1)):
        for c in convergents(cf, 7)[3:]:
            counts = sturmian_window_counts(alpha, c.q, 200)
            assert counts <= {c.p - 1, c.p, c.p + 1}
            assert max(counts) - min(counts) <= 1


def test_free_laplacian():
    n = 40
    eigs = finite_eigenvalues(n, PotentialSpec(0.0, ALPHA))
    exact = sorted(2 * math.cos(math.pi * j / (n + 1)) for j in range(1, n + 1))
    assert np.max(np.abs(eigs - exact)) <= 1e-10


def test_two_by_two():
    spec = PotentialSpec(24.0, ALPHA, 0.5)
    v1, v2 = potential_sequence(spec, 0, 2)
    eigs = finite_eigenvalues(2, spec)
    mean, half = (v1 + v2) / 2, math.sqrt(((v1 - v2) / 2) ** 2 + 1)
    assert eigs == pytest.approx([mean - half, mean + half], abs=1e-12)


def test_eigenvalues_against_tridiagonal_solver():
    spec = PotentialSpec(24.0, ALPHA, 0.3)
    eigs = finite_eigenvalues(144, spec, start=5)
    ref = eigh_tridiagonal(potential_sequence(spec, 5, 144), np.ones(143), eigvals_only=True)
    assert np.max(np.abs(eigs - ref)) <= 1e-10


def test_eigenvalues_near_cover(golden_tree):
    eigs = finite_eigenvalues(89, PotentialSpec(24.0, ALPHA))
    cover = [(float(b.lo), float(b.hi)) for b in golden_tree.generations[6]]
    close = sum(distance_to_cover(e, cover) <= 1e-2 for e in eigs)
    assert close / len(eigs) >= 0.95


def test_distance_to_cover():
    cover = [(0, 1), (3, 4)]
    assert distance_to_cover(0.5, cover) == 0
    assert distance_to_cover(2.0, cover) == 1
    assert distance_to_cover(-1.5, cover) == 1.5


def test_periodic_k1():
    spec = periodic_band_edges(1, 24, GOLDEN)
    assert spec.period == 1
    ((lo, hi),) = spec.bands
    assert abs(lo - 22) < 1e-25 and abs(hi - 26) < 1e-25


@pytest.mark.parametrize("k", range(1, 7))
def test_periodic_band_count(k):
    q = convergents(GOLDEN, k)[-1].q
    spec = periodic_band_edges(k, 24, GOLDEN)
    assert len(spec.bands) == q and spec.merged == 0


def test_periodic_k4_has_five_bands():
    assert len(periodic_band_edges(4, 24, GOLDEN).bands) == 5


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_generating_bands_are_periodic_components(golden_tree, k):
    comps = periodic_band_edges(k, 24, GOLDEN).bands
    with golden_tree.prec.context():
        for b in golden_tree.generations[k]:
            if b.btype in (II, III):
                tol = 4 * b.err + 1e-25
                assert any(lo - tol <= b.lo and b.hi <= hi + tol for lo, hi in comps)
