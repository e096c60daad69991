"""Operator-side cross-checks: the Sturmian potential, finite truncations and
periodic-approximant spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np
from gmpy2 import mpfr

from .bands import find_components
from .contfrac import ContinuedFraction, convergents
from .errors import CountMismatch
from .tracemap import DEFAULT_PRECISION, Precision, trace_state


@dataclass(frozen=True)
class PotentialSpec:
    lam: float
    alpha: Union[float, Fraction]
    omega: Union[float, Fraction] = 0.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("coupling must be non-negative")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 <= self.omega < 1:
            raise ValueError("omega must lie in [0, 1)")


def _frac(x):
    return x - math.floor(x)


def sturmian_letter(n: int, alpha, omega=0.0) -> int:
    """Indicator of ``{n alpha + omega}`` in ``[1 - alpha, 1)``."""
    theta = _frac(n * alpha + omega)
    return 1 if 1 - alpha <= theta < 1 else 0


def potential(n: int, spec: PotentialSpec) -> float:
    """``lam`` if ``{n alpha + omega}`` lies in ``[1 - alpha, 1)``, else 0."""
    return spec.lam if sturmian_letter(n, spec.alpha, spec.omega) else 0.0


def potential_sequence(spec: PotentialSpec, start: int, size: int) -> np.ndarray:
    return np.array([potential(n, spec) for n in range(start, start + size)], dtype=float)


def finite_eigenvalues(size: int, spec: PotentialSpec, start: int = 0, boundary: str = "Dirichlet") -> np.ndarray:
    """Sorted eigenvalues of the ``size x size`` Dirichlet truncation on sites
    ``start .. start + size - 1``."""
    if size < 2:
        raise ValueError("size must be >= 2")
    if boundary != "Dirichlet":
        raise ValueError("only Dirichlet truncations are supported")
    h = np.diag(potential_sequence(spec, start, size))
    off = np.ones(size - 1)
    h += np.diag(off, 1) + np.diag(off, -1)
    return np.linalg.eigvalsh(h)


@dataclass(frozen=True)
class PeriodicSpectrum:
    k: int
    period: int
    bands: tuple
    merged: int = 0


def periodic_band_edges(k: int, lam, cf: ContinuedFraction, prec: Precision = DEFAULT_PRECISION,
                        allow_merged: bool = False) -> PeriodicSpectrum:
    """Components of ``{|Tr M_k| <= 2}``: the spectrum of the period-``q_k`` approximant.

    The expected number of bands is ``q_k``.  Touching bands cannot be told
    apart from a missed band, so a shortfall raises unless ``allow_merged``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = convergents(cf, k)[-1].q
    a = cf.prefix(k)
    with prec.context():
        lam_ = mpfr(lam)

        def f(E):
            return trace_state(k, E, lam_, a).x

        lo, hi = -2 - abs(lam_), 2 + abs(lam_)
        comps = find_components(f, lo, hi, q, prec)
        if comps is None:
            # rescan at full density to report what was found
            from .bands import _scan
            n = 2**14
            xs = [lo + (hi - lo) * i / n for i in range(n + 1)]
            vs = [f(x) for x in xs]
            comps = _scan(f, xs, vs, prec.endpoint_tolerance, 4 * prec.endpoint_tolerance * (2 + abs(lam_)))
            if len(comps) > q or not allow_merged:
                raise CountMismatch(q, len(comps), f"period-{q} approximant")
    bands = tuple((c.lo, c.hi) for c in comps)
    return PeriodicSpectrum(k, q, bands, q - len(bands))


def distance_to_cover(x: float, cover: Sequence[tuple]) -> float:
    """Distance from ``x`` to a union of closed intervals."""
    best = math.inf
    for lo, hi in cover:
        lo, hi = float(lo), float(hi)
        if lo <= x <= hi:
            return 0.0
        best = min(best, lo - x if x < lo else x - hi)
    return best


def sturmian_window_counts(alpha, length: int, n_windows: int, omega=0.0) -> set:
    """Distinct numbers of 1's over ``n_windows`` windows of ``length`` in the
    indicator sequence starting at ``n = 1``."""
    word = [sturmian_letter(n, alpha, omega) for n in range(1, length + n_windows + 1)]
    return {sum(word[i:i + length]) for i in range(n_windows)}
