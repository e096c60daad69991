"""Moran exponents of band covers and a box-counting cross-check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bands import Band, BandTree
from .errors import DegenerateScales, LengthOutOfRange

MORAN_TOL = 1e-12


@dataclass(frozen=True)
class LevelExponent:
    k: int
    s: float
    residual: float
    s_err: float = 0.0
    max_len: float = math.nan
    count: int = 0

    @property
    def defined(self) -> bool:
        return not math.isnan(self.s)


@dataclass(frozen=True)
class MoranResult:
    s_by_level: tuple
    tail_min: float
    tail_max: float
    tail_window: int
    notes: tuple = field(default=())

    @property
    def s(self) -> list[float]:
        return [row.s for row in self.s_by_level]

    def level(self, k: int) -> LevelExponent:
        return next(r for r in self.s_by_level if r.k == k)


def _moran_sum(logs: np.ndarray, s: float) -> float:
    return math.fsum(np.exp(s * logs))


def moran_exponent(lengths: Sequence, tol: float = MORAN_TOL) -> float:
    """The ``s >= 0`` with ``sum(l**s) = 1``.

    Bisection on the decreasing map ``s -> sum(l**s)``; the upper end starts at
    1 and doubles until the sum drops below one.  Values above 1 are returned
    as found, not clamped.
    """
    if len(lengths) == 0:
        raise ValueError("need at least one length")
    logs = np.array([_log(l) for l in lengths], dtype=float)
    if np.any(logs >= 0) or np.any(~np.isfinite(logs)):
        raise LengthOutOfRange("Moran exponent needs every length in (0, 1)")
    if len(logs) == 1:
        return 0.0
    lo, hi = 0.0, 1.0
    while _moran_sum(logs, hi) > 1:
        lo, hi = hi, 2 * hi
    while True:
        mid = (lo + hi) / 2
        val = _moran_sum(logs, mid)
        if abs(val - 1) <= tol / 4 or hi - lo < 1e-17:
            return mid
        if val > 1:
            lo = mid
        else:
            hi = mid


def _log(x) -> float:
    # natural log of an int/float/mpfr; mpfr lengths can be far below double range
    if isinstance(x, float):
        return math.log(x) if x > 0 else math.inf
    try:
        import gmpy2
        if x <= 0:
            return math.inf
        return float(gmpy2.log(x))
    except TypeError:
        return math.log(float(x))


def _exponent_row(k: int, bands: Sequence[Band]) -> LevelExponent:
    lengths = [b.length for b in bands]
    logs = np.array([_log(l) for l in lengths])
    count = len(bands)
    max_len = float(max(lengths))
    if np.any(logs >= 0):
        return LevelExponent(k, math.nan, math.nan, math.nan, max_len, count)
    s = moran_exponent(lengths)
    residual = abs(_moran_sum(logs, s) - 1)
    # first-order propagation of band-length error bars
    errs = np.array([2 * float(b.err) for b in bands])
    dfds = abs(math.fsum(np.exp(s * logs) * logs))
    dfdl = s * np.exp((s - 1) * logs)
    s_err = float(math.fsum(dfdl * errs) / dfds) if dfds > 0 else 0.0
    return LevelExponent(k, s, residual, s_err, max_len, count)


def _summarize(rows: list[LevelExponent], tail_window: int) -> MoranResult:
    defined = [r for r in rows if r.defined]
    notes = tuple(f"level {r.k}: a band has length >= 1, exponent undefined" for r in rows if not r.defined)
    if not defined:
        return MoranResult(tuple(rows), math.nan, math.nan, tail_window, notes)
    window = min(tail_window, len(defined))
    tail = [r.s for r in defined[-window:]]
    return MoranResult(tuple(rows), min(tail), max(tail), window, notes)


def pre_dimensions(tree: BandTree, tail_window: int, k_min: int = 1, k_max: Optional[int] = None) -> MoranResult:
    """``s_k`` for ``k_min..k_max`` and tail-window min/max as liminf/limsup proxies.

    A level containing a band of length >= 1 has no exponent in [0, 1]; its row
    carries NaN and a note, and it is skipped by the tail window.
    """
    k_max = tree.depth if k_max is None else k_max
    if k_min < 1:
        raise ValueError("Moran exponents start at level 1")
    if not 1 <= tail_window <= k_max - k_min + 1:
        raise ValueError(f"tail_window must be in 1..{k_max - k_min + 1}")
    rows = [_exponent_row(k, tree.generations[k].bands) for k in range(k_min, k_max + 1)]
    return _summarize(rows, tail_window)


def exponents_from_lengths(levels: Sequence[Sequence], tail_window: int, k0: int = 1) -> MoranResult:
    """Same summary as :func:`pre_dimensions` for plain per-level length lists."""
    if not 1 <= tail_window <= len(levels):
        raise ValueError(f"tail_window must be in 1..{len(levels)}")
    rows = []
    for i, lengths in enumerate(levels):
        logs = np.array([_log(l) for l in lengths])
        if np.any(logs >= 0):
            rows.append(LevelExponent(k0 + i, math.nan, math.nan, math.nan, float(max(lengths)), len(lengths)))
            continue
        s = moran_exponent(lengths)
        rows.append(LevelExponent(k0 + i, s, abs(_moran_sum(logs, s) - 1), 0.0,
                                  float(max(lengths)), len(lengths)))
    return _summarize(rows, tail_window)


def subtree_pre_dimensions(root: Band, depth: int, tree: BandTree, tail_window: Optional[int] = None) -> MoranResult:
    """Moran exponents of the descendants of ``root``, ``depth`` levels down.

    Lengths are absolute, as in the whole-spectrum exponents; the generation
    at ``root.order + j`` is restricted to bands inside ``root``.
    """
    if root.order + depth > tree.depth:
        raise ValueError(f"tree only reaches level {tree.depth}")
    rows = []
    for j in range(0 if depth == 0 else 1, depth + 1):
        rows.append(_exponent_row(root.order + j, tree.descendants(root, root.order + j)))
    window = tail_window or min(3, len(rows))
    return _summarize(rows, min(window, len(rows)))


def box_count(cover: Sequence[tuple], eps: float) -> int:
    """Number of grid cells ``[j eps, (j+1) eps)`` meeting the interior of the cover."""
    ranges = []
    for lo, hi in cover:
        j0 = math.floor(lo / eps)
        j1 = max(j0, math.ceil(hi / eps) - 1)
        ranges.append((j0, j1))
    ranges.sort()
    total, cur_lo, cur_hi = 0, None, None
    for j0, j1 in ranges:
        if cur_hi is None or j0 > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo + 1
            cur_lo, cur_hi = j0, j1
        else:
            cur_hi = max(cur_hi, j1)
    if cur_hi is not None:
        total += cur_hi - cur_lo + 1
    return total


def box_counting_estimate(cover: Sequence[tuple], scales: Sequence[float]) -> float:
    """Least-squares slope of ``log N(eps)`` against ``log(1/eps)``.

    ``scales`` must span at least two decades.
    """
    eps = np.asarray(sorted(float(s) for s in scales))
    if len(eps) < 2 or np.any(eps <= 0) or eps[-1] / eps[0] < 100:
        raise DegenerateScales("scales must be positive and span at least two decades")
    cov = [(float(lo), float(hi)) for lo, hi in cover]
    counts = np.array([box_count(cov, e) for e in eps], dtype=float)
    slope, _ = np.polyfit(np.log(1 / eps), np.log(counts), 1)
    return float(slope)


def cover_of(bands: Sequence[Band]) -> list[tuple]:
    return [(b.lo, b.hi) for b in bands]


def cantor_cover(level: int) -> list[tuple[float, float]]:
    """Middle-thirds construction at ``level`` as exact-ish float intervals."""
    from fractions import Fraction

    ivs = [(Fraction(0), Fraction(1))]
    for _ in range(level):
        nxt = []
        for lo, hi in ivs:
            d = (hi - lo) / 3
            nxt += [(lo, lo + d), (hi - d, hi)]
        ivs = nxt
    return [(float(lo), float(hi)) for lo, hi in ivs]
