"""Finite-depth checks of the structural statements about Sturmian spectra.

Every experiment builds band trees, measures something, and returns a report
dataclass.  None of them asserts; tolerances are applied by the callers
(tests, the acceptance suite, the CLI).
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bands import TYPES, Band, BandTree, build_tree, transition_matrix, type_counts, word_str
from .contfrac import ContinuedFraction, gauss_shift, sample_frequency
from .dimension import MoranResult, exponents_from_lengths, pre_dimensions
from .tracemap import DEFAULT_PRECISION, Precision

log = logging.getLogger(__name__)

TreeFactory = Callable[[int, str, ContinuedFraction, Precision], BandTree]


def _default_factory(depth, lam, cf, prec):
    return build_tree(depth, lam, cf, prec)


# --- bounded covariation --------------------------------------------------------


@dataclass
class CovarianceReport:
    pairs_tested: int
    max_ratio: float
    per_depth: dict
    argmax: tuple
    theorem_applies: bool

    def to_json(self) -> dict:
        return asdict(self)


def _follow(tree: BandTree, band: Band, path: Sequence) -> Band:
    """Descend from ``band`` along the letters in ``path``."""
    for letter in path:
        band = next(c for c in tree.children(band) if c.word[-1] == letter)
    return band


def _ratio(x, y) -> float:
    r = float(x / y)
    return max(r, 1 / r)


def covariance_ratios(tree: BandTree, rng: np.random.Generator, sample_size: int):
    """``sample_size`` draws of (w, w~, u) with the ratio of relative lengths."""
    depth = tree.depth
    by_level_type = {}
    for m in range(1, depth):
        for b in tree.generations[m]:
            by_level_type.setdefault((m, b.btype), []).append(b)
    groups = [key for key, bs in by_level_type.items() if len(bs) >= 2]
    if not groups:
        return []
    out = []
    for _ in range(sample_size):
        m, t = groups[rng.integers(len(groups))]
        bs = by_level_type[(m, t)]
        i, j = rng.choice(len(bs), size=2, replace=False)
        w, w2 = bs[i], bs[j]
        length = int(rng.integers(1, depth - m + 1))
        path = []
        node = w
        for _ in range(length):
            kids = tree.children(node)
            node = kids[rng.integers(len(kids))]
            path.append(node.word[-1])
        wu = node
        w2u = _follow(tree, w2, path)
        ratio = _ratio((wu.length / w.length), (w2u.length / w2.length))
        out.append((ratio, wu.order, w.id, w2.id, word_str(path)))
    return out


def covariance_check(lam, cf: ContinuedFraction, depth: int, sample_size: int, seed: int,
                     prec: Precision = DEFAULT_PRECISION, tree: Optional[BandTree] = None) -> CovarianceReport:
    """Empirical bounded-covariation constant.

    Pairs of same-level, same-type bands ``w, w~`` share every admissible
    suffix ``u``; the report holds the largest observed
    ``(|B_wu|/|B_w|) / (|B_w~u|/|B_w~|)`` (folded to be >= 1).
    """
    tree = tree or build_tree(depth, lam, cf, prec)
    if tree.depth != depth:
        tree = tree.truncated(depth)
    rng = np.random.default_rng(seed)
    samples = covariance_ratios(tree, rng, sample_size)
    per_depth = {}
    best = (1.0, None)
    for ratio, order, wid, w2id, u in samples:
        per_depth[order] = max(per_depth.get(order, 1.0), ratio)
        if ratio > best[0]:
            best = (ratio, (wid, w2id, u))
    return CovarianceReport(len(samples), best[0], dict(sorted(per_depth.items())),
                            best[1] or (), float(lam) >= 24)


# --- Gauss map invariance ---------------------------------------------------------


@dataclass
class InvarianceReport:
    cf: str
    shifted_cf: str
    s_alpha: list
    s_beta: list
    gaps: dict
    construction_word: str
    correspondence: list = field(default_factory=list)
    eta_emp: float = math.nan
    correspondence_ok: Optional[bool] = None

    def gap(self, window: int) -> float:
        return self.gaps[window]

    def to_json(self) -> dict:
        return asdict(self)


def tail_gaps(ra: MoranResult, rb: MoranResult, windows: Sequence[int]) -> dict:
    """``max(|min tail| gap, |max tail| gap)`` per window size, NaN levels skipped."""
    sa = [x for x in ra.s if not math.isnan(x)]
    sb = [x for x in rb.s if not math.isnan(x)]
    out = {}
    for w in windows:
        if w > min(len(sa), len(sb)):
            continue
        ta, tb = sa[-w:], sb[-w:]
        out[w] = max(abs(min(ta) - min(tb)), abs(max(ta) - max(tb)))
    return out


def gauss_experiment(lam, cf: ContinuedFraction, depth: int, prec: Precision = DEFAULT_PRECISION,
                     n_suffixes: int = 50, seed: int = 0, eta: Optional[float] = None,
                     tree_factory: TreeFactory = _default_factory) -> InvarianceReport:
    """Compare ``s_k`` for ``alpha`` and ``G(alpha)`` and check the band correspondence.

    With ``w = ((III, I), a_1, 1)`` every band ``B_u`` of the ``G(alpha)`` tree
    inside ``B_I`` matches the band ``B_wu`` of the ``alpha`` tree.  For up to
    ``n_suffixes`` sampled ``u`` the ratio
    ``(|B_wu|/|B_w|) / (|B_u|/|B_I|)`` is recorded and compared with ``eta``
    (default: the empirical covariation constant of the ``alpha`` tree).
    """
    beta = gauss_shift(cf)
    tree_a = tree_factory(depth + 1, lam, cf, prec)
    tree_b = tree_factory(depth, lam, beta, prec)
    ra = pre_dimensions(tree_a, 1, k_max=depth)
    rb = pre_dimensions(tree_b, 1, k_max=depth)
    windows = list(range(1, depth + 1))
    gaps = tail_gaps(ra, rb, windows)

    w_band = next(b for b in tree_a.generations[1] if b.word[0].edge == (TYPES[2], TYPES[0])
                  and b.word[0].ell == 1)
    b_i = next(b for b in tree_b.generations[0] if b.btype == TYPES[0])
    candidates = [b for k in range(1, depth + 1) for b in tree_b.generations[k] if b.word[0].source == TYPES[0]]
    rng = np.random.default_rng(seed)
    if len(candidates) > n_suffixes:
        idx = sorted(rng.choice(len(candidates), size=n_suffixes, replace=False))
        candidates = [candidates[i] for i in idx]
    corr = []
    for bu in candidates:
        bwu = _follow(tree_a, w_band, bu.word)
        r = float((bwu.length / w_band.length) / (bu.length / b_i.length))
        corr.append({"u": word_str(bu.word), "ratio": r})
    if eta is None:
        eta = covariance_check(lam, cf, depth + 1, 200, seed, prec, tree=tree_a).max_ratio
    ok = all(1 / eta <= c["ratio"] <= eta for c in corr)
    return InvarianceReport(cf.literal(), beta.literal(), ra.s, rb.s, gaps, word_str(w_band.word),
                            corr, eta, ok)


# --- local dimension ----------------------------------------------------------------


def relative_subtree_exponents(tree: BandTree, root: Band, depth: int, tail_window: int = 3) -> MoranResult:
    """Moran exponents of ``root``'s descendants with lengths relative to ``|root|``."""
    levels = [[b.length / root.length for b in tree.descendants(root, root.order + j)]
              for j in range(1, depth + 1)]
    return exponents_from_lengths(levels, min(tail_window, depth), k0=root.order + 1)


def reach_offset(cf: ContinuedFraction, types: Sequence, start: int, limit: int = 8) -> int:
    """Smallest ``r`` such that a band of each type in ``types`` at level ``start``
    contains bands of all three types at level ``start + r``."""
    prod = np.identity(3, dtype=object)
    for r in range(1, limit + 1):
        prod = prod.dot(transition_matrix(cf[start + r]))
        if all(all(prod[TYPES.index(t), j] >= 1 for j in range(3)) for t in types):
            return r
    raise ValueError(f"types not all reachable within {limit} levels")


@dataclass
class LocalDimensionReport:
    probes: list
    reach_level: int
    estimates: list
    max_gap_min: float
    max_gap_max: float

    def to_json(self) -> dict:
        return asdict(self)


def local_dimension_experiment(lam, cf: ContinuedFraction, depth: int, probe_count: int, seed: int,
                               prec: Precision = DEFAULT_PRECISION, probe_level: int = 2,
                               tail_window: int = 3, tree: Optional[BandTree] = None,
                               tree_factory: TreeFactory = _default_factory) -> LocalDimensionReport:
    """Dimension of the spectrum near each probe band.

    A probe is a band at ``probe_level``.  Following the local-dimension
    argument, the estimate for a probe is the maximum, over its descendants at
    the first level where every probe contains bands of all three types, of
    the relative subtree exponents ``depth`` levels further down.
    """
    if depth < 4:
        raise ValueError("depth must be >= 4")
    # probe choice needs the generation at probe_level only
    head = tree if tree is not None else tree_factory(probe_level, lam, cf, prec)
    pool = head.generations[probe_level].bands
    rng = np.random.default_rng(seed)
    count = min(probe_count, len(pool))
    probes = [pool[i] for i in sorted(rng.choice(len(pool), size=count, replace=False))]
    r = reach_offset(cf, sorted({p.btype for p in probes}, key=TYPES.index), probe_level)
    reach = probe_level + r
    need = reach + depth
    if tree is None or tree.depth < need:
        tree = tree_factory(need, lam, cf, prec)
    estimates = []
    for p in probes:
        p = tree.band(p.id)
        results = [relative_subtree_exponents(tree, d, depth, tail_window) for d in tree.descendants(p, reach)]
        estimates.append({"probe": p.id, "type": str(p.btype),
                          "tail_min": max(x.tail_min for x in results),
                          "tail_max": max(x.tail_max for x in results)})
    mins = [e["tail_min"] for e in estimates]
    maxs = [e["tail_max"] for e in estimates]
    return LocalDimensionReport([p.id for p in probes], reach, estimates,
                                max(mins) - min(mins), max(maxs) - min(maxs))


# --- transition-matrix reachability -------------------------------------------------


def reachability_pattern(a_values: Sequence[int]) -> np.ndarray:
    """Product of the transition matrices for ``a_values`` (increasing level)."""
    if not a_values:
        raise ValueError("need at least one quotient")
    prod = np.identity(3, dtype=object)
    for a in a_values:
        prod = prod.dot(transition_matrix(int(a)))
    return prod.astype(np.int64) if max(int(x) for x in prod.flat) < 2**62 else prod


def zero_entries(matrix) -> list[tuple[str, str]]:
    return [(str(TYPES[i]), str(TYPES[j])) for i in range(3) for j in range(3) if matrix[i][j] == 0]


def unreachable_pairs(a_values: Sequence[int]) -> list[tuple[int, str, str]]:
    """``(start, T, T')`` with no ``T -> T'`` path over windows of 3 or 4 levels
    starting at ``start``; only starts with four levels available are tested."""
    bad = []
    for s in range(len(a_values) - 3):
        p3 = reachability_pattern(a_values[s:s + 3])
        p4 = reachability_pattern(a_values[s:s + 4])
        for i in range(3):
            for j in range(3):
                if p3[i][j] < 1 and p4[i][j] < 1:
                    bad.append((s, str(TYPES[i]), str(TYPES[j])))
    return bad


# --- continuity in the frequency ----------------------------------------------------


def _merge(cover):
    ivs = sorted((float(lo), float(hi)) for lo, hi in cover)
    out = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def _directed(a, b) -> float:
    """``sup_{x in A} dist(x, B)`` for merged interval lists."""
    starts = [lo for lo, _ in b]

    def dist(x):
        i = bisect.bisect_right(starts, x) - 1
        best = math.inf
        for j in (i, i + 1):
            if 0 <= j < len(b):
                lo, hi = b[j]
                best = min(best, 0.0 if lo <= x <= hi else (lo - x if x < lo else x - hi))
        return best

    worst = 0.0
    for lo, hi in a:
        cands = [lo, hi]
        i0 = max(bisect.bisect_right(starts, lo) - 1, 0)
        for j in range(i0, len(b) - 1):
            g0, g1 = b[j][1], b[j + 1][0]
            if g0 > hi:
                break
            cands.append(min(max((g0 + g1) / 2, lo), hi))
        worst = max(worst, max(dist(x) for x in cands))
    return worst


def hausdorff_distance(cover_a, cover_b) -> float:
    a, b = _merge(cover_a), _merge(cover_b)
    return max(_directed(a, b), _directed(b, a))


@dataclass
class ContinuityReport:
    cf1: str
    cf2: str
    level: int
    distance: float
    alpha_gap: float

    def to_json(self) -> dict:
        return asdict(self)


def continuity_experiment(lam, cf1: ContinuedFraction, cf2: ContinuedFraction, level: int,
                          prec: Precision = DEFAULT_PRECISION,
                          tree_factory: TreeFactory = _default_factory) -> ContinuityReport:
    """Hausdorff distance between the level-``level`` covers of two spectra."""
    if cf1[1] != cf2[1]:
        raise ValueError("frequencies must share at least the first partial quotient")
    ta = tree_factory(level, lam, cf1, prec)
    tb = tree_factory(level, lam, cf2, prec)
    ca = [(b.lo, b.hi) for b in ta.generations[level]]
    cb = [(b.lo, b.hi) for b in tb.generations[level]]
    bits = 64
    gap = abs(float(cf1.value(bits) if cf1.is_periodic else cf1.fraction())
              - float(cf2.value(bits) if cf2.is_periodic else cf2.fraction()))
    return ContinuityReport(cf1.literal(), cf2.literal(), level, hausdorff_distance(ca, cb), gap)


# --- Monte-Carlo sweep over Gauss-Kuzmin frequencies ---------------------------------


@dataclass
class SweepReport:
    lam: str
    depths: list
    tail_window: int
    rows: list
    skipped: list
    dispersion: dict

    def to_json(self) -> dict:
        return asdict(self)


def mc_sweep(lam, n_samples: int, depths: Sequence[int], seed: int, tail_window: int = 3,
             prec: Precision = DEFAULT_PRECISION, max_bands: int = 5000,
             tree_factory: TreeFactory = _default_factory) -> SweepReport:
    """Tail-min estimates for ``n_samples`` Gauss-Kuzmin frequencies.

    Frequency ``i`` uses seed ``seed + i``.  Frequencies whose deepest
    generation would hold more than ``max_bands`` bands are skipped and listed.
    """
    depths = sorted(depths)
    top = depths[-1]
    rows, skipped = [], []
    for i in range(n_samples):
        cf = sample_frequency(seed + i, top + 1)
        if sum(type_counts(cf, top)) > max_bands:
            skipped.append(cf.literal())
            continue
        tree = tree_factory(top, lam, cf, prec)
        row = {"cf": cf.literal()}
        for d in depths:
            r = pre_dimensions(tree, min(tail_window, d), k_max=d)
            row[f"tail_min_{d}"] = r.tail_min
            row[f"tail_max_{d}"] = r.tail_max
        rows.append(row)
    dispersion = {}
    for d in depths:
        vals = [r[f"tail_min_{d}"] for r in rows if not math.isnan(r[f"tail_min_{d}"])]
        dispersion[d] = (max(vals) - min(vals)) if vals else math.nan
    return SweepReport(str(lam), list(depths), tail_window, rows, skipped, dispersion)
