"""Spectral generating bands: the nested hierarchy G_0, G_1, ... with types.

A band of order ``k`` is one of

* type I:   a component of ``{|t_(k,1)| <= 2}``
* type II:  a component of ``{|t_(k+1,0)| <= 2}`` inside a type-I parent
* type III: a component of ``{|t_(k+1,0)| <= 2}`` inside a type-II/III parent

Children are found by sampling the relevant trace function on the parent,
bracketing every crossing of ``|t| = 2`` and bisecting.  The 3x3 transition
matrix predicts how many children of each type a parent has; the found count
must match it exactly, which certifies that no band was missed.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
import gmpy2
from gmpy2 import mpfr

from .contfrac import ContinuedFraction
from .errors import (
    ConfigError,
    CountMismatch,
    CouplingTooSmall,
    InadmissibleWord,
    PrecisionExhausted,
)
from .tracemap import DEFAULT_PRECISION, Precision, TraceSpec, trace_state

log = logging.getLogger(__name__)

MAX_SAMPLES = 2**14


class BandType(str, Enum):
    I = "I"
    II = "II"
    III = "III"

    def __str__(self) -> str:
        return self.value


I, II, III = BandType.I, BandType.II, BandType.III
TYPES = (I, II, III)

EDGES = ((I, II), (II, I), (II, III), (III, I), (III, III))


def tau(edge: tuple[BandType, BandType], n: int) -> int:
    """Multiplicity of ``edge`` when the next quotient is ``n``."""
    return {
        (I, II): 1,
        (II, I): n + 1,
        (II, III): n,
        (III, I): n,
        (III, III): n - 1,
    }[edge]


def transition_matrix(a: int) -> np.ndarray:
    """Rows/columns ordered I, II, III; entry (T, T') counts T' children of a T band."""
    return np.array([[0, 1, 0], [a + 1, 0, a], [a, 0, a - 1]], dtype=object)


def child_counts(parent_type: BandType, a_next: int) -> tuple[int, int, int]:
    if a_next < 1:
        raise ValueError("a_next must be >= 1")
    row = transition_matrix(a_next)[TYPES.index(BandType(parent_type))]
    return tuple(int(v) for v in row)


def type_counts(cf: ContinuedFraction, k: int) -> tuple[int, int, int]:
    """Per-type band counts of G_k by integer matrix iteration from (1, 0, 1)."""
    v = np.array([1, 0, 1], dtype=object)
    for j in range(1, k + 1):
        v = v.dot(transition_matrix(cf[j]))
    return tuple(int(x) for x in v)


# --- symbolic coding ---------------------------------------------------------


@dataclass(frozen=True)
class SymbolicLetter:
    edge: tuple[BandType, BandType]
    tau: int
    ell: int

    def __post_init__(self):
        edge = (BandType(self.edge[0]), BandType(self.edge[1]))
        object.__setattr__(self, "edge", edge)
        if edge not in EDGES:
            raise InadmissibleWord(f"no transition {edge[0]}->{edge[1]}")
        if not 1 <= self.ell <= self.tau:
            raise InadmissibleWord(f"index {self.ell} outside 1..{self.tau}")

    @property
    def source(self) -> BandType:
        return self.edge[0]

    @property
    def target(self) -> BandType:
        return self.edge[1]

    def __str__(self) -> str:
        return f"{self.edge[0]}-{self.edge[1]}.{self.tau}.{self.ell}"

    @classmethod
    def parse(cls, s: str) -> "SymbolicLetter":
        try:
            e, t, l = s.split(".")
            src, dst = e.split("-")
            return cls((BandType(src), BandType(dst)), int(t), int(l))
        except (ValueError, KeyError) as exc:
            raise InadmissibleWord(f"bad letter {s!r}") from exc


SymbolicWord = tuple  # tuple[SymbolicLetter, ...]


def admissible(u: SymbolicLetter, v: SymbolicLetter) -> bool:
    return u.target == v.source


def word_str(word: Sequence[SymbolicLetter]) -> str:
    return "/".join(str(x) for x in word)


def parse_word(s: str) -> SymbolicWord:
    if not s:
        return ()
    return tuple(SymbolicLetter.parse(t) for t in s.split("/"))


def check_word(word: Sequence[SymbolicLetter], cf: ContinuedFraction) -> None:
    """Raise :class:`InadmissibleWord` unless ``word`` lies in Omega_k for ``cf``."""
    if not word:
        raise InadmissibleWord("empty word")
    if word[0].source == II:
        raise InadmissibleWord("first letter may not start at II")
    for j, letter in enumerate(word, start=1):
        if letter.tau != tau(letter.edge, cf[j]):
            raise InadmissibleWord(f"letter {j} has tau {letter.tau}, expected {tau(letter.edge, cf[j])}")
        if letter.tau < 1:
            raise InadmissibleWord(f"letter {j}: edge {letter.edge} has no bands for a_{j}={cf[j]}")
    for j in range(len(word) - 1):
        if not admissible(word[j], word[j + 1]):
            raise InadmissibleWord(f"letters {j + 1} and {j + 2} are not admissible")


# --- bands -------------------------------------------------------------------


@dataclass(frozen=True)
class Band:
    """One generating band.  ``lo``/``hi`` are mpfr midpoints of the final
    bisection brackets and ``err`` the larger bracket radius."""

    order: int
    btype: BandType
    lo: object
    hi: object
    err: object
    word: SymbolicWord
    tspec: TraceSpec
    parent_id: Optional[str] = None
    clamped: bool = field(default=False, compare=False)

    @property
    def id(self) -> str:
        return word_str(self.word) if self.word else f"root-{self.btype}"

    def _ctx(self):
        # arithmetic at the endpoints' own precision, not the ambient context
        return gmpy2.context(precision=max(_bits(self.lo), _bits(self.hi)))

    @property
    def length(self):
        with self._ctx():
            return self.hi - self.lo

    @property
    def mid(self):
        with self._ctx():
            return (self.lo + self.hi) / 2

    def __repr__(self) -> str:
        return (f"Band(k={self.order}, {self.btype}, [{float(self.lo):.12g}, {float(self.hi):.12g}], "
                f"{self.id})")


@dataclass(frozen=True)
class Generation:
    order: int
    bands: tuple

    def __len__(self) -> int:
        return len(self.bands)

    def __iter__(self):
        return iter(self.bands)

    def type_counts(self) -> tuple[int, int, int]:
        return tuple(sum(1 for b in self.bands if b.btype == t) for t in TYPES)

    def lengths(self) -> list:
        return [b.length for b in self.bands]


def _bits(x) -> int:
    return getattr(x, "precision", 53)


def _check_lambda(lam) -> None:
    if not mpfr(lam) > 4:
        raise CouplingTooSmall(f"band hierarchy requires lambda > 4, got {lam}")


def level0(lam, prec: Precision = DEFAULT_PRECISION) -> Generation:
    _check_lambda(lam)
    with prec.context():
        lam = mpfr(lam)
        zero = mpfr(0)
        b3 = Band(0, III, mpfr(-2), mpfr(2), zero, (), TraceSpec(1, 0))
        b1 = Band(0, I, lam - 2, lam + 2, zero, (), TraceSpec(0, 1))
    return Generation(0, (b3, b1))


# --- sample-and-bisect root finding -----------------------------------------


def _status(v) -> int:
    """0 inside [-2, 2], +1 above, -1 below."""
    if v > 2:
        return 1
    if v < -2:
        return -1
    return 0


def _bisect_edge(f: Callable, x_out, x_in, tol_rel):
    """Shrink the bracket (outside point, inside point) to the ``|f| = 2`` crossing.

    Illinois steps on ``|f| - 2``, with a bisection step whenever two
    iterations fail to halve the bracket.  The returned error is the final
    half-width, so the result is as certified as plain bisection.
    """
    g_out, g_in = abs(f(x_out)) - 2, abs(f(x_in)) - 2
    if not (g_out > 0 and g_in <= 0):
        g_out, g_in = 1, -1  # statuses disagree with magnitudes; bisection only
    last_side = 0
    widths = [abs(x_in - x_out)] * 2
    while True:
        width = abs(x_in - x_out)
        scale = max(abs(x_in), 1)
        if width <= tol_rel * scale:
            return (x_in + x_out) / 2, width / 2
        m = None
        if width <= widths[-2] / 2 and g_out != g_in:
            c = x_in - g_in * (x_in - x_out) / (g_in - g_out)
            lo, hi = (x_out, x_in) if x_out < x_in else (x_in, x_out)
            if lo < c < hi:
                m = c
        widths.append(width)
        if m is None:
            m = (x_in + x_out) / 2
            widths = [width] * 2
        fm = f(m)
        gm = abs(fm) - 2
        if _status(fm) == 0:
            x_in, g_in = m, min(gm, 0)
            if last_side == -1:
                g_out /= 2
            last_side = -1
        else:
            x_out, g_out = m, max(gm, 0) or tol_rel
            if last_side == 1:
                g_in /= 2
            last_side = 1


def _bisect_zero(f: Callable, a, fa, b, tol_rel):
    """Point in [a, b] where ``|f| <= 2``, given ``f(a)`` and ``f(b)`` on opposite sides."""
    while True:
        m = (a + b) / 2
        fm = f(m)
        if _status(fm) == 0:
            return m
        if abs(b - a) <= tol_rel * max(abs(m), 1):
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m


@dataclass
class _Component:
    lo: object
    lo_err: object
    hi: object
    hi_err: object
    clamped: bool = False


def find_components(f: Callable, lo, hi, expected: int, prec: Precision, pad=None,
                    initial: Optional[int] = None) -> Optional[list[_Component]]:
    """Components of ``{|f| <= 2}`` within ``[lo, hi]``.

    Samples at a density that doubles until exactly ``expected`` components
    are seen or :data:`MAX_SAMPLES` is reached (returns ``None`` then).
    Components running into ``lo``/``hi`` are searched up to ``pad`` beyond
    the interval and clamped if they extend further.
    """
    tol = prec.endpoint_tolerance
    with prec.context():
        lo, hi = mpfr(lo), mpfr(hi)
        if pad is None:
            pad = 4 * tol * max(abs(lo), abs(hi), 1)
        n = max(2, initial or 16 * max(expected, 1))
        xs = [lo + (hi - lo) * i / n for i in range(n + 1)]
        vs = [f(x) for x in xs]
        while True:
            comps = _scan(f, xs, vs, tol, pad)
            if len(comps) == expected:
                return comps
            if n >= MAX_SAMPLES:
                log.debug("component count %d != %d at %d samples", len(comps), expected, n)
                return None
            mids = [(xs[i] + xs[i + 1]) / 2 for i in range(n)]
            mvs = [f(x) for x in mids]
            xs2, vs2 = [xs[0]], [vs[0]]
            for i in range(n):
                xs2 += [mids[i], xs[i + 1]]
                vs2 += [mvs[i], vs[i + 1]]
            xs, vs, n = xs2, vs2, 2 * n


def _scan(f, xs, vs, tol, pad) -> list[_Component]:
    st = [_status(v) for v in vs]
    n = len(xs) - 1
    comps = []
    i = 0
    while i <= n:
        if st[i] == 0:
            j = i
            while j < n and st[j + 1] == 0:
                j += 1
            comps.append(_edges(f, xs, i, j, xs[i], xs[j], tol, pad))
            i = j + 1
        elif i < n and st[i + 1] == -st[i] and st[i + 1] != 0:
            m = _bisect_zero(f, xs[i], vs[i], xs[i + 1], tol)
            comps.append(_edges(f, xs, i + 1, i, m, m, tol, pad))
            i += 1
        else:
            i += 1
    return comps


def _edges(f, xs, i, j, in_left, in_right, tol, pad) -> _Component:
    # i: first inside index (or index right of the left outside point), j likewise
    n = len(xs) - 1
    clamped = False
    if i > 0:
        left, lerr = _bisect_edge(f, xs[i - 1], in_left, tol)
    else:
        probe = xs[0] - pad
        if _status(f(probe)) == 0:
            left, lerr, clamped = xs[0], pad, True
        else:
            left, lerr = _bisect_edge(f, probe, in_left, tol)
    if j < n:
        right, rerr = _bisect_edge(f, xs[j + 1], in_right, tol)
    else:
        probe = xs[n] + pad
        if _status(f(probe)) == 0:
            right, rerr, clamped = xs[n], pad, True
        else:
            right, rerr = _bisect_edge(f, probe, in_right, tol)
    return _Component(left, lerr, right, rerr, clamped)


# --- refinement ---------------------------------------------------------------


def _children_at(parent: Band, a_next: int, lam, cf: ContinuedFraction, prec: Precision) -> Optional[list[Band]]:
    k = parent.order
    n_i, n_ii, n_iii = child_counts(parent.btype, a_next)
    a = cf.prefix(k + 1)
    with prec.context():
        lam_ = mpfr(lam)
        lo, hi = mpfr(parent.lo), mpfr(parent.hi)
        pad = 4 * mpfr(parent.err) + 4 * prec.endpoint_tolerance * max(abs(lo), abs(hi), 1)

        def t_type_i(E):  # t_(k+1,1)
            return trace_state(k + 1, E, lam_, a).z

        def t_type_23(E):  # t_(k+2,0) = Tr M_{k+1}
            return trace_state(k + 1, E, lam_, a).x

        expected_crossings = 2 * (n_i + n_ii + n_iii)
        initial = 8 * expected_crossings
        found = []
        if n_i:
            comps = find_components(t_type_i, lo, hi, n_i, prec, pad, initial)
            if comps is None:
                return None
            found += [(I, TraceSpec(k + 1, 1), c) for c in comps]
        n23 = n_ii + n_iii
        if n23:
            comps = find_components(t_type_23, lo, hi, n23, prec, pad, initial)
            if comps is None:
                return None
            ctype = II if parent.btype == I else III
            found += [(ctype, TraceSpec(k + 2, 0), c) for c in comps]
    found.sort(key=lambda item: item[2].lo)
    seen = {I: 0, II: 0, III: 0}
    children = []
    for btype, spec, c in found:
        seen[btype] += 1
        edge = (parent.btype, btype)
        letter = SymbolicLetter(edge, tau(edge, a_next), seen[btype])
        children.append(Band(k + 1, btype, c.lo, c.hi, max(c.lo_err, c.hi_err), parent.word + (letter,),
                             spec, parent.id, c.clamped))
    return children


def refine(parent: Band, a_next: int, lam, cf: ContinuedFraction, prec: Precision = DEFAULT_PRECISION,
           escalate: bool = True) -> list[Band]:
    """All order-(k+1) children of ``parent``, ascending.

    On a count mismatch the search is retried once at doubled precision.
    """
    _check_lambda(lam)
    if cf[parent.order + 1] != a_next:
        raise ConfigError(f"a_next={a_next} disagrees with a_{parent.order + 1}={cf[parent.order + 1]}")
    children = _children_at(parent, a_next, lam, cf, prec)
    if children is not None:
        return children
    expected = sum(child_counts(parent.btype, a_next))
    if not escalate:
        raise CountMismatch(expected, "other", f"children of {parent.id} at {prec.mantissa_bits} bits")
    log.info("escalating precision for children of %s to %d bits", parent.id, 2 * prec.mantissa_bits)
    children = _children_at(parent, a_next, lam, cf, prec.doubled())
    if children is None:
        raise PrecisionExhausted(f"children of {parent.id}: count {expected} not reached at "
                                 f"{2 * prec.mantissa_bits} bits")
    return children


def _refine_job(args):
    parent, a_next, lam, cf, bits = args
    return refine(parent, a_next, lam, cf, Precision(bits))


@dataclass
class BandTree:
    """Generations ``G_0 .. G_depth`` plus parent/child links by band id."""

    lam: str
    cf: ContinuedFraction
    prec: Precision
    generations: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.generations) - 1

    def __post_init__(self):
        self._index = {}
        self._children = {}
        for g in self.generations:
            self._add(g)

    def _add(self, g: Generation):
        for b in g.bands:
            self._index[b.id] = b
            self._children.setdefault(b.id, [])
            if b.parent_id is not None:
                self._children[b.parent_id].append(b.id)

    def append(self, g: Generation):
        self.generations.append(g)
        self._add(g)

    def band(self, band_id: str) -> Band:
        return self._index[band_id]

    def children(self, band: Band) -> list[Band]:
        return [self._index[i] for i in self._children.get(band.id, [])]

    def parent(self, band: Band) -> Optional[Band]:
        return self._index.get(band.parent_id) if band.parent_id else None

    def descendants(self, band: Band, order: int) -> list[Band]:
        """Bands of generation ``order`` inside ``band``, ascending."""
        level = [band]
        for _ in range(order - band.order):
            level = [c for b in level for c in self.children(b)]
        return level

    def truncated(self, depth: int) -> "BandTree":
        return BandTree(self.lam, self.cf, self.prec, list(self.generations[: depth + 1]))


MAX_BITS = 4096


class _Underresolved(Exception):
    pass


def _resolved(bands, lam, prec: Precision) -> bool:
    """Bands must be wider than ``scale * 2**-(bits/2)`` so descendants stay resolvable."""
    floor = (4 + abs(float(lam))) * 2.0 ** (-prec.mantissa_bits / 2)
    return all(float(b.length) >= floor for b in bands)


def _build(depth, lam_s, cf, prec, pool, threads):
    tree = BandTree(lam_s, cf, prec, [level0(lam_s, prec)])
    for k in range(1, depth + 1):
        parents = tree.generations[-1].bands
        jobs = [(p, cf[k], lam_s, cf, prec.mantissa_bits) for p in parents]
        if pool is not None and len(jobs) > 1:
            results = list(pool.map(_refine_job, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
        else:
            results = [_refine_job(j) for j in jobs]
        bands = sorted((c for r in results for c in r), key=lambda b: b.lo)
        if k < depth and not _resolved(bands, lam_s, prec):
            raise _Underresolved(k)
        tree.append(Generation(k, tuple(bands)))
    return tree


def build_tree(depth: int, lam, cf: ContinuedFraction, prec: Precision = DEFAULT_PRECISION,
               threads: int = 1) -> BandTree:
    """Generations up to ``depth``; per-level refinement runs in ``threads`` processes.

    Large partial quotients produce bands too narrow for the requested
    mantissa; the whole tree is then rebuilt at doubled precision (up to
    ``MAX_BITS``), so ``tree.prec`` may exceed ``prec``.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    lam_s = lam if isinstance(lam, str) else str(lam)
    _check_lambda(lam_s)
    if depth > 0 and not cf.has(depth):
        raise ConfigError(f"{cf.literal()} lacks a_{depth}")
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while True:
            try:
                return _build(depth, lam_s, cf, prec, pool, threads)
            except (_Underresolved, PrecisionExhausted) as exc:
                if 2 * prec.mantissa_bits > MAX_BITS:
                    raise PrecisionExhausted(f"{cf.literal()} at depth {depth} needs more than {MAX_BITS} bits") \
                        from None
                log.info("rebuilding tree at %d bits (%r)", 2 * prec.mantissa_bits, exc)
                prec = prec.doubled()
    finally:
        if pool is not None:
            pool.shutdown()


def generation(k: int, lam, cf: ContinuedFraction, prec: Precision = DEFAULT_PRECISION,
               threads: int = 1) -> Generation:
    return build_tree(k, lam, cf, prec, threads).generations[k]


def band_of(word: Sequence[SymbolicLetter], lam, cf: ContinuedFraction,
            prec: Precision = DEFAULT_PRECISION) -> Band:
    """Band coded by ``word``, refining only along its path."""
    word = tuple(word)
    check_word(word, cf)
    g0 = level0(lam, prec)
    band = next(b for b in g0 if b.btype == word[0].source)
    for j, letter in enumerate(word, start=1):
        kids = [c for c in refine(band, cf[j], lam, cf, prec) if c.btype == letter.target]
        band = kids[letter.ell - 1]
    return band


def sigma_minus1_containment(band: Band, lam, cf: ContinuedFraction, prec: Precision = DEFAULT_PRECISION) -> bool:
    """Whether ``|t_(k,-1)| <= 2`` at the band's endpoints and midpoint (type II only)."""
    if band.btype != II or band.order < 1:
        raise ValueError("containment in sigma_(k,-1) applies to type-II bands of order >= 1")
    k = band.order
    a = cf.prefix(k)
    with prec.context():
        lam_ = mpfr(lam)
        slack = 2 + prec.endpoint_tolerance * 4
        for E in (band.lo, band.mid, band.hi):
            if abs(trace_state(k, mpfr(E), lam_, a).t(-1)) > slack:
                return False
    return True


# --- validation ---------------------------------------------------------------


def _endpoint_certified(f, x, err, tol, prec) -> bool:
    """``|f| - 2`` changes sign across ``x +- (err + tol)``."""
    with prec.context():
        d = err + 2 * tol * max(abs(x), 1)
        return (_status(f(x - d)) == 0) != (_status(f(x + d)) == 0)


def check_generation(tree: BandTree, k: int, samples: int = 16) -> list[str]:
    """Geometric and combinatorial violations in generation ``k`` (empty if clean).

    Checks disjointness, containment in the parent (strict unless the child
    comes from the parent's own trace function, i.e. a type-I parent with
    ``a_{k} = 1``), endpoint certificates, ``|t| <= 2`` at interior samples,
    constant monotonicity direction, per-parent child counts and the I/III
    alternation inside type-II and type-III parents.
    """
    from .tracemap import trace_derivative_sign

    cf = tree.cf
    problems = []
    bands = tree.generations[k].bands
    prec = Precision(max([tree.prec.mantissa_bits] + [_bits(b.lo) for b in bands]))
    tol = prec.endpoint_tolerance
    with prec.context():
        lam = mpfr(tree.lam)
        for b1, b2 in zip(bands, bands[1:]):
            if not b2.lo - b2.err > b1.hi + b1.err:
                problems.append(f"overlap {b1.id} / {b2.id}")
        for b in bands:
            a = cf.prefix(b.tspec.k)
            spec = b.tspec

            def f(E, a=a, spec=spec):
                return trace_state(spec.k, E, lam, a).t(spec.p)

            if not b.lo < b.hi:
                problems.append(f"empty band {b.id}")
                continue
            for x in (b.lo, b.hi):
                if not _endpoint_certified(f, x, b.err, tol, prec):
                    problems.append(f"endpoint {float(x)} of {b.id} not at |t|=2")
            slack = 2 + tol
            signs = set()
            for i in range(samples):
                E = b.lo + b.length * (2 * i + 1) / (2 * samples)
                if abs(f(E)) > slack:
                    problems.append(f"|t| > 2 inside {b.id}")
                    break
            for i in range(10):
                E = b.lo + b.length * (i + 1) / 11
                signs.add(trace_derivative_sign(spec, E, lam, cf, b.length, prec))
            if len(signs) != 1:
                problems.append(f"trace not monotone on {b.id}")
            parent = tree.parent(b)
            if k > 0:
                if parent is None:
                    problems.append(f"orphan {b.id}")
                    continue
                slackp = parent.err + b.err + 4 * tol * max(abs(parent.hi), 1)
                if b.lo < parent.lo - slackp or b.hi > parent.hi + slackp:
                    problems.append(f"{b.id} escapes its parent")
                same_function = parent.btype == I and cf[k] == 1
                if not same_function and not (b.lo > parent.lo + slackp and b.hi < parent.hi - slackp):
                    problems.append(f"{b.id} not strictly inside its parent")
        if k > 0:
            for p in tree.generations[k - 1].bands:
                kids = tree.children(p)
                got = tuple(sum(1 for c in kids if c.btype == t) for t in TYPES)
                want = child_counts(p.btype, cf[k])
                if got != want:
                    problems.append(f"{p.id}: child counts {got} != {want}")
                if p.btype in (II, III) and kids:
                    pattern = [c.btype for c in kids]
                    alt = [I if i % 2 == 0 else III for i in range(len(kids))]
                    if pattern != alt:
                        problems.append(f"{p.id}: children not alternating I/III: {pattern}")
    return problems
