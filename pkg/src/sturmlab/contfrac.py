"""Continued fractions, convergents, the Gauss map and Gauss-Kuzmin sampling.

Frequencies are carried as :class:`ContinuedFraction` values.  Quadratic
irrationals are stored with a periodic tail so any number of partial
quotients can be requested; everything else is a finite list.

Literal syntax::

    1,1,1         finite [1, 1, 1]
    1,2:(3,4)     [1, 2, 3, 4, 3, 4, ...]
    (1)           golden mean [1, 1, 1, ...]
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import gmpy2
import numpy as np

from .errors import ConfigError, Exhausted, InsufficientPrecision, RationalInput, ZeroInput


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients ``a_1, a_2, ...`` of a frequency in (0, 1).

    ``periodic_tail`` is the 0-based index into ``coefficients`` where the
    repeating block starts; ``None`` means the expansion is finite.
    """

    coefficients: tuple[int, ...]
    periodic_tail: Optional[int] = None

    def __post_init__(self):
        coeffs = tuple(int(a) for a in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if not coeffs:
            raise ConfigError("continued fraction needs at least one coefficient")
        if any(a < 1 for a in coeffs):
            raise ConfigError(f"partial quotients must be >= 1, got {coeffs}")
        if self.periodic_tail is not None and not 0 <= self.periodic_tail < len(coeffs):
            raise ConfigError(f"periodic tail index {self.periodic_tail} out of range")

    @classmethod
    def periodic(cls, prefix: Sequence[int], period: Sequence[int]) -> "ContinuedFraction":
        return cls(tuple(prefix) + tuple(period), len(prefix))

    @classmethod
    def parse(cls, literal: str) -> "ContinuedFraction":
        s = literal.replace(" ", "")
        m = re.fullmatch(r"(?:([0-9]+(?:,[0-9]+)*)(?::|,)?)?(?:\(([0-9]+(?:,[0-9]+)*)\))?", s)
        if not s or m is None or (m.group(1) is None and m.group(2) is None):
            raise ConfigError(f"cannot parse continued fraction literal {literal!r}")
        head = [int(t) for t in m.group(1).split(",")] if m.group(1) else []
        if m.group(2) is None:
            return cls(tuple(head))
        period = [int(t) for t in m.group(2).split(",")]
        return cls.periodic(head, period)

    @property
    def is_periodic(self) -> bool:
        return self.periodic_tail is not None

    def __len__(self) -> int:
        """Number of available quotients (a large sentinel for periodic ones)."""
        return len(self.coefficients) if not self.is_periodic else 2**62

    def has(self, n: int) -> bool:
        return self.is_periodic or n <= len(self.coefficients)

    def __getitem__(self, j: int) -> int:
        """``cf[j]`` is the 1-based partial quotient ``a_j``."""
        if j < 1:
            raise IndexError("partial quotients are indexed from 1")
        i = j - 1
        n = len(self.coefficients)
        if i < n:
            return self.coefficients[i]
        if not self.is_periodic:
            raise Exhausted(f"continued fraction {self.literal()} has only {n} quotients, a_{j} requested")
        start = self.periodic_tail
        return self.coefficients[start + (i - start) % (n - start)]

    def prefix(self, n: int) -> tuple[int, ...]:
        return tuple(self[j] for j in range(1, n + 1))

    def __iter__(self) -> Iterator[int]:
        j = 1
        while self.has(j):
            yield self[j]
            j += 1

    def literal(self) -> str:
        if not self.is_periodic:
            return ",".join(map(str, self.coefficients))
        head = self.coefficients[: self.periodic_tail]
        tail = self.coefficients[self.periodic_tail :]
        body = "(" + ",".join(map(str, tail)) + ")"
        return (",".join(map(str, head)) + ":" + body) if head else body

    def __str__(self) -> str:
        return self.literal()

    def fraction(self, n: Optional[int] = None) -> Fraction:
        """Exact value of the truncation ``[a_1, ..., a_n]``."""
        if n is None:
            if self.is_periodic:
                raise Exhausted("a periodic expansion has no finite value; pass n")
            n = len(self.coefficients)
        x = Fraction(0)
        for a in reversed(self.prefix(n)):
            x = 1 / (a + x)
        return x

    def value(self, bits: int = 128):
        """Value as an ``mpfr`` at ``bits`` of precision.

        For periodic expansions the truncation depth is chosen so that the
        truncation error is below the working precision (``q_n^2 > 2^bits``).
        """
        if not self.is_periodic:
            n = len(self.coefficients)
        else:
            n, q_prev, q = 0, 0, 1
            while q * q < 2 ** (bits + 8):
                n += 1
                q_prev, q = q, self[n] * q + q_prev
        fr = self.fraction(n)
        with gmpy2.context(precision=bits):
            return gmpy2.mpfr(fr.numerator) / fr.denominator


@dataclass(frozen=True)
class Convergent:
    k: int
    p: int
    q: int

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.p, self.q)


def convergents(cf: ContinuedFraction, k_max: int) -> list[Convergent]:
    """Convergents ``p_k/q_k`` for ``k = -1 .. k_max`` in exact integers."""
    if not cf.has(k_max):
        raise Exhausted(f"{cf.literal()} provides fewer than {k_max} quotients")
    out = [Convergent(-1, 1, 0), Convergent(0, 0, 1)]
    for k in range(1, k_max + 1):
        a = cf[k]
        prev, cur = out[-2], out[-1]
        out.append(Convergent(k, a * cur.p + prev.p, a * cur.q + prev.q))
    return out


def denominators(cf: ContinuedFraction, k_max: int) -> list[int]:
    """``q_{-1}, q_0, ..., q_{k_max}``."""
    return [c.q for c in convergents(cf, k_max)]


def _as_exact_interval(x, bits: Optional[int]) -> tuple[Fraction, Fraction, Fraction]:
    """(value, lo, hi) as exact rationals; lo/hi bracket the declared uncertainty."""
    if isinstance(x, (Fraction, int)):
        fx = Fraction(x)
        return fx, fx, fx
    if isinstance(x, str):
        bits = bits or 128
        with gmpy2.context(precision=bits):
            x = gmpy2.mpfr(x)
    if isinstance(x, float):
        bits = bits or 53
        fx = Fraction(x)
    elif isinstance(x, type(gmpy2.mpfr(0))):
        bits = bits or x.precision
        fx = Fraction(*map(int, x.as_integer_ratio()))
    else:
        raise TypeError(f"unsupported real type {type(x).__name__}")
    # one ulp in both directions
    rad = abs(fx) * Fraction(1, 2 ** (bits - 1))
    return fx, fx - rad, fx + rad


def expand(x, depth: int, bits: Optional[int] = None) -> ContinuedFraction:
    """Partial quotients ``[a_1 .. a_depth]`` of ``x`` in (0, 1).

    ``x`` may be a :class:`~fractions.Fraction` (exact), a float, an ``mpfr`` or
    a decimal string.  Inexact inputs carry a one-ulp uncertainty at
    ``bits`` of precision (defaults: 53 for floats, the value's own precision
    for ``mpfr``, 128 for strings).  The uncertainty interval is pushed
    through the Gauss map in exact arithmetic, so a quotient is emitted only
    if both ends of the interval agree on it.
    """
    if depth < 1:
        raise ValueError("depth must be positive")
    fx, lo, hi = _as_exact_interval(x, bits)
    if not 0 < fx < 1:
        raise ValueError(f"x must lie in (0, 1), got {float(fx)}")
    out = []
    for _ in range(depth):
        if lo <= 0 <= hi or fx == 0:
            raise RationalInput(f"expansion terminates after {len(out)} quotients: {out}")
        a = math.floor(1 / fx)
        a_lo, a_hi = math.floor(1 / hi), math.floor(1 / lo)
        if a_lo != a_hi:
            raise InsufficientPrecision(f"quotient {len(out) + 1} not determined at working precision")
        out.append(a)
        fx = 1 / fx - a
        lo, hi = 1 / hi - a, 1 / lo - a
    return ContinuedFraction(tuple(out))


def gauss_shift(cf: ContinuedFraction) -> ContinuedFraction:
    """Drop ``a_1``: the symbolic action of the Gauss map."""
    n = len(cf.coefficients)
    if cf.is_periodic:
        if cf.periodic_tail > 0:
            return ContinuedFraction(cf.coefficients[1:], cf.periodic_tail - 1)
        # rotate the pure period
        return ContinuedFraction(cf.coefficients[1:] + cf.coefficients[:1], 0)
    if n < 2:
        raise Exhausted("cannot shift a one-term expansion")
    return ContinuedFraction(cf.coefficients[1:])


def gauss_real(x):
    """Fractional part of ``1/x``, in the arithmetic of ``x``."""
    if x == 0:
        raise ZeroInput("Gauss map undefined at 0")
    y = 1 / x
    if isinstance(y, Fraction):
        return y - math.floor(y)
    return y - gmpy2.floor(y) if isinstance(y, type(gmpy2.mpfr(0))) else y - math.floor(y)


def gauss_kuzmin_pmf(k: int) -> float:
    """Probability that a Gauss-distributed frequency has quotient ``k``."""
    return math.log2(1 + 1 / (k * (k + 2)))


def sample_frequency(seed: int, depth: int) -> ContinuedFraction:
    """``depth`` i.i.d. quotients from the Gauss-Kuzmin law.

    Draws ``x`` from the Gauss measure by inverting its distribution function
    ``log2(1 + x)`` and takes ``floor(1/x)``.
    """
    rng = np.random.default_rng(seed)
    u = 1.0 - rng.random(depth)  # (0, 1]
    x = np.exp2(u) - 1.0
    a = np.floor(1.0 / x).astype(np.int64)
    return ContinuedFraction(tuple(int(v) for v in a))


GOLDEN = ContinuedFraction((1,), 0)
SILVER = ContinuedFraction((2,), 0)
