"""Transfer matrices ``M_k(E)`` and trace functions ``t_(k,p)(E)``.

``M_{-1} = [[1, -lam], [0, 1]]``, ``M_0 = [[E, -1], [1, 0]]`` and
``M_{k+1} = M_{k-1} M_k^{a_{k+1}}``.  ``t_(k,p) = Tr(M_{k-1} M_k^p)``.

Two evaluation routes exist on purpose.  :func:`transfer_matrix` multiplies
matrices; :func:`trace` never forms a matrix and runs the scalar trace map
(Cayley-Hamilton: ``t_(k,p+1) = Tr(M_k) t_(k,p) - t_(k,p-1)``).  Band
construction uses only the scalar route.  All evaluation is pointwise in
``E``; expanded polynomial coefficients are never formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import gmpy2
from gmpy2 import mpfr

from .contfrac import ContinuedFraction
from .errors import AmbiguousSign, Exhausted

MPFR = type(mpfr(0))


@dataclass(frozen=True)
class Precision:
    """Working precision of the high-precision reals."""

    mantissa_bits: int = 128

    def __post_init__(self):
        if self.mantissa_bits < 53:
            raise ValueError("mantissa_bits must be >= 53")

    @property
    def endpoint_tolerance(self):
        """Relative tolerance for band endpoints, ``2^-(bits-32)``."""
        return mpfr(2) ** -(self.mantissa_bits - 32)

    @property
    def det_tolerance(self) -> float:
        return 2.0 ** -(self.mantissa_bits / 2)

    def context(self):
        return gmpy2.context(precision=self.mantissa_bits)

    def doubled(self) -> "Precision":
        return Precision(2 * self.mantissa_bits)

    def real(self, x):
        """Round ``x`` (int, str, Fraction, float, mpfr) into this precision."""
        with self.context():
            if hasattr(x, "numerator") and not isinstance(x, (int, MPFR)):
                return mpfr(x.numerator) / x.denominator
            return mpfr(x)


DEFAULT_PRECISION = Precision()


class Mat2(NamedTuple):
    """2x2 real matrix ``[[a, b], [c, d]]``."""

    a: object
    b: object
    c: object
    d: object

    def __matmul__(self, o: "Mat2") -> "Mat2":
        return Mat2(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )

    @property
    def trace(self):
        return self.a + self.d

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    def adjugate(self) -> "Mat2":
        """Inverse of a unimodular matrix."""
        return Mat2(self.d, -self.b, -self.c, self.a)

    def power(self, n: int) -> "Mat2":
        if n < 0:
            return self.adjugate().power(-n)
        result = Mat2(1, 0, 0, 1)
        base = self
        while n:
            if n & 1:
                result = result @ base
            base = base @ base
            n >>= 1
        return result


@dataclass(frozen=True)
class TraceSpec:
    k: int
    p: int

    def __post_init__(self):
        if self.k < 0 or self.p < -1:
            raise ValueError(f"invalid trace spec (k={self.k}, p={self.p})")

    def __str__(self) -> str:
        return f"({self.k},{self.p})"


def _require(cf: ContinuedFraction, k: int):
    if k > 0 and not cf.has(k):
        raise Exhausted(f"{cf.literal()} lacks a_{k}")


def transfer_matrix(k: int, E, lam, cf: ContinuedFraction, prec: Precision = DEFAULT_PRECISION) -> Mat2:
    """``M_k(E)`` by the matrix recursion, powers by repeated squaring."""
    if k < -1:
        raise ValueError("k must be >= -1")
    _require(cf, k)
    with prec.context():
        E, lam = mpfr(E), mpfr(lam)
        m_prev = Mat2(mpfr(1), -lam, mpfr(0), mpfr(1))
        if k == -1:
            return m_prev
        m = Mat2(E, mpfr(-1), mpfr(1), mpfr(0))
        for j in range(1, k + 1):
            m_prev, m = m, m_prev @ m.power(cf[j])
        return m


class TraceState(NamedTuple):
    """Traces at level ``k``: ``Tr M_{k-1}``, ``Tr M_k``, ``Tr(M_{k-1} M_k)``."""

    k: int
    x_prev: object
    x: object
    z: object

    def t(self, p: int):
        """``t_(k,p)`` from the three-term recursion in ``p``."""
        if p == -1:
            return self.x * self.x_prev - self.z
        t0, t1 = self.x_prev, self.z
        if p == 0:
            return t0
        x = self.x
        for _ in range(p - 1):
            t0, t1 = t1, x * t1 - t0
        return t1

    def advance(self, a: int) -> "TraceState":
        """Level ``k+1`` given ``a = a_{k+1}``."""
        t0, t1 = self.x_prev, self.z
        x = self.x
        for _ in range(a):
            t0, t1 = t1, x * t1 - t0
        # Tr M_{k+1} = t_(k,a), Tr(M_k M_{k+1}) = t_(k,a+1)
        return TraceState(self.k + 1, x, t0, t1)


def trace_state(k: int, E, lam, a: tuple[int, ...]) -> TraceState:
    """Scalar trace map to level ``k`` in the ambient gmpy2 context.

    ``a`` holds ``a_1 .. a_k`` (at least).  Callers manage precision.
    """
    st = TraceState(0, mpfr(2), E, E - lam)
    for j in range(k):
        st = st.advance(a[j])
    return st


def trace(spec: TraceSpec, E, lam, cf: ContinuedFraction, prec: Precision = DEFAULT_PRECISION):
    """``t_(k,p)(E)`` through the scalar trace map (no matrices)."""
    _require(cf, spec.k)
    with prec.context():
        st = trace_state(spec.k, mpfr(E), mpfr(lam), cf.prefix(spec.k))
        return +st.t(spec.p)


def trace_by_matrices(spec: TraceSpec, E, lam, cf: ContinuedFraction, prec: Precision = DEFAULT_PRECISION):
    """Direct product oracle ``Tr(M_{k-1} M_k^p)``."""
    with prec.context():
        m_prev = transfer_matrix(spec.k - 1, E, lam, cf, prec)
        m = transfer_matrix(spec.k, E, lam, cf, prec)
        return (m_prev @ m.power(spec.p)).trace


def _fricke_at(k, E, lam, cf, prec):
    with prec.context():
        st = trace_state(k, mpfr(E), mpfr(lam), cf.prefix(k))
        x, y, z = st.x, st.x_prev, st.z
        return x * x + y * y + z * z - x * y * z - 4, max(abs(x), abs(y), abs(z))


def fricke_invariant(k: int, E, lam, cf: ContinuedFraction, prec: Precision = DEFAULT_PRECISION,
                     compensate: bool = True):
    """``x^2 + y^2 + z^2 - xyz - 4`` for ``(Tr M_k, Tr M_{k-1}, Tr(M_k M_{k-1}))``.

    The value equals ``lam^2`` for every ``k`` and ``E``.  Away from the
    spectrum the traces grow very fast and the expression cancels about
    ``2 log2|x|`` bits, so with ``compensate`` the evaluation is repeated with
    that many guard bits and the result is accurate to ``prec``.  With
    ``compensate=False`` the raw working-precision value is returned, which
    is what a precision monitor wants.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    _require(cf, k)
    value, mag = _fricke_at(k, E, lam, cf, prec)
    if not compensate:
        return value
    with prec.context():
        guard = 2 * max(0, int(gmpy2.ceil(gmpy2.log2(mag))) if mag > 0 else 0) + 16
    # traces at lower levels can exceed the final ones; one more round settles it
    for _ in range(2):
        hp = Precision(prec.mantissa_bits + guard)
        value, mag2 = _fricke_at(k, E, lam, cf, hp)
        with hp.context():
            need = 2 * max(0, int(gmpy2.ceil(gmpy2.log2(mag2))) if mag2 > 0 else 0) + 16
        if need <= guard:
            break
        guard = need
    with prec.context():
        return +value


def trace_derivative_sign(spec: TraceSpec, E, lam, cf: ContinuedFraction, band_length,
                          prec: Precision = DEFAULT_PRECISION) -> int:
    """Sign of ``d t_spec / dE`` at ``E`` by a central difference.

    The step is ``band_length / 1000``.
    """
    _require(cf, spec.k)
    with prec.context():
        E, lam, h = mpfr(E), mpfr(lam), mpfr(band_length) / 1000
        a = cf.prefix(spec.k)
        up = trace_state(spec.k, E + h, lam, a).t(spec.p)
        dn = trace_state(spec.k, E - h, lam, a).t(spec.p)
        diff = up - dn
        noise = (abs(up) + abs(dn) + 4) * mpfr(2) ** -(prec.mantissa_bits - 8)
        if abs(diff) <= noise:
            raise AmbiguousSign(f"derivative of t{spec} at {E} lost in rounding noise")
        return 1 if diff > 0 else -1
