"""Delay systems ``R(s) = sum_i R_i(s) exp(-h_i s)`` with rational blocks.

Classification (retarded / neutral / advanced), conjugate systems and the
finiteness tests for right-half-plane zeros live here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import reduce
from math import lcm
from numbers import Number
from typing import Sequence

import numpy as np

from .numerics import Poly, cluster_roots, degree, from_roots, make_poly, mirror, poly_roots
from .rational import RationalFn

TOL_MARGIN = 1e-9
POLE_HIT = 1e-12


class QuasiPolyError(ValueError):
    pass


class InconclusiveError(QuasiPolyError):
    """A root of the characteristic polynomial sits on the unit circle."""


def as_delay(h) -> Fraction:
    if isinstance(h, Fraction):
        return h
    if isinstance(h, (int, np.integer)):
        return Fraction(int(h))
    if isinstance(h, str):
        return Fraction(h)
    raise TypeError(f"delays must be exact rationals, got {h!r}")


@dataclass(frozen=True)
class DelayTerm:
    block: RationalFn
    delay: Fraction

    def check(self):
        """Raise if the block is unstable or improper."""
        if not self.block.is_proper():
            raise QuasiPolyError(f"block at delay {self.delay} is improper")
        if not self.block.is_stable():
            raise QuasiPolyError(f"block at delay {self.delay} has poles with Re >= 0")


class QuasiPoly:
    """Finite sum of rational blocks times exponentials of rational delays.

    Terms are kept sorted by strictly increasing delay with the first at 0.
    With ``strict=True`` (the default) every block must also be stable and
    proper; intermediate quantities built during controller realization
    relax that with ``strict=False``.
    """

    def __init__(self, terms: Sequence, strict: bool = True):
        terms = [t if isinstance(t, DelayTerm) else DelayTerm(t[0], as_delay(t[1])) for t in terms]
        if not terms:
            raise QuasiPolyError("a QuasiPoly needs at least one term")
        delays = [t.delay for t in terms]
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise QuasiPolyError(f"delays must be strictly increasing, got {delays}")
        if delays[0] != 0:
            raise QuasiPolyError("the first delay must be 0")
        if any(h < 0 for h in delays):
            raise QuasiPolyError("delays must be nonnegative")
        if strict:
            for t in terms:
                t.check()
        self.terms = tuple(terms)
        self.strict = strict

    @classmethod
    def collect(cls, pairs, strict: bool = False) -> "QuasiPoly":
        """Build from unordered (block, delay) pairs, merging equal delays."""
        acc = {}
        for block, h in pairs:
            h = as_delay(h)
            acc[h] = acc[h] + block if h in acc else block
        terms = [DelayTerm(acc[h], h) for h in sorted(acc) if not acc[h].is_zero]
        if not terms or terms[0].delay != 0:
            terms.insert(0, DelayTerm(RationalFn.const(0.0), Fraction(0)))
        return cls(terms, strict=strict)

    @classmethod
    def rational(cls, G: RationalFn, strict: bool = True) -> "QuasiPoly":
        return cls([DelayTerm(G, Fraction(0))], strict=strict)

    @property
    def delays(self):
        return [t.delay for t in self.terms]

    @property
    def blocks(self):
        return [t.block for t in self.terms]

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        inner = " + ".join(f"{t.block!r}*exp(-{t.delay}s)" for t in self.terms)
        return f"QuasiPoly({inner})"

    def __call__(self, s):
        return evaluate(self, s)

    def derivative(self, s):
        """Analytic derivative, term by term: (G' - h G) exp(-h s)."""
        s = np.asarray(s, dtype=complex)
        out = np.zeros_like(s)
        for t in self.terms:
            h = float(t.delay)
            out = out + (t.block.deriv()(s) - h * t.block(s)) * np.exp(-h * s)
        return out

    def envelope(self, s):
        """Sum over blocks of ``sum_k |n_k| |s|^k / |D(s)|``.

        Unlike the plain sum of term magnitudes this does not vanish where
        the numerators do, which makes it the right yardstick for "is q(s)
        numerically zero".
        """
        s = np.asarray(s, dtype=complex)
        a = np.abs(s)
        out = np.zeros(s.shape)
        for t in self.terms:
            absnum = np.polynomial.polynomial.polyval(a, np.abs(t.block.num.coef))
            out = out + absnum / np.abs(t.block.den(s)) * np.exp(-float(t.delay) * s.real)
        return out

    # arithmetic produces relaxed (strict=False) quasi-polynomials
    def __add__(self, other):
        if isinstance(other, (RationalFn, Number)):
            other = QuasiPoly.rational(RationalFn.const(other) if isinstance(other, Number) else other,
                                       strict=False)
        if not isinstance(other, QuasiPoly):
            return NotImplemented
        return QuasiPoly.collect([(t.block, t.delay) for t in self.terms + other.terms])

    __radd__ = __add__

    def __neg__(self):
        return QuasiPoly([DelayTerm(-t.block, t.delay) for t in self.terms], strict=False)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            other = RationalFn.const(other)
        if isinstance(other, RationalFn):
            return QuasiPoly([DelayTerm(t.block * other, t.delay) for t in self.terms], strict=False)
        if isinstance(other, QuasiPoly):
            return QuasiPoly.collect([(a.block * b.block, a.delay + b.delay)
                                      for a in self.terms for b in other.terms])
        return NotImplemented

    __rmul__ = __mul__


def evaluate(q: QuasiPoly, s):
    """``sum_i block_i(s) exp(-h_i s)``; raises when ``s`` hits a block pole."""
    s = np.asarray(s, dtype=complex)
    out = np.zeros_like(s)
    for t in q.terms:
        d = t.block.den(s)
        if np.any(np.abs(d) < POLE_HIT):
            raise QuasiPolyError("evaluation point coincides with a block pole")
        out = out + t.block.num(s) / d * np.exp(-float(t.delay) * s)
    return out


class DelayType(Enum):
    RETARDED = "Retarded"
    NEUTRAL = "Neutral"
    ADVANCED = "Advanced"


@dataclass(frozen=True)
class DelayClass:
    tag: DelayType
    d1: int
    dmax: int


def classify(q: QuasiPoly) -> DelayClass:
    """Compare the relative degree of the undelayed block with the delayed ones.

    A single-term system is reported as neutral (empty max taken as d1).
    """
    degs = [t.block.relative_degree for t in q.terms if not t.block.is_zero]
    if q.terms[0].block.is_zero:
        raise QuasiPolyError("the undelayed block is identically zero")
    d1 = degs[0]
    dmax = max(degs[1:]) if len(degs) > 1 else d1
    if d1 < dmax:
        tag = DelayType.RETARDED
    elif d1 == dmax:
        tag = DelayType.NEUTRAL
    else:
        tag = DelayType.ADVANCED
    return DelayClass(tag, d1, dmax)


def _common_stable_denominator(q: QuasiPoly):
    """Least common multiple of block denominators, built from clustered poles."""
    mult = {}
    locs = []
    for t in q.terms:
        if degree(t.block.den) < 1:
            continue
        for p, m in cluster_roots(t.block.poles()):
            for i, known in enumerate(locs):
                if abs(known - p) <= 1e-7 * max(1.0, abs(p)):
                    mult[i] = max(mult[i], m)
                    break
            else:
                locs.append(p)
                mult[len(locs) - 1] = m
    roots = [p for i, p in enumerate(locs) for _ in range(mult[i])]
    return roots, from_roots(roots)


def conjugate_inner(q: QuasiPoly) -> RationalFn:
    """Finite Blaschke product whose poles are the poles of ``q``'s blocks."""
    roots, D = _common_stable_denominator(q)
    if any(abs(p.real) <= 1e-12 for p in roots):
        raise QuasiPolyError("block pole on the imaginary axis; conjugate undefined")
    sign = (-1.0) ** len(roots)
    return RationalFn(sign * mirror(D), D)


def conjugate(q: QuasiPoly) -> QuasiPoly:
    """``exp(-h_n s) q(-s) M_C(s)`` rewritten as a QuasiPoly.

    Block i moves to delay ``h_n - h_i`` and becomes
    ``(-1)^k N_i(-s) (D/D_i)(-s) / D(s)`` with D the common denominator of
    degree k, so blocks stay stable and keep their relative degree.
    """
    roots, D = _common_stable_denominator(q)
    if any(abs(p.real) <= 1e-12 for p in roots):
        raise QuasiPolyError("block pole on the imaginary axis; conjugate undefined")
    sign = (-1.0) ** len(roots)
    Dm = mirror(D)
    hn = q.terms[-1].delay
    new = []
    for t in q.terms:
        cof, rem = divmod(Dm, mirror(t.block.den))
        if np.max(np.abs(rem.coef)) > 1e-8 * max(1.0, np.max(np.abs(Dm.coef))):
            raise QuasiPolyError("block denominator does not divide the common denominator")
        num = make_poly((sign * mirror(t.block.num) * cof).coef)
        new.append(DelayTerm(RationalFn(num, D).minreal(), hn - t.delay))
    new.sort(key=lambda t: t.delay)
    return QuasiPoly(new, strict=q.strict)


@dataclass(frozen=True)
class PhiPolynomial:
    xi: tuple
    lattice: tuple
    N: int
    poly: Poly

    def roots(self) -> np.ndarray:
        if degree(self.poly) < 1:
            return np.zeros(0, dtype=complex)
        return poly_roots(self.poly)


def delay_lattice(delays) -> tuple[int, tuple]:
    """Common denominator N and integer lattice N*h_i."""
    N = reduce(lcm, (Fraction(h).denominator for h in delays), 1)
    return N, tuple(int(h * N) for h in delays)


def phi_polynomial(q: QuasiPoly) -> PhiPolynomial:
    """``1 + sum xi_i r^(h~_i - h~_1)`` for a neutral system.

    ``xi_i`` is the high-frequency limit of ``R_i/R_1``, read off the leading
    coefficients; it vanishes for blocks of larger relative degree.
    """
    cls = classify(q)
    if cls.tag is not DelayType.NEUTRAL:
        raise QuasiPolyError(f"phi polynomial is defined for neutral systems, got {cls.tag.value}")
    N, lat = delay_lattice(q.delays)
    b1 = q.terms[0].block
    xi = []
    for t in q.terms[1:]:
        if t.block.is_zero or t.block.relative_degree > cls.d1:
            xi.append(0j)
        else:
            xi.append(t.block.high_freq_gain / b1.high_freq_gain)
    expo = tuple(k - lat[0] for k in lat[1:])
    coeffs = np.zeros((max(expo) if expo else 0) + 1, dtype=complex)
    coeffs[0] = 1.0
    for x, e in zip(xi, expo):
        coeffs[e] += x
    return PhiPolynomial(tuple(xi), expo, N, make_poly(coeffs))


def is_F_system(q: QuasiPoly, tol_margin: float = TOL_MARGIN) -> bool:
    """True iff ``q`` has finitely many zeros in the right half plane."""
    cls = classify(q)
    if cls.tag is DelayType.RETARDED:
        return True
    if cls.tag is DelayType.ADVANCED:
        return False
    roots = phi_polynomial(q).roots()
    mags = np.abs(roots)
    if np.any(np.abs(mags - 1.0) <= tol_margin):
        raise InconclusiveError(
            f"phi polynomial has a root of magnitude {mags[np.argmin(np.abs(mags - 1))]:.12g}, "
            "on the unit circle within tolerance")
    return bool(np.all(mags > 1.0))


def is_I_system(q: QuasiPoly, tol_margin: float = TOL_MARGIN) -> bool:
    """True iff the conjugate of ``q`` has finitely many right-half-plane zeros."""
    return is_F_system(conjugate(q), tol_margin)
