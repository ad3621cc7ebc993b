"""Real-rational transfer functions ``num(s)/den(s)``."""

from __future__ import annotations

from dataclasses import dataclass
from numbers import Number

import numpy as np

from .numerics import Poly, cluster_roots, degree, from_roots, make_poly, mirror, poly_roots, trim


@dataclass(frozen=True, eq=False)
class RationalFn:
    """Ratio of polynomials in ``s``.

    The denominator is normalized to be monic.  Use :meth:`from_coeffs` to
    build one from descending coefficient lists (the usual transfer function
    convention).
    """

    num: Poly
    den: Poly

    def __post_init__(self):
        num, den = trim(self.num), trim(self.den)
        if degree(den) < 0:
            raise ZeroDivisionError("RationalFn with zero denominator")
        lead = den.coef[-1]
        object.__setattr__(self, "num", make_poly(num.coef / lead))
        object.__setattr__(self, "den", make_poly(den.coef / lead))

    @classmethod
    def from_coeffs(cls, num_desc, den_desc=(1.0,)) -> "RationalFn":
        return cls(make_poly(np.asarray(num_desc, dtype=complex)[::-1]),
                   make_poly(np.asarray(den_desc, dtype=complex)[::-1]))

    @classmethod
    def const(cls, c) -> "RationalFn":
        return cls(make_poly([c]), make_poly([1.0]))

    def to_coeffs(self):
        """Descending (num, den) coefficient lists."""
        return list(self.num.coef[::-1]), list(self.den.coef[::-1])

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        return self.num(s) / self.den(s)

    def deriv(self) -> "RationalFn":
        n, d = self.num, self.den
        return RationalFn(n.deriv() * d - n * d.deriv(), d * d)

    @property
    def is_zero(self) -> bool:
        return degree(self.num) < 0

    @property
    def relative_degree(self) -> int:
        if self.is_zero:
            raise ValueError("relative degree of the zero function is undefined")
        return degree(self.den) - degree(self.num)

    @property
    def high_freq_gain(self) -> complex:
        """Limit of ``s**d * G(s)`` as s -> infinity, d the relative degree."""
        return complex(self.num.coef[-1] / self.den.coef[-1])

    def poles(self) -> np.ndarray:
        if degree(self.den) < 1:
            return np.zeros(0, dtype=complex)
        return poly_roots(self.den)

    def zeros(self) -> np.ndarray:
        if degree(self.num) < 1:
            return np.zeros(0, dtype=complex)
        return poly_roots(self.num)

    def minreal(self, tol: float = 1e-7) -> "RationalFn":
        """Cancel numerator/denominator roots that agree within ``tol`` (relative)."""
        if degree(self.num) < 1 or degree(self.den) < 1:
            return self
        zs, ps = _clustered(self.zeros()), _clustered(self.poles())
        keep_z = []
        for z in zs:
            j = min(range(len(ps)), key=lambda k: abs(ps[k] - z), default=None)
            if j is not None and abs(ps[j] - z) <= tol * max(1.0, abs(z)):
                ps.pop(j)
            else:
                keep_z.append(z)
        if len(ps) == degree(self.den):
            return self
        num, den = from_roots(keep_z, lead=self.num.coef[-1]), from_roots(ps)
        if self.is_real:
            num, den = make_poly(np.real(num.coef)), make_poly(np.real(den.coef))
        return RationalFn(num, den)

    def is_stable(self, margin: float = 0.0) -> bool:
        p = self.poles()
        return bool(np.all(p.real < -margin)) if p.size else True

    def is_proper(self) -> bool:
        return self.is_zero or self.relative_degree >= 0

    @property
    def is_real(self) -> bool:
        return not (np.iscomplexobj(self.num.coef) or np.iscomplexobj(self.den.coef))

    def mirror(self) -> "RationalFn":
        """``G(-s)``."""
        return RationalFn(mirror(self.num), mirror(self.den))

    def _coerce(self, other):
        if isinstance(other, RationalFn):
            return other
        if isinstance(other, Number):
            return RationalFn.const(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if degree(other.den) == 0 or np.array_equal(self.den.coef, other.den.coef):
            if degree(other.den) == 0:
                return RationalFn(self.num + other.num * self.den / other.den.coef[0], self.den)
            return RationalFn(self.num + other.num, self.den)
        if degree(self.den) == 0:
            return other + self
        return RationalFn(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalFn(-self.num, self.den)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return RationalFn(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if other.is_zero:
            raise ZeroDivisionError("division by the zero rational function")
        return RationalFn(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __repr__(self):
        n, d = self.to_coeffs()
        return f"RationalFn(num={np.round(np.real_if_close(n), 6).tolist()}, den={np.round(np.real_if_close(d), 6).tolist()})"


def _clustered(roots):
    """Roots with numerically split multiple roots collapsed onto their mean."""
    return [p for p, m in cluster_roots(roots) for _ in range(m)]


def hinf_norm(G: RationalFn) -> float:
    """Exact sup over the imaginary axis of ``|G(jw)|`` for a proper real G.

    Uses ``|G(jw)|^2 = A(x)/B(x)`` with ``x = w**2`` and checks the endpoints
    and every stationary point on ``x >= 0``.
    """
    if not G.is_proper():
        return np.inf
    if degree(G.den) >= 1 and np.any(np.abs(G.poles().real) <= 1e-12):
        return np.inf
    A = _even_part_in_x(G.num)
    B = _even_part_in_x(G.den)
    crit = A.deriv() * B - A * B.deriv()
    xs = [0.0]
    if degree(crit) >= 1:
        for r in poly_roots(crit):
            if abs(r.imag) <= 1e-9 * max(1.0, abs(r)) and r.real > 0:
                xs.append(r.real)
    vals = [abs(A(x) / B(x)) for x in xs]
    if G.relative_degree == 0:
        vals.append(abs(G.high_freq_gain) ** 2)
    return float(np.sqrt(max(vals)))


def _even_part_in_x(p: Poly) -> Poly:
    """``p(jw) * p(-jw)`` as a polynomial in ``x = w**2`` (real p)."""
    prod = p * mirror(p)
    c = np.real(prod.coef)
    even = c[0::2] * (-1.0) ** np.arange(len(c[0::2]))
    return make_poly(even)
