"""Inner-outer factorization ``P = (m_n / m_d) N_o`` of delay plants ``P = R/T``.

``m_n`` is the finite Blaschke product on the right-half-plane zeros of R,
``m_d = M_Tbar T / Tbar`` is the (generally infinite dimensional) inner
factor carrying the unstable poles, and ``N_o = (R / M_R)(M_Tbar / Tbar)``
is outer.  Factors are kept as evaluation closures; nothing infinite
dimensional is expanded symbolically.

Plant checks are reported under three labels: A.1 well-formed terms with
a zero first delay, A.2 no zeros of R or T on the imaginary axis, A.3 R an
F-system and T an I-system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .numerics import from_roots
from .quasipoly import (InconclusiveError, QuasiPoly, QuasiPolyError, conjugate,
                        is_F_system, is_I_system)
from .rational import RationalFn
from .zerofinder import ContourBox, ZeroSet, default_box, locate_zeros

AXIS_THRESHOLD = 1e-6
REPEATED_ZERO = 1e-6


class AssumptionError(ValueError):
    pass


class FactorizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BlaschkeProduct:
    """``gain * prod (s - z_i) / (s + conj(z_i))`` over right-half-plane zeros."""

    zeros: tuple = ()
    gain: float = 1.0

    def __post_init__(self):
        if any(z.real <= 0 for z in self.zeros):
            raise ValueError("Blaschke zeros must lie in the open right half plane")

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        out = np.full(s.shape, self.gain, dtype=complex)
        for z in self.zeros:
            out = out * (s - z) / (s + np.conj(z))
        return out

    @property
    def numerator(self):
        return from_roots(self.zeros, lead=self.gain)

    @property
    def denominator(self):
        return from_roots([-np.conj(z) for z in self.zeros])

    def as_rational(self) -> RationalFn:
        return RationalFn(self.numerator, self.denominator)

    def __len__(self):
        return len(self.zeros)


@dataclass
class AssumptionReport:
    a1: bool
    a2: bool
    a3: bool
    messages: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.a1 and self.a2 and self.a3

    def summary(self) -> str:
        mark = lambda ok: "PASS" if ok else "FAIL"  # noqa: E731
        return f"A.1 {mark(self.a1)}, A.2 {mark(self.a2)}, A.3 {mark(self.a3)}"


def axis_min_modulus(q: QuasiPoly, n: int = 4096):
    """Smallest relative modulus ``|q(jw)| / envelope(w)`` over w >= 0, and where."""
    def rel(w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return np.abs(q(1j * w)) / np.maximum(q.envelope(1j * w), 1e-300)

    w = np.concatenate([[0.0], np.logspace(-4, 4, n)])
    r = rel(w)
    best_w, best = float(w[np.argmin(r)]), float(r.min())
    # local refinement around the deepest grid minima
    for k in np.argsort(r)[:8]:
        lo, hi = w[max(k - 1, 0)], w[min(k + 1, len(w) - 1)]
        res = minimize_scalar(lambda x: float(rel(x)[0]), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, hi)})
        if res.fun < best:
            best, best_w = float(res.fun), float(res.x)
    return best, best_w


def check_assumptions(R: QuasiPoly, T: QuasiPoly) -> AssumptionReport:
    msgs = []
    a1 = True
    for name, q in (("R", R), ("T", T)):
        if q.delays[0] != 0:
            a1 = False
            msgs.append(f"A.1: first delay of {name} is not 0")
        for t in q.terms:
            try:
                t.check()
            except QuasiPolyError as exc:
                a1 = False
                msgs.append(f"A.1: {name}: {exc}")

    a2 = True
    for name, q in (("R", R), ("T", T)):
        m, w = axis_min_modulus(q)
        if m < AXIS_THRESHOLD:
            a2 = False
            msgs.append(f"A.2: {name} nearly vanishes on the axis at w={w:.6g} (rel {m:.2e})")

    a3 = True
    try:
        if not is_F_system(R):
            a3 = False
            msgs.append("A.3: R is not an F-system (infinitely many unstable zeros)")
    except InconclusiveError as exc:
        a3 = False
        msgs.append(f"A.3: R inconclusive: {exc}")
    try:
        if not is_I_system(T):
            a3 = False
            msgs.append("A.3: T is not an I-system (its conjugate has infinitely many unstable zeros)")
    except (InconclusiveError, QuasiPolyError) as exc:
        a3 = False
        msgs.append(f"A.3: T inconclusive: {exc}")
    return AssumptionReport(a1, a2, a3, msgs)


@dataclass(frozen=True)
class InnerOuter:
    R: QuasiPoly
    T: QuasiPoly
    Tbar: QuasiPoly
    m_n: BlaschkeProduct
    M_Tbar: BlaschkeProduct
    zeros_R: ZeroSet
    zeros_Tbar: ZeroSet

    def plant(self, s):
        return self.R(s) / self.T(s)

    def md(self, s):
        s = np.asarray(s, dtype=complex)
        tb = self.Tbar(s)
        if np.any(np.abs(tb) < 1e-12):
            raise FactorizationError("Tbar vanishes at the evaluation point")
        return self.M_Tbar(s) * self.T(s) / tb

    def mn(self, s):
        return self.m_n(s)

    def No(self, s):
        return self.R(s) / self.m_n(s) * self.M_Tbar(s) / self.Tbar(s)


def evaluate_factor(f: InnerOuter, which: str, s):
    try:
        fn = {"m_n": f.mn, "m_d": f.md, "N_o": f.No}[which]
    except KeyError:
        raise ValueError(f"unknown factor {which!r}; expected m_n, m_d or N_o") from None
    return fn(s)


def _blaschke_from(zs: ZeroSet) -> BlaschkeProduct:
    zeros = tuple(z for z in zs.zeros if z.real > 0)
    for i, a in enumerate(zeros):
        for b in zeros[i + 1:]:
            if abs(a - b) < REPEATED_ZERO:
                raise FactorizationError(f"repeated right-half-plane zero near {a:.6g}")
    return BlaschkeProduct(zeros)


def factorize(R: QuasiPoly, T: QuasiPoly, box_R: Optional[ContourBox] = None,
              box_Tbar: Optional[ContourBox] = None) -> InnerOuter:
    """Factor ``P = R/T`` after checking A.1-A.3."""
    report = check_assumptions(R, T)
    if not report.passed:
        raise AssumptionError("; ".join(report.messages))
    zR = locate_zeros(R, box_R or default_box(R))
    Tbar = conjugate(T)
    zTb = locate_zeros(Tbar, box_Tbar or default_box(Tbar))
    return InnerOuter(R, T, Tbar, _blaschke_from(zR), _blaschke_from(zTb), zR, zTb)
