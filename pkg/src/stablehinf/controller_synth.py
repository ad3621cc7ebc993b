"""Sensitivity assembly, FIR-block controller realization and design verification.

The controller ``C = (W - S_W) / (S_W P)`` contains unstable pole-zero
cancellations at the right-half-plane zeros of the plant.  Multiplying
numerator and denominator by ``q~/q`` (``q`` carrying those zeros) and
splitting each delayed term by partial fractions at the roots of ``q``
gives ``C = (H_T + F_T) / (H_R + F_R)``: the H parts only have stable poles,
and the F parts are finite impulse response blocks whose unstable modes
cancel exactly after the last delay.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .factorization import InnerOuter
from .np_design import Interpolant, InterpolantKind, InterpolationData
from .numerics import Poly, cluster_roots, degree, make_poly, poly_roots
from .quasipoly import DelayTerm, QuasiPoly
from .rational import RationalFn
from .zerofinder import INSET, ContourBox, ContourError, _count, count_zeros, default_box

log = logging.getLogger(__name__)

SPLIT_TOL = 1e-6
NEAR_CANCEL = 1e-6


class RealizationError(RuntimeError):
    pass


class NearCancellationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FirBlock:
    """``sum_i A_i(s) exp(-h_i s) / q(s)`` with ``deg A_i < deg q``."""

    numerator_terms: tuple  # of (Poly, Fraction)
    denominator: Poly

    @property
    def roots(self) -> np.ndarray:
        return poly_roots(self.denominator)

    @property
    def support_end(self) -> float:
        live = [float(h) for A, h in self.numerator_terms if degree(A) >= 0]
        return max(live) if live else 0.0

    @property
    def is_zero(self) -> bool:
        return all(degree(A) < 0 for A, _ in self.numerator_terms)

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        out = np.zeros_like(s)
        for A, h in self.numerator_terms:
            out = out + A(s) * np.exp(-float(h) * s)
        return out / self.denominator(s)

    def cancellation_residual(self) -> float:
        """``max_r |sum_i A_i(r) exp(-h_i r)|`` relative to the term sizes."""
        worst = 0.0
        for r in self.roots:
            vals = [A(r) * np.exp(-float(h) * r) for A, h in self.numerator_terms]
            scale = max(1.0, sum(abs(v) for v in vals))
            worst = max(worst, abs(sum(vals)) / scale)
        return worst

    def residues(self) -> np.ndarray:
        """``rho[i, j] = A_i(r_j) / q'(r_j)`` (simple roots)."""
        r = self.roots
        dq = self.denominator.deriv()(r)
        return np.array([A(r) / dq for A, _ in self.numerator_terms])

    def evaluate_impulse(self, t, truncate: bool = True) -> np.ndarray:
        """Impulse response at times ``t``.

        Each term contributes ``sum_j rho_ij exp(r_j (t - h_i))`` for
        ``t >= h_i``.  Past the last delay the modes cancel in exact
        arithmetic; with ``truncate`` the response is set to zero there.
        """
        t = np.asarray(t, dtype=float)
        r = self.roots
        rho = self.residues()
        y = np.zeros(t.shape, dtype=complex)
        for (A, h), row in zip(self.numerator_terms, rho):
            h = float(h)
            on = t >= h
            tau = t[on] - h
            y[on] += np.exp(np.outer(tau, r)) @ row
        if truncate:
            y[t > self.support_end] = 0.0
        return y.real if np.allclose(y.imag, 0, atol=1e-9 * max(1.0, np.abs(y).max(initial=0))) else y


def impulse_response(F: FirBlock, dt: float = 1e-3, t_end: Optional[float] = None,
                     truncate: bool = True):
    """Sampled impulse response ``(t, y)`` on ``[0, t_end]`` (default: one delay past the support)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end is None:
        t_end = F.support_end + max(1.0, 0.25 * F.support_end)
    n = int(round(t_end / dt))
    t = dt * np.arange(n + 1)
    return t, F.evaluate_impulse(t, truncate=truncate)


def _interpolating_poly(r, v) -> Poly:
    """Polynomial of degree < len(r) through ``(r_j, v_j)``."""
    V = np.vander(r, len(r), increasing=True)
    return make_poly(np.linalg.solve(V, v))


def fir_split(G: QuasiPoly, q: Poly, tol: float = SPLIT_TOL):
    """Write ``G(s)/q(s) = H(s) + F(s)`` with H stable and F a FIR block.

    ``G`` must vanish at every (simple, right-half-plane) root of ``q``.
    For each term ``N_i/D_i exp(-h_i s)``, ``A_i`` interpolates ``N_i/D_i``
    at the roots of q, and ``H_i = ((N_i - A_i D_i)/q)/D_i`` by exact
    polynomial division.
    """
    if degree(q) < 1:
        # nothing to cancel: the whole quotient is the stable part
        H = QuasiPoly([DelayTerm(t.block / RationalFn(q, make_poly([1.0])), t.delay) for t in G.terms],
                      strict=False)
        return H, FirBlock(tuple((make_poly([0.0]), t.delay) for t in G.terms), make_poly(q.coef))
    r = poly_roots(q)
    if any(m > 1 for _, m in cluster_roots(r)):
        raise RealizationError("q must have simple roots")
    if np.any(r.real <= 0):
        raise RealizationError("q must have all roots in the open right half plane")
    resid = np.abs(G(r)) / np.maximum(G.envelope(r), 1e-300)
    if np.any(resid > tol):
        raise RealizationError(
            f"numerator does not vanish at q-roots (relative residual {resid.max():.2e}); "
            "interpolation inconsistent")
    real = np.isrealobj(q.coef) and all(t.block.is_real for t in G.terms)
    h_terms, f_terms = [], []
    for t in G.terms:
        N, D = t.block.num, t.block.den
        A = _interpolating_poly(r, t.block(r))
        if real:
            A = make_poly(np.real(A.coef))
        quo, rem = divmod(N - A * D, q)
        scale = max(1.0, np.max(np.abs(N.coef)), np.max(np.abs((A * D).coef)))
        if np.max(np.abs(rem.coef)) > 1e-7 * scale:
            raise RealizationError("inexact division in fir_split")
        h_terms.append(DelayTerm(RationalFn(make_poly(quo.coef), D), t.delay))
        f_terms.append((A, t.delay))
    H = QuasiPoly(h_terms, strict=False)
    return H, FirBlock(tuple(f_terms), make_poly(q.coef))


def assemble_sensitivity(f: InnerOuter, F: Interpolant, gamma: float) -> Callable:
    """``S_W(s) = gamma m_d(s) F(s)``."""
    def S_W(s):
        s = np.asarray(s, dtype=complex)
        return gamma * f.md(s) * F(s)
    return S_W


def raw_controller(f: InnerOuter, W: RationalFn, S_W: Callable) -> Callable:
    """``C = (W - S_W) / (S_W P)`` evaluated pointwise."""
    def C(s):
        s = np.asarray(s, dtype=complex)
        sw = S_W(s)
        return (W(s) - sw) / (sw * f.plant(s))
    return C


@dataclass(frozen=True)
class RealizedController:
    gamma: float
    interpolant: Interpolant
    raw: Callable
    H_T: Optional[QuasiPoly] = None
    H_R: Optional[QuasiPoly] = None
    F_T: Optional[FirBlock] = None
    F_R: Optional[FirBlock] = None

    @property
    def realizable(self) -> bool:
        return self.H_R is not None

    def numerator(self, s):
        if not self.realizable:
            raise RealizationError("irrational interpolant: no FIR realization")
        return self.H_T(s) + self.F_T(s)

    def denominator(self, s):
        if not self.realizable:
            raise RealizationError("irrational interpolant: no FIR realization")
        return self.H_R(s) + self.F_R(s)

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        if not self.realizable:
            return self.raw(s)
        return self.numerator(s) / self.denominator(s)

    @property
    def delay_free(self) -> bool:
        return self.realizable and all(h == 0 for h in self.H_R.delays + self.H_T.delays)

    def rational_form(self) -> RationalFn:
        """Exact rational controller when no delays are involved."""
        if not self.delay_free:
            raise RealizationError("controller has delays; no rational form")
        if not (self.F_T.is_zero and self.F_R.is_zero):
            raise RealizationError("FIR parts did not vanish in the delay-free case")
        return (self.H_T.blocks[0] / self.H_R.blocks[0]).minreal()


def _drop_tiny(A: Poly, ref: float) -> Poly:
    c = np.where(np.abs(A.coef) <= 1e-10 * max(1.0, ref), 0.0, A.coef)
    return make_poly(c)


def realize_controller(f: InnerOuter, W: RationalFn, F: Interpolant, gamma: float) -> RealizedController:
    """FIR-block realization ``C = (H_T + F_T) / (H_R + F_R)``.

    Numerator side ``(W F^-1 Tbar / gamma - M T) q~``, denominator side
    ``M R q~``, both over ``q``, where ``m_n = q / q~`` and ``M`` is the
    Blaschke factor of Tbar's unstable zeros.
    """
    S_W = assemble_sensitivity(f, F, gamma)
    raw = raw_controller(f, W, S_W)
    if F.kind is InterpolantKind.OPTIMAL_IRRATIONAL:
        return RealizedController(gamma, F, raw)
    q, qt = f.m_n.numerator, f.m_n.denominator
    M = f.M_Tbar.as_rational()
    if len(f.M_Tbar):
        warnings.warn("Tbar has unstable zeros; folding its Blaschke factor into both sides",
                      stacklevel=2)
    Q = RationalFn(qt, make_poly([1.0]))
    G_R = f.R * (M * Q)
    G_T = f.Tbar * (W / (gamma * F.rational_form) * Q) - f.T * (M * Q)
    H_R, F_R = fir_split(G_R, q)
    H_T, F_T = fir_split(G_T, q)
    if f.R.delays == [0] and f.T.delays == [0]:
        # delay-free: the FIR numerators vanish up to rounding
        F_R = FirBlock(tuple((_drop_tiny(A, 1.0), h) for A, h in F_R.numerator_terms), F_R.denominator)
        F_T = FirBlock(tuple((_drop_tiny(A, 1.0), h) for A, h in F_T.numerator_terms), F_T.denominator)
    rc = RealizedController(gamma, F, raw, H_T, H_R, F_T, F_R)
    w = np.logspace(-4, 4, 2000)
    if np.min(np.abs(rc.denominator(1j * w))) < NEAR_CANCEL:
        warnings.warn("H_R + F_R nearly vanishes on the imaginary axis", NearCancellationWarning,
                      stacklevel=2)
    return rc


@dataclass(frozen=True)
class SynthesisResult:
    gamma: float
    gamma_star: float
    data: InterpolationData
    factors: InnerOuter
    W: RationalFn
    interpolant: Interpolant
    S_W: Callable
    C: RealizedController
    diagnostics: dict = field(default_factory=dict)


def weighted_sensitivity(sr: SynthesisResult, s):
    """``W (1 + P C)^-1`` through the controller actually realized."""
    s = np.asarray(s, dtype=complex)
    if not sr.C.realizable:
        C = sr.C(s)
        return sr.W(s) / (1 + sr.factors.plant(s) * C)
    f = sr.factors
    Nc, Dc = sr.C.numerator(s), sr.C.denominator(s)
    T, R = f.T(s), f.R(s)
    return sr.W(s) * T * Dc / (T * Dc + R * Nc)


def grid_hinf(fn: Callable, lo: float = 1e-4, hi: float = 1e4, n: int = 4000, peaks: int = 5):
    """Sup of ``|fn(jw)|`` on a log grid refined around the largest samples."""
    w = np.logspace(np.log10(lo), np.log10(hi), n)
    mag = np.abs(fn(1j * w))
    best, best_w = float(mag.max()), float(w[np.argmax(mag)])
    for k in np.argsort(mag)[::-1][:peaks]:
        a, b = w[max(k - 1, 0)], w[min(k + 1, n - 1)]
        res = minimize_scalar(lambda x: -float(np.abs(fn(np.array([1j * x])))[0]),
                              bounds=(a, b), method="bounded", options={"xatol": 1e-10 * b})
        if -res.fun > best:
            best, best_w = float(-res.fun), float(res.x)
    return best, best_w


@dataclass(frozen=True)
class VerifyReport:
    gamma: float
    hinf_grid: float
    hinf_at: float
    node_residual: float
    sensitivity_residual: float
    box: Optional[tuple] = None
    rhp_zeros_DC: Optional[int] = None
    rhp_zeros_NC: Optional[int] = None
    rhp_zeros_T: Optional[int] = None
    rhp_zeros_chi: Optional[int] = None
    nyquist_winding: Optional[int] = None
    notes: tuple = ()

    @property
    def controller_stable(self) -> Optional[bool]:
        return None if self.rhp_zeros_DC is None else self.rhp_zeros_DC == 0

    @property
    def closed_loop_stable(self) -> Optional[bool]:
        if self.nyquist_winding is None:
            return None
        return (self.rhp_zeros_chi == 0
                and self.nyquist_winding + self.rhp_zeros_T + self.rhp_zeros_DC == 0)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["box"] = list(self.box) if self.box else None
        d["notes"] = list(self.notes)
        d["controller_stable"] = self.controller_stable
        d["closed_loop_stable"] = self.closed_loop_stable
        return d


def stability_box(f: InnerOuter) -> ContourBox:
    """Box for stability indicators: covers R's unstable zeros; height a multiple of pi."""
    b = default_box(f.R)
    Y = np.pi * np.ceil(max(b.im_max, 10.0) / np.pi)
    return ContourBox(INSET, max(b.re_max, 4.0), -Y, Y)


def verify(sr: SynthesisResult, box: Optional[ContourBox] = None) -> VerifyReport:
    """Norm, interpolation and stability indicators for a design."""
    f, F = sr.factors, sr.interpolant
    hinf, at = grid_hinf(lambda s: weighted_sensitivity(sr, s))
    nodes = np.array(sr.data.nodes)
    node_res = float(np.max(F.residuals(sr.data)))
    sw_res = float(np.max(np.abs(sr.S_W(nodes) - sr.W(nodes))))
    if not sr.C.realizable:
        return VerifyReport(sr.gamma, hinf, at, node_res, sw_res,
                            notes=("irrational interpolant: stability indicators skipped",))
    notes = []
    box = box or stability_box(f)
    C = sr.C

    def one_plus_pc(s):
        return 1 + f.plant(s) * C(s)

    def chi(s):
        return f.T(s) * C.denominator(s) + f.R(s) * C.numerator(s)

    try:
        wind, box = _count(one_plus_pc, box)
    except ContourError as exc:
        notes.append(f"nyquist winding unavailable: {exc}")
        wind = None
    counts = {}
    for name, fn in (("DC", C.denominator), ("NC", C.numerator), ("T", f.T), ("chi", chi)):
        try:
            counts[name] = count_zeros(fn, box)
        except ContourError as exc:
            notes.append(f"zero count of {name} unavailable: {exc}")
            counts[name] = None
    if counts["T"] is None or counts["DC"] is None:
        wind = None  # the winding number is meaningless without the pole count
    return VerifyReport(sr.gamma, hinf, at, node_res, sw_res,
                        (box.re_min, box.re_max, box.im_min, box.im_max),
                        counts["DC"], counts["NC"], counts["T"], counts["chi"], wind, tuple(notes))


def synthesize(R: QuasiPoly, T: QuasiPoly, W: RationalFn, gamma: Optional[float] = None,
               order: int = 1, m_bound: int = 2, seed: int = 0,
               factors: Optional[InnerOuter] = None) -> SynthesisResult:
    """Full pipeline: factorize, interpolate, realize.

    ``gamma=None`` asks for the optimal (irrational) design; otherwise a
    rational unit of the given order is fitted at ``gamma``.
    """
    from .factorization import factorize
    from .np_design import InfeasibleError, build_data, find_gamma_star, fit_rational_unit, optimal_interpolant

    f = factors or factorize(R, T)
    data = build_data(f, W)
    g_star, branch, at_cap = find_gamma_star(data, m_bound)
    diag = {"branch": list(branch.m), "branch_at_cap": at_cap}
    if gamma is None:
        F = optimal_interpolant(data, branch, g_star)
    else:
        if gamma < g_star * (1 - 1e-9):
            raise InfeasibleError(f"gamma={gamma:g} is below the optimal cost {g_star:.6g}")
        F = fit_rational_unit(data, gamma, order, seed=seed)
    g = F.gamma
    rc = realize_controller(f, W, F, g)
    return SynthesisResult(g, g_star, data, f, W, F, assemble_sensitivity(f, F, g), rc, diag)
