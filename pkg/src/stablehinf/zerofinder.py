"""Right-half-plane zeros of delay systems via the argument principle.

Zeros are counted by tracking the phase of the function around a
rectangle (adaptively refined so that no step turns by more than pi/2),
cross-checked against a trapezoidal estimate of the logarithmic derivative
integral, and located by recursive bisection of the box followed by Newton
iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .numerics import degree
from .quasipoly import QuasiPoly

log = logging.getLogger(__name__)

INSET = -1e-6
FALSE_CAPTURE = -1e-9
NEAR_ZERO = 1e-8
MAX_POINTS = 4_000_000


class ContourError(RuntimeError):
    pass


class NearContourError(ContourError):
    """The function is (numerically) zero somewhere on the contour."""


@dataclass(frozen=True)
class ContourBox:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    grid_density: float = 64.0

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise ValueError(f"empty contour box {self}")
        if self.re_min < -1e-3:
            raise ValueError("re_min must stay at the imaginary axis (small inset only)")

    @property
    def corners(self):
        a, b, c, d = self.re_min, self.re_max, self.im_min, self.im_max
        return [complex(a, c), complex(b, c), complex(b, d), complex(a, d)]

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.re_max - self.re_min, self.im_max - self.im_min))

    def contains(self, z, pad: float = 0.0) -> bool:
        return (self.re_min - pad <= z.real <= self.re_max + pad
                and self.im_min - pad <= z.imag <= self.im_max + pad)

    def split(self, frac: float = 0.5):
        w, h = self.re_max - self.re_min, self.im_max - self.im_min
        if w >= h:
            x = self.re_min + frac * w
            return replace(self, re_max=x), replace(self, re_min=x)
        y = self.im_min + frac * h
        return replace(self, im_max=y), replace(self, im_min=y)

    def expanded(self, delta: float) -> "ContourBox":
        """Grow the right, top and bottom edges; the axis edge stays put."""
        return replace(self, re_max=self.re_max + delta, im_min=self.im_min - delta,
                       im_max=self.im_max + delta)


@dataclass(frozen=True)
class ZeroSet:
    zeros: tuple
    count_certificate: tuple  # of (ContourBox, winding number)

    def __len__(self):
        return len(self.zeros)

    def __iter__(self):
        return iter(self.zeros)


@dataclass
class _Trace:
    s: np.ndarray
    v: np.ndarray
    winding: int
    residual: float


def _as_functions(f, derivative):
    if isinstance(f, QuasiPoly):
        return f, f.derivative, f.envelope
    if derivative is None:
        def derivative(s, f=f):
            s = np.asarray(s, dtype=complex)
            h = 1e-6 * np.maximum(1.0, np.abs(s))
            return (f(s + h) - f(s - h)) / (2 * h)
    return f, derivative, None


def _check_modulus(s, v, scale):
    mod = np.abs(v)
    if not np.all(np.isfinite(v)):
        raise NearContourError("non-finite function value on the contour")
    ref = scale(s) if scale is not None else np.full(s.shape, np.median(mod))
    rel = mod / np.maximum(ref, 1e-300)
    if np.any(rel <= NEAR_ZERO):
        k = int(np.argmin(rel))
        raise NearContourError(f"function nearly vanishes on the contour near {s[k]:.6g}")


def _trace(f, box: ContourBox, derivative=None, scale=None) -> _Trace:
    pts = []
    corners = box.corners + [box.corners[0]]
    for a, b in zip(corners, corners[1:]):
        n = max(8, int(np.ceil(abs(b - a) * box.grid_density)))
        pts.append(a + (b - a) * np.arange(n) / n)
    s = np.concatenate(pts + [np.array([corners[0]])])
    v = np.asarray(f(s), dtype=complex)
    _check_modulus(s, v, scale)

    for _ in range(60):
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.log(v[1:] / v[:-1])
        bad = (np.abs(step.imag) > np.pi / 2) | (np.abs(step) > 0.5)
        if not bad.any():
            break
        if s.size + bad.sum() > MAX_POINTS:
            raise ContourError("contour refinement exceeded the point budget")
        idx = np.nonzero(bad)[0]
        if np.min(np.abs(s[idx + 1] - s[idx])) < 1e-13 * max(1.0, box.diameter):
            raise NearContourError("phase jump unresolved at machine resolution")
        mid = 0.5 * (s[idx] + s[idx + 1])
        vm = np.asarray(f(mid), dtype=complex)
        _check_modulus(mid, vm, scale)
        s = np.insert(s, idx + 1, mid)
        v = np.insert(v, idx + 1, vm)
    else:
        raise ContourError("contour refinement did not settle")

    total = np.sum(np.angle(v[1:] / v[:-1])) / (2 * np.pi)
    winding = int(round(total))
    residual = abs(total - winding)
    if derivative is not None:
        g = np.asarray(derivative(s), dtype=complex) / v
        integral = np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(s)) / (2j * np.pi)
        residual = max(residual, abs(integral - winding))
    return _Trace(s, v, winding, residual)


def winding_number(f: Callable, box: ContourBox, derivative: Optional[Callable] = None,
                   scale: Optional[Callable] = None) -> int:
    """Net number of zeros minus poles of ``f`` inside ``box``."""
    tr = _trace(f, box, derivative, scale)
    if tr.residual >= 0.25:
        tr = _trace(f, replace(box, grid_density=4 * box.grid_density), derivative, scale)
        if tr.residual >= 0.25:
            raise ContourError(f"winding number residual {tr.residual:.3f} too large")
    return tr.winding


def _count(f, box, derivative=None, perturb=True):
    f, df, sc = _as_functions(f, derivative)
    try:
        return winding_number(f, box, df, sc), box
    except NearContourError:
        if not perturb:
            raise
        delta = 0.618e-3 * max(1.0, box.diameter / 10)
        log.info("zero near contour of %s; expanding by %.3g", box, delta)
        box = box.expanded(delta)
        return winding_number(f, box, df, sc), box


def count_zeros(q, box: ContourBox, derivative: Optional[Callable] = None) -> int:
    """Number of zeros of ``q`` in ``box`` (argument principle)."""
    return _count(q, box, derivative)[0]


def _moment_estimate(f, df, box):
    tr = _trace(f, box, df)
    g = np.asarray(df(tr.s), dtype=complex) / tr.v
    w = 0.5 * (g[1:] + g[:-1]) * np.diff(tr.s)
    smid = 0.5 * (tr.s[1:] + tr.s[:-1])
    return complex(np.sum(w * smid) / np.sum(w))


def _newton(f, df, z, tol_scale, mult=1, iters=60):
    for _ in range(iters):
        fz, dfz = complex(f(np.array([z]))[0]), complex(df(np.array([z]))[0])
        if dfz == 0:
            return z, False
        step = mult * fz / dfz
        z = z - step
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            break
    fz = abs(complex(f(np.array([z]))[0]))
    return z, fz <= 1e-9 * tol_scale(z)


def locate_zeros(q, box: ContourBox, derivative: Optional[Callable] = None,
                 conjugate_pairs: Optional[bool] = None) -> ZeroSet:
    """All zeros of ``q`` inside ``box``.

    Sub-boxes holding one zero are polished by Newton from the contour
    moment estimate; Newton failure falls back to further bisection.
    """
    f, df, sc = _as_functions(q, derivative)
    if sc is None:
        def sc(s, f=f):
            return np.maximum(1.0, np.abs(f(np.asarray(s))))
    tol_scale = lambda z: float(np.max(sc(np.array([z]))))  # noqa: E731

    n, box = _count(q, box, derivative)
    certs = [(box, n)]
    found = []

    def recurse(b, n, depth):
        if n == 0:
            return
        if depth > 80:
            raise ContourError(f"zero location did not resolve in {b}")
        if n == 1:
            try:
                z0 = _moment_estimate(f, df, b)
            except ContourError:
                z0 = complex(0.5 * (b.re_min + b.re_max), 0.5 * (b.im_min + b.im_max))
            if not b.contains(z0):
                z0 = complex(0.5 * (b.re_min + b.re_max), 0.5 * (b.im_min + b.im_max))
            z, ok = _newton(f, df, z0, tol_scale)
            if ok and b.contains(z, pad=1e-9 + 1e-3 * b.diameter):
                found.append(z)
                return
            if b.diameter < 1e-12:
                found.append(z0)
                return
        elif b.diameter < 1e-6:
            z0 = complex(0.5 * (b.re_min + b.re_max), 0.5 * (b.im_min + b.im_max))
            z, _ = _newton(f, df, z0, tol_scale, mult=n)
            found.extend([z] * n)
            return
        for frac in (0.5, 0.4637, 0.5371, 0.4129, 0.5813):
            lo, hi = b.split(frac)
            try:
                n_lo = winding_number(f, lo, df, sc)
                n_hi = winding_number(f, hi, df, sc)
            except NearContourError:
                continue
            if n_lo + n_hi == n:
                certs.extend([(lo, n_lo), (hi, n_hi)])
                recurse(lo, n_lo, depth + 1)
                recurse(hi, n_hi, depth + 1)
                return
        raise ContourError(f"could not split {b} cleanly")

    recurse(box, n, 0)
    zeros = [z for z in found if z.real >= FALSE_CAPTURE]
    if conjugate_pairs is None:
        conjugate_pairs = isinstance(q, QuasiPoly) and all(t.block.is_real for t in q.terms)
    if conjugate_pairs:
        zeros = _symmetrize(zeros)
    zeros.sort(key=lambda z: (round(z.real, 9), -z.imag))
    return ZeroSet(tuple(zeros), tuple(certs))


def _symmetrize(zeros):
    """Snap near-real zeros to the real axis and average conjugate partners."""
    out, pool = [], list(zeros)
    while pool:
        z = pool.pop(0)
        if abs(z.imag) <= 1e-10 * max(1.0, abs(z)):
            out.append(complex(z.real, 0.0))
            continue
        j = min(range(len(pool)), key=lambda k: abs(pool[k] - z.conjugate()), default=None)
        if j is not None and abs(pool[j] - z.conjugate()) <= 1e-6 * max(1.0, abs(z)):
            w = pool.pop(j)
            m = 0.5 * (z + w.conjugate())
            out.extend([m, m.conjugate()])
        else:
            out.append(z)
    return out


def envelope_radius(q: QuasiPoly) -> float:
    """Cauchy-type modulus bound from the delay-free polynomial envelope.

    Clearing denominators gives ``sum P_i(s) exp(-h_i s)``; in the closed
    right half plane ``|exp(-h s)| <= 1``, so zeros satisfy
    ``|P_1(s)| <= sum_{i>1} |P_i(s)|``.
    """
    den = None
    for t in q.terms:
        den = t.block.den if den is None else den * t.block.den
    polys = []
    for t in q.terms:
        others = den // t.block.den
        polys.append(t.block.num * others)
    lead_poly = polys[0]
    d = degree(lead_poly)
    if d < 0:
        return 1.0
    lead = abs(lead_poly.coef[d])
    others = list(np.abs(lead_poly.coef[:d]))
    for p in polys[1:]:
        others.extend(np.abs(p.coef))
    return 1.0 + float(np.sum(others)) / lead


def default_box(q: QuasiPoly, max_doublings: int = 6) -> ContourBox:
    """Search box whose zero count is stable under one doubling."""
    rho = max(1.0, envelope_radius(q))
    box = ContourBox(INSET, rho, -rho, rho)
    n = count_zeros(q, box)
    for _ in range(max_doublings):
        rho *= 2
        bigger = ContourBox(INSET, rho, -rho, rho)
        m = count_zeros(q, bigger)
        if m == n:
            return bigger
        box, n = bigger, m
    raise ContourError("zero count keeps growing with the box: possibly not an F-system")
