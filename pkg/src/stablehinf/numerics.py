"""Complex polynomial utilities: roots, partial fractions and a PSD test.

Polynomials are :class:`numpy.polynomial.Polynomial` objects (ascending
coefficients).  Only the root finder is hand written; it uses the
Aberth-Ehrlich simultaneous iteration with randomized restarts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial import Polynomial

Poly = Polynomial
log = logging.getLogger(__name__)

TOL_ROOT = 1e-10
PSD_TOL = 1e-9
MERGE_TOL = 1e-8
REEXPAND_TOL = 1e-9


class RootFindingError(RuntimeError):
    """Raised when the root iteration does not converge.

    The best iterate is kept on ``best`` for diagnostics.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def make_poly(coeffs) -> Poly:
    """Build a trimmed polynomial from ascending coefficients.

    Coefficients with negligible imaginary parts are stored as reals.
    """
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    if c.size and np.all(np.abs(c.imag) <= 1e-14 * np.max(np.abs(c))):
        c = c.real.astype(float)
    return trim(Poly(c))


def trim(p: Poly, rtol: float = 1e-13) -> Poly:
    """Drop leading coefficients that are negligible relative to the largest."""
    c = np.asarray(p.coef)
    if c.size == 0:
        return Poly([0.0])
    scale = np.max(np.abs(c))
    if scale == 0:
        return Poly([0.0 * c[0]])
    n = c.size
    while n > 1 and abs(c[n - 1]) <= rtol * scale:
        n -= 1
    return Poly(c[:n])


def degree(p: Poly) -> int:
    c = trim(p).coef
    if c.size == 1 and c[0] == 0:
        return -1
    return c.size - 1


def from_roots(roots, lead=1.0) -> Poly:
    """Polynomial ``lead * prod(s - r)``; real-valued when roots are conjugate-closed."""
    roots = np.asarray(roots, dtype=complex)
    c = np.array([1.0 + 0j])
    for r in roots:
        c = np.convolve(c, [-r, 1.0])
    return make_poly(lead * c)


def mirror(p: Poly) -> Poly:
    """Return ``p(-s)``."""
    c = np.asarray(p.coef)
    signs = (-1.0) ** np.arange(c.size)
    return Poly(c * signs)


def _horner(c, z):
    """Evaluate polynomial and derivative with ascending coefficients ``c`` at ``z``."""
    p = np.zeros_like(z) + c[-1]
    dp = np.zeros_like(z)
    for a in c[-2::-1]:
        dp = dp * z + p
        p = p * z + a
    return p, dp


def poly_roots(p: Poly, tol: float = TOL_ROOT, max_iter: int = 500,
               restarts: int = 4, seed: int = 0) -> np.ndarray:
    """All roots of ``p`` (with multiplicity) by Aberth-Ehrlich iteration.

    Each returned root satisfies the backward-error test
    ``|p(r)| <= tol * max(max|c_k|, sum |c_k| |r|^k)``.  Exact zero roots
    are split off first so they come back exactly.
    """
    c = np.asarray(trim(p).coef, dtype=complex)
    n = c.size - 1
    if n < 1:
        raise ValueError("poly_roots needs a polynomial of degree >= 1")

    nzero = 0
    while c[nzero] == 0:
        nzero += 1
    c = c[nzero:]
    m = c.size - 1
    if m == 0:
        return np.zeros(nzero, dtype=complex)
    if m == 1:
        return np.concatenate([np.zeros(nzero, dtype=complex), [-c[0] / c[1]]])

    a = c / c[-1]
    absa = np.abs(a)
    radii = _newton_polygon_radii(absa)

    rng = np.random.default_rng(seed)
    best, best_err, best_key = None, np.inf, None
    for attempt in range(restarts + 1):
        phase = 2 * np.pi * np.arange(m) / m + 0.4 + 0.7 * attempt
        rad = radii * (1.0 + 0.1 * rng.standard_normal(m)) if attempt else radii
        z = rad * np.exp(1j * phase)
        done = np.zeros(m, dtype=bool)
        for _ in range(max_iter):
            pv, dpv = _horner(a, z)
            ratio = np.where(dpv != 0, pv / np.where(dpv != 0, dpv, 1), 0)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            corr = ratio / (1.0 - ratio * inv.sum(axis=1))
            corr[done] = 0.0
            z = z - corr
            err = np.abs(pv)
            bound = 4 * np.finfo(float).eps * _horner(absa, np.abs(z))[0]
            done |= (err <= bound) | (np.abs(corr) <= 4 * np.finfo(float).eps * np.abs(z))
            if done.all():
                break
        z = _collapse_clusters(c, _polish(c, z), tol)
        resid = float(np.max(_backward_error(c, z)))
        # per-root residuals cannot see a root counted at the wrong cluster,
        # so the re-expanded polynomial is checked as well
        mismatch = float(np.max(np.abs(from_roots(z, lead=c[-1]).coef - c)) / np.max(np.abs(c)))
        if resid <= tol and mismatch <= REEXPAND_TOL:
            return np.concatenate([np.zeros(nzero, dtype=complex), z])
        key = (resid > tol, mismatch)
        if best is None or key < best_key:
            best, best_key, best_err = z, key, resid
    if best_err <= tol:
        log.info("poly_roots: re-expansion mismatch %.3g after restarts", best_key[1])
        return np.concatenate([np.zeros(nzero, dtype=complex), best])
    raise RootFindingError(
        f"Aberth iteration did not converge (backward error {best_err:.3g})",
        best=best)


def _newton_polygon_radii(absa):
    """Starting radii from the upper convex hull of ``(k, log|a_k|)``.

    Each hull edge from k to l contributes l - k points on the circle of
    radius ``(|a_k| / |a_l|) ** (1 / (l - k))``, so root moduli spread over
    many orders of magnitude get sensible starts.
    """
    m = absa.size - 1
    with np.errstate(divide="ignore"):
        y = np.log(absa)
    hull = []
    for k in range(m + 1):
        if not np.isfinite(y[k]):
            continue
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            if (y[j] - y[i]) * (k - i) <= (y[k] - y[i]) * (j - i):
                hull.pop()
            else:
                break
        hull.append(k)
    radii = []
    for i, j in zip(hull, hull[1:]):
        radii.extend([np.exp((y[i] - y[j]) / (j - i))] * (j - i))
    return np.asarray(radii, dtype=float)


def _polish(c, z, steps=3):
    for _ in range(steps):
        pv, dpv = _horner(c, z)
        ok = dpv != 0
        step = np.zeros_like(z)
        step[ok] = pv[ok] / dpv[ok]
        z_new = z - step
        better = np.abs(_horner(c, z_new)[0]) < np.abs(pv)
        z = np.where(better, z_new, z)
    return z


def _collapse_clusters(c, z, tol, radius=1e-1):
    """Replace numerically split multiple roots by a single repeated value.

    An m-fold root comes back from the iteration as m points scattered at
    distance ~eps**(1/m).  It is a simple root of the (m-1)-th derivative,
    so Newton on that derivative from the centroid recovers it to working
    precision.  A cluster is collapsed only if the candidate passes the
    backward-error test for p and its first m-1 derivatives; rejected
    clusters are retried at a tenth of the linkage radius.
    """
    z = np.array(z, dtype=complex)

    def is_multiple(r, m):
        return all(_backward_error(np.polynomial.polynomial.polyder(c, j), np.array([r]))[0] <= tol
                   for j in range(m))

    def visit(idx, rad):
        if len(idx) < 2 or rad < 1e-6:
            return
        r = _refine_multiple(Poly(c), complex(np.mean(z[idx])), len(idx))
        if is_multiple(r, len(idx)):
            z[idx] = r
            return
        for sub in _single_linkage(idx, rad / 10, key=lambda i: z[i], floor=0.0):
            visit(sub, rad / 10)

    for group in _single_linkage(list(range(z.size)), radius, key=lambda i: z[i], floor=0.0):
        visit(group, radius)
    return z


def _backward_error(c, z):
    absc = np.abs(c)
    scale = np.maximum(absc.max(), _horner(absc.astype(complex), np.abs(z).astype(complex))[0].real)
    return np.abs(_horner(c, z)[0]) / scale


def _single_linkage(roots, radius, key=None, floor=1.0):
    key = key or (lambda r: r)
    n = len(roots)
    label = list(range(n))

    def find(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            a, b = key(roots[i]), key(roots[j])
            if abs(a - b) <= radius * max(floor, abs(a), abs(b)):
                label[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(roots[i])
    return list(groups.values())


def cluster_roots(roots, tol: float = MERGE_TOL):
    """Group roots that are numerically one multiple root.

    Roots closer than ``tol`` (relative) are always merged.  Wider clusters
    (up to 1e-3 relative) are merged only if collapsing them onto their mean
    changes the monic polynomial by at most ``tol`` relative, which is how
    an m-fold root shows up after floating point splitting.
    Returns a list of (location, multiplicity).
    """
    roots = [complex(r) for r in np.asarray(roots, dtype=complex)]
    if not roots:
        return []
    ref = from_roots(roots).coef
    ref_scale = np.max(np.abs(ref))

    def collapse_ok(members):
        c = np.mean(members)
        others = list(roots)
        for m in members:
            others.remove(m)
        trial = from_roots(others + [c] * len(members)).coef
        return np.max(np.abs(trial - ref)) <= tol * ref_scale

    out = []

    def split(members, radius):
        if len(members) == 1:
            out.append((members[0], 1))
            return
        if radius <= tol or collapse_ok(members):
            out.append((complex(np.mean(members)), len(members)))
            return
        for group in _single_linkage(members, radius / 10):
            split(group, radius / 10)

    for group in _single_linkage(roots, 1e-3):
        split(group, 1e-3)
    return out


def is_psd(M, tol: float = PSD_TOL, scale: float | None = None) -> bool:
    """True iff the smallest eigenvalue of Hermitian ``M`` is >= -tol * scale.

    ``scale`` defaults to ``max|M_ik|``; pass the size of the ingredients
    when M itself may be tiny through cancellation.
    """
    M = np.asarray(M, dtype=complex)
    if scale is None:
        scale = np.max(np.abs(M)) if M.size else 0.0
    if scale == 0:
        return True
    return bool(np.linalg.eigvalsh(M).min() >= -tol * scale)


@dataclass(frozen=True)
class PartialFractions:
    """``num/den = poly_part + sum residue / (s - pole)**order``."""

    poly_part: Poly
    terms: tuple  # of (pole, order, residue)

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        out = self.poly_part(s).astype(complex)
        for pole, order, res in self.terms:
            out = out + res / (s - pole) ** order
        return out


def _taylor_shift(p: Poly, x0) -> np.ndarray:
    """Ascending coefficients of ``p`` expanded in powers of ``(s - x0)``."""
    c = np.asarray(p.coef, dtype=complex)
    n = c.size
    out = np.zeros(n, dtype=complex)
    for k in range(n):
        out[k] = Poly(c).deriv(k)(x0) / factorial(k) if k else Poly(c)(x0)
    return out


def _refine_multiple(p: Poly, z, m, steps=8):
    """Newton on the (m-1)-th derivative, where an m-fold root is simple."""
    if m == 1:
        return z
    d = p.deriv(m - 1)
    dd = d.deriv()
    for _ in range(steps):
        slope = dd(z)
        if slope == 0:
            break
        z_new = z - d(z) / slope
        if abs(z_new - z) <= 1e-16 * max(1.0, abs(z)):
            z = z_new
            break
        z = z_new
    return complex(z)


def _series_divide(a, b, n):
    """First ``n`` coefficients of the power series a/b (b[0] != 0)."""
    a = np.concatenate([a, np.zeros(max(0, n - len(a)), dtype=complex)])
    b = np.concatenate([b, np.zeros(max(0, n - len(b)), dtype=complex)])
    out = np.zeros(n, dtype=complex)
    for k in range(n):
        out[k] = (a[k] - np.dot(out[:k], b[k:0:-1])) / b[0]
    return out


def partial_fractions(num: Poly, den: Poly, merge_tol: float = MERGE_TOL) -> PartialFractions:
    """Partial fraction expansion of ``num/den``.

    Poles closer than ``merge_tol`` (relative) are merged and reported with
    order > 1; a pole of multiplicity m contributes terms of orders 1..m.
    """
    den = trim(den)
    if degree(den) < 0:
        raise ZeroDivisionError("partial_fractions: denominator is identically zero")
    num = trim(num)
    quo, rem = divmod(num, den)
    quo = make_poly(quo.coef)
    if degree(den) == 0:
        return PartialFractions(make_poly(num.coef / den.coef[0]), ())
    lead = den.coef[-1]
    groups = [(_refine_multiple(den, p, m), m) for p, m in cluster_roots(poly_roots(den), merge_tol)]
    terms = []
    for i, (p, m) in enumerate(groups):
        others = from_roots([q for j, (q, mq) in enumerate(groups) if j != i for _ in range(mq)],
                            lead=lead)
        g = _series_divide(_taylor_shift(rem, p), _taylor_shift(others, p), m)
        for k in range(1, m + 1):
            terms.append((p, k, complex(g[m - k])))
    return PartialFractions(quo, tuple(terms))
