"""Nevanlinna-Pick interpolation by a unit.

The weighted sensitivity problem reduces to finding ``F`` with ``F`` and
``1/F`` in H-infinity, ``|F| <= 1`` on the axis, and ``F(s_i) = omega_i/gamma``
at the unstable plant zeros.  Writing ``F = exp(-G)`` turns this into a
Caratheodory problem for ``G`` (``Re G >= 0``), whose solvability is decided
by the Pick matrix, and whose central solution comes from the Schur
recursion on the unit disc.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .factorization import InnerOuter
from .numerics import degree, is_psd, make_poly, poly_roots
from .rational import RationalFn, hinf_norm

log = logging.getLogger(__name__)

GAMMA_RTOL = 1e-6
GAMMA_CAP = 1e6
OPT_EPS = 1e-6
NODE_SEP = 1e-6
DEGENERATE = 1e-7
FIT_RESIDUAL = 1e-6
GOOD_SLACK = 0.02


class InterpolationError(RuntimeError):
    pass


class InfeasibleError(InterpolationError):
    """No interpolant exists (or none was found) at the requested gamma."""


def conformal_map(s):
    """``phi(s) = (s - 1)/(s + 1)``: closed right half plane onto the closed disc."""
    s = np.asarray(s, dtype=complex)
    if np.any(s == -1):
        raise ZeroDivisionError("conformal_map has a pole at s = -1")
    return (s - 1) / (s + 1)


def conformal_inverse(z):
    z = np.asarray(z, dtype=complex)
    if np.any(z == 1):
        raise ZeroDivisionError("conformal_inverse has a pole at z = 1")
    return (1 + z) / (1 - z)


@dataclass(frozen=True)
class InterpolationData:
    nodes: tuple
    omega: tuple

    def __post_init__(self):
        if len(self.nodes) != len(self.omega):
            raise ValueError("nodes and omega must have the same length")
        for i, a in enumerate(self.nodes):
            if a.real <= 0:
                raise ValueError(f"node {a} is not in the open right half plane")
            for b in self.nodes[i + 1:]:
                if abs(a - b) <= NODE_SEP:
                    raise ValueError("interpolation nodes must be distinct")
        for s, w in zip(self.nodes, self.omega):
            if w == 0:
                raise ValueError(f"omega vanishes at node {s}")
            if abs(s.imag) > NODE_SEP:
                k = self._partner(s)
                if k is None:
                    raise ValueError(f"node {s} has no conjugate partner")
                if abs(self.omega[k] - np.conj(w)) > 1e-8 * max(1.0, abs(w)):
                    raise ValueError("omega values of conjugate nodes are not conjugate")

    def _partner(self, s):
        for k, t in enumerate(self.nodes):
            if abs(t - np.conj(s)) <= NODE_SEP and t is not s:
                return k
        return None

    @property
    def disc_nodes(self) -> np.ndarray:
        return conformal_map(np.array(self.nodes))

    def __len__(self):
        return len(self.nodes)

    def pairing(self):
        """Index groups: ``(i, k)`` for conjugate pairs (Im s_i > 0) and ``(i,)`` for real nodes."""
        groups, seen = [], set()
        for i, s in enumerate(self.nodes):
            if i in seen:
                continue
            if abs(s.imag) <= NODE_SEP:
                groups.append((i,))
                seen.add(i)
                continue
            k = self._partner(s)
            pair = (i, k) if s.imag > 0 else (k, i)
            groups.append(pair)
            seen.update(pair)
        return groups


@dataclass(frozen=True)
class BranchAssignment:
    m: tuple

    def check(self, data: InterpolationData):
        if len(self.m) != len(data):
            raise ValueError("one branch integer per node is required")
        for g in data.pairing():
            if len(g) == 2 and self.m[g[0]] != -self.m[g[1]]:
                raise ValueError("conjugate nodes need negated branch integers")


@dataclass(frozen=True)
class PickProblem:
    data: InterpolationData
    branch: BranchAssignment
    gamma: float


class InterpolantKind(Enum):
    OPTIMAL_IRRATIONAL = "OptimalIrrational"
    RATIONAL_UNIT = "RationalUnit"


@dataclass(frozen=True)
class Interpolant:
    kind: InterpolantKind
    eval: Callable
    gamma: float
    rational_form: Optional[RationalFn] = None
    branch: Optional[BranchAssignment] = None

    def __call__(self, s):
        return self.eval(np.asarray(s, dtype=complex))

    def residuals(self, data: InterpolationData) -> np.ndarray:
        s = np.array(data.nodes)
        return np.abs(self(s) - np.array(data.omega) / self.gamma)


def build_data(f: InnerOuter, W: RationalFn) -> InterpolationData:
    """Nodes are the zeros of ``m_n``; values ``omega_i = W(s_i) / m_d(s_i)``."""
    nodes = tuple(complex(z) for z in f.m_n.zeros)
    if not nodes:
        raise InterpolationError("the plant has no unstable zeros: nothing to interpolate")
    s = np.array(nodes)
    md = f.md(s)
    if np.any(np.abs(md) < 1e-12):
        raise InterpolationError("m_d vanishes at an interpolation node (not coprime)")
    om = W(s) / md
    # enforce exact conjugate symmetry of the values
    data = InterpolationData(nodes, tuple(complex(w) for w in om))
    om = list(data.omega)
    for g in data.pairing():
        if len(g) == 2:
            i, k = g
            om[k] = np.conj(om[i])
    return InterpolationData(nodes, tuple(om))


def nu_values(data: InterpolationData, branch: BranchAssignment, gamma: float) -> np.ndarray:
    """``nu_i = -ln omega_i + ln gamma - j 2 pi m_i`` (principal logarithm)."""
    om = np.array(data.omega)
    return -np.log(om) + np.log(gamma) - 2j * np.pi * np.array(branch.m, dtype=float)


def pick_matrix(p: PickProblem) -> np.ndarray:
    z = p.data.disc_nodes
    nu = nu_values(p.data, p.branch, p.gamma)
    M = (nu[:, None] + np.conj(nu)[None, :]) / (1 - z[:, None] * np.conj(z)[None, :])
    return 0.5 * (M + M.conj().T)


def is_feasible(data, branch, gamma) -> bool:
    om = np.abs(np.array(data.omega))
    if np.any(om >= gamma * (1 + 1e-9)):
        return False
    # tolerance relative to the entries before cancellation
    z = data.disc_nodes
    part = np.abs(np.log(np.array(data.omega))) + abs(np.log(gamma)) \
        + 2 * np.pi * np.abs(np.array(branch.m, dtype=float))
    ref = np.max((part[:, None] + part[None, :]) / np.abs(1 - z[:, None] * np.conj(z)[None, :]))
    return is_psd(pick_matrix(PickProblem(data, branch, gamma)), scale=ref)


def branch_assignments(data: InterpolationData, m_bound: int):
    """Conjugate-consistent branch sets, smallest ``sum |m|`` first.

    Real nodes keep ``m = 0``: a real-coefficient F needs a real ``nu`` there.
    """
    groups = data.pairing()
    ranges = [range(-m_bound, m_bound + 1) if len(g) == 2 else (0,) for g in groups]
    choices = sorted(itertools.product(*ranges), key=lambda c: (sum(map(abs, c)), c))
    for choice in choices:
        m = [0] * len(data)
        for g, c in zip(groups, choice):
            m[g[0]] = c
            if len(g) == 2:
                m[g[1]] = -c
        yield BranchAssignment(tuple(m))


def _bisect_gamma(data, branch, rtol=GAMMA_RTOL, cap=GAMMA_CAP):
    lo = float(np.max(np.abs(data.omega)))
    if is_feasible(data, branch, lo):
        return lo
    hi = 2 * lo
    while not is_feasible(data, branch, hi):
        lo, hi = hi, 2 * hi
        if hi > cap:
            return np.inf
    while hi - lo > rtol * hi:
        mid = np.sqrt(lo * hi)
        if is_feasible(data, branch, mid):
            hi = mid
        else:
            lo = mid
    return hi


def find_gamma_star(data: InterpolationData, m_bound: int = 2):
    """Smallest gamma with a PSD Pick matrix over branch sets with ``|m_i| <= m_bound``.

    Returns ``(gamma_s, branch, at_cap)``; ``at_cap`` flags an optimum that
    uses a branch integer equal to the bound.
    """
    if m_bound < 0:
        raise ValueError("m_bound must be nonnegative")
    best, best_branch = np.inf, None
    for br in branch_assignments(data, m_bound):
        g = _bisect_gamma(data, br)
        if g < best:
            best, best_branch = g, br
    if not np.isfinite(best):
        raise InfeasibleError(f"no feasible gamma below {GAMMA_CAP:g}")
    at_cap = any(abs(m) == m_bound for m in best_branch.m) and m_bound > 0
    if at_cap:
        log.warning("optimal branch set uses the bound m=%d; consider a larger --m-bound", m_bound)
    return best, best_branch, at_cap


def _blaschke_factor(a, z):
    return (z - a) / (1 - np.conj(a) * z)


def schur_interpolant(z_nodes, zeta, snap: float = DEGENERATE):
    """Central solution of the disc Nevanlinna-Pick problem ``f(z_i) = zeta_i``.

    Returns a vectorized closure.  When an intermediate value comes within
    ``snap`` of the unit circle the remaining problem is degenerate and its
    (unique) solution is the unimodular constant, which ends the recursion.
    """
    z_nodes = list(np.asarray(z_nodes, dtype=complex))
    vals = list(np.asarray(zeta, dtype=complex))
    steps = []
    while z_nodes:
        a, w = z_nodes.pop(0), vals.pop(0)
        if abs(w) > 1 + DEGENERATE:
            raise InfeasibleError("infeasible at this gamma (Schur parameter outside the disc)")
        if abs(w) >= 1 - snap:
            rest = np.array(vals)
            if rest.size and np.max(np.abs(rest - w)) > 1e-3:
                raise InfeasibleError("degenerate Schur step with inconsistent remaining data")
            steps.append((a, w / abs(w), True))
            break
        steps.append((a, w, False))
        vals = [((v - w) / (1 - np.conj(w) * v)) / _blaschke_factor(a, zk)
                for zk, v in zip(z_nodes, vals)]

    def f(z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for a, w, terminal in reversed(steps):
            if terminal:
                out = np.full_like(z, w)
                continue
            bf = _blaschke_factor(a, z) * out
            out = (w + bf) / (1 + np.conj(w) * bf)
        return out

    return f


def optimal_interpolant(data: InterpolationData, branch: BranchAssignment,
                        gamma_s: float, eps: float = OPT_EPS) -> Interpolant:
    """``F = exp(-phi^{-1}(g(phi(s))))`` from the central Schur solution at ``gamma_s (1 + eps)``.

    Near the optimum the last Schur parameter sits within O(eps) of the unit
    circle.  It is snapped onto the circle (tolerance ``10 eps``) so that the
    result is the limiting all-pass solution rather than a perturbation of
    it whose modulus collapses at high frequency.
    """
    gamma = gamma_s * (1 + eps)
    if not is_feasible(data, branch, gamma):
        raise InfeasibleError(f"Pick matrix not PSD at gamma={gamma:.8g}")
    nu = nu_values(data, branch, gamma)
    zeta = conformal_map(nu)
    g = schur_interpolant(data.disc_nodes, zeta, snap=10 * eps)

    def G(s):
        return conformal_inverse(g(conformal_map(s)))

    def F(s):
        # the recursion visits nodes in order, which breaks conjugate symmetry
        # at the 1e-5 level near the optimum; averaging G with its reflection
        # restores it, keeps Re G >= 0 and leaves the node values unchanged
        s = np.asarray(s, dtype=complex)
        return np.exp(-0.5 * (G(s) + np.conj(G(np.conj(s)))))

    return Interpolant(InterpolantKind.OPTIMAL_IRRATIONAL, F, gamma, None, branch)


@dataclass(frozen=True)
class UnitCheck:
    residual: float
    den_margin: float
    num_margin: float
    norm: float

    def passed(self, residual_tol: float = FIT_RESIDUAL) -> bool:
        return (self.residual < residual_tol and self.den_margin < 0
                and self.num_margin < 0 and self.norm <= 1 + 1e-12)


def _max_real_root(p) -> float:
    d = degree(p)
    if d < 0:
        return np.inf
    if d == 0:
        return -np.inf
    return float(np.max(poly_roots(p).real))


def check_unit(F: RationalFn, data: InterpolationData, gamma: float) -> UnitCheck:
    """Independent re-check of every unit constraint for a rational ``F``."""
    s = np.array(data.nodes)
    res = float(np.max(np.abs(F(s) - np.array(data.omega) / gamma)))
    biproper = degree(F.num) == degree(F.den)
    return UnitCheck(res, _max_real_root(F.den),
                     _max_real_root(F.num) if biproper else np.inf,
                     hinf_norm(F) if F.is_proper() and F.is_stable() else np.inf)


def _linear_system(data: InterpolationData, gamma: float, order: int):
    """Real linear equations for ``x = (a_0..a_K, c_0..c_{K-1})``.

    ``a(s_i) - (omega_i/gamma) c(s_i) = (omega_i/gamma) s_i^K`` with monic c.
    """
    rows, rhs = [], []
    K = order
    for g in data.pairing():
        i = g[0]
        s, y = data.nodes[i], data.omega[i] / gamma
        row = np.concatenate([s ** np.arange(K + 1), -y * s ** np.arange(K)])
        b = y * s ** K
        rows.append(row.real)
        rhs.append(b.real)
        if len(g) == 2:
            rows.append(row.imag)
            rhs.append(b.imag)
    return np.array(rows), np.array(rhs)


def _to_rational(x, order):
    a = x[:order + 1]
    c = np.concatenate([x[order + 1:], [1.0]])
    return RationalFn(make_poly(a), make_poly(c))


_SEARCH_GRID = 1j * np.concatenate([[0.0], np.logspace(-3, 3, 400)])


def _slack(F: RationalFn) -> float:
    """Smallest normalized constraint slack; positive iff F is (roughly) an admissible unit.

    A cheap surrogate for the search loop: LAPACK roots and a fixed
    frequency grid.  Root margins use ``-Re r / (1 + |r|)`` so that roots
    running off to infinity earn no extra credit, and ``min |F(jw)|`` keeps
    F biproper.  The final verdict always comes from :func:`check_unit`.
    """
    a, c = np.real(F.num.coef[::-1]), np.real(F.den.coef[::-1])
    if len(a) != len(c) or abs(a[0]) < 1e-12:
        return -1e3
    m = 1.0
    for p in (c, a):
        if len(p) > 1:
            r = np.roots(p)
            m = min(m, float(np.min(-r.real / (1 + np.abs(r)))))
    if m <= 0:
        return m - 1.0
    mag = np.abs(np.polyval(a, _SEARCH_GRID) / np.polyval(c, _SEARCH_GRID))
    mag = np.append(mag, abs(a[0]))
    return min(m, 1.0 - mag.max(), mag.min())


def fit_rational_unit(data: InterpolationData, gamma: float, order: int,
                      seed: int = 0, restarts: int = 32) -> Interpolant:
    """Search real ``F = a(s)/c(s)`` of degree ``order`` that is a unit and interpolates.

    The interpolation equations are linear in the coefficients, so the
    search runs over the affine solution set (particular solution plus null
    space), maximizing the smallest constraint slack with multi-start
    Nelder-Mead.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    A, b = _linear_system(data, gamma, order)
    x0, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.max(np.abs(A @ x0 - b)) > FIT_RESIDUAL:
        raise InfeasibleError(
            f"order {order} cannot interpolate {len(data)} nodes; try a larger --order")
    _, sv, vt = np.linalg.svd(A)
    rank = int(np.sum(sv > 1e-12 * max(1.0, sv.max())))
    null = vt[rank:].T
    n = null.shape[1]

    def objective(t):
        return -_slack(_to_rational(x0 + null @ t, order))

    rng = np.random.default_rng(seed)
    best_t, best_v = np.zeros(n), objective(np.zeros(n))
    if n:
        scale = max(1.0, float(np.max(np.abs(x0))))
        for _ in range(restarts):
            t0 = rng.standard_normal(n) * scale
            res = minimize(objective, t0, method="Nelder-Mead",
                           options={"xatol": 1e-9, "fatol": 1e-10, "maxiter": 400 * n})
            if res.fun < best_v:
                best_t, best_v = res.x, float(res.fun)
            if best_v < -GOOD_SLACK:
                break
    F = _to_rational(x0 + null @ best_t, order)
    chk = check_unit(F, data, gamma)
    if not chk.passed():
        raise InfeasibleError(
            f"no order-{order} unit found at gamma={gamma:g} (best slack {-best_v:.3g}); "
            "try a larger gamma or order")
    return Interpolant(InterpolantKind.RATIONAL_UNIT, F, gamma, F)


def project_rational_unit(data: InterpolationData, gamma: float, anchor: RationalFn) -> Interpolant:
    """Interpolating rational unit of the anchor's order closest to ``anchor`` in coefficients.

    Useful for turning a rounded published design into an exact interpolant.
    """
    order = degree(anchor.den)
    if degree(anchor.num) > order:
        raise ValueError("anchor must be proper")
    A, b = _linear_system(data, gamma, order)
    a = np.zeros(order + 1)
    a[:degree(anchor.num) + 1] = np.real(anchor.num.coef)
    xa = np.concatenate([a, np.real(anchor.den.coef[:-1])])
    # minimum-norm correction dx with A (xa + dx) = b
    dx, *_ = np.linalg.lstsq(A, b - A @ xa, rcond=None)
    F = _to_rational(xa + dx, order)
    chk = check_unit(F, data, gamma)
    if not chk.passed():
        raise InfeasibleError("projected anchor is not an admissible unit")
    return Interpolant(InterpolantKind.RATIONAL_UNIT, F, gamma, F)
