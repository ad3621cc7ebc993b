import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablehinf.np_design import (BranchAssignment, InfeasibleError, InterpolantKind,
                                  InterpolationData, PickProblem, branch_assignments, build_data,
                                  check_unit, conformal_inverse, conformal_map, find_gamma_star,
                                  fit_rational_unit, is_feasible, optimal_interpolant, pick_matrix,
                                  project_rational_unit, schur_interpolant)
from stablehinf.numerics import is_psd
from stablehinf.rational import RationalFn

from conftest import PUBLISHED_PAIR

PUBLISHED_F_SUBOPT = RationalFn.from_coeffs([0.1895, 0.7308], [1.0, 0.7310])
AXIS = 1j * np.logspace(-3, 3, 200)


def pair(s, w):
    s, w = complex(s), complex(w)
    return InterpolationData((s, s.conjugate()), (w, w.conjugate()))


def zero_branch(data):
    return BranchAssignment((0,) * len(data))


@st.composite
def problems(draw):
    """Small conjugate-closed problems with moderate phases."""
    nodes, omega = [], []
    for _ in range(draw(st.integers(1, 2))):
        s = complex(draw(st.floats(0.1, 3.0)), draw(st.floats(0.3, 4.0)))
        if any(abs(s - t) < 0.05 for t in nodes):
            continue
        w = draw(st.floats(0.1, 2.0)) * np.exp(1j * draw(st.floats(-1.2, 1.2)))
        nodes += [s, s.conjugate()]
        omega += [w, np.conj(w)]
    if draw(st.booleans()):
        nodes.append(complex(draw(st.floats(0.1, 3.0)), 0.0))
        omega.append(complex(draw(st.floats(0.1, 2.0))))
    data = InterpolationData(tuple(nodes), tuple(omega))
    m = [0] * len(data)
    for g in data.pairing():
        if len(g) == 2:
            k = draw(st.integers(-1, 1))
            m[g[0]], m[g[1]] = k, -k
    return data, BranchAssignment(tuple(m))


class TestConformalMap:
    def test_fixed_values(self):
        assert conformal_map(1.0) == 0 and conformal_map(0.0) == -1
        assert conformal_map(1e15) == pytest.approx(1.0)

    def test_axis_to_circle(self):
        assert np.allclose(np.abs(conformal_map(AXIS)), 1.0)

    def test_round_trip(self):
        assert abs(conformal_inverse(conformal_map(PUBLISHED_PAIR)) - PUBLISHED_PAIR) < 1e-14

    def test_poles(self):
        with pytest.raises(ZeroDivisionError):
            conformal_map(-1.0)
        with pytest.raises(ZeroDivisionError):
            conformal_inverse(1.0)


class TestData:
    def test_example_omega(self, data):
        i = int(np.argmin([abs(s - PUBLISHED_PAIR) for s in data.nodes]))
        assert abs(data.omega[i] - (0.79 - 0.42j)) < 0.01

    def test_conjugate_pairing(self, data):
        for g in data.pairing():
            if len(g) == 2:
                i, k = g
                assert data.nodes[k] == np.conj(data.nodes[i])
                assert data.omega[k] == np.conj(data.omega[i])

    def test_disc_nodes_inside(self, data):
        assert np.all(np.abs(data.disc_nodes) < 1)

    def test_unit_weight_single_node(self):
        from stablehinf.factorization import BlaschkeProduct
        from stablehinf.numerics import make_poly

        class Trivial:
            m_n = BlaschkeProduct((2.0,))

            @staticmethod
            def md(s):
                return np.ones_like(s)

        d = build_data(Trivial, RationalFn(make_poly([1.0]), make_poly([1.0])))
        assert d.omega == (1.0,)

    def test_validation(self):
        with pytest.raises(ValueError):
            InterpolationData((1.0 + 1j,), (0.5,))
        with pytest.raises(ValueError):
            InterpolationData((-1.0,), (0.5,))
        with pytest.raises(ValueError):
            InterpolationData((1.0, 1.0 + 1e-9), (0.5, 0.5))
        with pytest.raises(ValueError):
            BranchAssignment((1, 1)).check(pair(1 + 1j, 0.5))


class TestPick:
    def test_scalar_entry(self):
        d = InterpolationData((2.0,), (0.5,))
        z = conformal_map(2.0)
        P = pick_matrix(PickProblem(d, zero_branch(d), 0.8))
        assert P.shape == (1, 1)
        assert P[0, 0] == pytest.approx((2 * np.log(0.8) - 2 * np.log(0.5)) / (1 - z ** 2))

    def test_scalar_boundary(self):
        d = InterpolationData((2.0,), (0.5,))
        assert is_feasible(d, zero_branch(d), 0.5)
        assert not is_feasible(d, zero_branch(d), 0.5 * (1 - 1e-6))

    def test_hermitian(self, data):
        P = pick_matrix(PickProblem(data, zero_branch(data), 1.2))
        assert np.array_equal(P, P.conj().T)

    def test_example_margins(self, data):
        br = zero_branch(data)
        lo = np.linalg.eigvalsh(pick_matrix(PickProblem(data, br, 1.07)))
        hi = np.linalg.eigvalsh(pick_matrix(PickProblem(data, br, 1.5)))
        scale = np.max(np.abs(pick_matrix(PickProblem(data, br, 1.07))))
        assert abs(lo.min()) < 1e-2 * scale
        assert hi.min() > 1e-3 * scale

    @settings(max_examples=100, deadline=None)
    @given(problems(), st.floats(0.05, 5.0), st.floats(1.0, 50.0))
    def test_psd_monotone_in_gamma(self, prob, g1, factor):
        data, br = prob
        g2 = g1 * factor
        if is_feasible(data, br, g1):
            assert is_feasible(data, br, g2)
        if is_psd(pick_matrix(PickProblem(data, br, g1))):
            assert is_psd(pick_matrix(PickProblem(data, br, g2)))

    def test_degenerate_safeguard(self, data):
        g = 0.999 * max(abs(w) for w in data.omega)
        for br in branch_assignments(data, 1):
            assert not is_feasible(data, br, g)
        d = InterpolationData((2.0,), (0.5,))
        assert not is_feasible(d, zero_branch(d), 0.5 / (1 + 1e-8))


class TestGammaStar:
    def test_example(self, data):
        g, br, at_cap = find_gamma_star(data, 2)
        assert g == pytest.approx(1.07, abs=0.01)
        assert not at_cap

    @pytest.mark.parametrize("w", [0.3, 1.0, 2.5])
    def test_single_real_node_exact(self, w):
        d = InterpolationData((1.7,), (w,))
        g, br, _ = find_gamma_star(d, 2)
        assert g == abs(w)

    def test_single_node_branch_irrelevant(self):
        d = InterpolationData((1.7,), (0.6,))
        P0 = pick_matrix(PickProblem(d, BranchAssignment((0,)), 0.9))
        P3 = pick_matrix(PickProblem(d, BranchAssignment((3,)), 0.9))
        assert np.array_equal(P0, P3)

    def test_branch_sets_conjugate_consistent(self, data):
        sets = list(branch_assignments(data, 1))
        assert len(sets) == 9 and sets[0].m == (0,) * 4
        for br in sets:
            br.check(data)

    def test_dense_scan_oracle(self):
        d = pair(0.6 + 1.1j, 0.8 * np.exp(-0.7j))
        g_bisect, br, _ = find_gamma_star(d, 1)
        lo = max(abs(w) for w in d.omega)
        best = np.inf
        for b in branch_assignments(d, 1):
            for g in np.arange(lo, lo + 3.0, 1e-4):
                if np.linalg.eigvalsh(pick_matrix(PickProblem(d, b, g))).min() >= -1e-12:
                    best = min(best, g)
                    break
        assert abs(g_bisect - best) < 1e-3

    def test_negative_bound(self, data):
        with pytest.raises(ValueError):
            find_gamma_star(data, -1)


@pytest.fixture(scope="module")
def F(data):
    g, br, _ = find_gamma_star(data, 2)
    return optimal_interpolant(data, br, g)


class TestOptimal:
    def test_kind(self, F):
        assert F.kind is InterpolantKind.OPTIMAL_IRRATIONAL and F.rational_form is None

    def test_residuals(self, F, data):
        assert np.max(F.residuals(data)) < 1e-5

    def test_all_pass(self, F):
        assert np.max(np.abs(np.abs(F(AXIS)) - 1)) < 1e-3
        assert np.max(np.abs(F(AXIS))) <= 1 + 1e-6

    def test_conjugate_symmetry(self, F, rng):
        s = rng.uniform(0.01, 4, 20) + 1j * rng.uniform(-5, 5, 20)
        assert np.allclose(F(np.conj(s)), np.conj(F(s)), atol=1e-12)

    def test_single_node_boundary(self):
        d = InterpolationData((1.5,), (0.7,))
        F = optimal_interpolant(d, zero_branch(d), 0.7)
        assert np.allclose(F(AXIS), 0.7 / F.gamma, atol=1e-5)

    def test_below_optimum_refused(self, data):
        g, br, _ = find_gamma_star(data, 2)
        with pytest.raises(InfeasibleError):
            optimal_interpolant(data, br, 0.99 * g, eps=0.0)

    def test_schur_detects_infeasible(self):
        with pytest.raises(InfeasibleError):
            schur_interpolant([0.0, 0.5], [0.9, -0.9])


class TestRationalFits:
    def test_published_subopt_predicate(self, pair_data):
        chk = check_unit(PUBLISHED_F_SUBOPT, pair_data, 1.5)
        assert chk.passed(residual_tol=1e-2)

    def test_projected_published_subopt_exact(self, pair_data):
        F = project_rational_unit(pair_data, 1.5, PUBLISHED_F_SUBOPT)
        assert np.max(F.residuals(pair_data)) < 1e-12
        n, d = F.rational_form.to_coeffs()
        assert np.allclose(np.real(n), [0.1895, 0.7308], atol=0.01)

    def test_order_one_fit(self, pair_data):
        F = fit_rational_unit(pair_data, 1.5, 1)
        chk = check_unit(F.rational_form, pair_data, 1.5)
        assert chk.residual < 1e-6 and chk.norm <= 1 and chk.passed()

    def test_constant_unit(self):
        d = InterpolationData((2.0,), (0.5,))
        F = fit_rational_unit(d, 1.0, 0)
        assert np.allclose(F(AXIS), 0.5)
        assert fit_rational_unit(d, 1.0, 1).residuals(d)[0] < 1e-6

    def test_too_low_order(self, data):
        with pytest.raises(InfeasibleError):
            fit_rational_unit(data, 1.5, 1)

    def test_deterministic(self, pair_data):
        a = fit_rational_unit(pair_data, 1.5, 2, seed=4).rational_form.to_coeffs()
        b = fit_rational_unit(pair_data, 1.5, 2, seed=4).rational_form.to_coeffs()
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.2, 3.0), st.floats(0.1, 0.9), st.floats(0.05, 0.9),
           st.floats(0.1, 2.0), st.floats(0.2, 3.0), st.floats(1.0, 3.0))
    def test_planted_problems_recheck(self, c, bfrac, a, sr, si, gamma):
        # F0 = (a s + b)/(s + c) is an admissible unit, so the problem is feasible
        F0 = RationalFn.from_coeffs([a, bfrac * c], [1.0, c])
        s = complex(sr, si)
        d = pair(s, gamma * complex(F0(s)))
        F = fit_rational_unit(d, gamma, 1)
        num, den = [np.real(x) for x in F.rational_form.to_coeffs()]
        nodes = np.array(d.nodes)
        res = np.abs(np.polyval(num, nodes) / np.polyval(den, nodes) - np.array(d.omega) / gamma)
        assert res.max() < 1e-6
        assert np.all(np.roots(den).real < 0) and np.all(np.roots(num).real < 0)
        w = 1j * np.logspace(-4, 4, 20001)
        mag = np.abs(np.polyval(num, w) / np.polyval(den, w))
        assert mag.max() <= 1 + 1e-6 and mag.min() > 0
