import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablehinf.numerics import from_roots, make_poly
from stablehinf.rational import RationalFn, hinf_norm


def rf(num, den):
    return RationalFn.from_coeffs(num, den)


def grid_norm(G, n=200001):
    w = np.concatenate([[0.0], np.logspace(-4, 4, n)])
    return float(np.max(np.abs(G(1j * w))))


stable_pole = st.floats(0.05, 5.0).map(lambda a: -a)


class TestConstruction:
    def test_monic_denominator(self):
        G = rf([2.0, 4.0], [2.0, 2.0])
        assert G.den.coef[-1] == 1.0
        assert G(0.0) == pytest.approx(2.0)

    def test_zero_denominator_rejected(self):
        with pytest.raises(ZeroDivisionError):
            rf([1.0], [0.0])

    def test_relative_degree_and_gain(self):
        G = rf([3.0, 1.0], [1.0, 2.0, 5.0])
        assert G.relative_degree == 1
        assert G.high_freq_gain == pytest.approx(3.0)
        assert G.is_proper() and G.is_stable()

    def test_improper(self):
        assert not rf([1.0, 0.0, 0.0], [1.0, 1.0]).is_proper()

    def test_to_coeffs_round_trip(self):
        G = rf([0.1, 1.0], [1.0, 1.0])
        n, d = G.to_coeffs()
        assert np.allclose(n, [0.1, 1.0]) and np.allclose(d, [1.0, 1.0])


class TestArithmetic:
    def test_sum_product_quotient(self, rng):
        A, B = rf([1.0, 2.0], [1.0, 3.0]), rf([1.0], [1.0, 1.0, 1.0])
        s = rng.normal(size=10) + 1j * rng.normal(size=10)
        assert np.allclose((A + B)(s), A(s) + B(s))
        assert np.allclose((A - B)(s), A(s) - B(s))
        assert np.allclose((A * B)(s), A(s) * B(s))
        assert np.allclose((A / B)(s), A(s) / B(s))
        assert np.allclose((2 - A)(s), 2 - A(s))
        assert np.allclose((1 / A)(s), 1 / A(s))

    def test_derivative(self):
        G = rf([1.0, 2.0], [1.0, 3.0, 1.0])
        s, h = 0.7 + 0.2j, 1e-6
        fd = (G(s + h) - G(s - h)) / (2 * h)
        assert G.deriv()(s) == pytest.approx(fd, rel=1e-8)

    def test_mirror(self):
        G = rf([1.0, -1.0], [1.0, 2.0])
        assert G.mirror()(0.3 + 1j) == pytest.approx(G(-0.3 - 1j))

    def test_division_by_zero_function(self):
        with pytest.raises(ZeroDivisionError):
            rf([1.0], [1.0, 1.0]) / RationalFn.const(0.0)


class TestMinreal:
    def test_cancels_common_factor(self):
        G = RationalFn(from_roots([1.0, -2.0]), from_roots([-2.0, -3.0]))
        M = G.minreal()
        assert len(M.den.coef) == 2
        assert M(0.5j) == pytest.approx(G(0.5j))
        assert M.is_real

    def test_cancels_double_pole(self):
        G = RationalFn(from_roots([-1.0, -1.0]), from_roots([-1.0, -1.0, -4.0]))
        M = G.minreal()
        assert len(M.den.coef) == 2 and M(1.0) == pytest.approx(0.2)

    def test_keeps_distinct(self):
        G = RationalFn(from_roots([-1.0]), from_roots([-1.001, -3.0]))
        assert G.minreal() is G


class TestHinfNorm:
    def test_first_order_lag(self):
        assert hinf_norm(rf([1.0], [1.0, 1.0])) == pytest.approx(1.0)

    def test_biproper_weight(self):
        # (0.1 s + 1)/(s + 1) peaks at dc
        assert hinf_norm(rf([0.1, 1.0], [1.0, 1.0])) == pytest.approx(1.0)

    def test_resonant_peak(self):
        zeta = 0.05
        G = rf([1.0], [1.0, 2 * zeta, 1.0])
        assert hinf_norm(G) == pytest.approx(1 / (2 * zeta * np.sqrt(1 - zeta ** 2)), rel=1e-10)

    def test_axis_pole_is_infinite(self):
        assert hinf_norm(rf([1.0], [1.0, 0.0, 1.0])) == np.inf

    def test_improper_is_infinite(self):
        assert hinf_norm(rf([1.0, 0.0], [1.0])) == np.inf

    @settings(max_examples=40, deadline=None)
    @given(st.lists(stable_pole, min_size=1, max_size=4),
           st.lists(st.floats(-3, 3), min_size=1, max_size=4),
           st.floats(0.0, 2.0))
    def test_matches_dense_grid(self, poles, zeros, damping):
        num = from_roots(zeros[:len(poles)])
        den = from_roots(poles) * make_poly([1.0 + damping, 0.2, 1.0])
        G = RationalFn(num, den)
        exact, grid = hinf_norm(G), grid_norm(G)
        assert exact >= grid * (1 - 1e-9)
        assert exact <= grid * (1 + 1e-3)
