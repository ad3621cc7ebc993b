import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import lambertw

from stablehinf.numerics import from_roots, poly_roots
from stablehinf.quasipoly import DelayTerm, QuasiPoly, conjugate
from stablehinf.rational import RationalFn
from stablehinf.zerofinder import (INSET, ContourBox, ContourError, count_zeros, default_box,
                                   locate_zeros, winding_number)

from conftest import PUBLISHED_PAIR


def lambert_zeros_of_R(kmax=6):
    """Zeros of 1 + 4 e^{-3s}/(s+1): (s+1) e^{3s} = -4, so s = W_k(-12 e^3)/3 - 1."""
    return np.array([complex(lambertw(-12 * np.e ** 3, k)) / 3 - 1 for k in range(-kmax, kmax + 1)])


def rational(num_roots, den_roots, lead=1.0):
    return QuasiPoly.rational(RationalFn(from_roots(num_roots, lead=lead), from_roots(den_roots)),
                              strict=False)


BOX = ContourBox(INSET, 10.0, -20.0, 20.0)


class TestExamplePlant:
    def test_lambert_oracle_is_a_zero(self, R):
        z = lambert_zeros_of_R()
        assert np.max(np.abs(R(z))) < 1e-10

    def test_count_matches_oracle(self, R):
        z = lambert_zeros_of_R(40)
        inside = [s for s in z if s.real > 0 and abs(s.imag) < 20]
        assert count_zeros(R, BOX) == len(inside) == 4

    def test_locate_matches_oracle(self, R):
        expect = sorted((s for s in lambert_zeros_of_R() if s.real > 0), key=lambda s: (s.real, s.imag))
        found = sorted(locate_zeros(R, BOX), key=lambda s: (s.real, s.imag))
        assert np.allclose(found, expect, atol=1e-9)

    def test_published_pair_among_zeros(self, R):
        zs = locate_zeros(R, BOX)
        assert min(abs(z - PUBLISHED_PAIR) for z in zs) < 1e-3
        assert min(abs(z - PUBLISHED_PAIR.conjugate()) for z in zs) < 1e-3

    def test_Tbar_has_no_unstable_zeros(self, T):
        assert count_zeros(conjugate(T), BOX) == 0

    def test_certificate_sums(self, R):
        zs = locate_zeros(R, BOX)
        assert zs.count_certificate[0][1] == len(zs)

    def test_conjugate_closed(self, R):
        zs = np.array(locate_zeros(R, BOX).zeros)
        for z in zs:
            assert np.min(np.abs(zs - z.conjugate())) < 1e-12

    def test_residual_small(self, R):
        for z in locate_zeros(R, BOX):
            assert abs(R(z)) < 1e-9 * R.envelope(z)

    def test_default_box_stable(self, R):
        box = default_box(R)
        assert box.contains(PUBLISHED_PAIR)
        n = count_zeros(R, box)
        bigger = ContourBox(INSET, 2 * box.re_max, 2 * box.im_min, 2 * box.im_max)
        assert count_zeros(R, bigger) == n == 4


class TestRationalOracle:
    def test_s_minus_one(self):
        q = rational([1.0], [])
        assert count_zeros(q, ContourBox(INSET, 5, -5, 5)) == 1
        assert locate_zeros(q, ContourBox(INSET, 5, -5, 5)).zeros == pytest.approx((1.0,))

    def test_s_squared_minus_one(self):
        zs = locate_zeros(rational([1.0, -1.0], []), ContourBox(INSET, 5, -5, 5))
        assert len(zs) == 1 and zs.zeros[0] == pytest.approx(1.0)

    def test_delay_free_numerator_box(self):
        q = rational([1.0], [-2.0])
        assert default_box(q).contains(1.0)

    def test_no_rhp_zero(self):
        q = rational([-1.0, -3.0], [-2.0, -5.0])
        assert count_zeros(q, default_box(q)) == 0

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.floats(0.05, 4.0), st.floats(0.0, 6.0)), min_size=1, max_size=3),
           st.lists(st.floats(-4.0, -0.05), min_size=0, max_size=3),
           st.lists(st.floats(0.1, 3.0), min_size=0, max_size=3))
    def test_contour_zeros_match_poly_roots(self, rhp, lhp, poles):
        roots = []
        for a, b in rhp:
            roots += [complex(a, b), complex(a, -b)] if b > 0.05 else [complex(a, 0.0)]
        roots += list(lhp)
        if min((abs(x - y) for i, x in enumerate(roots) for y in roots[i + 1:]), default=1) < 1e-2:
            return
        q = rational(roots, [-p for p in poles])
        box = ContourBox(INSET, 8.0, -8.0, 8.0)
        oracle = [r for r in poly_roots(q.terms[0].block.num) if r.real > 0]
        found = list(locate_zeros(q, box))
        assert len(found) == len(oracle)
        for z in oracle:
            assert min(abs(z - f) for f in found) < 1e-8 * max(1.0, abs(z))


class TestContour:
    def test_near_contour_auto_expand(self):
        q = rational([1.0], [-1.0])
        # the right edge passes through the zero
        assert count_zeros(q, ContourBox(INSET, 1.0, -1.0, 1.0)) == 1

    def test_plain_callable(self):
        f = lambda s: (s - 0.5) * (s - 2 - 1j)  # noqa: E731
        assert count_zeros(f, ContourBox(INSET, 3.0, -3.0, 3.0)) == 2

    def test_poles_counted_negatively(self):
        f = lambda s: (s - 1) / (s - 2)  # noqa: E731
        assert winding_number(f, ContourBox(INSET, 3.0, -1.0, 1.0)) == 0

    def test_bad_box(self):
        with pytest.raises(ValueError):
            ContourBox(-1.0, 1.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            ContourBox(0.0, 0.0, -1.0, 1.0)

    def test_growing_count_reported(self):
        # 1 + 2 e^{-s} has a chain of zeros at Re s = ln 2
        q = QuasiPoly([DelayTerm(RationalFn.const(1.0), 0), DelayTerm(RationalFn.const(2.0), 1)])
        with pytest.raises(ContourError):
            default_box(q, max_doublings=2)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.1, 2.0), st.floats(0.3, 3.0), st.floats(1e-4, 1e-2), st.integers(1, 3))
    def test_planted_zero_pair_detected(self, a, b, eps, h):
        z = complex(a, b)
        base = RationalFn(from_roots([z, z.conjugate()]), from_roots([-1.0, -2.0]))
        q = QuasiPoly([DelayTerm(base, 0), DelayTerm(RationalFn.from_coeffs([eps], [1.0, 3.0]), h)])
        box = default_box(q)
        zs = locate_zeros(q, box)
        assert len(zs) == 2
        assert min(abs(s - z) for s in zs) < 50 * eps
        bigger = ContourBox(INSET, 2 * box.re_max, 2 * box.im_min, 2 * box.im_max)
        assert count_zeros(q, bigger) == 2
