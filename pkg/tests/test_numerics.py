"""Lambert W and the bracketed root finders against independent oracles."""

import numpy as np
import pytest
import scipy.optimize
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from fedalloc import BisectionSpec, BracketError, bisect_root, illinois_root, lambert_w0

# Omega constant: W(1), the unique w with w*e^w = 1 (50-digit references agree
# on 0.56714329040978387...; frozen before the implementation existed).
OMEGA = 0.5671432904097838


class TestLambertW:
    def test_fixed_points(self):
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(np.e) == pytest.approx(1.0, abs=1e-14)
        assert lambert_w0(1.0) == pytest.approx(OMEGA, abs=1e-14)
        assert lambert_w0(-np.exp(-1.0)) == pytest.approx(-1.0, abs=1e-7)

    def test_matches_scipy_across_domain(self):
        x = -np.exp(-1.0) + np.logspace(-12, np.log10(1e6 + np.exp(-1.0)), 2000)
        ours = lambert_w0(x)
        ref = scipy.special.lambertw(x, 0).real
        assert np.max(np.abs(ours - ref)) <= 1e-10

    def test_roundtrip_residual_bound(self):
        x = -np.exp(-1.0) + np.logspace(-12, np.log10(1e6 + np.exp(-1.0)), 10_000)
        w = lambert_w0(x)
        resid = np.abs(w * np.exp(w) - x) / np.maximum(1.0, np.abs(x))
        assert float(np.max(resid)) <= 1e-12

    def test_scalar_in_scalar_out(self):
        assert isinstance(lambert_w0(2.5), float)

    def test_shape_preserved(self):
        x = np.array([[0.5, 1.0], [2.0, 3.0]])
        assert lambert_w0(x).shape == (2, 2)

    @given(st.floats(min_value=-0.367879, max_value=1e8, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_property(self, x):
        w = float(lambert_w0(x))
        assert abs(w * np.exp(w) - x) <= 1e-11 * max(1.0, abs(x))

    def test_below_branch_point_rejected(self):
        with pytest.raises(ValueError):
            lambert_w0(-1.0)


class TestBisectRoot:
    def test_matches_brentq(self):
        f = lambda x: x**3 - 2 * x - 5.0
        ref = scipy.optimize.brentq(f, 1.0, 3.0, xtol=1e-14)
        got = bisect_root(f, BisectionSpec(lo=1.0, hi=3.0))
        assert got == pytest.approx(ref, rel=1e-12)

    def test_decreasing_function(self):
        got = bisect_root(lambda x: 10.0 - x, BisectionSpec(lo=1.0, hi=20.0))
        assert got == pytest.approx(10.0, rel=1e-12)

    def test_expands_hi_to_capture_root(self):
        got = bisect_root(lambda x: x - 1000.0, BisectionSpec(lo=0.0, hi=1.0))
        assert got == pytest.approx(1000.0, rel=1e-10)

    def test_no_root_raises(self):
        with pytest.raises(BracketError):
            bisect_root(lambda x: 1.0 + x**2, BisectionSpec(lo=0.0, hi=4.0), expand_hi=False)

    def test_endpoint_root_returned_exactly(self):
        assert bisect_root(lambda x: x - 1.0, BisectionSpec(lo=1.0, hi=2.0)) == 1.0

    def test_absolute_tol_respected(self):
        got = bisect_root(lambda x: x - np.pi, BisectionSpec(lo=0.0, hi=10.0, tol=1e-3))
        assert abs(got - np.pi) <= 1e-3


class TestIllinoisRoot:
    def test_matches_brentq(self):
        f = lambda x: np.exp(x) - 5.0
        ref = scipy.optimize.brentq(f, 0.0, 4.0, xtol=1e-14)
        got = illinois_root(f, 0.0, 4.0, f(0.0), f(4.0))
        assert got == pytest.approx(ref, rel=1e-10)

    def test_convex_curve_no_stall(self):
        # classic regula-falsi stall case: strongly convex on the bracket
        f = lambda x: x**10 - 0.5
        ref = 0.5 ** (1 / 10)
        got = illinois_root(f, 0.0, 1.0, f(0.0), f(1.0))
        assert got == pytest.approx(ref, rel=1e-9)

    def test_same_sign_bracket_raises(self):
        f = lambda x: x + 10.0
        with pytest.raises(BracketError):
            illinois_root(f, 0.0, 1.0, f(0.0), f(1.0))

    def test_exact_endpoint_shortcut(self):
        f = lambda x: x - 2.0
        assert illinois_root(f, 2.0, 5.0, 0.0, 3.0) == 2.0

    @given(st.floats(min_value=-50.0, max_value=50.0))
    @settings(max_examples=100, deadline=None)
    def test_linear_root_property(self, c):
        f = lambda x: x - c
        lo, hi = c - 7.5, c + 13.0
        got = illinois_root(f, lo, hi, f(lo), f(hi))
        assert got == pytest.approx(c, abs=1e-9 * max(1.0, abs(c)))
