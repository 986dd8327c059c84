import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helmring.errors import DomainError
from helmring.specfun import eval_cylinder, free_impedance, hankel_ratio

TWO_OVER_PI = 2.0 / math.pi


def wronskian_residual(v):
    return abs(v.z * (v.j * v.yp - v.jp * v.y) - TWO_OVER_PI) / (1 + abs(v.z))


def hankel_wronskian_residual(v):
    return abs(v.z * (v.j * v.hp - v.jp * v.h) - 2j / math.pi) / (1 + abs(v.z))


@pytest.mark.parametrize("n", range(9))
def test_wronskian_identities_log_grid(n):
    zs = np.logspace(-3, 4, 1000)
    worst = max(wronskian_residual(eval_cylinder(n, z)) for z in zs)
    worst_h = max(hankel_wronskian_residual(eval_cylinder(n, z)) for z in zs)
    assert worst <= 1e-12
    assert worst_h <= 1e-12


def test_j0_leading_term_near_zero():
    assert abs(eval_cylinder(0, 1e-6).j - 1.0) < 1e-12


def test_j1_small_argument_series():
    # J_1(z) ~ z/2 with relative error <= z^2/8
    z = 0.01
    v = eval_cylinder(1, z)
    assert abs(v.j - z / 2) / (z / 2) <= z * z / 8


def test_wronskian_example_at_two():
    v = eval_cylinder(0, 2.0)
    assert abs(2.0 * (v.j * v.yp - v.jp * v.y) - TWO_OVER_PI) < 1e-14


def test_derivative_recurrence_consistency():
    for n in (1, 3, 7):
        for z in (0.3, 2.0, 50.0):
            v = eval_cylinder(n, z)
            jm, jp1 = eval_cylinder(n - 1, z).j, eval_cylinder(n + 1, z).j
            assert abs(v.jp - (jm - jp1) / 2) <= 1e-13 * (1 + abs(v.jp))


def test_complex_argument_upper_half_plane():
    v = eval_cylinder(2, 1.5 + 0.7j)
    assert wronskian_residual(v) <= 1e-12
    # H_n = J_n + i Y_n by construction
    assert v.h == v.j + 1j * v.y


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_cylinder(0, 0.0)
    with pytest.raises(DomainError):
        eval_cylinder(0, 1.0 - 0.5j)
    with pytest.raises(DomainError):
        eval_cylinder(-1, 1.0)
    with pytest.raises(DomainError):
        eval_cylinder(65, 1.0)
    with pytest.raises(DomainError):
        eval_cylinder(0, 1e-9)
    with pytest.raises(DomainError):
        free_impedance(0, 0.0, 1.0)
    with pytest.raises(DomainError):
        free_impedance(0, 1.0, -2.0)


def test_free_impedance_large_argument_limit():
    # value -> 1 with O((kr)^-2) error
    for kr in (1e2, 1e3):
        d = abs(free_impedance(0, kr, 1.0) - 1.0)
        assert d <= 2.0 / kr ** 2


def test_free_impedance_conjugate_example():
    assert free_impedance(2, -5.0, 1.5) == np.conj(free_impedance(2, 5.0, 1.5))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(0, 8),
       k=st.floats(0.01, 100.0, allow_nan=False),
       r=st.floats(0.1, 10.0, allow_nan=False))
def test_free_impedance_conjugate_symmetry_property(n, k, r):
    assert free_impedance(n, -k, r) == np.conj(free_impedance(n, k, r))


def test_free_impedance_vectorized_matches_scalar():
    ks = np.array([-3.0, -0.5, 0.5, 3.0])
    vec = free_impedance(1, ks, 2.0)
    assert np.array_equal(vec, [free_impedance(1, float(k), 2.0) for k in ks])


def test_hankel_ratio_small_argument_bound():
    # |H_n'/H_n| <= 4(n+1)/|z| below an empirically located threshold C_n.
    # The threshold existence is asserted; its value is located by scan.
    for n in range(5):
        zs = np.logspace(-6, 1, 300)
        ratios = np.abs(hankel_ratio(n, zs)) * zs / (4 * (n + 1))
        ok = ratios <= 1.0
        # find the largest prefix of small z on which the bound holds
        c_n = zs[np.nonzero(~ok)[0][0] - 1] if not ok.all() else zs[-1]
        assert c_n >= 0.5, f"bound region for n={n} ends at {c_n:.3g}"
        assert ok[zs <= 0.5].all()


def test_hankel_ratio_large_argument_slope():
    # |H'/H + 1/(2z) - i| = O(z^-2); log-log slope -2 +/- 0.1 on [10, 1e4]
    lams = np.logspace(1, 4, 13)
    for n in (0, 1, 4):
        vals = np.abs(hankel_ratio(n, lams) + 1.0 / (2 * lams) - 1j)
        slope = np.polyfit(np.log(lams), np.log(vals), 1)[0]
        assert abs(slope + 2.0) <= 0.1


def test_free_impedance_tiny_argument_finite():
    # graded grids reach k ~ 1e-13; values must stay finite for all orders
    for n in (0, 1, 4, 8, 64):
        v = free_impedance(n, 1e-13, 1.0)
        assert np.isfinite(v.real) and np.isfinite(v.imag)
