from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf

from treeblocks import analytics as an
from treeblocks.enumeration import extract_B

# independent closed forms, written out here rather than imported
with mp.workdps(70):
    PI = mp.pi
    RHO_B = 4 * (3 * PI - 8) ** 2 / (9 * PI**2)
    U_C = 9 * PI * (4 - PI) / (420 * PI - 81 * PI**2 - 512)
    RHO_A = 2 - 3 * mpf(2) ** (mpf(-2) / 3)


def close(a, b, tol):
    return abs(mpf(a) - mpf(b)) <= tol


def test_closed_constants_64_digits():
    c = an.closed_constants(64)
    with mp.workdps(70):
        assert close(c.rho_B, RHO_B, mpf(10) ** -62)
        assert close(c.u_C, U_C, mpf(10) ** -60)
        assert close(c.rho_A, RHO_A, mpf(10) ** -60)
        assert abs(4 * c.rho_A**3 - 24 * c.rho_A**2 + 48 * c.rho_A - 5) < mpf(10) ** -60
        assert close(c.rho_M, mpf(1) / 16, mpf(10) ** -62)
    assert round(float(c.rho_B), 3) == 0.091
    assert round(float(c.u_C), 2) == 3.02


def test_rho_A_is_smallest_positive_root():
    roots = np.roots([4, -24, 48, -5])
    pos = sorted(r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0)
    assert abs(pos[0] - float(RHO_A)) < 1e-12


def test_rho_B_from_coefficient_ratios():
    b = extract_B(2000).coeffs
    # b_{n}/b_{n+1} ~ rho (1 + 3/n)
    n = 1999
    est = mpf(int(b[n])) / mpf(int(b[n + 1])) * (1 + mpf(3) / n) ** -1
    assert abs(est - RHO_B) / RHO_B < 1e-3


def test_u_C_rational_digits():
    q = an.u_C_rational(30)
    assert isinstance(q, Fraction)
    assert abs(float(q) - float(U_C)) < 1e-15


def test_numeric_u_C_matches_closed_form():
    assert abs(an.numeric_u_C() - U_C) < 1e-4


def test_E_and_c_at_critical_point():
    assert abs(an.E_closed(U_C) - 1) < 1e-30
    assert round(float(an.c_closed(U_C)), 2) == 0.40
    assert close(an.c_closed(U_C), an.c_critical_closed(), mpf(10) ** -40)


def test_tail_corrected_bound_covers_next_order():
    coarse = an.B_eval_tail_corrected(RHO_B, 1, N_exact=500, dps=30)
    fine = an.B_eval_tail_corrected(RHO_B, 1, N_exact=2000, dps=30)
    assert abs(coarse.value - fine.value) <= coarse.error_bound + fine.error_bound


def test_B_of_small_y_is_plain_sum():
    b = extract_B(200).coeffs
    with mp.workdps(40):
        y = mpf("0.01")
        direct = mpmath.fsum(int(b[k]) * y**k for k in range(201))
    assert abs(an.B_eval_tail_corrected(y, 0, N_exact=200, dps=30).value - direct) < mpf(10) ** -25


@pytest.mark.parametrize("u", [Fraction(1, 2), 1, 2, Fraction(5, 2)])
def test_subcritical_forms_agree(u):
    a = an.subcritical_qrs(u, dps=30)
    b = an.subcritical_qrs_composed(u, dps=30)
    for x, y in zip(a, b):
        assert close(x, y, mpf(10) ** -20)


def test_subcritical_s_at_one():
    s = an.subcritical_qrs(1, dps=30)[2]
    assert close(s, 2 / mp.pi, mpf(10) ** -25)


def test_classify():
    assert an.classify(1) is an.Regime.SUBCRITICAL
    assert an.classify(U_C) is an.Regime.CRITICAL
    assert an.classify(5) is an.Regime.SUPERCRITICAL
    for bad in (0, -1, float("nan")):
        with pytest.raises(ValueError):
            an.classify(bad)


def test_regime_constants_subcritical():
    rc = an.regime_constants(1, dps=30)
    assert rc.regime is an.Regime.SUBCRITICAL
    assert close(rc.rho_u, mpf(1) / 16, mpf(10) ** -8)
    assert close(rc.y_u, RHO_B, mpf(10) ** -25)


def test_y_of_u_supercritical():
    y = an.solve_y_of_u(5, N_exact=400, dps=25)
    assert 0 < y < RHO_B
    B = an.B_eval_tail_corrected(y, 0, N_exact=400, dps=25).value
    B1 = an.B_eval_tail_corrected(y, 1, N_exact=400, dps=25).value
    # mean offspring one at y(u)
    assert abs(2 * y * 5 * B1 / (5 * B + 1 - 5) - 1) < 1e-10
    assert abs(float(y) - 0.07232) < 1e-4


def test_y_curve_monotone():
    rows = an.emit_y_curve([4, 6, 8], N_exact=400, dps=20, tol=1e-10)
    ys = [float(r[1]) for r in rows]
    assert ys == sorted(ys, reverse=True)


def test_bn_asymptotics_report():
    r = an.verify_bn_asymptotics(2000)
    assert r.passed and r.monotone_tail and r.final_deviation < 0.15


def test_Mu_asymptotics_subcritical():
    r = an.verify_Mu_asymptotics(1, 500)
    assert r.passed and r.monotone_tail


@settings(max_examples=25, deadline=None)
@given(st.fractions(min_value=Fraction(1, 10), max_value=Fraction(3)))
def test_E_increasing_below_critical(u):
    e1 = an.E_closed(u, dps=30)
    e2 = an.E_closed(u + Fraction(1, 100), dps=30)
    assert 0 < e1 < e2
