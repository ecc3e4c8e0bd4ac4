from fractions import Fraction
from math import comb

import pytest

from treeblocks import enumeration as en
from treeblocks.series import TruncSeries, UPoly, compose, revert

# b_n computed by inverting H(z) = z M(z)^2 with plain series reversion
B_FROZEN = [1, 2, 2, 6, 28, 160, 1036, 7294, 54548, 426960, 3463304]


def test_catalan_examples():
    assert en.catalan(0) == 1
    assert en.catalan(3) == 5
    assert en.catalan(10) == comb(20, 10) // 11 == 16796


def test_mullin_count_examples():
    assert en.mullin_count(0) == 1
    assert en.mullin_count(3) == 5 * 14 == 70
    assert en.mullin_count(4) == 14 * 42 == 588


def test_shuffle_sum_agrees_with_product():
    for n in range(40):
        assert en.shuffle_sum(n) == en.catalan(n) * en.catalan(n + 1)


def test_series_M():
    assert en.series_M(2) == TruncSeries((1, 2, 10))
    assert en.series_M(4)[4] == 588
    assert en.series_M(0)[0] == 1


@pytest.mark.parametrize("N", [8, 20])
def test_dfinite_residual_vanishes(N):
    r = en.verify_dfinite(N)
    assert r.is_zero() and r.order == N - 3


def test_dfinite_detects_a_perturbation():
    M = en.series_M(20)
    bad = TruncSeries(M.coeffs[:3] + (M[3] + 1,) + M.coeffs[4:])
    with pytest.raises(en.VerificationError) as exc:
        en.verify_dfinite(20, bad)
    assert exc.value.order is not None and exc.value.order <= 3


def test_dfinite_needs_order_8():
    with pytest.raises(ValueError):
        en.verify_dfinite(7)


def _b_by_reversion(N):
    M = en.series_M(N)
    H = (M * M).shift(1)
    return compose(M, revert(H))


def test_b_values_against_reversion_oracle():
    oracle = _b_by_reversion(40)
    assert list(oracle.coeffs[:11]) == B_FROZEN
    assert en.extract_B(40, method="triangular") == oracle
    assert en.extract_B(40, method="ode") == oracle


def test_triangular_and_ode_agree():
    assert en.extract_B(150, method="triangular") == en.extract_B(150, method="ode")


def test_b_roundtrip_and_table():
    B = en.extract_B(60)
    en.verify_B_roundtrip(B)
    t = en.b_table(10)
    assert t.values == tuple(B_FROZEN)


def test_roundtrip_detects_a_wrong_b():
    B = en.extract_B(12)
    bad = TruncSeries(B.coeffs[:5] + (B[5] + 1,) + B.coeffs[6:])
    with pytest.raises(en.VerificationError):
        en.verify_B_roundtrip(bad)


def test_sequence_table_rejects_negatives():
    with pytest.raises(ValueError):
        en.SequenceTable("x", (1, -1), en.Provenance.CLOSED_FORM)


def test_bivariate_examples():
    BM = en.bivariate_M(6)
    assert BM[0] == UPoly((1,))
    assert BM[1] == UPoly((0, 2))
    assert sum(BM[2].coeffs) == 10
    assert BM.at(1) == en.series_M(6)
    assert BM.at(0) == TruncSeries.one(6)
    for n in range(1, 7):
        assert BM[n].degree == n


def test_weighted_coeffs_match_bivariate():
    BM = en.bivariate_M(12)
    for u in (Fraction(2), Fraction(7, 3), Fraction(1, 5)):
        assert en.weighted_coeffs(12, u) == [Fraction(BM[n](u)) for n in range(13)]


def test_weighted_coefficients_positive():
    assert all(c > 0 for c in en.weighted_coeffs(40, Fraction(5)))


def test_series_parallel_examples():
    sp = en.series_parallel_system(16)
    assert sp.A[0] == 0 and sp.A[1] == 1
    assert sp.A == sp.A_bar and sp.S == sp.P_bar and sp.P == sp.S_bar
    assert en.cubic_residual(sp.A).is_zero()
    assert list(sp.A.coeffs[:7]) == [0, 1, 3, 14, 80, 510, 3479]


def test_Q_and_core_identity():
    B = en.extract_B(64)
    A = en.series_parallel_system(64).A
    Q = en.extract_Q(64, B, A)
    assert en.bqa_residual(B, A, Q).is_zero()
    assert Q[0] == 0 and all(isinstance(q, int) and q >= 0 for q in Q.coeffs)
    assert Q.first_nonzero() == 5 and Q[5] == 16
