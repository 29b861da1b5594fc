import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import LAMBDA_MIDDLE_FIFTH, random_positive_family
from lyapkernel.errors import NotStrictlyContracting, PreconditionError
from lyapkernel.kernel import (
    T_path_discrepancy,
    WeightedFamily,
    build_kernel_system,
    build_T,
    build_v,
    choose_r,
    compute_lyapunov,
    error_constants,
    kr_bound,
    partial_sum,
    pascal,
    select_parameters,
    self_check,
    truncation_bound,
)
from lyapkernel.projective import Matrix2, Mobius

SYM = WeightedFamily.uniform([Matrix2(2, 1, 1, 2)])


def test_weighted_family_validation():
    with pytest.raises(PreconditionError):
        WeightedFamily((Matrix2(1, 1, 1, 2),), (0.5,))
    with pytest.raises(PreconditionError):
        WeightedFamily((Matrix2(1, 2, 2, 4),), (1.0,))
    with pytest.raises(PreconditionError):
        WeightedFamily((Matrix2(1, 1, 1, 2), Matrix2(1, 1, 1, 2)), (1.5, -0.5))
    fam = WeightedFamily.uniform([[[1, 2], [3, 4]], (1, 0, 0, 1)])
    assert fam.weights == (0.5, 0.5)


def test_choose_r_examples(middle_fifth_conjugated):
    assert choose_r(SYM, 0.0) == pytest.approx(1 / 3, abs=1e-16)
    # endpoint images reach 0.4285729945, so only margins below ~5e-7 stay under 0.428573
    assert choose_r(middle_fifth_conjugated) <= 0.428573
    assert choose_r(middle_fifth_conjugated, 1e-6) == pytest.approx(0.428573, abs=2e-6)
    with pytest.raises(NotStrictlyContracting):
        choose_r(WeightedFamily.uniform([Matrix2(1, 1, 0, 1)]))


def test_choose_r_contains_images(rng):
    for _ in range(20):
        fam = random_positive_family(rng)
        r = choose_r(fam)
        for m in fam.matrices:
            G = m.to_float()
            for t in np.linspace(-1, 1, 41):
                # image of t under [F(A)] computed from the simplex action
                v = G.to_array() @ np.array([(1 + t) / 2, (1 - t) / 2])
                assert abs((v[0] - v[1]) / (v[0] + v[1])) <= r


def test_T_symmetric_single_matrix_is_diagonal():
    T = build_T(SYM, 12)
    expected = np.diag([0.0] + [3.0 ** -k for k in range(1, 12)])
    assert np.allclose(T, expected, atol=1e-17)
    v = build_v(SYM, 12)
    assert v[0] == pytest.approx(math.log(3)) and not v[1:].any()
    v2 = build_v(WeightedFamily.uniform([Matrix2(1, 2, 2, 1)]), 6)
    assert v2[0] == pytest.approx(math.log(3)) and not v2[1:].any()


def test_column_zero_vanishes_and_annihilates(rng):
    for _ in range(10):
        fam = random_positive_family(rng)
        T = build_T(fam, 20)
        assert not T[:, 0].any()
        w = rng.normal(size=20)
        w2 = w.copy()
        w2[0] = 123.0
        assert np.array_equal(T @ w, T @ w2)


def test_row_zero_vanishes_when_transpose_map_fixes_zero():
    # F(A) has q1 = (p - q + r - s)/2 = 0
    fam = WeightedFamily.uniform([Matrix2(1, 2, 3, 2), Matrix2(2, 1, 1, 2)])
    assert not build_T(fam, 15)[0].any()


def test_T_two_constructions_agree(rng):
    for _ in range(8):
        fam = random_positive_family(rng, lo=0.2)
        assert T_path_discrepancy(fam, 61) < 1e-9
        self_check(fam)


def test_T_matches_closed_form_directly():
    # small hand-checkable entries: b_{1,1} = sum w f'(0), b_{1,2} = sum w 2 f^T(0) f'(0)
    fam = WeightedFamily((Matrix2(3.0, 1.0, 0.5, 2.0), Matrix2(1.0, 2.0, 1.5, 1.0)), (0.3, 0.7))
    T = build_T(fam, 4)
    vals = []
    for m in fam.matrices:
        F = m.to_array()
        H = np.array([[1.0, -1.0], [1.0, 1.0]])
        G = H @ F @ np.linalg.inv(H)
        (p1, p2), (q1, q2) = G
        vals.append((q1 / q2, p2 / q2, np.linalg.det(G) / q2 ** 2))
    b11 = sum(w * fp for w, (ft, f0, fp) in zip(fam.weights, vals))
    b12 = sum(w * 2 * ft * fp for w, (ft, f0, fp) in zip(fam.weights, vals))
    b21 = sum(w * (-f0) * fp for w, (ft, f0, fp) in zip(fam.weights, vals))
    b03 = sum(w * ft ** 3 for w, (ft, f0, fp) in zip(fam.weights, vals))
    assert T[1, 1] == pytest.approx(b11, rel=1e-13)
    assert T[1, 2] == pytest.approx(b12, rel=1e-13)
    assert T[2, 1] == pytest.approx(b21, rel=1e-13)
    assert T[0, 3] == pytest.approx(b03, rel=1e-13)


def test_columns_generate_powers_of_transpose_map(rng):
    # column n is the Taylor series of sum_i w_i (f_i^T(x))^n
    fam = random_positive_family(rng)
    M = 40
    T = build_T(fam, M)
    x = 0.3
    for n in (1, 2, 5):
        series = sum(T[k, n] * x ** k for k in range(M))
        direct = 0.0
        for w, m in zip(fam.weights, fam.matrices):
            ft = Mobius.from_matrix(m).transpose()
            direct += w * ft(x) ** n
        assert series == pytest.approx(direct, abs=1e-12)


def test_v_scaling_adds_log_t(rng):
    fam = random_positive_family(rng)
    v1 = build_v(fam, 10)
    v2 = build_v(fam.scaled(2.5), 10)
    assert v2[0] - v1[0] == pytest.approx(math.log(2.5), abs=1e-14)
    assert np.allclose(v1[1:], v2[1:], atol=1e-15)


def test_partial_sum_examples(middle_fifth_conjugated):
    ks = build_kernel_system(SYM, 10)
    for N in (1, 2, 7):
        assert partial_sum(ks, N) == pytest.approx(math.log(3), abs=1e-15)
    ks = build_kernel_system(middle_fifth_conjugated, 34, r=0.428573)
    assert partial_sum(ks, 1) == ks.v[0]
    assert abs(partial_sum(ks, 25) - LAMBDA_MIDDLE_FIFTH) < 1e-10


def _kr_quadrature(r: float, n: int = 256) -> float:
    theta = 2 * np.pi * np.arange(n) / n
    return float(np.mean(r / np.abs(1 - r * np.exp(1j * theta))))


@pytest.mark.parametrize("r", [0.05, 0.3, 0.428573, 0.7, 0.9])
def test_kr_bound_dominates_quadrature(r):
    assert _kr_quadrature(r) <= kr_bound(r)


def test_kr_vanishes_at_zero():
    assert kr_bound(0.0) == 0.0
    assert kr_bound(1e-12) < 1e-11


def test_error_constants(middle_fifth_conjugated):
    E, C, Kr = error_constants(SYM, 1 / 3)
    assert E == 0.0 and C == 0.0
    E, C, Kr = error_constants(middle_fifth_conjugated, 0.428573)
    assert 0 < C < 1 and E > 0
    assert Kr == pytest.approx(min(0.428573 / math.sqrt(1 - 0.428573 ** 2),
                                   2 * 0.428573 / (math.pi * 1.428573) * (math.pi / 2 + math.log(1.428573 / 0.571427))))


def test_truncation_bound_table_pairs(middle_fifth_conjugated):
    ks = build_kernel_system(middle_fifth_conjugated, 34, r=0.428573)
    assert truncation_bound(ks, 12, 18) < 1e-5
    assert truncation_bound(ks, 25, 34) < 1e-10
    with pytest.raises(PreconditionError):
        truncation_bound(ks, 1, 5)


def test_truncation_bound_limits_and_monotonicity(rng):
    # decreasing in m everywhere; in n only the tail term decreases (the
    # kernel-truncation terms grow with n at fixed m)
    grows_in_n = False
    for _ in range(50):
        fam = random_positive_family(rng)
        ks = build_kernel_system(fam, 2)
        prev_row = None
        for n in range(2, 41):
            row = [truncation_bound(ks, n, m) for m in range(2, 41)]
            assert all(a >= b for a, b in zip(row, row[1:]))
            if prev_row is not None:
                grows_in_n |= any(b > a for a, b in zip(prev_row, row))
            prev_row = row
        n = 10
        assert truncation_bound(ks, n, 400) == pytest.approx(ks.E * ks.r ** (n - 1), rel=1e-9, abs=1e-300)
    assert grows_in_n


def test_truncation_bound_dominates_actual_error(rng):
    # single matrices have a closed-form exponent; pairs use a much deeper sum as reference
    for _ in range(20):
        fam = random_positive_family(rng, size=1)
        ref = math.log(max(abs(np.linalg.eigvals(fam.matrices[0].to_array()))))
        for N, M in ((3, 4), (6, 8), (10, 12)):
            ks = build_kernel_system(fam, M)
            assert abs(partial_sum(ks, N) - ref) <= truncation_bound(ks, N, M) + 1e-13
    for _ in range(10):
        fam = random_positive_family(rng, size=2)
        ref = compute_lyapunov(fam, 1e-14).estimate
        for N, M in ((4, 5), (8, 10)):
            ks = build_kernel_system(fam, M)
            assert abs(partial_sum(ks, N) - ref) <= truncation_bound(ks, N, M) + 1e-12


def test_select_parameters(middle_fifth_conjugated, rng):
    N, M = select_parameters(middle_fifth_conjugated, 0.428573, 1e-5)
    assert N <= 13 and M <= 20
    ks = build_kernel_system(middle_fifth_conjugated, M, r=0.428573)
    assert truncation_bound(ks, N, M) < 1e-5
    assert select_parameters(SYM, 1 / 3 + 1e-9, 1e-10)[0] == 2
    with pytest.raises(PreconditionError):
        select_parameters(SYM, 0.5, 0.0)
    for _ in range(10):
        fam = random_positive_family(rng)
        r = choose_r(fam)
        prev = (0, 0)
        for eps in (1e-4, 5e-5, 1e-8, 5e-9, 1e-12):
            N, M = select_parameters(fam, r, eps)
            assert N >= prev[0] and M >= prev[1]
            prev = (N, M)


def test_compute_lyapunov_goldens(middle_fifth_conjugated):
    cv = compute_lyapunov(SYM, 1e-10)
    assert cv.estimate == pytest.approx(math.log(3), abs=1e-10)
    cv = compute_lyapunov(middle_fifth_conjugated, 1e-10)
    assert abs(cv.estimate - LAMBDA_MIDDLE_FIFTH) < 1e-10
    assert cv.truncation_bound <= 1e-10
    cv2 = compute_lyapunov(middle_fifth_conjugated.scaled(2), 1e-10)
    assert cv2.estimate - cv.estimate == pytest.approx(math.log(2), abs=2e-10)


def test_compute_lyapunov_rejects_nonpositive():
    with pytest.raises(PreconditionError):
        compute_lyapunov(WeightedFamily.uniform([Matrix2(2, 1, 0, 2)]), 1e-8)
    with pytest.raises(PreconditionError):
        build_T(WeightedFamily.uniform([Matrix2(2, 1, 0, 2)]), 4)


def test_shift_and_transpose_invariance(rng):
    for _ in range(10):
        fam = random_positive_family(rng)
        base = compute_lyapunov(fam, 1e-10).estimate
        for t in (0.5, 2.0, 10.0):
            assert compute_lyapunov(fam.scaled(t), 1e-10).estimate - base == pytest.approx(math.log(t), abs=2e-10)
        assert compute_lyapunov(fam.transposed(), 1e-10).estimate == pytest.approx(base, abs=2e-10)


def test_diagonal_collapse():
    for a, b in ((2.0, 1.0), (5.0, 0.5), (1.0, 3.0)):
        fam = WeightedFamily.uniform([Matrix2(a, b, b, a)])
        T = build_T(fam, 10)
        assert np.allclose(T, np.diag(np.diag(T)), atol=1e-18)
        assert compute_lyapunov(fam, 1e-12).estimate == pytest.approx(build_v(fam, 2)[0], abs=1e-15)


def test_pascal_table():
    C = pascal(10)
    assert C[10, 5] == 252 and C[7, 0] == 1 and C[7, 7] == 1
    with pytest.raises(OverflowError):
        pascal(2000)


@given(st.floats(0.6, 3.0), st.floats(0.6, 3.0), st.floats(0.6, 3.0), st.floats(0.6, 3.0))
@settings(max_examples=40, deadline=None)
def test_single_matrix_matches_spectral_radius(a, b, c, d):
    assume(abs(a * d - b * c) > 1e-6)
    fam = WeightedFamily.uniform([Matrix2(a, b, c, d)])
    rho = max(abs(np.linalg.eigvals(np.array([[a, b], [c, d]]))))
    assert compute_lyapunov(fam, 1e-10).estimate == pytest.approx(math.log(rho), abs=1e-9)
