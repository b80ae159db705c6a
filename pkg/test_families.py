"""
Tests for candidate smoother families, difference penalties and power iteration.
Run with pytest or directly: python test_families.py
"""

import math

import numpy as np
from numpy.testing import assert_allclose

from dirtrend.errors import ConvergenceError, DegenerateRowError, PenaltyError, TrendInputError
from dirtrend.families import (
    ShrinkageFamily,
    apply_smoother,
    difference_matrix,
    fixed_family,
    multi_penalty_pls_family,
    odd_span_weighted_average,
    parse_family,
    penalty_matrix,
    pls_family,
    power_iteration,
    span3_running_average,
    spectral_norm,
    weighted_running_average,
    weighted_running_average_family,
)


def expect(error, build):
    try:
        build()
    except error as e:
        return e
    raise AssertionError(f"expected {error.__name__}")


def test_span3_running_average_p4():
    expected = np.array([
        [2, 1, 0, 0],
        [1, 1, 1, 0],
        [0, 1, 1, 1],
        [0, 0, 1, 2],
    ]) / 3.0
    assert_allclose(span3_running_average(4), expected, atol=1e-15)
    expect(TrendInputError, lambda: span3_running_average(2))


def test_weighted_running_average_endpoints():
    assert_allclose(weighted_running_average(6, 0.0), np.eye(6))
    assert_allclose(weighted_running_average(6, 2.0 / 3.0), span3_running_average(6), atol=1e-15)
    family = weighted_running_average_family(25)
    assert family.sp_bound == math.sqrt(5.0)
    assert family.probe()['max_spectral_norm'] <= family.sp_bound
    assert family.probe()['max_asymmetry'] == 0.0


def test_odd_span_weighted_average():
    assert_allclose(odd_span_weighted_average(4, [1 / 3, 1 / 3]), span3_running_average(4), atol=1e-15)
    assert_allclose(odd_span_weighted_average(5, [1.0]), np.eye(5))
    A = odd_span_weighted_average(9, [0.4, 0.2, 0.1])
    assert_allclose(A.sum(axis=1), 1.0, atol=1e-15)
    assert_allclose(A, A.T, atol=1e-15)
    expect(TrendInputError, lambda: odd_span_weighted_average(9, [0.5, 0.5]))
    expect(TrendInputError, lambda: odd_span_weighted_average(3, [0.2, 0.2, 0.2]))


def test_difference_matrices_exact():
    assert np.array_equal(difference_matrix(3, 1), np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]]))
    assert np.array_equal(difference_matrix(3, 2), np.array([[1.0, -2.0, 1.0]]))
    assert difference_matrix(10, 3).shape == (7, 10)
    expect(TrendInputError, lambda: difference_matrix(3, 3))
    expect(TrendInputError, lambda: difference_matrix(3, 0))


def test_penalty_annihilates_low_degree_polynomials():
    p = 30
    t = np.arange(p, dtype=float)
    for d in (1, 2, 3):
        Q = penalty_matrix(p, d)
        for degree in range(d):
            assert np.max(np.abs(Q @ t ** degree)) <= 1e-8 * p ** degree


def test_spectral_norm_examples():
    assert_allclose(spectral_norm(np.eye(4)), 1.0, rtol=1e-12)
    assert_allclose(spectral_norm(np.diag([1.0, 2.0, 3.0])), 3.0, rtol=1e-12)
    assert_allclose(spectral_norm(-np.diag([1.0, 5.0, 3.0])), 5.0, rtol=1e-12)
    assert_allclose(spectral_norm(penalty_matrix(100, 1)), 2.0 - 2.0 * math.cos(99 * math.pi / 100), rtol=1e-10)
    assert spectral_norm(np.zeros((5, 5))) == 0.0


def test_spectral_norm_random_psd():
    rng = np.random.default_rng(8)
    for n in (5, 20, 80, 200):
        G = rng.normal(size=(n, n))
        S = G @ G.T
        expected = np.linalg.eigvalsh(S).max()
        assert_allclose(spectral_norm(S), expected, rtol=1e-8)


def test_spectral_norm_large_first_difference_penalty():
    # leading eigenvalue gap shrinks like p^-2
    for p in (600, 1000):
        exact = 2.0 + 2.0 * math.cos(math.pi / p)
        result = power_iteration(penalty_matrix(p, 1))
        assert result.converged
        assert abs(result.value - exact) <= 1e-11 * exact, (p, result.value, exact)


def test_power_iteration_reports_non_convergence():
    result = power_iteration(penalty_matrix(50, 2), max_iter=1)
    assert not result.converged
    expect(ConvergenceError, lambda: spectral_norm(penalty_matrix(50, 2), max_iter=1))
    expect(TrendInputError, lambda: power_iteration(np.array([[1.0, 2.0], [0.0, 1.0]])))


def test_pls_family_properties():
    p, c = 40, 1000.0
    family = pls_family(p, 2, c)
    assert family.label == 'pls:d=2,c=1000'
    assert family.params == {'kind': 'pls', 'c': 1000.0, 'penalties': 1, 'd': 2}
    assert_allclose(family(0.0), np.eye(p), atol=1e-14)

    Q = penalty_matrix(p, 2)
    Q = Q / np.linalg.eigvalsh(Q).max()
    rng = np.random.default_rng(9)
    Y = rng.normal(size=(p, 3))
    for t in (0.01, 0.3, 1.0):
        A = family(t)
        assert_allclose(A, A.T, atol=1e-15)
        values = np.linalg.eigvalsh(A)
        assert values.min() >= 1.0 / (1.0 + c * t) - 1e-9
        assert values.max() <= 1.0 + 1e-9
        # A(t) Y solves the penalized normal equations
        assert_allclose((np.eye(p) + c * t * Q) @ (A @ Y), Y, atol=1e-8)


def test_pls_shared_basis_matches_dense_matrix():
    for family in (pls_family(60, 1), pls_family(60, 2), weighted_running_average_family(60)):
        assert family.has_shared_basis
        for t in (0.0, 0.02, 0.5, 1.0):
            V = family.basis
            dense = V @ np.diag(family.coefficients(t)) @ V.T
            assert_allclose(dense, family(t), atol=1e-8)


def test_lipschitz_bound_on_grid():
    grid = np.round(np.arange(0.0, 1.0 + 1e-9, 0.01), 2)
    for family in (pls_family(30, 1), pls_family(30, 2), weighted_running_average_family(30)):
        matrices = [family(t) for t in grid]
        for (s, A), (t, B) in zip(zip(grid, matrices), zip(grid[1:], matrices[1:])):
            gap = np.linalg.norm(B - A, 2)
            assert gap <= family.lipschitz * (t - s) + 1e-12, (family.label, s, gap)


def test_smoothers_preserve_constants():
    p = 40
    ones = np.ones(p)
    assert_allclose(span3_running_average(p) @ ones, 1.0, atol=1e-10)
    runw = weighted_running_average_family(p)
    for s in (0.0, 0.25, 2.0 / 3.0, 1.0):
        assert_allclose(runw(s) @ ones, 1.0, atol=1e-10)
    for d in (1, 2, 3):
        family = pls_family(p, d)
        for t in (0.0, 0.001, 0.1, 0.5, 1.0):
            assert_allclose(family(t) @ ones, 1.0, atol=1e-10)
    mpls = parse_family('mpls', p)
    assert_allclose(mpls((0.3, 0.6)) @ ones, 1.0, atol=1e-10)


def test_multi_penalty_single_penalty_matches_pls():
    p = 35
    single = multi_penalty_pls_family(p, [penalty_matrix(p, 2)], 1000.0)
    reference = pls_family(p, 2, 1000.0)
    for t in (0.0, 0.25, 1.0):
        assert_allclose(single(t), reference(t), atol=1e-12)


def test_multi_penalty_two_orders():
    p = 30
    family = parse_family('mpls', p)
    assert family.label == 'mpls:d=1+2,c=1000'
    assert family.dim_t == 2 and not family.has_shared_basis
    assert_allclose(family((0.0, 0.0)), np.eye(p), atol=1e-14)
    summary = family.probe(points_per_axis=5)
    assert summary['max_asymmetry'] == 0.0
    assert summary['max_spectral_norm'] <= family.sp_bound + 1e-9

    # A(t) Y is the penalized least squares solution: perturbations never improve it
    Q1 = penalty_matrix(p, 1)
    Q2 = penalty_matrix(p, 2)
    Q1, Q2 = Q1 / np.linalg.eigvalsh(Q1).max(), Q2 / np.linalg.eigvalsh(Q2).max()
    t = (0.2, 0.7)
    Qt = 1000.0 * (t[0] * Q1 + t[1] * Q2)
    rng = np.random.default_rng(10)
    Y = rng.normal(size=(p, 3))

    def objective(M):
        return float(np.sum((Y - M) ** 2) + np.trace(M.T @ Qt @ M))

    M_hat = family(t) @ Y
    base = objective(M_hat)
    for _ in range(20):
        assert objective(M_hat + 1e-3 * rng.normal(size=Y.shape)) >= base


def test_penalty_validation():
    p = 6
    expect(PenaltyError, lambda: multi_penalty_pls_family(p, [-np.eye(p)]))
    asymmetric = penalty_matrix(p, 1)
    asymmetric[0, 1] += 0.5
    expect(PenaltyError, lambda: multi_penalty_pls_family(p, [asymmetric]))
    expect(PenaltyError, lambda: multi_penalty_pls_family(p, [np.zeros((p, p))]))
    expect(PenaltyError, lambda: multi_penalty_pls_family(p, [np.eye(p + 1)]))
    expect(TrendInputError, lambda: pls_family(p, 1, c=0.0))


def test_family_parameter_range():
    family = pls_family(10, 1)
    expect(TrendInputError, lambda: family(1.5))
    expect(TrendInputError, lambda: family(-0.1))
    expect(TrendInputError, lambda: family((0.1, 0.2)))


def test_apply_smoother_examples():
    rng = np.random.default_rng(11)
    Y = rng.normal(size=(8, 3))
    Y /= np.linalg.norm(Y, axis=1)[:, None]
    fit = apply_smoother(np.eye(8), Y)
    assert_allclose(fit.D_hat, Y, atol=1e-15)
    assert fit.trace == 8.0

    constant = np.tile([0.0, 0.6, 0.8], (8, 1))
    fit = apply_smoother(span3_running_average(8), constant)
    assert_allclose(fit.D_hat, constant, atol=1e-15)

    fit = apply_smoother(span3_running_average(3), np.eye(3))
    assert_allclose(fit.M_hat[1], [1 / 3, 1 / 3, 1 / 3], atol=1e-15)
    assert_allclose(fit.D_hat[1], np.ones(3) / math.sqrt(3.0), atol=1e-15)


def test_apply_smoother_degenerate_row():
    Y = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    A = odd_span_weighted_average(4, [0.0, 0.5])
    error = expect(DegenerateRowError, lambda: apply_smoother(A, Y))
    assert error.row == 1


def test_parse_family_tokens():
    p = 20
    assert parse_family('run3', p).is_fixed
    runw = parse_family('runw', p)
    assert runw.label == 'runw' and runw.dim_t == 1
    fixed = parse_family('runw:w=0.5+0.25', p)
    assert fixed.is_fixed and fixed.label == 'runw:w=0.5+0.25'
    assert_allclose(fixed(), odd_span_weighted_average(p, [0.5, 0.25]))

    pls = parse_family('pls:d=1,c=500', p)
    assert pls.label == 'pls:d=1,c=500' and pls.params['c'] == 500.0
    assert parse_family('pls', p, default_c=250.0).label == 'pls:d=2,c=250'

    shrink = parse_family('shrink:d=2', p)
    assert isinstance(shrink, ShrinkageFamily)
    assert shrink.label == 'shrink:d=2'
    assert shrink.dim_t == len(shrink.spectral.bases)

    for bad in ('bogus', 'pls:d=x', 'pls:d=25', 'pls:d', 'runw:w=0.5+0.5'):
        expect(TrendInputError, lambda bad=bad: parse_family(bad, p))


def test_fixed_family_requires_symmetry():
    expect(TrendInputError, lambda: fixed_family(np.array([[1.0, 0.5], [0.0, 1.0]]), 'skew'))
    family = fixed_family(np.eye(3), 'identity')
    assert family.is_fixed
    assert_allclose(family(), np.eye(3))


if __name__ == "__main__":
    tests = [(name, fn) for name, fn in sorted(globals().items()) if name.startswith("test_") and callable(fn)]
    print("=" * 70)
    print("SMOOTHER FAMILY TESTS")
    print("=" * 70)
    for name, fn in tests:
        fn()
        print(f"  ✓ {name}")
    print(f"\n✅ {len(tests)} tests passed")
