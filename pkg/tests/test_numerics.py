"""Dense kernel checks against closed forms and independent oracles."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import chi2 as chi2_dist

from gamblets import (
    NotSPD,
    InvalidProbability,
    cholesky,
    solve_spd,
    spd_inverse,
    extreme_eigs,
    chi_square_quantile,
    symmetrize,
    dump_matrix_csv,
    load_matrix_csv,
)
from conftest import random_spd


def tridiag(n, lo, di, up):
    return np.diag(np.full(n, di)) + np.diag(np.full(n - 1, lo), -1) + np.diag(np.full(n - 1, up), 1)


# ---------------------------------------------------------------------------
# Cholesky and solves.

def test_cholesky_solves_diagonal_system():
    a = np.diag([4.0, 9.0, 16.0])
    x = solve_spd(cholesky(a), np.array([4.0, 18.0, 48.0]))
    assert_allclose(x, [1.0, 2.0, 3.0], rtol=0, atol=1e-14)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotSPD):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_cholesky_rejects_nonsymmetric():
    with pytest.raises(NotSPD):
        cholesky(np.array([[2.0, 1.0], [0.0, 2.0]]))


def test_tridiagonal_inverse_first_column():
    # For tridiag(-1, 2, -1) of order 8, (T^{-1} e_1)_j = (9 - j) / 9.
    t = tridiag(8, -1.0, 2.0, -1.0)
    x = solve_spd(cholesky(t), np.eye(8)[:, 0])
    expected = (9.0 - np.arange(1, 9)) / 9.0
    assert_allclose(x, expected, rtol=0, atol=1e-13)


@pytest.mark.parametrize("n,seed", [(5, 0), (12, 1), (40, 2)])
def test_spd_inverse_round_trip(n, seed):
    a = random_spd(n, seed)
    assert_allclose(spd_inverse(a) @ a, np.eye(n), rtol=0, atol=1e-9)


def test_solve_spd_matrix_rhs():
    a = random_spd(10, 3)
    b = np.random.default_rng(4).standard_normal((10, 3))
    assert_allclose(solve_spd(cholesky(a), b), np.linalg.solve(a, b), rtol=0, atol=1e-10)


def test_symmetrize_averages_off_diagonal():
    m = np.array([[1.0, 2.0], [4.0, 5.0]])
    s = symmetrize(m)
    assert_allclose(s, [[1.0, 3.0], [3.0, 5.0]])
    assert_allclose(s, s.T)


# ---------------------------------------------------------------------------
# Extreme eigenvalues.

def test_extreme_eigs_diagonal():
    lo, hi = extreme_eigs(np.diag([1.0, 2.0, 3.0, 4.0, 5.0]))
    assert_allclose([lo, hi], [1.0, 5.0], rtol=1e-10)


def test_extreme_eigs_tridiagonal_spectrum():
    # Eigenvalues of tridiag(-1, 2, -1), order n, are 2 - 2 cos(k pi / (n+1)).
    t = tridiag(8, -1.0, 2.0, -1.0)
    lo, hi = extreme_eigs(t)
    assert_allclose(lo, 2 - 2 * math.cos(math.pi / 9), rtol=1e-9)
    assert_allclose(hi, 2 - 2 * math.cos(8 * math.pi / 9), rtol=1e-9)


def test_extreme_eigs_permutation_invariant():
    a = random_spd(16, 7)
    p = np.random.default_rng(8).permutation(16)
    assert_allclose(extreme_eigs(a), extreme_eigs(a[np.ix_(p, p)]), rtol=1e-9)


# ---------------------------------------------------------------------------
# Chi-square quantile.

def test_chi_square_quantile_dof_one():
    assert abs(chi_square_quantile(1, 0.95) - 3.8415) < 1e-3


def test_chi_square_quantile_dof_two_closed_form():
    # CDF of chi-square with 2 dof is 1 - exp(-x/2), so p = 1 - 1/e inverts to 2.
    assert abs(chi_square_quantile(2, 1 - math.exp(-1)) - 2.0) < 1e-10


def test_chi_square_quantile_large_dof_tail():
    got = chi_square_quantile(1024, 0.005)
    assert abs(got - chi2_dist.ppf(0.005, 1024)) < 1e-6 * got


@pytest.mark.parametrize("dof,p", [(3, 0.1), (10, 0.5), (100, 0.99)])
def test_chi_square_quantile_matches_scipy(dof, p):
    assert_allclose(chi_square_quantile(dof, p), chi2_dist.ppf(p, dof), rtol=1e-8)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.5])
def test_chi_square_quantile_rejects_bad_probability(p):
    with pytest.raises(InvalidProbability):
        chi_square_quantile(4, p)


# ---------------------------------------------------------------------------
# CSV round trip.

def test_matrix_csv_round_trip(tmp_path):
    m = np.random.default_rng(11).standard_normal((7, 3)) * np.pi
    path = tmp_path / "m.csv"
    dump_matrix_csv(path, m)
    back = load_matrix_csv(path)
    assert back.shape == m.shape
    assert np.array_equal(back, m)  # %.17g round-trips float64 exactly
