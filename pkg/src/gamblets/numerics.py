"""Dense symmetric linear algebra kernels.

Everything here is deterministic for fixed inputs. Matrices are plain
numpy arrays; symmetric matrices are kept exactly symmetric by
construction (see symmetrize). Desk scale means N <= 4096, so dense
storage and factorizations are the norm throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import gammainc

from .errors import (
    DimensionMismatch,
    InvalidProbability,
    NoConvergence,
    NotSPD,
)

# Pivot acceptance threshold for Cholesky, relative to max diagonal.
PIVOT_RTOL = 1e-14

# Above this order, extreme_eigs switches from a full symmetric
# eigendecomposition to power/inverse iteration.
DENSE_EIG_LIMIT = 512

DENSE_CAP = 4096


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return (m + m.T)/2, which is exactly symmetric in IEEE arithmetic."""
    return (m + m.T) / 2.0


def _check_square_symmetric(m: np.ndarray, what: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{what} must be square, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=1e-10, atol=1e-12 * max(1.0, float(np.abs(m).max(initial=0.0)))):
        raise NotSPD(f"{what} is not symmetric")


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular L with A = L L^T."""

    lower: np.ndarray

    @property
    def n(self) -> int:
        return self.lower.shape[0]


def cholesky(m: np.ndarray) -> CholFactor:
    """Cholesky factor of an SPD matrix.

    Raises NotSPD when the factorization breaks down or any pivot falls
    at or below PIVOT_RTOL times the largest diagonal entry (a
    scale-invariant positive definiteness test).
    """
    _check_square_symmetric(m)
    max_diag = float(np.max(np.diag(m), initial=0.0))
    if max_diag <= 0.0:
        raise NotSPD("no positive diagonal entry")
    try:
        lower = scipy.linalg.cholesky(m, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotSPD(f"Cholesky breakdown: {exc}") from None
    pivots = np.diag(lower) ** 2
    if np.min(pivots) <= PIVOT_RTOL * max_diag:
        raise NotSPD(
            f"pivot {np.min(pivots):.3e} at or below {PIVOT_RTOL:.0e} * max diagonal {max_diag:.3e}"
        )
    return CholFactor(lower=lower)


def solve_spd(f: CholFactor, b: np.ndarray) -> np.ndarray:
    """Solve A x = b given the Cholesky factor of A. b may be a vector or matrix."""
    if b.shape[0] != f.n:
        raise DimensionMismatch(f"factor of order {f.n} cannot solve rhs of shape {b.shape}")
    return scipy.linalg.cho_solve((f.lower, True), b, check_finite=False)


def spd_inverse(m: np.ndarray) -> np.ndarray:
    """Explicit inverse of an SPD matrix via Cholesky, symmetrized."""
    inv = solve_spd(cholesky(m), np.eye(m.shape[0]))
    return symmetrize(inv)


def _power_iteration(matvec, n: int, tol: float, max_iter: int) -> float:
    """Largest eigenvalue of an SPSD operator given by matvec.

    Stops when successive Rayleigh quotient estimates change by less
    than tol * |current estimate|.
    """
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v_new = w / nw
        lam_new = float(v_new @ matvec(v_new))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new
        lam = lam_new
        v = v_new
    raise NoConvergence(f"power iteration did not converge in {max_iter} iterations")


def extreme_eigs(m: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> tuple[float, float]:
    """Extreme eigenvalues (lambda_min, lambda_max) of a symmetric matrix.

    For n <= DENSE_EIG_LIMIT a full symmetric eigendecomposition is
    used. Larger matrices fall back to power iteration on a shifted
    copy for lambda_max and on the Cholesky inverse (or a shifted copy
    when the matrix is indefinite) for lambda_min; the stopping rule is
    the relative change of the Rayleigh quotient.
    """
    _check_square_symmetric(m)
    n = m.shape[0]
    if n <= DENSE_EIG_LIMIT:
        evals = np.linalg.eigvalsh(m)
        return float(evals[0]), float(evals[-1])

    mu = _power_iteration(lambda v: m @ v, n, tol, max_iter)  # largest |eigenvalue|
    shift = abs(mu) * 1.01 + 1e-300
    lam_max = _power_iteration(lambda v: m @ v + shift * v, n, tol, max_iter) - shift
    try:
        f = cholesky(m)
        inv_lam = _power_iteration(lambda v: solve_spd(f, v), n, tol, max_iter)
        lam_min = 1.0 / inv_lam
    except NotSPD:
        lam_min = shift - _power_iteration(lambda v: shift * v - m @ v, n, tol, max_iter)
    return float(lam_min), float(lam_max)


def chi_square_quantile(dof: int, p: float) -> float:
    """Quantile of the chi-square distribution with dof degrees of freedom.

    Solves P[chi2_dof <= x] = p by bisection on the regularized
    incomplete gamma function; the returned x matches the target
    probability well below the 1e-8 contract.
    """
    if not (0.0 < p < 1.0):
        raise InvalidProbability(f"p must lie in (0,1), got {p}")
    if dof < 1 or int(dof) != dof:
        raise InvalidProbability(f"dof must be a positive integer, got {dof}")
    half = dof / 2.0
    cdf = lambda x: gammainc(half, x / 2.0)
    lo = 0.0
    hi = dof + 10.0 * np.sqrt(2.0 * dof) + 10.0
    while cdf(hi) < p:
        hi *= 2.0
        if hi > 1e300:  # pragma: no cover - unreachable for sane p
            raise NoConvergence("chi-square bracket overflow")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, lo):
            break
    return 0.5 * (lo + hi)


def dump_matrix_csv(path, m: np.ndarray) -> None:
    """Write a matrix as CSV, one row per line, %.17g formatting (lossless for float64)."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    with open(path, "w") as fh:
        for row in m:
            fh.write(",".join("%.17g" % v for v in row))
            fh.write("\n")


def load_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by dump_matrix_csv."""
    return np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
