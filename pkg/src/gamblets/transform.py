"""Operator-adapted wavelet (gamblet) transform and multilevel solve.

transform() runs the level-by-level recursion: for k = q..2 it forms
the detail Gram matrix B^(k) = W A^(k) W^T, the dual-update matrix
N^(k) = A^(k) W^T B^(k),-1, the coarsening map
R^(k-1,k) = pi^(k-1,k) (I - N^(k) W^(k)) and the coarse operator
A^(k-1) = R A^(k) R^T. oracle_transform() computes every A^(k)
independently by inverting the measurement Gram matrix
Theta^(k) = pi^(k,q) A^{-1} pi^(q,k); it exists purely to cross-check
the recursion. analyze()/reconstruct() move signals between fine
coefficients and per-level wavelet coefficients, solve() is the
multilevel solver, and z_matrix() assembles the noise covariance
scaling of the dual wavelets.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BadConfig, BadLevel, DimensionMismatch, GambletError, ShapeMismatch, TooLarge
from .hierarchy import Hierarchy, hierarchy_from_json
from .numerics import (
    DENSE_CAP,
    CholFactor,
    cholesky,
    dump_matrix_csv,
    load_matrix_csv,
    solve_spd,
    spd_inverse,
    symmetrize,
)

log = logging.getLogger("gamblets")

CONSTRUCTION_TOL = 1e-10


@dataclass
class MultiresCoefficients:
    """Per-level wavelet coefficients c^(k), k = 1..q (c^(1) indexed by I^(1))."""

    levels: list[np.ndarray]

    @property
    def q(self) -> int:
        return len(self.levels)

    def copy(self) -> "MultiresCoefficients":
        return MultiresCoefficients([c.copy() for c in self.levels])


@dataclass
class GambletSystem:
    hier: Hierarchy
    a_levels: list[np.ndarray]  # A^(k), k = 1..q
    b_levels: list[np.ndarray]  # B^(k), k = 1..q; B^(1) = A^(1)
    r_levels: list[np.ndarray]  # R^(k-1,k), k = 2..q
    n_levels: list[np.ndarray]  # N^(k), k = 2..q
    trunc: float = 0.0
    _b_factors: list[CholFactor | None] = field(default_factory=list, repr=False)
    _psi_fine: dict = field(default_factory=dict, repr=False)

    @property
    def q(self) -> int:
        return self.hier.q

    @property
    def n_fine(self) -> int:
        return self.hier.n_fine

    def a_of(self, k: int) -> np.ndarray:
        return self.a_levels[k - 1]

    def b_of(self, k: int) -> np.ndarray:
        return self.b_levels[k - 1]

    def r_of(self, k: int) -> np.ndarray:
        """R^(k-1,k) for 2 <= k <= q."""
        return self.r_levels[k - 2]

    def n_of(self, k: int) -> np.ndarray:
        """N^(k) for 2 <= k <= q; N^(1) is the identity by convention."""
        if k == 1:
            return np.eye(self.hier.sizes[0])
        return self.n_levels[k - 2]

    def b_factor(self, k: int) -> CholFactor:
        if not self._b_factors:
            self._b_factors = [None] * self.q
        f = self._b_factors[k - 1]
        if f is None:
            f = cholesky(self.b_of(k))
            self._b_factors[k - 1] = f
        return f

    def psi_fine(self, k: int) -> np.ndarray:
        """Rows are the fine-basis coefficients of psi^(k)_i (product of R factors)."""
        if k not in self._psi_fine:
            if k == self.q:
                self._psi_fine[k] = np.eye(self.n_fine)
            else:
                self._psi_fine[k] = self.r_of(k + 1) @ self.psi_fine(k + 1)
        return self._psi_fine[k]

    def chi_fine(self, k: int) -> np.ndarray:
        """Rows are the fine-basis coefficients of chi^(k)_i (psi^(1) rows for k=1)."""
        if k == 1:
            return self.psi_fine(1)
        return self.hier.w_of(k) @ self.psi_fine(k)

    def phi_chi_fine(self, k: int) -> np.ndarray:
        """Dual wavelets phi^(k),chi expressed over the fine measurement basis."""
        if k == 1:
            return self.hier.pi_prod(1, self.q)
        return self.n_of(k).T @ self.hier.pi_prod(k, self.q)


def _truncate(m: np.ndarray, trunc: float) -> np.ndarray:
    if trunc <= 0.0:
        return m
    cap = trunc * np.abs(m).max(initial=0.0)
    out = m.copy()
    out[np.abs(out) < cap] = 0.0
    return out


def transform(op, hier: Hierarchy, trunc: float = 0.0) -> GambletSystem:
    """Gamblet transform of the operator's stiffness matrix.

    When trunc > 0, entries of each freshly computed A^(k-1) and
    R^(k-1,k) smaller than trunc times the matrix's max magnitude are
    dropped (the fine-basis expansions decay exponentially, so this is
    a controlled sparsification; trunc = 0 is exact).
    """
    A = np.asarray(op.A if hasattr(op, "A") else op, dtype=float)
    if A.shape[0] != hier.n_fine:
        raise ShapeMismatch(f"operator has {A.shape[0]} rows, hierarchy fine level has {hier.n_fine}")
    q = hier.q

    a_levels: list[np.ndarray] = [None] * q
    b_levels: list[np.ndarray] = [None] * q
    r_levels: list[np.ndarray] = [None] * (q - 1)
    n_levels: list[np.ndarray] = [None] * (q - 1)
    b_factors: list[CholFactor | None] = [None] * q

    Ak = symmetrize(A)
    a_levels[q - 1] = Ak
    for k in range(q, 1, -1):
        W = hier.w_of(k)
        pi = hier.pi_of(k - 1)
        B = symmetrize(W @ Ak @ W.T)
        fB = cholesky(B)
        Nk = solve_spd(fB, W @ Ak).T  # A^(k) W^T B^(k),-1
        R = pi - (pi @ Nk) @ W
        R = _truncate(R, trunc)
        A_next = _truncate(symmetrize(R @ Ak @ R.T), trunc)
        b_levels[k - 1] = B
        b_factors[k - 1] = fB
        n_levels[k - 2] = Nk
        r_levels[k - 2] = R
        a_levels[k - 2] = A_next
        Ak = A_next
    b_levels[0] = a_levels[0]
    b_factors[0] = cholesky(a_levels[0])

    sys = GambletSystem(
        hier=hier, a_levels=a_levels, b_levels=b_levels,
        r_levels=r_levels, n_levels=n_levels, trunc=trunc,
        _b_factors=b_factors,
    )
    if trunc == 0.0:
        validate_system(sys)
    return sys


def validate_system(sys: GambletSystem, tol: float = CONSTRUCTION_TOL) -> None:
    """Assert the construction identities of an exact (trunc = 0) system."""
    hier = sys.hier
    for k in range(2, sys.q + 1):
        W = hier.w_of(k)
        Ak = sys.a_of(k)
        scale = max(1.0, float(np.abs(Ak).max()))
        b_err = np.abs(W @ Ak @ W.T - sys.b_of(k)).max()
        if b_err > tol * scale:
            raise GambletError(f"B^({k}) != W A W^T (max dev {b_err:.2e})")
        a_err = np.abs(sys.r_of(k) @ Ak @ sys.r_of(k).T - sys.a_of(k - 1)).max()
        if a_err > tol * scale:
            raise GambletError(f"A^({k - 1}) != R A R^T (max dev {a_err:.2e})")
        wn_err = np.abs(W @ sys.n_of(k) - np.eye(hier.j_size(k))).max()
        if wn_err > tol * max(1.0, float(np.abs(sys.n_of(k)).max())):
            raise GambletError(f"W^({k}) N^({k}) != I (max dev {wn_err:.2e})")


def oracle_transform(op, hier: Hierarchy) -> GambletSystem:
    """Reference transform via explicit Gramian inversion (test oracle).

    Computes Theta^(k) = pi^(k,q) A^{-1} pi^(q,k) by descent and sets
    A^(k) = (Theta^(k))^{-1}; B, N, R then follow from their
    definitions rather than from the level recursion.
    """
    A = np.asarray(op.A if hasattr(op, "A") else op, dtype=float)
    if A.shape[0] != hier.n_fine:
        raise ShapeMismatch(f"operator has {A.shape[0]} rows, hierarchy fine level has {hier.n_fine}")
    if A.shape[0] > DENSE_CAP:
        raise TooLarge(f"oracle inversion capped at {DENSE_CAP}, got {A.shape[0]}")
    q = hier.q

    theta = spd_inverse(symmetrize(A))
    a_levels: list[np.ndarray] = [None] * q
    a_levels[q - 1] = symmetrize(A)
    for k in range(q - 1, 0, -1):
        theta = symmetrize(hier.pi_of(k) @ theta @ hier.pi_of(k).T)
        a_levels[k - 1] = spd_inverse(theta)

    b_levels: list[np.ndarray] = [None] * q
    r_levels: list[np.ndarray] = [None] * (q - 1)
    n_levels: list[np.ndarray] = [None] * (q - 1)
    b_levels[0] = a_levels[0]
    for k in range(2, q + 1):
        W = hier.w_of(k)
        pi = hier.pi_of(k - 1)
        Ak = a_levels[k - 1]
        B = symmetrize(W @ Ak @ W.T)
        Nk = solve_spd(cholesky(B), W @ Ak).T
        b_levels[k - 1] = B
        n_levels[k - 2] = Nk
        r_levels[k - 2] = pi - (pi @ Nk) @ W
    return GambletSystem(
        hier=hier, a_levels=a_levels, b_levels=b_levels,
        r_levels=r_levels, n_levels=n_levels, trunc=0.0,
    )


def analyze(sys: GambletSystem, y: np.ndarray) -> MultiresCoefficients:
    """Wavelet coefficients of a fine-coefficient signal.

    Fine measurements equal fine coefficients (m^(q) = y); coarser
    measurements descend through pi, and c^(k) = N^(k),T m^(k) with
    c^(1) = m^(1).
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (sys.n_fine,):
        raise DimensionMismatch(f"signal shape {y.shape}, expected ({sys.n_fine},)")
    m = y
    levels: list[np.ndarray] = [None] * sys.q
    for k in range(sys.q, 1, -1):
        levels[k - 1] = sys.n_of(k).T @ m
        m = sys.hier.pi_of(k - 1) @ m
    levels[0] = m
    return MultiresCoefficients(levels)


def reconstruct(sys: GambletSystem, c: MultiresCoefficients, upto: int | None = None) -> np.ndarray:
    """Sum of the wavelet contributions of levels 1..upto, lifted to fine coefficients."""
    if upto is None:
        upto = sys.q
    if not (0 <= upto <= sys.q):
        raise BadLevel(f"upto must lie in 0..{sys.q}, got {upto}")
    if c.q != sys.q:
        raise DimensionMismatch(f"coefficients have {c.q} levels, system has {sys.q}")
    if upto == 0:
        return np.zeros(sys.n_fine)
    x = c.levels[0].copy()
    for k in range(2, sys.q + 1):
        x = sys.r_of(k).T @ x
        if k <= upto:
            x = x + sys.hier.w_of(k).T @ c.levels[k - 1]
    return x


def solve(sys: GambletSystem, f: np.ndarray) -> np.ndarray:
    """Multilevel solve of A x = f given the fine load vector f."""
    f = np.asarray(f, dtype=float)
    if f.shape != (sys.n_fine,):
        raise DimensionMismatch(f"load shape {f.shape}, expected ({sys.n_fine},)")
    levels: list[np.ndarray] = [None] * sys.q
    fk = f
    for k in range(sys.q, 1, -1):
        levels[k - 1] = solve_spd(sys.b_factor(k), sys.hier.w_of(k) @ fk)
        fk = sys.r_of(k) @ fk
    levels[0] = solve_spd(sys.b_factor(1), fk)
    return reconstruct(sys, MultiresCoefficients(levels))


def energy_norm(op, x: np.ndarray) -> float:
    """sqrt(x^T A x), clamping round-off negatives to zero."""
    A = np.asarray(op.A if hasattr(op, "A") else op, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[0],):
        raise DimensionMismatch(f"vector shape {x.shape}, matrix order {A.shape[0]}")
    return float(np.sqrt(max(x @ A @ x, 0.0)))


def coefficient_energies(sys: GambletSystem, c: MultiresCoefficients) -> np.ndarray:
    """Per-level energies c^(k),T B^(k) c^(k); their sum is the squared energy norm."""
    return np.array([float(c.levels[k - 1] @ sys.b_of(k) @ c.levels[k - 1]) for k in range(1, sys.q + 1)])


def z_matrix(sys: GambletSystem) -> np.ndarray:
    """Dual-wavelet Gram matrix Z over the concatenated detail index sets.

    Block (s, k), s <= k, is N^(s),T pi^(s,k) N^(k) with N^(1) = I, so
    white fine-coefficient noise has covariance sigma^2 Z in wavelet
    coordinates.
    """
    if sys.trunc != 0.0:
        raise BadConfig("z_matrix needs an exact (trunc = 0) system")
    j_sizes = sys.hier.j_sizes
    offs = np.concatenate(([0], np.cumsum(j_sizes)))
    total = offs[-1]
    Z = np.zeros((total, total))
    for k in range(1, sys.q + 1):
        T = sys.n_of(k)
        for s in range(k, 0, -1):
            if s < k:
                T = sys.hier.pi_of(s) @ T
            block = sys.n_of(s).T @ T
            Z[offs[s - 1] : offs[s], offs[k - 1] : offs[k]] = block
            if s < k:
                Z[offs[k - 1] : offs[k], offs[s - 1] : offs[s]] = block.T
    return symmetrize(Z)


# ---------------------------------------------------------------------------
# Persistence: a directory of CSV matrices plus a JSON manifest.

MANIFEST_NAME = "manifest.json"


def save_system(sys: GambletSystem, dirpath) -> None:
    os.makedirs(dirpath, exist_ok=True)
    files: dict[str, str] = {"hierarchy": "hierarchy.json"}
    with open(os.path.join(dirpath, "hierarchy.json"), "w") as fh:
        fh.write(sys.hier.to_json())
    for k in range(1, sys.q + 1):
        files[f"a_{k}"] = f"a_{k}.csv"
        dump_matrix_csv(os.path.join(dirpath, f"a_{k}.csv"), sys.a_of(k))
        files[f"b_{k}"] = f"b_{k}.csv"
        dump_matrix_csv(os.path.join(dirpath, f"b_{k}.csv"), sys.b_of(k))
    for k in range(2, sys.q + 1):
        files[f"r_{k}"] = f"r_{k}.csv"
        dump_matrix_csv(os.path.join(dirpath, f"r_{k}.csv"), sys.r_of(k))
        files[f"n_{k}"] = f"n_{k}.csv"
        dump_matrix_csv(os.path.join(dirpath, f"n_{k}.csv"), sys.n_of(k))
    manifest = {
        "format": "gamblet-system",
        "q": sys.q,
        "dim": sys.hier.dim,
        "trunc": sys.trunc,
        "sizes": sys.hier.sizes,
        "j_sizes": sys.hier.j_sizes,
        "hierarchy_sha256": sys.hier.sha256(),
        "files": files,
    }
    with open(os.path.join(dirpath, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_manifest(dirpath) -> dict:
    path = os.path.join(dirpath, MANIFEST_NAME)
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise BadConfig(f"no manifest at {path}") from None
    except json.JSONDecodeError as exc:
        raise BadConfig(f"manifest {path} is not valid JSON: {exc}") from None
    for key in ("format", "q", "dim", "trunc", "sizes", "j_sizes", "hierarchy_sha256", "files"):
        if key not in manifest:
            raise BadConfig(f"manifest {path} is missing field '{key}'")
    if manifest["format"] != "gamblet-system":
        raise BadConfig(f"manifest field 'format' has unexpected value {manifest['format']!r}")
    return manifest


def load_system(dirpath) -> GambletSystem:
    manifest = read_manifest(dirpath)
    with open(os.path.join(dirpath, manifest["files"]["hierarchy"])) as fh:
        hier = hierarchy_from_json(fh.read())
    if hier.sha256() != manifest["hierarchy_sha256"]:
        raise BadConfig("manifest field 'hierarchy_sha256' does not match the stored hierarchy")
    if hier.sizes != list(manifest["sizes"]):
        raise BadConfig("manifest field 'sizes' does not match the stored hierarchy")
    q = hier.q
    if q != manifest["q"]:
        raise BadConfig("manifest field 'q' does not match the stored hierarchy")

    def load(name, rows, cols):
        m = load_matrix_csv(os.path.join(dirpath, manifest["files"][name]))
        if m.shape != (rows, cols):
            raise BadConfig(f"matrix '{name}' has shape {m.shape}, manifest implies ({rows}, {cols})")
        return m

    a_levels = [load(f"a_{k}", hier.sizes[k - 1], hier.sizes[k - 1]) for k in range(1, q + 1)]
    b_levels = [load(f"b_{k}", hier.j_size(k), hier.j_size(k)) for k in range(1, q + 1)]
    r_levels = [load(f"r_{k}", hier.sizes[k - 2], hier.sizes[k - 1]) for k in range(2, q + 1)]
    n_levels = [load(f"n_{k}", hier.sizes[k - 1], hier.j_size(k)) for k in range(2, q + 1)]
    return GambletSystem(
        hier=hier, a_levels=a_levels, b_levels=b_levels,
        r_levels=r_levels, n_levels=n_levels, trunc=float(manifest["trunc"]),
    )
