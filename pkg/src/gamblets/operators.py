"""Discrete SPD operators: FEM stiffness matrices and grounded graph Laplacians.

The PDE operator is -div(a grad u) on the unit interval/square with
zero Dirichlet boundary, discretized with piecewise (bi)linear
elements. One node is paired with each fine measurement cell, so a
q-level hierarchy with 2^q cells per axis gets 2^q interior nodes per
axis on a grid of mesh width 1/(2^q + 1); the measurement_overlap
matrix absorbs the geometric offset between cells and tents.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    BadConfig,
    DimensionMismatch,
    Disconnected,
    EmptyGrid,
    UnsupportedDim,
)
from .hierarchy import Hierarchy
from .numerics import symmetrize

# 3-point Gauss-Legendre rule on [0,1].
_G3_X = (np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)]) + 1.0) / 2.0
_G3_W = np.array([5.0, 8.0, 5.0]) / 18.0

# 2-point Gauss-Legendre rule on [0,1] (per axis of the 2x2 rule).
_G2_X = (np.array([-1.0, 1.0]) / np.sqrt(3.0) + 1.0) / 2.0
_G2_W = np.array([0.5, 0.5])


@dataclass(frozen=True)
class CoefficientField:
    """Scalar conductivity a(x) with certified bounds 0 < lam_min <= a <= lam_max."""

    dim: int
    lam_min: float
    lam_max: float
    fn: Callable[..., np.ndarray]  # vectorized: fn(x) in 1D, fn(x, y) in 2D

    def __call__(self, *xs) -> np.ndarray:
        return self.fn(*xs)


def coeff_unit(dim: int) -> CoefficientField:
    """a == 1."""
    if dim == 1:
        return CoefficientField(1, 1.0, 1.0, lambda x: np.ones_like(np.asarray(x, dtype=float)))
    if dim == 2:
        return CoefficientField(2, 1.0, 1.0, lambda x, y: np.ones_like(np.asarray(x, dtype=float)))
    raise UnsupportedDim(f"dim must be 1 or 2, got {dim}")


def coeff_1d() -> CoefficientField:
    """Rough 1D conductivity: product over k = 1..10 of (1 + 0.25 cos(2^k x))."""

    def fn(x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        for k in range(1, 11):
            out = out * (1.0 + 0.25 * np.cos(2.0 ** k * x))
        return out

    return CoefficientField(1, 0.75 ** 10, 1.25 ** 10, fn)


def coeff_2d() -> CoefficientField:
    """Rough 2D conductivity.

    Product over k = 1..7 of the factor pair
    (1 + 0.25 cos(2^k pi (x + y))) * (1 + 0.25 cos(2^k pi (x - 3y))).
    """

    def fn(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.ones(np.broadcast(x, y).shape)
        for k in range(1, 8):
            f = 2.0 ** k * np.pi
            out = out * (1.0 + 0.25 * np.cos(f * (x + y))) * (1.0 + 0.25 * np.cos(f * (x - 3.0 * y)))
        return out

    return CoefficientField(2, 0.75 ** 14, 1.25 ** 14, fn)


def coeff_from_cells(values: np.ndarray, dim: int) -> CoefficientField:
    """Piecewise-constant coefficient given per fine-cell values.

    1D: values[j] on cell [j/n, (j+1)/n). 2D: values is n x n with
    values[ix, iy] on the cell at grid position (ix, iy).
    """
    values = np.asarray(values, dtype=float)
    if values.min() <= 0.0:
        raise BadConfig("coefficient cell values must be positive")
    if dim == 1:
        n = values.shape[0]

        def fn(x):
            idx = np.minimum((np.asarray(x, dtype=float) * n).astype(int), n - 1)
            return values[idx]

        return CoefficientField(1, float(values.min()), float(values.max()), fn)
    if dim == 2:
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise BadConfig(f"2D coefficient file must be a square grid, got shape {values.shape}")
        n = values.shape[0]

        def fn(x, y):
            ix = np.minimum((np.asarray(x, dtype=float) * n).astype(int), n - 1)
            iy = np.minimum((np.asarray(y, dtype=float) * n).astype(int), n - 1)
            return values[ix, iy]

        return CoefficientField(2, float(values.min()), float(values.max()), fn)
    raise UnsupportedDim(f"dim must be 1 or 2, got {dim}")


@dataclass
class DiscreteOperator:
    A: np.ndarray  # stiffness (or grounded Laplacian), SPD, N x N
    mass: np.ndarray  # L2 Gram matrix of the fine basis (identity for graphs)
    dim: int
    s: int  # operator smoothness exponent (1 throughout)
    q: int  # levels of the companion hierarchy
    mesh_width: float | None  # FEM only
    kind: str  # "pde-1d" | "pde-2d" | "graph"
    node_coords: np.ndarray  # (N, dim) node or vertex positions

    @property
    def n(self) -> int:
        return self.A.shape[0]


def _fem_1d(field: CoefficientField, q: int) -> DiscreteOperator:
    n = 2 ** q
    hm = 1.0 / (n + 1)
    # Element e = [e hm, (e+1) hm] couples nodes e-1 and e (0-based, boundary dropped).
    edges = np.arange(n + 1) * hm
    gx = edges[:, None] + hm * _G3_X[None, :]
    a_int = (field(gx) @ _G3_W) * hm  # integral of a over each element
    k_e = a_int / hm ** 2

    A = np.zeros((n, n))
    M = np.zeros((n, n))
    m_diag, m_off = hm / 3.0, hm / 6.0
    for e in range(n + 1):
        left, right = e - 1, e
        if left >= 0:
            A[left, left] += k_e[e]
            M[left, left] += m_diag
        if right < n:
            A[right, right] += k_e[e]
            M[right, right] += m_diag
        if left >= 0 and right < n:
            A[left, right] -= k_e[e]
            A[right, left] -= k_e[e]
            M[left, right] += m_off
            M[right, left] += m_off
    coords = ((np.arange(n) + 1) * hm).reshape(-1, 1)
    return DiscreteOperator(
        A=symmetrize(A), mass=symmetrize(M), dim=1, s=1, q=q,
        mesh_width=hm, kind="pde-1d", node_coords=coords,
    )


def _fem_2d(field: CoefficientField, q: int) -> DiscreteOperator:
    n = 2 ** q
    hm = 1.0 / (n + 1)
    N = n * n

    # Reference bilinear shape functions on [0,1]^2 at the 2x2 Gauss points.
    gp = [(sx, sy) for sx in _G2_X for sy in _G2_X]
    gw = [wx * wy for wx in _G2_W for wy in _G2_W]
    shape = np.array([[(1 - sx) * (1 - sy), (1 - sx) * sy, sx * (1 - sy), sx * sy] for sx, sy in gp])
    dshape = np.array(
        [
            [[-(1 - sy), -(1 - sx)], [-sy, (1 - sx)], [(1 - sy), -sx], [sy, sx]]
            for sx, sy in gp
        ]
    )  # (gauss, local node, xy), gradients on the reference square

    A = np.zeros((N, N))
    M = np.zeros((N, N))
    # Local nodes of element (ex, ey): (ex-1+dx, ey-1+dy), dx, dy in {0,1},
    # ordered (0,0), (0,1), (1,0), (1,1) to match shape above.
    local_off = [(0, 0), (0, 1), (1, 0), (1, 1)]
    for ex in range(n + 1):
        for ey in range(n + 1):
            nodes = []
            for dx, dy in local_off:
                jx, jy = ex - 1 + dx, ey - 1 + dy
                nodes.append(jx * n + jy if 0 <= jx < n and 0 <= jy < n else -1)
            ke = np.zeros((4, 4))
            me = np.zeros((4, 4))
            for g, (sx, sy) in enumerate(gp):
                xg = (ex + sx) * hm
                yg = (ey + sy) * hm
                a_g = float(field(xg, yg))
                grads = dshape[g] / hm  # physical gradients
                ke += gw[g] * hm ** 2 * a_g * (grads @ grads.T)
                me += gw[g] * hm ** 2 * np.outer(shape[g], shape[g])
            for i_loc in range(4):
                gi = nodes[i_loc]
                if gi < 0:
                    continue
                for j_loc in range(4):
                    gj = nodes[j_loc]
                    if gj < 0:
                        continue
                    A[gi, gj] += ke[i_loc, j_loc]
                    M[gi, gj] += me[i_loc, j_loc]
    jx, jy = np.divmod(np.arange(N), n)
    coords = np.column_stack(((jx + 1) * hm, (jy + 1) * hm))
    return DiscreteOperator(
        A=symmetrize(A), mass=symmetrize(M), dim=2, s=1, q=q,
        mesh_width=hm, kind="pde-2d", node_coords=coords,
    )


def assemble_fem(field: CoefficientField, hier: Hierarchy) -> DiscreteOperator:
    """Stiffness and consistent mass matrix on the FEM grid paired with hier."""
    if hier.kind != "dyadic":
        raise UnsupportedDim("FEM assembly needs a dyadic hierarchy")
    if field.dim != hier.dim:
        raise DimensionMismatch(f"coefficient dim {field.dim} != hierarchy dim {hier.dim}")
    if hier.dim == 1:
        return _fem_1d(field, hier.q)
    return _fem_2d(field, hier.q)


@dataclass(frozen=True)
class GeometricGraph:
    coords: np.ndarray  # (n, 2), normalized to [0,1]^2
    edges: np.ndarray  # (m, 2) int, undirected, i < j
    ground: int = 0  # grounded vertex index i0

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def _normalize_coords(raw: np.ndarray) -> np.ndarray:
    out = raw.astype(float).copy()
    for ax in range(out.shape[1]):
        lo, hi = out[:, ax].min(), out[:, ax].max()
        out[:, ax] = 0.5 if hi == lo else (out[:, ax] - lo) / (hi - lo)
    return out


def make_graph(coords: np.ndarray, edges, ground: int = 0) -> GeometricGraph:
    """Validate and normalize a vertex-coordinate graph."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    n = coords.shape[0]
    if n == 0:
        raise EmptyGrid("graph has no vertices")
    if coords.shape[1] != 2:
        raise UnsupportedDim("graph vertices need (x, y) coordinates")
    if len(edges) and (edges.min() < 0 or edges.max() >= n):
        raise BadConfig(f"edge endpoint out of range 0..{n - 1}")
    if np.any(edges[:, 0] == edges[:, 1]):
        raise BadConfig("self-loops are not allowed")
    edges = np.sort(edges, axis=1)
    keys = edges[:, 0] * n + edges[:, 1]
    if len(np.unique(keys)) != len(keys):
        raise BadConfig("duplicate edges are not allowed")
    if not (0 <= ground < n):
        raise BadConfig(f"ground index {ground} out of range 0..{n - 1}")
    order = np.argsort(keys, kind="stable")
    return GeometricGraph(coords=_normalize_coords(coords), edges=edges[order], ground=ground)


def parse_graph(text: str, ground: int = 0) -> GeometricGraph:
    """Parse the plain-text graph format.

    Header `N M`, then N lines `idx x y`, then M lines `i j` (0-based).
    """
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise BadConfig("graph file must start with a header line 'N M'")
    n, m = int(rows[0][0]), int(rows[0][1])
    if len(rows) != 1 + n + m:
        raise BadConfig(f"graph file should have {1 + n + m} content lines, found {len(rows)}")
    coords = np.zeros((n, 2))
    seen = np.zeros(n, dtype=bool)
    for ln in rows[1 : 1 + n]:
        if len(ln) != 3:
            raise BadConfig(f"vertex line must be 'idx x y', got {' '.join(ln)!r}")
        idx = int(ln[0])
        if not (0 <= idx < n) or seen[idx]:
            raise BadConfig(f"bad or repeated vertex index {idx}")
        seen[idx] = True
        coords[idx] = (float(ln[1]), float(ln[2]))
    edges = []
    for ln in rows[1 + n :]:
        if len(ln) != 2:
            raise BadConfig(f"edge line must be 'i j', got {' '.join(ln)!r}")
        edges.append((int(ln[0]), int(ln[1])))
    return make_graph(coords, np.array(edges, dtype=int).reshape(-1, 2), ground=ground)


def load_graph(path, ground: int = 0) -> GeometricGraph:
    with open(path) as fh:
        return parse_graph(fh.read(), ground=ground)


def synthetic_grid(n: int, ground: int = 0) -> GeometricGraph:
    """n x n four-neighbor grid graph on the unit square."""
    if n <= 0:
        raise EmptyGrid(f"grid size must be positive, got {n}")
    ix, iy = np.divmod(np.arange(n * n), n)
    denom = max(n - 1, 1)
    coords = np.column_stack((ix / denom, iy / denom))
    edges = []
    for x in range(n):
        for y in range(n):
            v = x * n + y
            if y + 1 < n:
                edges.append((v, v + 1))
            if x + 1 < n:
                edges.append((v, v + n))
    return make_graph(coords, np.array(edges, dtype=int).reshape(-1, 2), ground=ground)


def grounded_laplacian(g: GeometricGraph) -> DiscreteOperator:
    """Graph Laplacian with the grounded vertex's row and column deleted."""
    n = g.n
    if len(g.edges):
        data = np.ones(len(g.edges))
        adj = csr_matrix((data, (g.edges[:, 0], g.edges[:, 1])), shape=(n, n))
        adj = adj + adj.T
        n_comp, _ = connected_components(adj, directed=False)
    else:
        n_comp = n
    if n_comp != 1:
        raise Disconnected(f"graph has {n_comp} connected components; need 1")
    L = np.zeros((n, n))
    for i, j in g.edges:
        L[i, i] += 1.0
        L[j, j] += 1.0
        L[i, j] -= 1.0
        L[j, i] -= 1.0
    keep = np.array([v for v in range(n) if v != g.ground])
    A = L[np.ix_(keep, keep)]
    return DiscreteOperator(
        A=symmetrize(A), mass=np.eye(n - 1), dim=2, s=1, q=0,
        mesh_width=None, kind="graph", node_coords=g.coords[keep],
    )


def _tent_antiderivative(t: np.ndarray, centers: np.ndarray, hm: float) -> np.ndarray:
    """Integral from 0 to t of the unit tent centered at each node (broadcasts)."""
    u = (t[None, :] - (centers[:, None] - hm)) / hm  # tent support is u in [0, 2]
    u = np.clip(u, 0.0, 2.0)
    rising = 0.5 * u ** 2
    falling = 0.5 + (u - 1.0) - 0.5 * (u - 1.0) ** 2
    return hm * np.where(u <= 1.0, rising, falling)


def _overlap_1d(q: int) -> np.ndarray:
    """Per-axis overlap: rows tents (2^q nodes), cols cells (2^q), including cell normalization."""
    n = 2 ** q
    hm = 1.0 / (n + 1)
    w = 1.0 / n
    centers = (np.arange(n) + 1) * hm
    edges = np.arange(n + 1) * w
    G = _tent_antiderivative(edges, centers, hm)
    return (G[:, 1:] - G[:, :-1]) / np.sqrt(w)


def measurement_overlap(hier: Hierarchy, op: DiscreteOperator) -> np.ndarray:
    """Matrix O with O_ij = integral of phi^(q)_j times tent_i.

    Maps pre-Haar coefficients of f to the FEM load vector, exactly
    (closed-form integrals of piecewise-linear times indicator).
    """
    if hier.kind != "dyadic" or op.kind == "graph":
        raise DimensionMismatch("measurement_overlap applies to dyadic FEM problems")
    if op.n != hier.n_fine or op.q != hier.q:
        raise DimensionMismatch(f"operator size {op.n} (q={op.q}) vs hierarchy fine size {hier.n_fine} (q={hier.q})")
    o1 = _overlap_1d(hier.q)
    if hier.dim == 1:
        return o1
    return np.kron(o1, o1)
