"""Nested measurement hierarchies.

A Hierarchy holds the label counts |I^(k)|, the aggregation matrices
pi^(k,k+1) and the detail selectors W^(k) for q levels of dyadic
subdivision of [0,1]^dim, or for a coordinate-tagged point set binned
into dyadic boxes. Measurement functions are normalized indicators
(cells) or normalized sums (points); both give pi pi^T = I and
W-rows spanning ker(pi) parent-locally.

Conventions used everywhere downstream:
  - level k runs 1..q; pi[k-1] is pi^(k,k+1), w[k-2] is W^(k);
  - 2D labels are flattened x-major: flat = ix * n + iy;
  - J^(1) is identified with I^(1).
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyPointSet, TooLarge, UnsupportedDim
from .numerics import DENSE_CAP

log = logging.getLogger("gamblets")

_SQ2 = np.sqrt(2.0)


@dataclass
class Hierarchy:
    dim: int
    q: int
    h: float
    kind: str  # "dyadic" | "points"
    sizes: list[int]  # |I^(k)|, k = 1..q
    pi: list[np.ndarray]  # pi^(k,k+1), k = 1..q-1
    w: list[np.ndarray]  # W^(k), k = 2..q
    cell_volumes: list[np.ndarray]  # measure of each cell per level (point counts for kind="points")
    cell_centers: list[np.ndarray]  # (|I^(k)|, dim) box centers per level
    points_per_box_range: list[tuple[int, int]] | None = None  # diagnostics, kind="points" only
    merged_levels: tuple[int, ...] = field(default=())  # original level indices dropped as degenerate
    point_fine_label: np.ndarray | None = None  # kind="points": fine-level label index of each input point

    @property
    def n_fine(self) -> int:
        return self.sizes[-1]

    def j_size(self, k: int) -> int:
        """|J^(k)|, with J^(1) := I^(1)."""
        if k == 1:
            return self.sizes[0]
        return self.sizes[k - 1] - self.sizes[k - 2]

    @property
    def j_sizes(self) -> list[int]:
        return [self.j_size(k) for k in range(1, self.q + 1)]

    def pi_of(self, k: int) -> np.ndarray:
        """pi^(k,k+1) for 1 <= k <= q-1."""
        return self.pi[k - 1]

    def w_of(self, k: int) -> np.ndarray:
        """W^(k) for 2 <= k <= q."""
        return self.w[k - 2]

    def pi_prod(self, s: int, k: int) -> np.ndarray:
        """pi^(s,k) = pi^(s,s+1) ... pi^(k-1,k) for s <= k."""
        out = np.eye(self.sizes[k - 1])
        for j in range(k - 1, s - 1, -1):
            out = self.pi[j - 1] @ out
        return out

    def to_json(self) -> str:
        doc = {
            "dim": self.dim,
            "q": self.q,
            "h": self.h,
            "kind": self.kind,
            "sizes": self.sizes,
            "pi": [m.tolist() for m in self.pi],
            "w": [m.tolist() for m in self.w],
            "cell_volumes": [v.tolist() for v in self.cell_volumes],
            "cell_centers": [c.tolist() for c in self.cell_centers],
            "points_per_box_range": self.points_per_box_range,
            "merged_levels": list(self.merged_levels),
            "point_fine_label": None if self.point_fine_label is None else self.point_fine_label.tolist(),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def hierarchy_from_json(text: str) -> Hierarchy:
    doc = json.loads(text)
    ppb = doc.get("points_per_box_range")
    pfl = doc.get("point_fine_label")
    return Hierarchy(
        dim=doc["dim"],
        q=doc["q"],
        h=doc["h"],
        kind=doc["kind"],
        sizes=list(doc["sizes"]),
        pi=[np.array(m, dtype=float) for m in doc["pi"]],
        w=[np.array(m, dtype=float) for m in doc["w"]],
        cell_volumes=[np.array(v, dtype=float) for v in doc["cell_volumes"]],
        cell_centers=[np.array(c, dtype=float).reshape(-1, doc["dim"]) for c in doc["cell_centers"]],
        points_per_box_range=None if ppb is None else [tuple(t) for t in ppb],
        merged_levels=tuple(doc.get("merged_levels", ())),
        point_fine_label=None if pfl is None else np.array(pfl, dtype=int),
    )


def _dyadic_w_1d(k: int) -> np.ndarray:
    """One detail row per parent: (1, -1)/sqrt(2) over its two children."""
    n_par = 2 ** (k - 1)
    w = np.zeros((n_par, 2 ** k))
    for p in range(n_par):
        w[p, 2 * p] = 1.0 / _SQ2
        w[p, 2 * p + 1] = -1.0 / _SQ2
    return w

# Three detail rows per 2D parent over children ordered (SW, SE, NW, NE).
_W2_PATTERNS = np.array(
    [
        [1.0, -1.0, 1.0, -1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
    ]
) / 2.0


def _dyadic_w_2d(k: int) -> np.ndarray:
    n_par = 2 ** (k - 1)
    n_child = 2 ** k
    w = np.zeros((3 * n_par * n_par, n_child * n_child))
    row = 0
    for px in range(n_par):
        for py in range(n_par):
            # children (SW, SE, NW, NE) = offsets (0,0), (1,0), (0,1), (1,1)
            cols = [
                (2 * px + ax) * n_child + (2 * py + ay)
                for ax, ay in ((0, 0), (1, 0), (0, 1), (1, 1))
            ]
            for r in range(3):
                w[row, cols] = _W2_PATTERNS[r]
                row += 1
    return w


def build_dyadic(dim: int, q: int) -> Hierarchy:
    """Uniform dyadic hierarchy on [0,1]^dim with q levels.

    |I^(k)| = 2^(k dim); pi entries are 1/sqrt(2^dim) between a parent
    and each of its children; W rows are Haar detail vectors.
    """
    if dim not in (1, 2):
        raise UnsupportedDim(f"dim must be 1 or 2, got {dim}")
    if q < 1:
        raise UnsupportedDim(f"q must be >= 1, got {q}")
    if 2 ** (q * dim) > DENSE_CAP:
        raise TooLarge(f"fine level would have {2 ** (q * dim)} cells (cap {DENSE_CAP})")

    sizes = [2 ** (k * dim) for k in range(1, q + 1)]
    volumes = [np.full(sizes[k - 1], 0.5 ** (k * dim)) for k in range(1, q + 1)]
    centers = []
    pis = []
    ws = []
    for k in range(1, q + 1):
        n = 2 ** k
        if dim == 1:
            centers.append(((np.arange(n) + 0.5) / n).reshape(-1, 1))
        else:
            ix, iy = np.divmod(np.arange(n * n), n)
            centers.append(np.column_stack(((ix + 0.5) / n, (iy + 0.5) / n)))
    for k in range(1, q):
        n_par = 2 ** k
        n_child = 2 ** (k + 1)
        if dim == 1:
            pi = np.zeros((n_par, n_child))
            for p in range(n_par):
                pi[p, 2 * p] = pi[p, 2 * p + 1] = 1.0 / _SQ2
        else:
            pi = np.zeros((n_par * n_par, n_child * n_child))
            for px in range(n_par):
                for py in range(n_par):
                    row = px * n_par + py
                    for ax in (0, 1):
                        for ay in (0, 1):
                            pi[row, (2 * px + ax) * n_child + (2 * py + ay)] = 0.5
        pis.append(pi)
    for k in range(2, q + 1):
        ws.append(_dyadic_w_1d(k) if dim == 1 else _dyadic_w_2d(k))

    return Hierarchy(
        dim=dim, q=q, h=0.5, kind="dyadic", sizes=sizes, pi=pis, w=ws,
        cell_volumes=volumes, cell_centers=centers,
    )


def _bin_labels(coords: np.ndarray, k: int) -> np.ndarray:
    """Dyadic box label of each point at level k (per-axis integer grid index)."""
    n = 2 ** k
    idx = np.minimum(np.floor(coords * n).astype(int), n - 1)
    return idx


def _gram_schmidt_details(counts: np.ndarray) -> np.ndarray:
    """Orthonormal basis of {x : sum_j sqrt(c_j) x_j = 0} for one sibling group.

    Gram-Schmidt on the weighted difference vectors e_1/sqrt(c_1) - e_t/sqrt(c_t)
    in index order; returns an (m-1) x m array of rows.
    """
    m = len(counts)
    u = np.sqrt(counts.astype(float))
    rows: list[np.ndarray] = []
    for t in range(1, m):
        v = np.zeros(m)
        v[0] = 1.0 / u[0]
        v[t] = -1.0 / u[t]
        for r in rows:
            v -= (v @ r) * r
        nv = np.linalg.norm(v)
        assert nv > 1e-12, "sibling difference vectors must be independent"
        rows.append(v / nv)
    return np.array(rows).reshape(m - 1, m)


def build_from_points(coords: np.ndarray, q: int) -> Hierarchy:
    """Hierarchy over a point set in [0,1]^dim by dyadic box binning.

    Nonempty boxes form the label sets; measurement functions are
    normalized sums over the points of a box, so pi entries are
    sqrt(|S_child| / |S_parent|). Levels whose label count equals the
    next coarser level's are degenerate (empty J) and get merged away,
    with a warning naming them.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if coords.shape[0] == 0:
        raise EmptyPointSet("no points given")
    if coords.ndim != 2 or coords.shape[1] not in (1, 2):
        raise UnsupportedDim(f"points must be (n,1) or (n,2), got shape {coords.shape}")
    if coords.shape[0] > DENSE_CAP:
        raise TooLarge(f"{coords.shape[0]} points exceeds cap {DENSE_CAP}")
    if coords.min() < 0.0 or coords.max() > 1.0:
        raise EmptyPointSet("coordinates must lie in the unit box; normalize first")
    if q < 1:
        raise UnsupportedDim(f"q must be >= 1, got {q}")
    dim = coords.shape[1]

    # Per level: sorted unique box labels, membership of each point, counts.
    levels = []
    for k in range(1, q + 1):
        lab = _bin_labels(coords, k)
        flat = lab[:, 0] if dim == 1 else lab[:, 0] * (2 ** k) + lab[:, 1]
        uniq, point_box = np.unique(flat, return_inverse=True)
        counts = np.bincount(point_box, minlength=len(uniq))
        levels.append({"k": k, "flat": uniq, "point_box": point_box, "counts": counts})

    # pi between consecutive surviving levels; merge degenerate ones.
    merged: list[int] = []
    i = 0
    while i + 1 < len(levels):
        if len(levels[i]["flat"]) == len(levels[i + 1]["flat"]):
            merged.append(levels[i]["k"])
            del levels[i]
        else:
            i += 1
    if merged:
        log.warning("degenerate levels merged (empty detail sets): %s", merged)

    pis = []
    for a, b in zip(levels[:-1], levels[1:]):
        pi = np.zeros((len(a["flat"]), len(b["flat"])))
        pi[a["point_box"], b["point_box"]] = np.sqrt(
            b["counts"][b["point_box"]] / a["counts"][a["point_box"]]
        )
        pis.append(pi)

    ws = []
    for a, b in zip(levels[:-1], levels[1:]):
        n_child = len(b["flat"])
        parent_of_child = np.full(n_child, -1, dtype=int)
        parent_of_child[b["point_box"]] = a["point_box"]
        w_rows = []
        for p in range(len(a["flat"])):
            children = np.flatnonzero(parent_of_child == p)
            if len(children) < 2:
                continue
            block = _gram_schmidt_details(b["counts"][children])
            for r in block:
                row = np.zeros(n_child)
                row[children] = r
                w_rows.append(row)
        ws.append(np.array(w_rows).reshape(len(w_rows), n_child))

    centers = []
    volumes = []
    ppb = []
    for lev in levels:
        n = 2 ** lev["k"]
        flat = lev["flat"]
        if dim == 1:
            c = ((flat + 0.5) / n).reshape(-1, 1)
        else:
            bx, by = np.divmod(flat, n)
            c = np.column_stack(((bx + 0.5) / n, (by + 0.5) / n))
        centers.append(c)
        volumes.append(lev["counts"].astype(float))
        ppb.append((int(lev["counts"].min()), int(lev["counts"].max())))

    return Hierarchy(
        dim=dim,
        q=len(levels),
        h=0.5,
        kind="points",
        sizes=[len(lev["flat"]) for lev in levels],
        pi=pis,
        w=ws,
        cell_volumes=volumes,
        cell_centers=centers,
        points_per_box_range=ppb,
        merged_levels=tuple(merged),
        point_fine_label=levels[-1]["point_box"].copy(),
    )
