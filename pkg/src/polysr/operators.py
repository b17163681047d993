"""Sparse image-formation operators.

Each operator maps a packed high-resolution image onto one packed
low-resolution frame.  Row ``m`` holds the weights with which
high-resolution pixels combine into low-resolution pixel ``m``.  Two
weightings are provided:

* bilinear: the four grid points around the mapped pixel centre;
* polygon: the area of overlap between the mapped pixel footprint and each
  high-resolution cell, normalised to unit row sum.

Rows whose footprint leaves the high-resolution image are left empty.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch
from .geometry import Homography, clip_half_plane, compose_lowres_to_highres, polygon_area
from .imaging import highres_shape

__all__ = [
    "AREA_CUTOFF",
    "OperatorKind",
    "SparseOperator",
    "apply",
    "apply_transpose",
    "bilinear_weights",
    "build",
    "build_bilinear",
    "build_polygon",
    "dump_sparsity",
    "load_sparsity",
    "row_coverage",
    "stack",
]

#: Overlaps below this fraction of a high-resolution cell are dropped.
AREA_CUTOFF = 1e-12
# slack when deciding whether a mapped corner lies on the image boundary
_EDGE_TOL = 1e-9


class OperatorKind(str, enum.Enum):
    BILINEAR = "bilinear"
    POLYGON = "polygon"


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Immutable row-compressed ``n_rows x n_cols`` weight matrix.

    Thin wrapper around a canonical :class:`scipy.sparse.csr_matrix` (sorted,
    duplicate-free column indices, explicit zeros removed).
    """

    matrix: sp.csr_matrix

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=float, copy=True)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        for a in (m.data, m.indices, m.indptr):
            a.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_rows(cls, rows: list[tuple[list[int], list[float]]], n_cols: int) -> SparseOperator:
        """Assemble from per-row ``(columns, weights)`` lists."""
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(c) for c, _ in rows])
        cols = np.fromiter((c for cs, _ in rows for c in cs), dtype=np.int64, count=indptr[-1])
        vals = np.fromiter((v for _, vs in rows for v in vs), dtype=float, count=indptr[-1])
        return cls(sp.csr_matrix((vals, cols, indptr), shape=(len(rows), n_cols)))

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def row(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices and weights of row ``m``."""
        lo, hi = self.matrix.indptr[m], self.matrix.indptr[m + 1]
        return self.matrix.indices[lo:hi], self.matrix.data[lo:hi]

    def row_counts(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, x):
        return apply(self, x)


def bilinear_weights(p) -> list[tuple[tuple[int, int], float]]:
    """Bilinear stencil around ``p = (x, y)``.

    Returns ``[((x, y), weight), ...]`` for the grid points
    ``f00 = (fx, fy)``, ``f01 = (fx, fy + 1)``, ``f10 = (fx + 1, fy)`` and
    ``f11 = (fx + 1, fy + 1)`` where ``fx, fy`` are the floors of ``p``,
    weighted ``(1-u)(1-t)``, ``t(1-u)``, ``u(1-t)`` and ``ut`` with ``u``, ``t``
    the fractional parts of ``x`` and ``y``.
    """
    x, y = p
    fx, fy = math.floor(x), math.floor(y)
    u, t = x - fx, y - fy
    return [
        ((fx, fy), (1 - u) * (1 - t)),
        ((fx, fy + 1), t * (1 - u)),
        ((fx + 1, fy), u * (1 - t)),
        ((fx + 1, fy + 1), u * t),
    ]


def _validate_zoom(z):
    if not z >= 1:
        raise ValueError(f"zoom must be >= 1, got {z}")


def build_bilinear(h_i0: Homography, z: float, low_dims: tuple[int, int]) -> SparseOperator:
    """Bilinear image-formation operator for one frame.

    Each low-resolution pixel centre is mapped into the high-resolution grid
    and weighted onto its four surrounding high-resolution centres.  Zero
    weights are not stored; a row is left empty when any stencil point that
    carries weight lies off the grid.
    """
    _validate_zoom(z)
    P, Q = low_dims
    H, W = highres_shape(low_dims, z)
    to_high = compose_lowres_to_highres(h_i0, z)
    yy, xx = np.mgrid[0:P, 0:Q]
    hx, hy = to_high.transform_many(xx.ravel().astype(float), yy.ravel().astype(float))
    rows = []
    for x, y in zip(hx.tolist(), hy.tolist()):
        cols, vals = [], []
        inside = True
        for (gx, gy), w in bilinear_weights((x, y)):
            if w == 0.0:
                continue
            if not (0 <= gx < W and 0 <= gy < H):
                inside = False
                break
            cols.append(gy * W + gx)
            vals.append(w)
        if inside:
            order = sorted(range(len(cols)), key=cols.__getitem__)
            rows.append(([cols[k] for k in order], [vals[k] for k in order]))
        else:
            rows.append(([], []))
    return SparseOperator.from_rows(rows, H * W)


def _polygon_row(quad, W, H):
    # Overlap of one mapped quad with the cells of its integer bounding box.
    # The quad is cut into one horizontal strip per cell row, and each strip
    # into cells, so every cell costs two half-plane passes instead of four.
    xs = [p[0] for p in quad]
    ys = [p[1] for p in quad]
    i0, i1 = max(math.floor(min(ys)), 0), min(math.ceil(max(ys)), H - 1)
    j0, j1 = max(math.floor(min(xs)), 0), min(math.ceil(max(xs)), W - 1)
    cols, vals = [], []
    for i in range(i0, i1 + 1):
        strip = clip_half_plane(quad, 1, i - 0.5, False)
        if len(strip) < 3:
            continue
        strip = clip_half_plane(strip, 1, i + 0.5, True)
        if len(strip) < 3:
            continue
        for j in range(j0, j1 + 1):
            cell = clip_half_plane(strip, 0, j - 0.5, False)
            if len(cell) < 3:
                continue
            cell = clip_half_plane(cell, 0, j + 0.5, True)
            if len(cell) < 3:
                continue
            a = polygon_area(cell)
            if a > AREA_CUTOFF:
                cols.append(i * W + j)
                vals.append(a)
    return cols, vals


def _mapped_corners(h_i0, z, low_dims):
    # (P*Q, 4, 2) array of low-resolution pixel corners mapped to high-res,
    # in pixel order m = i*Q + j.
    P, Q = low_dims
    to_high = compose_lowres_to_highres(h_i0, z)
    yy, xx = np.mgrid[0:P, 0:Q]
    cx = xx.ravel().astype(float)[:, None] + np.array([-0.5, 0.5, 0.5, -0.5])
    cy = yy.ravel().astype(float)[:, None] + np.array([-0.5, -0.5, 0.5, 0.5])
    hx, hy = to_high.transform_many(cx, cy)
    return np.stack([hx, hy], axis=-1)


def polygon_rows(
    h_i0: Homography,
    z: float,
    low_dims: tuple[int, int],
    pixels: Iterable[int] | None = None,
    normalize: bool = True,
    keep_partial: bool = False,
) -> list[tuple[list[int], list[float]]]:
    """Compute polygon-operator rows for a subset of low-resolution pixels.

    Rows depend only on the immutable inputs, so disjoint pixel ranges can be
    computed independently and concatenated.  With ``normalize=False`` the
    raw overlap areas (in high-resolution cell units) are returned.

    ``keep_partial`` replaces the boundary skip with clipping: a footprint
    that leaves the grid keeps whatever overlap remains inside it.  This
    suits rendering frames from a known scene, not reconstruction.
    """
    _validate_zoom(z)
    H, W = highres_shape(low_dims, z)
    corners = _mapped_corners(h_i0, z, low_dims)
    lo_x, hi_x = -0.5 - _EDGE_TOL, W - 0.5 + _EDGE_TOL
    lo_y, hi_y = -0.5 - _EDGE_TOL, H - 0.5 + _EDGE_TOL
    inside = np.all(
        (corners[..., 0] >= lo_x)
        & (corners[..., 0] <= hi_x)
        & (corners[..., 1] >= lo_y)
        & (corners[..., 1] <= hi_y),
        axis=1,
    )
    if pixels is None:
        pixels = range(corners.shape[0])
    rows = []
    for m in pixels:
        if not (inside[m] or keep_partial):
            rows.append(([], []))
            continue
        quad = [tuple(c) for c in corners[m].tolist()]
        if (
            (quad[1][0] - quad[0][0]) * (quad[2][1] - quad[0][1])
            - (quad[1][1] - quad[0][1]) * (quad[2][0] - quad[0][0])
        ) < 0:
            quad.reverse()
        cols, vals = _polygon_row(quad, W, H)
        if normalize and vals:
            total = math.fsum(vals)
            vals = [v / total for v in vals]
        rows.append((cols, vals))
    return rows


def build_polygon(
    h_i0: Homography,
    z: float,
    low_dims: tuple[int, int],
    normalize: bool = True,
    keep_partial: bool = False,
) -> SparseOperator:
    """Polygon (pixel-overlap) image-formation operator for one frame.

    For every low-resolution pixel the unit cell is mapped into the
    high-resolution grid.  If any mapped corner falls outside the grid the
    row stays empty.  Otherwise each high-resolution cell in the integer
    bounding box receives the area it shares with the mapped cell, and the
    row is scaled to sum to one.
    """
    H, W = highres_shape(low_dims, z)
    rows = polygon_rows(h_i0, z, low_dims, normalize=normalize, keep_partial=keep_partial)
    return SparseOperator.from_rows(rows, H * W)


def build(kind, h_i0: Homography, z: float, low_dims: tuple[int, int]) -> SparseOperator:
    kind = OperatorKind(kind)
    if kind is OperatorKind.BILINEAR:
        return build_bilinear(h_i0, z, low_dims)
    return build_polygon(h_i0, z, low_dims)


def stack(ops: list[SparseOperator]) -> SparseOperator:
    """Vertical concatenation, preserving row order."""
    if not ops:
        raise DimensionMismatch("nothing to stack")
    n_cols = {op.n_cols for op in ops}
    if len(n_cols) != 1:
        raise DimensionMismatch(f"operators disagree on column count: {sorted(n_cols)}")
    if len(ops) == 1:
        return ops[0]
    return SparseOperator(sp.vstack([op.matrix for op in ops], format="csr"))


def apply(a: SparseOperator, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (a.n_cols,):
        raise DimensionMismatch(f"expected a vector of length {a.n_cols}, got shape {x.shape}")
    return a.matrix @ x


def apply_transpose(a: SparseOperator, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (a.n_rows,):
        raise DimensionMismatch(f"expected a vector of length {a.n_rows}, got shape {y.shape}")
    return a.matrix.T @ y


def row_coverage(a: SparseOperator) -> np.ndarray:
    """Boolean flag per row: ``True`` where the row has any weight."""
    return a.row_counts() > 0


def dump_sparsity(a: SparseOperator, fh: TextIO, max_rows: int | None = None) -> None:
    """Write ``row: (col, weight) (col, weight) ...``, one line per row."""
    n = a.n_rows if max_rows is None else min(max_rows, a.n_rows)
    for m in range(n):
        cols, vals = a.row(m)
        pairs = " ".join(f"({c}, {v!r})" for c, v in zip(cols.tolist(), vals.tolist()))
        fh.write(f"{m}: {pairs}\n" if pairs else f"{m}:\n")


def load_sparsity(fh: TextIO, n_cols: int) -> SparseOperator:
    """Parse the :func:`dump_sparsity` format back into an operator."""
    rows = []
    for lineno, line in enumerate(fh):
        line = line.strip()
        if not line:
            continue
        head, _, body = line.partition(":")
        if int(head) != len(rows):
            raise ValueError(f"line {lineno + 1}: expected row {len(rows)}, got {head}")
        cols, vals = [], []
        for chunk in body.split(")"):
            chunk = chunk.strip().lstrip("(")
            if not chunk:
                continue
            c, v = chunk.split(",")
            cols.append(int(c))
            vals.append(float(v))
        rows.append((cols, vals))
    return SparseOperator.from_rows(rows, n_cols)
