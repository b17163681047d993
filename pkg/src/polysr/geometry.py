"""Planar geometry: homographies, convex polygon clipping and areas.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row.  Pixel
``(row i, col j)`` is centred on ``(x=j, y=i)`` and covers the unit cell
``[j - 0.5, j + 0.5] x [i - 0.5, i + 0.5]``.  Homogeneous vectors are
``(x, y, 1)``.

Polygons are plain sequences of ``(x, y)`` pairs.  An empty sequence is the
null polygon returned when a clip removes everything.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateProjection, EmptyPolygon, SingularMatrix

__all__ = [
    "DEGENERACY_TOL",
    "AxisRect",
    "Homography",
    "Point2",
    "bounding_box",
    "clip_half_plane",
    "clip_to_rect",
    "compose_lowres_to_highres",
    "invert",
    "is_convex",
    "pixel_quad",
    "polygon_area",
    "signed_area",
    "transform_point",
    "transform_polygon",
]

#: Relative tolerance for singular matrices and vanishing perspective terms.
DEGENERACY_TOL = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


Polygon = Sequence[tuple[float, float]]


class AxisRect(NamedTuple):
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


class Homography:
    """Invertible 3x3 projective transform acting on ``(x, y, 1)``.

    Singularity is judged relative to the largest entry so that the test does
    not depend on the arbitrary overall scale of the matrix.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix) -> None:
        m = np.array(matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("homography has non-finite entries")
        scale = np.abs(m).max()
        if scale == 0.0 or abs(np.linalg.det(m)) <= DEGENERACY_TOL * scale**3:
            raise SingularMatrix("homography is singular")
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def identity(cls) -> Homography:
        return cls(np.eye(3))

    @classmethod
    def scale(cls, sx: float, sy: float | None = None) -> Homography:
        return cls(np.diag([sx, sx if sy is None else sy, 1.0]))

    @classmethod
    def translation(cls, tx: float, ty: float) -> Homography:
        return cls([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])

    @classmethod
    def rotation(cls, degrees: float, center: tuple[float, float] = (0.0, 0.0)) -> Homography:
        """Rotation by ``degrees`` about ``center``.

        Positive angles turn the +x axis towards +y.
        """
        a = math.radians(degrees)
        c, s = math.cos(a), math.sin(a)
        cx, cy = center
        return cls(
            [
                [c, -s, cx - c * cx + s * cy],
                [s, c, cy - s * cx - c * cy],
                [0.0, 0.0, 1.0],
            ]
        )

    def __matmul__(self, other: Homography) -> Homography:
        return Homography(self.matrix @ other.matrix)

    def __call__(self, p) -> Point2:
        return transform_point(self, p)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Homography):
            return NotImplemented
        return bool(np.array_equal(self.matrix, other.matrix))

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def __repr__(self) -> str:
        rows = ", ".join(str(list(r)) for r in self.matrix.tolist())
        return f"Homography([{rows}])"

    def normalized(self) -> Homography:
        """Return the same transform scaled so that ``m[2, 2] == 1``."""
        w = self.matrix[2, 2]
        if abs(w) <= DEGENERACY_TOL * np.abs(self.matrix).max():
            raise SingularMatrix("cannot normalize: m[2, 2] vanishes")
        return Homography(self.matrix / w)

    def is_identity(self, atol: float = 1e-9) -> bool:
        return bool(np.allclose(self.normalized().matrix, np.eye(3), rtol=0.0, atol=atol))

    def transform_many(self, xs, ys) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised :func:`transform_point` over coordinate arrays."""
        m = self.matrix
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        u = m[0, 0] * xs + m[0, 1] * ys + m[0, 2]
        v = m[1, 0] * xs + m[1, 1] * ys + m[1, 2]
        w = m[2, 0] * xs + m[2, 1] * ys + m[2, 2]
        if np.any(np.abs(w) <= DEGENERACY_TOL * np.abs(m).max()):
            raise DegenerateProjection("point maps to infinity")
        return u / w, v / w


def transform_point(h: Homography, p) -> Point2:
    """Map ``p`` through ``h`` with perspective division."""
    x, y = p
    m = h.matrix
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) <= DEGENERACY_TOL * np.abs(m).max():
        raise DegenerateProjection(f"point {(x, y)} maps to infinity")
    return Point2(
        float((m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w),
        float((m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w),
    )


def invert(h: Homography) -> Homography:
    return Homography(np.linalg.inv(h.matrix))


def compose_lowres_to_highres(h_i0: Homography, z: float) -> Homography:
    """Map frame-``i`` low-resolution coordinates onto the high-resolution grid.

    ``h_i0`` registers frame ``i`` onto the reference frame; the reference is
    then magnified by ``z`` about the origin.  The result is
    ``diag(z, z, 1) @ h_i0``, i.e. the inverse of the high-to-low map
    ``inv(h_i0) @ diag(1/z, 1/z, 1)``.
    """
    if not z >= 1:
        raise ValueError(f"zoom must be >= 1, got {z}")
    return Homography(np.diag([z, z, 1.0]) @ h_i0.matrix)


def signed_area(poly: Polygon) -> float:
    """Shoelace sum; positive for counter-clockwise vertex order."""
    n = len(poly)
    if n < 3:
        return 0.0
    s = 0.0
    x0, y0 = poly[-1]
    for x1, y1 in poly:
        s += x0 * y1 - x1 * y0
        x0, y0 = x1, y1
    return 0.5 * s


def polygon_area(poly: Polygon) -> float:
    return abs(signed_area(poly))


def is_convex(poly: Polygon, tol: float = 1e-12) -> bool:
    """True if all turns share one orientation (collinear turns allowed)."""
    n = len(poly)
    if n < 3:
        return n == 0
    sign = 0
    for k in range(n):
        ax, ay = poly[k - 2]
        bx, by = poly[k - 1]
        cx, cy = poly[k]
        cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx)
        if abs(cross) <= tol:
            continue
        s = 1 if cross > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return True


def pixel_quad(col: float, row: float) -> list[Point2]:
    """Corners of the unit cell centred on pixel ``(row, col)``.

    Ordered as in the classic corner listing ``x = (-.5, .5, .5, -.5)``,
    ``y = (-.5, -.5, .5, .5)`` for pixel ``(0, 0)``; that order has a
    positive shoelace sum.
    """
    return [
        Point2(col - 0.5, row - 0.5),
        Point2(col + 0.5, row - 0.5),
        Point2(col + 0.5, row + 0.5),
        Point2(col - 0.5, row + 0.5),
    ]


def transform_polygon(h: Homography, poly: Polygon) -> list[Point2]:
    """Map every vertex through ``h`` and normalise winding to positive area.

    A projective map can collapse a quad to near-collinear points; the
    degenerate polygon is returned as is and yields zero area downstream.
    """
    out = [transform_point(h, p) for p in poly]
    if signed_area(out) < 0:
        out.reverse()
    return out


def clip_half_plane(poly: Polygon, axis: int, bound: float, keep_below: bool) -> list:
    """Cut a convex polygon by one axis-aligned boundary.

    Keeps the part with coordinate ``axis`` (0 for x, 1 for y) ``<= bound``
    when ``keep_below`` is set, ``>= bound`` otherwise.  Edge crossings are
    found from the parametric form ``p0 + t (p1 - p0)``.
    """
    if len(poly) == 0:
        return []
    out = []
    prev = poly[-1]
    pv = prev[axis]
    prev_in = pv <= bound if keep_below else pv >= bound
    for cur in poly:
        cv = cur[axis]
        cur_in = cv <= bound if keep_below else cv >= bound
        if cur_in != prev_in:
            t = (bound - pv) / (cv - pv)
            if axis == 0:
                out.append((bound, prev[1] + t * (cur[1] - prev[1])))
            else:
                out.append((prev[0] + t * (cur[0] - prev[0]), bound))
        if cur_in:
            out.append(cur)
        prev, pv, prev_in = cur, cv, cur_in
    return out


def clip_to_rect(poly: Polygon, rect: AxisRect) -> list[tuple[float, float]]:
    """Intersect a convex polygon with an axis-aligned rectangle.

    The polygon is cut against the four boundary half-planes in turn.  The
    result is convex, keeps the input winding, and is empty (``[]``) when
    fewer than three vertices survive.
    """
    out = list(poly)
    out = clip_half_plane(out, 0, rect.x_min, keep_below=False)
    out = clip_half_plane(out, 0, rect.x_max, keep_below=True)
    out = clip_half_plane(out, 1, rect.y_min, keep_below=False)
    out = clip_half_plane(out, 1, rect.y_max, keep_below=True)
    return out if len(out) >= 3 else []


def bounding_box(poly: Polygon) -> AxisRect:
    """Integer-snapped bounding box: floor of the minima, ceil of the maxima."""
    if len(poly) == 0:
        raise EmptyPolygon("bounding box of an empty polygon")
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    return AxisRect(
        float(math.floor(min(xs))),
        float(math.ceil(max(xs))),
        float(math.floor(min(ys))),
        float(math.ceil(max(ys))),
    )
