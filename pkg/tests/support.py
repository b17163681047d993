"""Test scenes and independent oracles shared across the suite."""

from __future__ import annotations

import numpy as np


def smooth_scene(n: int, freq: float = 2.0) -> np.ndarray:
    """Sum of two oblique sinusoids and a Gaussian bump, values in (0, 1).

    ``freq`` counts cycles across the image; low values give a band-limited
    scene, high values one rich in fine detail.
    """
    y, x = np.mgrid[0:n, 0:n] / n
    return (
        0.5
        + 0.2 * np.sin(2 * np.pi * freq * (x + 0.5 * y) + 0.3)
        + 0.15 * np.cos(2 * np.pi * freq * (1.5 * y - 0.5 * x))
        + 0.1 * np.exp(-((x - 0.4) ** 2 + (y - 0.6) ** 2) / (0.08 / freq**2))
    )


def bars_and_rings(n: int, period: int = 10) -> np.ndarray:
    """High-contrast test chart: vertical bars on top, concentric rings below."""
    y, x = np.mgrid[0:n, 0:n]
    bars = ((x // period) % 2).astype(float)
    rings = 0.5 + 0.5 * np.cos(2 * np.pi * np.hypot(x - n / 2, y - n / 2) / period * 1.3)
    return np.where(y < n // 2, 0.2 + 0.6 * bars, 0.2 + 0.6 * rings)


def inside_convex(poly, xs, ys) -> np.ndarray:
    """Point-in-convex-polygon test by edge cross products (either winding)."""
    poly = np.asarray(poly, dtype=float)
    nxt = np.roll(poly, -1, axis=0)
    cross = (nxt[:, 0, None] - poly[:, 0, None]) * (ys[None, :] - poly[:, 1, None]) - (
        nxt[:, 1, None] - poly[:, 1, None]
    ) * (xs[None, :] - poly[:, 0, None])
    return np.all(cross >= 0, axis=0) | np.all(cross <= 0, axis=0)


def mc_overlap(poly, cell_x: float, cell_y: float, n: int, rng, expected: float | None = None):
    """Monte-Carlo area of ``poly`` inside the unit cell centred at ``(cell_x, cell_y)``.

    Returns ``(estimate, standard_error)``.  The standard error is the
    Bernoulli one, ``sqrt(p (1 - p) / n)``, taken at ``p = expected`` when a
    hypothesised area is given (the null-hypothesis error of a test against
    it) and at the estimate otherwise.  A ``1/n`` floor keeps the band
    non-zero for cells the samples never or always hit.
    """
    xs = cell_x - 0.5 + rng.random(n)
    ys = cell_y - 0.5 + rng.random(n)
    est = float(np.count_nonzero(inside_convex(poly, xs, ys))) / n
    p = est if expected is None else min(max(expected, 0.0), 1.0)
    se = max(np.sqrt(p * (1 - p) / n), 1.0 / n)
    return est, se


def exact_overlap(poly, cell_x: float, cell_y: float) -> float:
    """Area of ``poly`` inside a unit cell, by half-space intersection.

    Independent of any clipping code: the region is described as the
    intersection of the polygon's edge half-planes with the cell's four,
    intersected by :class:`scipy.spatial.HalfspaceIntersection` from a
    Chebyshev centre, and measured as a convex hull.  Returns 0 when the
    region has no interior.
    """
    from scipy.optimize import linprog
    from scipy.spatial import ConvexHull, HalfspaceIntersection

    pts = np.asarray(poly, dtype=float)
    area2 = np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
    if area2 < 0:
        pts = pts[::-1]
    nxt = np.roll(pts, -1, axis=0)
    # rows [a, b, c] describe a x + b y + c <= 0; the interior lies left of each edge
    normals = np.column_stack([nxt[:, 1] - pts[:, 1], pts[:, 0] - nxt[:, 0]])
    offsets = -np.sum(normals * pts, axis=1)
    cell = np.array(
        [[-1, 0, cell_x - 0.5], [1, 0, -(cell_x + 0.5)], [0, -1, cell_y - 0.5], [0, 1, -(cell_y + 0.5)]],
        dtype=float,
    )
    hs = np.vstack([np.column_stack([normals, offsets]), cell])
    norm = np.linalg.norm(hs[:, :2], axis=1)
    lp = linprog([0, 0, -1], A_ub=np.column_stack([hs[:, :2], norm]), b_ub=-hs[:, 2],
                 bounds=[(None, None), (None, None), (0, None)])
    if lp.status != 0 or lp.x[2] <= 1e-9:
        return 0.0
    return float(ConvexHull(HalfspaceIntersection(hs, lp.x[:2]).intersections).volume)
