"""Raster containers, lexicographic packing and the averaged prior."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyFrameSet, InconsistentDimensions
from .geometry import Homography, invert

__all__ = [
    "FrameSet",
    "ImageGrid",
    "average_frames",
    "highres_shape",
    "pack",
    "round_half_up",
    "sample_bilinear",
    "unpack",
    "upscale",
]


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def highres_shape(shape: tuple[int, int], z: float) -> tuple[int, int]:
    """High-resolution grid dimensions ``(round(z P), round(z Q))``."""
    return round_half_up(z * shape[0]), round_half_up(z * shape[1])


@dataclass(frozen=True)
class ImageGrid:
    """Single-channel ``rows x cols`` raster stored row-major.

    Intensities are nominally in ``[0, 1]``; solver output may stray outside
    that range and is only clamped on export.
    """

    rows: int
    cols: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=float).reshape(-1)
        if data.size != self.rows * self.cols:
            raise DimensionMismatch(
                f"{data.size} values do not fill a {self.rows}x{self.cols} grid"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("image contains non-finite intensities")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array) -> ImageGrid:
        a = np.asarray(array, dtype=float)
        if a.ndim != 2:
            raise DimensionMismatch(f"expected a 2-D array, got {a.ndim}-D")
        return cls(a.shape[0], a.shape[1], a.reshape(-1))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def to_array(self) -> np.ndarray:
        return self.data.reshape(self.rows, self.cols)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageGrid):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None


@dataclass(frozen=True)
class FrameSet:
    """Low-resolution frames with their registrations onto frame 0.

    ``homographies[i]`` maps frame-``i`` pixel coordinates onto the
    reference frame, so entry 0 is the identity.
    """

    frames: tuple[ImageGrid, ...]
    homographies: tuple[Homography, ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "homographies", tuple(self.homographies))
        if len(self.frames) != len(self.homographies):
            raise DimensionMismatch(
                f"{len(self.frames)} frames but {len(self.homographies)} homographies"
            )
        if self.frames:
            shape = self.frames[0].shape
            for k, f in enumerate(self.frames):
                if f.shape != shape:
                    raise InconsistentDimensions(
                        f"frame {k} is {f.rows}x{f.cols}, frame 0 is {shape[0]}x{shape[1]}"
                    )
            if not self.homographies[0].is_identity():
                raise ValueError("the reference frame's homography must be the identity")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple[int, int]:
        if not self.frames:
            raise EmptyFrameSet("frame set is empty")
        return self.frames[0].shape


def pack(img: ImageGrid) -> np.ndarray:
    """Lexicographic (row-major) vector: element ``i * cols + j`` is pixel ``(i, j)``."""
    return img.data.copy()


def unpack(v, rows: int, cols: int) -> ImageGrid:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != rows * cols:
        raise DimensionMismatch(f"vector of length {v.size} cannot be reshaped to {rows}x{cols}")
    return ImageGrid(rows, cols, v)


def sample_bilinear(image: np.ndarray, xs, ys, tol: float = 1e-9):
    """Bilinearly sample ``image`` at continuous pixel coordinates.

    Returns ``(values, covered)``.  A sample is covered when it lies within
    the hull of pixel centres ``[0, cols - 1] x [0, rows - 1]`` (``tol``
    slack).  Uncovered samples get value 0.
    """
    rows, cols = image.shape
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    covered = (xs >= -tol) & (xs <= cols - 1 + tol) & (ys >= -tol) & (ys <= rows - 1 + tol)
    xc = np.clip(xs, 0.0, cols - 1)
    yc = np.clip(ys, 0.0, rows - 1)
    x0 = np.minimum(np.floor(xc).astype(int), max(cols - 2, 0))
    y0 = np.minimum(np.floor(yc).astype(int), max(rows - 2, 0))
    x1 = np.minimum(x0 + 1, cols - 1)
    y1 = np.minimum(y0 + 1, rows - 1)
    u = xc - x0
    t = yc - y0
    # nested lerps keep constant images bit-exact
    top = image[y0, x0] + u * (image[y0, x1] - image[y0, x0])
    bottom = image[y1, x0] + u * (image[y1, x1] - image[y1, x0])
    values = top + t * (bottom - top)
    return np.where(covered, values, 0.0), covered


def _highres_centres(shape, z):
    rows, cols = highres_shape(shape, z)
    yy, xx = np.mgrid[0:rows, 0:cols]
    return rows, cols, xx.astype(float) / z, yy.astype(float) / z


def upscale(img: ImageGrid, z: float) -> ImageGrid:
    """Bilinear magnification by ``z`` under the integer-centre convention.

    High-resolution pixel ``(i, j)`` samples the source at ``(j / z, i / z)``;
    samples beyond the last source centre are clamped to the edge.
    """
    if not z >= 1:
        raise ValueError(f"zoom must be >= 1, got {z}")
    rows, cols, xs, ys = _highres_centres(img.shape, z)
    values, _ = sample_bilinear(
        img.to_array(), np.clip(xs, 0.0, img.cols - 1), np.clip(ys, 0.0, img.rows - 1)
    )
    return ImageGrid(rows, cols, values)


def average_frames(fs: FrameSet, z: float) -> ImageGrid:
    """Registered, upscaled mean of all frames (the default prior).

    Each high-resolution centre is taken back to reference coordinates, then
    into every frame via the inverse registration, and sampled bilinearly.
    Frames that do not cover a pixel are left out of its mean.  Pixels that
    no frame covers (past the last low-resolution centre) take the mean of
    every frame sampled at the nearest covered position.
    """
    if len(fs) == 0:
        raise EmptyFrameSet("cannot average an empty frame set")
    rows, cols, xs, ys = _highres_centres(fs.shape, z)
    P, Q = fs.shape
    total = np.zeros((rows, cols))
    count = np.zeros((rows, cols))
    clamped = np.zeros((rows, cols))
    for frame, h in zip(fs.frames, fs.homographies):
        a = frame.to_array()
        fx, fy = invert(h).transform_many(xs, ys)
        values, covered = sample_bilinear(a, fx, fy)
        total += values
        count += covered
        clamped += sample_bilinear(a, np.clip(fx, 0.0, Q - 1), np.clip(fy, 0.0, P - 1))[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), clamped / len(fs))
    return ImageGrid(rows, cols, mean)
