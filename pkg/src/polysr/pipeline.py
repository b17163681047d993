"""Datasets, synthetic frames and end-to-end reconstruction.

A dataset directory holds one image and one homography file per frame and
a manifest, ``dataset.txt``, listing them::

    # image            homography
    frame_000.pgm      frame_000.hom
    frame_001.pgm      frame_001.hom

Homography files contain nine whitespace-separated numbers, row-major,
mapping that frame's pixel coordinates onto frame 0.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import operators
from .errors import (
    DataError,
    EmptyFrameSet,
    MalformedHomography,
    MissingFile,
    SingularHomography,
    SingularMatrix,
)
from .geometry import Homography
from .imaging import FrameSet, ImageGrid, average_frames, highres_shape, pack, unpack
from .operators import OperatorKind, SparseOperator
from .pnm import read_image, write_pgm
from .solver import SolveConfig, SolveReport, reconstruct

__all__ = [
    "MANIFEST_NAME",
    "Prior",
    "ReconstructionConfig",
    "build_system",
    "compute_prior",
    "crop_to_zoom",
    "generate_synthetic",
    "interior_mask",
    "interior_relative_error",
    "load_dataset",
    "read_homography",
    "run_reconstruction",
    "save_dataset",
    "total_variation",
    "write_homography",
]

log = logging.getLogger(__name__)

MANIFEST_NAME = "dataset.txt"


class Prior(str, enum.Enum):
    AVERAGE = "average"
    ZERO = "zero"


@dataclass(frozen=True)
class ReconstructionConfig:
    zoom: float = 2.0
    operator: OperatorKind = OperatorKind.POLYGON
    prior: Prior = Prior.AVERAGE
    solver: SolveConfig = field(default_factory=SolveConfig)

    def __post_init__(self):
        if not self.zoom > 1:
            raise ValueError(f"zoom must be > 1, got {self.zoom}")
        object.__setattr__(self, "operator", OperatorKind(self.operator))
        object.__setattr__(self, "prior", Prior(self.prior))

    @property
    def lam(self) -> float:
        return self.solver.lam


# -- files -------------------------------------------------------------------


def read_homography(path) -> Homography:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(f"no such homography file: {path}")
    with open(path) as fh:
        fields = fh.read().split()
    try:
        values = [float(v) for v in fields]
    except ValueError as exc:
        raise MalformedHomography(f"{path}: non-numeric entry") from exc
    if len(values) != 9:
        raise MalformedHomography(f"{path}: expected 9 numbers, found {len(values)}")
    try:
        return Homography(np.reshape(values, (3, 3))).normalized()
    except SingularMatrix as exc:
        raise SingularHomography(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise MalformedHomography(f"{path}: {exc}") from exc


def write_homography(path, h: Homography) -> None:
    with open(path, "w") as fh:
        for row in h.matrix.tolist():
            fh.write(" ".join(repr(v) for v in row) + "\n")


def load_dataset(path) -> FrameSet:
    """Read every frame and registration listed in ``<path>/dataset.txt``."""
    root = Path(path)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise MissingFile(f"no {MANIFEST_NAME} in {root}")
    frames, homs = [], []
    for lineno, line in enumerate(manifest.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{manifest}:{lineno}: expected '<image> <homography>'")
        frames.append(read_image(root / parts[0]))
        homs.append(read_homography(root / parts[1]))
    if not frames:
        raise EmptyFrameSet(f"{manifest} lists no frames")
    if not homs[0].is_identity():
        raise MalformedHomography("the first frame's homography must be the identity")
    # exact identity for the reference frame, whatever rounding the file carried
    homs[0] = Homography.identity()
    return FrameSet(tuple(frames), tuple(homs))


def save_dataset(fs: FrameSet, path, bits: int = 16) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for k, (frame, h) in enumerate(zip(fs.frames, fs.homographies)):
        image_name, hom_name = f"frame_{k:03d}.pgm", f"frame_{k:03d}.hom"
        write_pgm(root / image_name, frame, bits=bits)
        write_homography(root / hom_name, h)
        lines.append(f"{image_name} {hom_name}\n")
    (root / MANIFEST_NAME).write_text("".join(lines))


# -- synthetic data ----------------------------------------------------------


def crop_to_zoom(truth: ImageGrid, z: float) -> ImageGrid:
    """Crop ``truth`` to the largest high-resolution grid an integer low-res grid maps onto."""
    P, Q = math.floor(truth.rows / z), math.floor(truth.cols / z)
    rows, cols = highres_shape((P, Q), z)
    return ImageGrid.from_array(truth.to_array()[:rows, :cols])


def generate_synthetic(
    truth: ImageGrid,
    k: int,
    z: float,
    noise_sigma: float,
    seed=None,
    max_shift: float = 0.5,
    max_rotation: float = 0.0,
) -> tuple[FrameSet, list[Homography]]:
    """Simulate ``k`` registered low-resolution frames of ``truth``.

    Frame 0 is the reference.  Every other frame is displaced by a random
    translation of up to ``max_shift`` low-resolution pixels per axis and a
    rotation of up to ``max_rotation`` degrees about the frame centre.
    Frames are rendered with the polygon operator and corrupted by Gaussian
    noise of standard deviation ``noise_sigma``.  Edge pixels whose footprint
    leaves the scene average the part that remains; a pixel that misses the
    scene entirely takes the scene mean.

    ``truth`` is cropped with :func:`crop_to_zoom` first.  The same seed
    always yields the same frames.
    """
    if k < 1:
        raise ValueError("need at least one frame")
    if not z > 1:
        raise ValueError(f"zoom must be > 1, got {z}")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    truth = crop_to_zoom(truth, z)
    P, Q = math.floor(truth.rows / z), math.floor(truth.cols / z)
    if P < 8 or Q < 8:
        raise ValueError(f"truth too small: frames would be {P}x{Q}, need at least 8x8")
    rng = np.random.default_rng(seed)
    centre = ((Q - 1) / 2.0, (P - 1) / 2.0)
    homs = [Homography.identity()]
    for _ in range(k - 1):
        tx, ty = rng.uniform(-max_shift, max_shift, size=2)
        angle = rng.uniform(-max_rotation, max_rotation) if max_rotation else 0.0
        homs.append(Homography.translation(tx, ty) @ Homography.rotation(angle, centre))
    x = pack(truth)
    frames = []
    for h in homs:
        a = operators.build_polygon(h, z, (P, Q), keep_partial=True)
        b = np.where(operators.row_coverage(a), a @ x, x.mean())
        if noise_sigma:
            b = b + rng.normal(0.0, noise_sigma, size=b.shape)
        frames.append(unpack(b, P, Q))
    return FrameSet(tuple(frames), tuple(homs)), homs


# -- reconstruction ----------------------------------------------------------


def _build_one(args):
    kind, h, z, dims = args
    return operators.build(kind, h, z, dims)


def build_system(fs: FrameSet, z: float, kind, workers: int = 1) -> SparseOperator:
    """Per-frame operators stacked in frame order.

    Frames are independent, so ``workers > 1`` builds them in separate
    processes; the result does not depend on the worker count.
    """
    if len(fs) == 0:
        raise EmptyFrameSet("no frames")
    jobs = [(OperatorKind(kind), h, z, fs.shape) for h in fs.homographies]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            ops = list(pool.map(_build_one, jobs))
    else:
        ops = [_build_one(j) for j in jobs]
    return operators.stack(ops)


def compute_prior(fs: FrameSet, z: float, prior) -> ImageGrid:
    if Prior(prior) is Prior.ZERO:
        rows, cols = highres_shape(fs.shape, z)
        return ImageGrid(rows, cols, np.zeros(rows * cols))
    return average_frames(fs, z)


def run_reconstruction(
    fs: FrameSet,
    cfg: ReconstructionConfig,
    operator: SparseOperator | None = None,
    workers: int = 1,
) -> tuple[ImageGrid, SolveReport]:
    """Reconstruct the high-resolution image from a registered frame set.

    ``operator`` may be supplied to reuse a system already built by
    :func:`build_system` with the same frames and configuration.
    """
    if len(fs) == 0:
        raise EmptyFrameSet("no frames to reconstruct from")
    rows, cols = highres_shape(fs.shape, cfg.zoom)
    a = operator if operator is not None else build_system(fs, cfg.zoom, cfg.operator, workers)
    x0 = pack(compute_prior(fs, cfg.zoom, cfg.prior))
    b = np.concatenate([pack(f) for f in fs.frames])
    log.info("solving %d x %d system (%d non-zeros)", a.n_rows, a.n_cols, a.nnz)
    x, report = reconstruct(a, b, x0, cfg.solver)
    log.info("%d iterations, converged=%s", report.iterations_used, report.converged)
    return unpack(x, rows, cols), report


# -- metrics -----------------------------------------------------------------


def interior_mask(shape: tuple[int, int], z: float) -> np.ndarray:
    """Pixels at least ``ceil(z) + 1`` away from every edge."""
    border = math.ceil(z) + 1
    mask = np.zeros(shape, dtype=bool)
    mask[border : shape[0] - border, border : shape[1] - border] = True
    return mask


def interior_relative_error(estimate: ImageGrid, truth: ImageGrid, z: float) -> float:
    mask = interior_mask(truth.shape, z)
    t = truth.to_array()[mask]
    return float(np.linalg.norm(estimate.to_array()[mask] - t) / np.linalg.norm(t))


def total_variation(img: ImageGrid, mask: np.ndarray | None = None) -> float:
    """Anisotropic total variation, optionally restricted to ``mask``.

    Only differences between two pixels that are both inside the mask count.
    """
    a = img.to_array()
    if mask is None:
        mask = np.ones(a.shape, dtype=bool)
    dx = np.abs(np.diff(a, axis=1))[mask[:, 1:] & mask[:, :-1]]
    dy = np.abs(np.diff(a, axis=0))[mask[1:, :] & mask[:-1, :]]
    return float(dx.sum() + dy.sum())
