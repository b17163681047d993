"""Multi-frame super-resolution with bilinear and polygon-overlap operators."""

from .geometry import AxisRect, Homography, Point2
from .imaging import FrameSet, ImageGrid, average_frames, pack, unpack, upscale
from .operators import OperatorKind, SparseOperator, build_bilinear, build_polygon, stack
from .pipeline import (
    Prior,
    ReconstructionConfig,
    generate_synthetic,
    load_dataset,
    run_reconstruction,
)
from .solver import SolveConfig, SolveMethod, SolveReport, reconstruct, solve_damped

__version__ = "0.1.0"

__all__ = [
    "AxisRect",
    "FrameSet",
    "Homography",
    "ImageGrid",
    "OperatorKind",
    "Point2",
    "Prior",
    "ReconstructionConfig",
    "SolveConfig",
    "SolveMethod",
    "SolveReport",
    "SparseOperator",
    "average_frames",
    "build_bilinear",
    "build_polygon",
    "generate_synthetic",
    "load_dataset",
    "pack",
    "reconstruct",
    "run_reconstruction",
    "solve_damped",
    "stack",
    "unpack",
    "upscale",
]
