"""Diagnostic figures written next to the reconstruction output.

Figures are built on bare :class:`~matplotlib.figure.Figure` objects with the
Agg canvas, so nothing here touches pyplot's global state.
"""

from __future__ import annotations

import os

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .imaging import ImageGrid
from .operators import SparseOperator
from .solver import SolveReport

__all__ = ["plot_images", "plot_residuals", "plot_sparsity", "write_report_figures"]

FIGURE_WIDTH = 6.0


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.savefig(os.fspath(path), dpi=100, metadata={"Software": None})


def plot_sparsity(a: SparseOperator, path, max_rows: int = 64, title: str | None = None) -> None:
    """Spy plot of the leading rows, restricted to the columns they touch."""
    n = min(max_rows, a.n_rows)
    block = a.matrix[:n]
    cols = np.unique(block.indices)
    fig = Figure(figsize=(FIGURE_WIDTH, FIGURE_WIDTH * 0.6))
    ax = fig.add_subplot()
    if cols.size:
        ax.spy(block[:, cols[0] : cols[-1] + 1], markersize=2, aspect="auto")
        ax.set_xlabel(f"column - {cols[0]}")
    ax.set_ylabel("row")
    ax.set_title(title or f"first {n} rows, {block.nnz} non-zeros")
    _save(fig, path)


def plot_residuals(report: SolveReport, path, title: str = "residual norm") -> None:
    fig = Figure(figsize=(FIGURE_WIDTH, FIGURE_WIDTH * 0.6))
    ax = fig.add_subplot()
    hist = np.asarray(report.residual_history)
    ax.semilogy(np.arange(hist.size), np.maximum(hist, np.finfo(float).tiny))
    ax.set_xlabel("iteration")
    ax.set_ylabel(r"$\|A\,\delta x - \hat b\|$")
    ax.set_title(title + ("" if report.converged else " (not converged)"))
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_images(images: dict[str, ImageGrid], path) -> None:
    """Side-by-side greyscale panels on a common ``[0, 1]`` scale."""
    n = len(images)
    fig = Figure(figsize=(3.0 * n, 3.2))
    for k, (name, img) in enumerate(images.items()):
        ax = fig.add_subplot(1, n, k + 1)
        ax.imshow(img.to_array(), cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
        ax.set_title(name)
        ax.set_axis_off()
    fig.tight_layout()
    _save(fig, path)


def write_report_figures(directory, a: SparseOperator, report: SolveReport, images: dict[str, ImageGrid]) -> list[str]:
    """Write the standard figure set; returns the paths written."""
    os.makedirs(directory, exist_ok=True)
    paths = [
        os.path.join(directory, "sparsity.png"),
        os.path.join(directory, "residuals.png"),
        os.path.join(directory, "images.png"),
    ]
    plot_sparsity(a, paths[0])
    plot_residuals(report, paths[1])
    plot_images(images, paths[2])
    return paths
