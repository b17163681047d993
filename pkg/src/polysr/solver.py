"""Damped least-squares solves around a prior estimate.

The correction ``dx`` minimises ``||A dx - b_hat||^2 + lam ||dx||^2`` with
``b_hat = b - A x0``; the estimate is ``x0 + dx``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .operators import SparseOperator, apply, apply_transpose, row_coverage

__all__ = [
    "SolveConfig",
    "SolveMethod",
    "SolveReport",
    "damped_objective",
    "reconstruct",
    "solve_damped",
]

log = logging.getLogger(__name__)


class SolveMethod(str, enum.Enum):
    CG = "cg"
    LSQR = "lsqr"


@dataclass(frozen=True)
class SolveConfig:
    """Solver settings.

    ``max_iterations=None`` means ``10 * n_cols`` for the system at hand.
    ``tolerance`` bounds the normal-equations residual
    ``||A^T (b_hat - A dx) - lam dx||`` relative to ``||A^T b_hat||``.
    """

    lam: float = 0.05
    max_iterations: int | None = None
    tolerance: float = 1e-8
    method: SolveMethod = SolveMethod.CG

    def __post_init__(self):
        object.__setattr__(self, "method", SolveMethod(self.method))
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be a finite non-negative number, got {self.lam}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")

    def iteration_budget(self, n_cols: int) -> int:
        return self.max_iterations if self.max_iterations is not None else 10 * n_cols


@dataclass
class SolveReport:
    iterations_used: int = 0
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False


def damped_objective(a: SparseOperator, dx, b_hat, lam: float) -> float:
    r = apply(a, dx) - b_hat
    return float(r @ r + lam * (dx @ dx))


def _cgls(a, b_hat, lam, max_iter, tol):
    # Conjugate gradients on (A^T A + lam I) dx = A^T b_hat, in the form that
    # never builds A^T A: r = b_hat - A dx and s = A^T r - lam dx are updated
    # by recurrence.
    n = a.n_cols
    x = np.zeros(n)
    r = b_hat.copy()
    s = apply_transpose(a, r)
    p = s.copy()
    gamma = float(s @ s)
    norm0 = math.sqrt(gamma)
    report = SolveReport(residual_history=[float(np.linalg.norm(r))])
    if norm0 == 0.0:
        report.converged = True
        return x, report
    for k in range(1, max_iter + 1):
        q = apply(a, p)
        delta = float(q @ q) + lam * float(p @ p)
        if delta <= 0.0:
            break
        alpha = gamma / delta
        x += alpha * p
        r -= alpha * q
        s = apply_transpose(a, r) - lam * x
        gamma_new = float(s @ s)
        report.iterations_used = k
        report.residual_history.append(float(np.linalg.norm(r)))
        if math.sqrt(gamma_new) <= tol * norm0:
            report.converged = True
            break
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return x, report


def _lsqr(a, b_hat, lam, max_iter, tol):
    # Golub-Kahan bidiagonalisation of [A; sqrt(lam) I] with damping folded
    # into the plane rotations.
    n = a.n_cols
    damp = math.sqrt(lam)
    x = np.zeros(n)
    report = SolveReport(residual_history=[float(np.linalg.norm(b_hat))])
    beta = float(np.linalg.norm(b_hat))
    if beta == 0.0:
        report.converged = True
        return x, report
    u = b_hat / beta
    v = apply_transpose(a, u)
    alpha = float(np.linalg.norm(v))
    if alpha == 0.0:
        report.converged = True
        return x, report
    v /= alpha
    w = v.copy()
    phibar, rhobar = beta, alpha
    arnorm0 = alpha * beta
    for k in range(1, max_iter + 1):
        u = apply(a, v) - alpha * u
        beta = float(np.linalg.norm(u))
        if beta > 0.0:
            u /= beta
            v = apply_transpose(a, u) - beta * v
            alpha = float(np.linalg.norm(v))
            if alpha > 0.0:
                v /= alpha
        # eliminate the damping term
        rhobar1 = math.hypot(rhobar, damp)
        cs1, sn1 = rhobar / rhobar1, damp / rhobar1
        phibar = cs1 * phibar
        # eliminate the subdiagonal beta
        rho = math.hypot(rhobar1, beta)
        cs, sn = rhobar1 / rho, beta / rho
        theta = sn * alpha
        rhobar = -cs * alpha
        phi = cs * phibar
        phibar = sn * phibar
        tau = sn * phi

        x += (phi / rho) * w
        w = v - (theta / rho) * w

        report.iterations_used = k
        report.residual_history.append(float(np.linalg.norm(apply(a, x) - b_hat)))
        # ||A^T r - lam x|| for the damped system, from the recurrences
        arnorm = alpha * abs(tau)
        if arnorm <= tol * arnorm0 or beta == 0.0 or alpha == 0.0:
            report.converged = True
            break
    return x, report


def solve_damped(a: SparseOperator, b_hat, cfg: SolveConfig) -> tuple[np.ndarray, SolveReport]:
    """Minimise ``||A dx - b_hat||^2 + lam ||dx||^2``.

    Not converging within the iteration budget is reported through
    ``SolveReport.converged`` rather than raised; the last iterate is
    returned.
    """
    b_hat = np.asarray(b_hat, dtype=float)
    if b_hat.shape != (a.n_rows,):
        raise DimensionMismatch(f"right-hand side has shape {b_hat.shape}, operator has {a.n_rows} rows")
    max_iter = cfg.iteration_budget(a.n_cols)
    if cfg.method is SolveMethod.CG:
        dx, report = _cgls(a, b_hat, cfg.lam, max_iter, cfg.tolerance)
    else:
        dx, report = _lsqr(a, b_hat, cfg.lam, max_iter, cfg.tolerance)
    if not report.converged:
        log.warning(
            "%s stopped after %d iterations without reaching tolerance %g",
            cfg.method.value, report.iterations_used, cfg.tolerance,
        )
    return dx, report


def reconstruct(a: SparseOperator, b, x0, cfg: SolveConfig) -> tuple[np.ndarray, SolveReport]:
    """Solve for a correction to the prior ``x0`` and return ``x0 + dx``.

    Entries of ``b - A x0`` belonging to empty operator rows are zeroed:
    those pixels were dropped at the image boundary and carry no
    information.
    """
    b = np.asarray(b, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (a.n_cols,):
        raise DimensionMismatch(f"prior has shape {x0.shape}, operator has {a.n_cols} columns")
    if b.shape != (a.n_rows,):
        raise DimensionMismatch(f"data has shape {b.shape}, operator has {a.n_rows} rows")
    b_hat = np.where(row_coverage(a), b - apply(a, x0), 0.0)
    dx, report = solve_damped(a, b_hat, cfg)
    return x0 + dx, report
