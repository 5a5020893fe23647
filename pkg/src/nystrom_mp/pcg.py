"""Preconditioned conjugate gradient for ``(A + mu I) x = b`` in float64."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from os import PathLike

import numpy as np

from .errors import BreakdownError
from .matrices import SpdMatrix
from .precond import LmpPreconditioner
from .sampling import uniform_open

DEFAULT_RHS_SEED = 1234


@dataclass(frozen=True)
class PcgConfig:
    tol: float = 1e-6
    max_iter: int | None = None  # None means 5n
    mu: float = 0.0
    record_history: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")


@dataclass(frozen=True, eq=False)
class PcgResult:
    x: np.ndarray
    iterations: int
    converged: bool
    final_relres: float
    relres_history: list[float] | None = None


def rhs_uniform(n: int, seed: int = DEFAULT_RHS_SEED) -> np.ndarray:
    """Right-hand side with entries uniform on (0, 1)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return uniform_open(n, seed)


def pcg_solve(A, b, P: LmpPreconditioner | None = None, cfg: PcgConfig = PcgConfig()) -> PcgResult:
    """Left-preconditioned CG from a zero initial guess.

    Convergence is judged on the true residual ``|b - (A + mu I) x| / |b|``,
    recomputed every iteration. Non-convergence is reported through
    ``converged=False``; a non-positive ``r^T z`` or ``p^T (A + mu I) p``
    with a nonzero residual raises :class:`BreakdownError`.
    """
    a = A.shifted(cfg.mu) if isinstance(A, SpdMatrix) else np.asarray(A, dtype=np.float64) + cfg.mu * np.eye(len(b))
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"dimension mismatch: matrix {a.shape}, rhs {b.shape}")
    max_iter = 5 * n if cfg.max_iter is None else cfg.max_iter
    precondition = P.apply_inv if P is not None else (lambda v: v)

    x = np.zeros(n)
    bnorm = np.linalg.norm(b)
    history = [1.0] if cfg.record_history else None
    if bnorm == 0:
        return PcgResult(x, 0, True, 0.0, history)

    r = b.copy()
    z = precondition(r)
    rz = float(r @ z)
    if rz <= 0:
        raise BreakdownError(0, rz)
    p = z.copy()
    relres = 1.0
    for it in range(1, max_iter + 1):
        q = a @ p
        pq = float(p @ q)
        if pq <= 0:
            raise BreakdownError(it, pq)
        step = rz / pq
        x += step * p
        r -= step * q
        relres = float(np.linalg.norm(b - a @ x) / bnorm)
        if history is not None:
            history.append(relres)
        if relres <= cfg.tol:
            return PcgResult(x, it, True, relres, history)
        z = precondition(r)
        rz_new = float(r @ z)
        if rz_new <= 0:
            if not np.any(r):
                break
            raise BreakdownError(it, rz_new)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return PcgResult(x, it, False, relres, history)


def write_history_csv(result: PcgResult, path: str | PathLike) -> None:
    if result.relres_history is None:
        raise ValueError("solve was run without record_history")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "relres"])
        for i, v in enumerate(result.relres_history):
            w.writerow([i, f"{v:.17g}"])
