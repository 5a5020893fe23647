"""Spectral limited-memory preconditioner built from a Nystrom approximation.

With approximate eigenpairs ``(U, theta)`` and shift ``mu`` the inverse
preconditioner is

    P^{-1} = I - U U^T + (alpha + mu) U (diag(theta) + mu I)^{-1} U^T,

applied in O(nk) work. ``alpha`` is the smallest retained eigenvalue
estimate unless set explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPsdError, NumericError, SingularPreconditionerError
from .matrices import SpdMatrix
from .nystrom import NystromApprox
from .precision import FloatFormat


@dataclass(frozen=True, eq=False)
class LmpPreconditioner:
    U: np.ndarray
    theta: np.ndarray
    lambda_k_hat: float
    mu: float
    up_provenance: FloatFormat | None = None
    alpha: float | None = None  # defaults to lambda_k_hat

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.scale <= 0 or np.any(self.theta + self.mu <= 0):
            raise SingularPreconditionerError(
                f"singular preconditioner: lambda_k_hat + mu = {self.lambda_k_hat + self.mu:.3g}"
            )

    @property
    def k(self) -> int:
        return self.U.shape[1]

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def scale(self) -> float:
        """``alpha + mu``."""
        a = self.lambda_k_hat if self.alpha is None else self.alpha
        return a + self.mu

    def ratios(self) -> np.ndarray:
        """Eigenvalues of ``P^{-1}`` on ``range(U)``: ``(alpha + mu) / (theta_i + mu)``."""
        return self.scale / (self.theta + self.mu)

    def _apply_diag(self, x, d: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        c = self.U.T @ x
        if x.ndim == 1:
            return x + self.U @ ((d - 1.0) * c)
        return x + self.U @ ((d - 1.0)[:, None] * c)

    def apply(self, x) -> np.ndarray:
        """``P x``."""
        return self._apply_diag(x, 1.0 / self.ratios())

    def apply_inv(self, x) -> np.ndarray:
        """``P^{-1} x``; ``x`` may be a vector or a matrix of column vectors."""
        return self._apply_diag(x, self.ratios())

    def apply_inv_sqrt(self, x) -> np.ndarray:
        """``P^{-1/2} x``."""
        return self._apply_diag(x, np.sqrt(self.ratios()))


def from_eigenpairs(U, theta, mu: float, alpha: float | None = None, up: FloatFormat | None = None) -> LmpPreconditioner:
    """Preconditioner from explicit eigenpairs (``theta`` sorted descending)."""
    U = np.asarray(U, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if U.ndim != 2 or U.shape[1] != theta.shape[0] or theta.shape[0] < 1:
        raise ValueError("U must be n x k with k = len(theta) >= 1")
    return LmpPreconditioner(U=U, theta=theta, lambda_k_hat=float(theta[-1]), mu=float(mu), up_provenance=up, alpha=alpha)


def build_lmp(approx: NystromApprox, mu: float) -> LmpPreconditioner:
    return from_eigenpairs(approx.U, approx.theta, mu, up=approx.up)


def apply_inv(P: LmpPreconditioner, x) -> np.ndarray:
    return P.apply_inv(x)


def apply_inv_sqrt(P: LmpPreconditioner, x) -> np.ndarray:
    return P.apply_inv_sqrt(x)


@dataclass(frozen=True)
class CondReport:
    kappa_unprec: float
    kappa_prec: float
    b_low: float
    b_upp: float | None
    b_uppspd: float | None
    mu: float
    E_norm_used: float
    Eps_norm_used: float
    estimates_used: bool


def _sym_eigs(M: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(0.5 * (M + M.T))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"symmetric eigensolver failed: {exc}") from exc


def measured_condition_number(A: SpdMatrix, P: LmpPreconditioner, mu: float | None = None) -> float:
    """Condition number of the split-preconditioned ``P^{-1/2} (A + mu I) P^{-1/2}``."""
    mu = P.mu if mu is None else mu
    shifted = A.shifted(mu)
    left = P.apply_inv_sqrt(shifted)  # S B
    M = P.apply_inv_sqrt(left.T)  # S (S B)^T = S B S for symmetric S, B
    eigs = _sym_eigs(M)
    if eigs[0] <= 0:
        raise NumericError(f"split-preconditioned matrix not positive definite (lambda_min={eigs[0]:.3g})")
    return float(eigs[-1] / eigs[0])


def cond_bounds(
    A: SpdMatrix,
    P: LmpPreconditioner,
    E_norm: float,
    Eps_norm: float,
    estimates_used: bool = False,
    kappa_prec: float | None = None,
) -> CondReport:
    """Lower and upper bounds on the split-preconditioned condition number.

    ``b_upp`` needs ``mu > Eps_norm`` and ``b_uppspd`` needs ``lambda_min(A) > 0``;
    each is ``None`` when its condition fails.
    """
    if E_norm < 0 or Eps_norm < 0:
        raise ValueError("error norms must be nonnegative")
    mu = P.mu
    lam_min = A.lambda_min
    lam_max = float(A.spectrum()[0])
    if mu + lam_min <= 0:
        raise NotPsdError(lam_min + mu, lam_max + mu, 0.0)
    lk = P.lambda_k_hat
    b_low = max(1.0, (lk + mu - Eps_norm) / (mu + lam_min))
    b_upp = 1.0 + (lk + E_norm + 2.0 * Eps_norm) / (mu - Eps_norm) if mu > Eps_norm else None
    b_uppspd = None
    if lam_min > 0:
        b_uppspd = (lk + mu + E_norm + Eps_norm) * (1.0 / (lk + mu) + (Eps_norm + 1.0) / (lam_min + mu))
    if kappa_prec is None:
        kappa_prec = measured_condition_number(A, P, mu)
    return CondReport(
        kappa_unprec=(lam_max + mu) / (lam_min + mu),
        kappa_prec=kappa_prec,
        b_low=b_low,
        b_upp=b_upp,
        b_uppspd=b_uppspd,
        mu=mu,
        E_norm_used=float(E_norm),
        Eps_norm_used=float(Eps_norm),
        estimates_used=estimates_used,
    )


def kappa_shifted(A: SpdMatrix, mu: float) -> float:
    eigs = A.spectrum()
    lo = eigs[-1] + mu
    if lo <= 0:
        return math.inf
    return float((eigs[0] + mu) / lo)
