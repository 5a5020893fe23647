"""Error model, bounds and the precision-selection heuristic.

All quantities are closed-form evaluations driven by the spectrum of ``A``
(computed densely in float64) and the unit roundoff of the low-precision
format. The universal constant of the Gaussian smallest-singular-value tail
is never known; it is taken as 1 wherever a failure probability is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RankDeficiencyError, TheoryRangeError
from .matrices import SpdMatrix
from .precision import FloatFormat

_U = 2.0**-53

C1_NOTE = "failure probability scales with the unspecified universal constant c1 (reported with c1 = 1)"


@dataclass(frozen=True)
class GammaFactors:
    n: int
    up: FloatFormat
    c: float
    gamma: float | None
    gamma_tilde: float | None
    valid: bool


@dataclass(frozen=True)
class LemmaBounds:
    deterministic: float
    probabilistic: float
    failure_prob_note: str = C1_NOTE


@dataclass(frozen=True)
class PartitionedBound:
    bound: float
    failure_prob: float
    blocks: int


@dataclass(frozen=True)
class TheoremTerm:
    value: float
    failure_probability: float


@dataclass(frozen=True)
class HeuristicResult:
    flag: bool
    threshold: float
    ratio: float


@dataclass(frozen=True)
class BoundReport:
    exact_error_expected: float | None
    finite_error_proxy: float | None
    theorem_bound: float | None
    heuristic_threshold: float
    heuristic_flag: bool
    heuristic_ratio: float
    alpha: float
    t: float
    failure_probability: float


def gamma_factors(n: int, up: FloatFormat, c: float = 1.0) -> GammaFactors:
    if n < 1:
        raise ValueError("n must be at least 1")
    nu = n * up.unit_roundoff
    valid = nu < 1.0 and c * nu < 1.0
    if not valid:
        return GammaFactors(n, up, c, None, None, False)
    return GammaFactors(n, up, c, nu / (1.0 - nu), c * nu / (1.0 - c * nu), True)


def _spectrum(A) -> np.ndarray:
    if isinstance(A, SpdMatrix):
        return A.spectrum()
    return np.asarray(A, dtype=np.float64)


def proxy_value(n: int, norm_a: float, up: FloatFormat, c: float = 1.0) -> float:
    """``sqrt(n) * gamma_tilde_n * norm_a`` for a problem of size ``n``."""
    g = gamma_factors(n, up, c)
    if not g.valid:
        raise TheoryRangeError(c * n * up.unit_roundoff)
    return math.sqrt(n) * g.gamma_tilde * norm_a


def finite_error_proxy(A: SpdMatrix, up: FloatFormat, c: float = 1.0) -> float:
    """Practical estimate of the finite-precision error ``|A_N - A_hat_N|_2``."""
    return proxy_value(A.n, A.norm2, up, c)


def _sqrt_psd(A: SpdMatrix) -> np.ndarray:
    lam, W = np.linalg.eigh(A.entries)
    return (W * np.sqrt(np.maximum(lam, 0.0))) @ W.T


def weighted_pseudoinv_norm(A: SpdMatrix, X) -> float:
    """``|A X (X^T A X)^+|_2`` with a pseudoinverse cutoff of ``k * u * sigma_max``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    a = A.entries
    AX = a @ X
    core = X.T @ AX
    core = 0.5 * (core + core.T)
    pinv = np.linalg.pinv(core, rcond=max(core.shape) * _U)
    return float(np.linalg.norm(AX @ pinv, 2))


def eta_ratio(A: SpdMatrix, X) -> float:
    """``lambda_k^{1/2} / sigma_k(X^T A^{1/2})``; ``inf`` when sigma_k is numerically zero."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    k = X.shape[1]
    eigs = A.spectrum()
    s = np.linalg.svd(X.T @ _sqrt_psd(A), compute_uv=False)
    sk = s[k - 1]
    if s[0] == 0 or sk <= max(X.shape) * _U * s[0]:
        return math.inf
    return math.sqrt(max(eigs[k - 1], 0.0)) / sk


def _kappa_k(eigs: np.ndarray, k: int) -> float:
    if k < 1 or k > len(eigs):
        raise ValueError(f"rank k={k} outside 1..{len(eigs)}")
    if eigs[k - 1] <= 0:
        raise RankDeficiencyError(f"lambda_{k} = {eigs[k - 1]:.3g} is not positive; kappa(A_k) undefined")
    return float(eigs[0] / eigs[k - 1])


def lemma_bounds(A: SpdMatrix, X, k: int, alpha: float = 0.1) -> LemmaBounds:
    """A posteriori bound ``kappa(A_k)^{1/2} eta_k`` and a priori bound
    ``kappa(A_k)^{1/2} k^{1/2} / alpha`` on the weighted pseudoinverse norm."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != k:
        raise ValueError(f"X has {X.shape[1]} columns but k={k}")
    root_kappa = math.sqrt(_kappa_k(A.spectrum(), k))
    return LemmaBounds(root_kappa * eta_ratio(A, X), root_kappa * math.sqrt(k) / alpha)


def numerical_rank(eigs: np.ndarray) -> int:
    eigs = np.asarray(eigs)
    if eigs[0] <= 0:
        return 0
    return int(np.count_nonzero(eigs > len(eigs) * _U * eigs[0]))


def partitioned_bound(A: SpdMatrix, X, k: int, alpha: float = 0.1) -> PartitionedBound:
    """Sharper a priori bound using every k-th eigenvalue.

    ``X`` only fixes the problem shape; the bound itself depends on the
    spectrum alone.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    eigs = A.spectrum()
    rank = numerical_rank(eigs)
    if rank < k:
        raise RankDeficiencyError(f"rank(A)={rank} < k={k}")
    j = rank // k
    blocks = eigs[k - 1 : j * k : k]  # lambda_k, lambda_2k, ..., lambda_jk
    bound = math.sqrt(eigs[0]) * math.sqrt(k) / (alpha * math.sqrt(float(np.sum(blocks))))
    return PartitionedBound(bound, j * alpha, j)


def theorem_total_bound(A: SpdMatrix, k: int, up: FloatFormat, alpha: float = 0.1, t: float = 3.0, c: float = 1.0) -> TheoremTerm:
    """Additive finite-precision term of the total-error bound.

    Returns ``alpha^-1 sqrt(n) k (sqrt(n)+sqrt(k)+t)^2 gamma_tilde |A|_2 kappa(A_k)``
    with failure probability ``exp(-t^2/2) + c1*alpha``. Add an estimate of
    ``|A - A_N|_2`` to obtain the full bound.
    """
    n = A.n
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    if alpha <= 0 or t <= 0:
        raise ValueError("alpha and t must be positive")
    g = gamma_factors(n, up, c)
    if not g.valid:
        raise TheoryRangeError(c * n * up.unit_roundoff)
    kappa = _kappa_k(A.spectrum(), k)
    value = (
        math.sqrt(n) * k * (math.sqrt(n) + math.sqrt(k) + t) ** 2 * g.gamma_tilde * A.norm2 * kappa / alpha
    )
    return TheoremTerm(value, math.exp(-(t**2) / 2) + alpha)


def expected_exact_error_bound(eigenvalues, k: int) -> float:
    """Bound on the expected exact error ``E|A - A_N|_2`` of a rank ``k >= 4`` sketch.

    Minimizes over the split ``p = 2..k-2``. Tiny negative eigenvalues from
    roundoff are treated as zero.
    """
    if k < 4:
        raise ValueError(f"expected-error bound needs k >= 4, got k={k}")
    lam = np.maximum(np.asarray(eigenvalues, dtype=np.float64), 0.0)
    if k > len(lam):
        raise ValueError(f"k={k} exceeds the number of eigenvalues {len(lam)}")
    # tails[i] = sum of lam[i:]
    tails = np.cumsum(lam[::-1])[::-1]
    best = math.inf
    for p in range(2, k - 1):
        idx = k - p  # zero-based index of lambda_{k-p+1}
        val = (1.0 + 2.0 * (k - p) / (p - 1)) * lam[idx] + (2.0 * math.e**2 * k / (p * p - 1)) * tails[idx]
        best = min(best, val)
    return float(best)


def heuristic_check(eigenvalues, k: int, n: int, up: FloatFormat) -> HeuristicResult:
    """Flag ranks at which the low-precision product is expected to matter.

    ``flag`` is true when ``lambda_{k+1} / lambda_max <= sqrt(n) * u_p``.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if not k < len(lam):
        raise ValueError(f"need k < n, got k={k}, n={len(lam)}")
    if lam[0] <= 0:
        raise ValueError("lambda_max must be positive")
    ratio = float(lam[k] / lam[0])
    threshold = math.sqrt(n) * up.unit_roundoff
    return HeuristicResult(ratio <= threshold, threshold, ratio)


def bound_report(A: SpdMatrix, k: int, up: FloatFormat, alpha: float = 0.1, t: float = 3.0, c: float = 1.0) -> BoundReport:
    """Evaluate every a priori quantity for one (problem, k, up) cell.

    Quantities whose preconditions fail (k < 4 for the expected bound, an
    invalid error model for the proxy and theorem term) are ``None``.
    """
    eigs = A.spectrum()
    try:
        expected = expected_exact_error_bound(eigs, k)
    except ValueError:
        expected = None
    try:
        proxy = finite_error_proxy(A, up, c)
    except TheoryRangeError:
        proxy = None
    try:
        theorem = theorem_total_bound(A, k, up, alpha, t, c).value
    except (TheoryRangeError, RankDeficiencyError, ValueError):
        theorem = None
    h = heuristic_check(eigs, k, A.n, up)
    return BoundReport(
        exact_error_expected=expected,
        finite_error_proxy=proxy,
        theorem_bound=theorem,
        heuristic_threshold=h.threshold,
        heuristic_flag=h.flag,
        heuristic_ratio=h.ratio,
        alpha=alpha,
        t=t,
        failure_probability=math.exp(-(t**2) / 2) + alpha,
    )
