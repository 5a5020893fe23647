"""Stabilized single-pass Nystrom approximation with a low-precision A-product.

Only the product ``Y = A Q`` runs in the simulated precision ``up``; the
sketch, shift, Cholesky factorization, triangular solve and SVD all run in
float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from os import PathLike

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import CholeskyError, ConfigError, RankDeficiencyError
from .matrices import Derived, SpdMatrix
from .precision import FloatFormat, MatmulMode, builtin_format, matmul_lowprec
from .sampling import standard_normal

FP64 = builtin_format("fp64")
_U = 2.0**-53

# seed increment used when a Gaussian draw is numerically rank deficient
SKETCH_RETRY_OFFSET = 1_000_003
SKETCH_MAX_RETRIES = 3


@dataclass(frozen=True, eq=False)
class SketchMatrix:
    Q: np.ndarray
    seed: int  # seed that produced Q, after any retries


@dataclass(frozen=True, eq=False)
class NystromApprox:
    """Rank-k approximation ``U diag(theta) U^T`` from one sketch of ``A``."""

    U: np.ndarray
    theta: np.ndarray
    nu: float
    k: int
    l: int
    up: FloatFormat
    seed: int
    mode: MatmulMode

    @property
    def n(self) -> int:
        return self.U.shape[0]

    def dense(self) -> np.ndarray:
        a = (self.U * self.theta) @ self.U.T
        return 0.5 * (a + a.T)


@dataclass(frozen=True)
class ApproxErrors:
    total_error: float
    finite_precision_error: float | None = None


def draw_sketch(n: int, k: int, l: int = 0, seed: int = 0) -> SketchMatrix:
    """Orthonormal test matrix from the thin QR of an ``n x (k+l)`` Gaussian draw."""
    if k < 1 or l < 0 or k + l > n:
        raise ConfigError(f"need k >= 1, l >= 0 and k + l <= n (got n={n}, k={k}, l={l})")
    m = k + l
    for attempt in range(SKETCH_MAX_RETRIES + 1):
        s = seed + attempt * SKETCH_RETRY_OFFSET
        G = standard_normal((n, m), s)
        Q, R = np.linalg.qr(G, mode="reduced")
        d = np.abs(np.diag(R))
        if d.min() > n * _U * d.max():
            return SketchMatrix(Q, s)
    raise RankDeficiencyError(f"Gaussian sketch of size {n}x{m} rank deficient for seed {seed} and {SKETCH_MAX_RETRIES} retries")


def _as_array(A) -> np.ndarray:
    if isinstance(A, SpdMatrix):
        return A.entries
    return np.asarray(A, dtype=np.float64)


def nystrom_approx(
    A,
    k: int,
    l: int = 0,
    up: FloatFormat = FP64,
    mode: MatmulMode | str = MatmulMode.PER_OP,
    seed: int = 0,
) -> NystromApprox:
    """Rank-``k`` Nystrom approximation of the PSD matrix ``A``.

    Args:
        A: ``SpdMatrix`` (or a symmetric PSD array).
        k: target rank.
        l: oversampling; the extra columns are truncated after the SVD.
        up: simulated format of the product ``A Q``.
        mode: rounding mode of that product, see :func:`matmul_lowprec`.
        seed: sketch seed.

    Raises:
        CholeskyError: the shifted core matrix is not numerically positive
            definite. The shift is never enlarged to recover.
        FormatOverflowError: the product overflowed ``up``.
    """
    mode = MatmulMode.parse(mode)
    a = _as_array(A)
    n = a.shape[0]
    sketch = draw_sketch(n, k, l, seed)
    Q = sketch.Q

    Y = matmul_lowprec(a, Q, up, mode)
    nu = 2.0 * up.unit_roundoff * np.linalg.norm(Y, "fro")
    Y_nu = Y + nu * Q
    B = Q.T @ Y_nu
    C, info = lapack.dpotrf(0.5 * (B + B.T), lower=0)
    if info > 0:
        raise CholeskyError(int(info))
    if info < 0:
        raise ValueError(f"dpotrf argument {-info} invalid")
    # F = Y_nu C^{-1}, i.e. C^T F^T = Y_nu^T
    F = solve_triangular(C, Y_nu.T, trans="T", lower=False).T
    U, sigma, _ = np.linalg.svd(F, full_matrices=False)
    U = U[:, :k]
    theta = np.maximum(0.0, sigma[:k] ** 2 - nu)
    return NystromApprox(U=U, theta=theta, nu=float(nu), k=k, l=l, up=up, seed=seed, mode=mode)


def reconstruct(approx: NystromApprox) -> SpdMatrix:
    return SpdMatrix(approx.dense(), Derived(f"nystrom k={approx.k} up={approx.up.name} seed={approx.seed}"), check_psd=False)


def sym_norm2(M: np.ndarray) -> float:
    """Spectral norm of a symmetric matrix via a dense eigensolve."""
    M = 0.5 * (M + M.T)
    eigs = np.linalg.eigvalsh(M)
    return float(max(abs(eigs[0]), abs(eigs[-1])))


def approx_errors(A, approx: NystromApprox, reference: NystromApprox | None = None) -> ApproxErrors:
    """Total error ``|A - A_hat|_2`` and, given an fp64 reference with the same
    sketch, the finite-precision error ``|A_ref - A_hat|_2``."""
    a = _as_array(A)
    a_hat = approx.dense()
    total = sym_norm2(a - a_hat)
    if reference is None:
        return ApproxErrors(total)
    if (reference.k, reference.l, reference.seed, reference.mode) != (approx.k, approx.l, approx.seed, approx.mode):
        raise ValueError(
            "reference must share (k, l, seed, mode) with the approximation: "
            f"{(reference.k, reference.l, reference.seed, reference.mode.value)} vs "
            f"{(approx.k, approx.l, approx.seed, approx.mode.value)}"
        )
    if not reference.up.is_working:
        raise ValueError(f"reference must be computed with fp64, got {reference.up.name}")
    return ApproxErrors(total, sym_norm2(reference.dense() - a_hat))


def save_approx(approx: NystromApprox, path: str | PathLike) -> None:
    """Columnar text file: ``n k``, U column-major, theta, nu, then ``key=value`` metadata."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{approx.n} {approx.k}\n")
        for v in approx.U.ravel(order="F"):
            fh.write(f"{v:.17g}\n")
        for v in approx.theta:
            fh.write(f"{v:.17g}\n")
        fh.write(f"{approx.nu:.17g}\n")
        fh.write(f"l={approx.l}\n")
        fh.write(f"up={approx.up.name}\n")
        fh.write(f"overflow_policy={approx.up.overflow_policy.value}\n")
        fh.write(f"seed={approx.seed}\n")
        fh.write(f"mode={approx.mode.value}\n")


def load_approx(path: str | PathLike) -> NystromApprox:
    with open(path, encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    try:
        n, k = (int(t) for t in lines[0].split())
        pos = 1
        U = np.array([float(v) for v in lines[pos : pos + n * k]]).reshape((n, k), order="F")
        pos += n * k
        theta = np.array([float(v) for v in lines[pos : pos + k]])
        pos += k
        nu = float(lines[pos])
        meta = dict(ln.split("=", 1) for ln in lines[pos + 1 :])
        up = builtin_format(meta["up"]).with_policy(meta.get("overflow_policy", "error"))
        return NystromApprox(
            U=U,
            theta=theta,
            nu=nu,
            k=k,
            l=int(meta.get("l", 0)),
            up=up,
            seed=int(meta["seed"]),
            mode=MatmulMode.parse(meta.get("mode", "perop")),
        )
    except (ValueError, KeyError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed approximation file ({exc})") from exc
