"""Test matrices: synthetic spectra, Gaussian kernels and Matrix Market files.

Everything is stored densely in float64. Problem sizes of interest stay
around a thousand rows, where a full symmetric eigendecomposition is cheap
and serves as the reference for every spectral quantity.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, MatrixMarketError, NotPsdError, NumericError
from .sampling import standard_normal

PSD_TOL = 1e-10

SYNTHETIC_KINDS = ("exp", "poly", "noise")


@dataclass(frozen=True)
class Synthetic:
    kind: str
    param: float
    n: int
    r: int
    beta: float
    seed: int


@dataclass(frozen=True)
class Kernel:
    source: str
    sigma: float


@dataclass(frozen=True)
class File:
    path: str


@dataclass(frozen=True)
class Derived:
    description: str


Provenance = Union[Synthetic, Kernel, File, Derived]


class SpdMatrix:
    """Dense symmetric positive semidefinite matrix.

    The entries are symmetrized on construction and frozen. The spectrum is
    computed on first use and cached; construction runs the PSD check
    (``lambda_min >= -psd_tol * lambda_max``) unless ``check_psd`` is off.
    """

    def __init__(self, entries, provenance: Provenance | None = None, *, check_psd: bool = True, psd_tol: float = PSD_TOL):
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        a = 0.5 * (a + a.T)
        a.flags.writeable = False
        self._entries = a
        self.provenance = provenance if provenance is not None else Derived("array")
        self._eigs: np.ndarray | None = None
        self._lock = threading.Lock()
        if check_psd:
            eigs = self.spectrum()
            if eigs[-1] < -psd_tol * max(eigs[0], 0.0):
                raise NotPsdError(float(eigs[-1]), float(eigs[0]), psd_tol)

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def n(self) -> int:
        return self._entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._entries, dtype=dtype)

    def __repr__(self) -> str:
        return f"SpdMatrix(n={self.n}, provenance={self.provenance!r})"

    def spectrum(self) -> np.ndarray:
        """Eigenvalues sorted in descending order (read-only array)."""
        if self._eigs is None:
            with self._lock:
                if self._eigs is None:
                    try:
                        eigs = np.linalg.eigvalsh(self._entries)[::-1].copy()
                    except np.linalg.LinAlgError as exc:
                        raise NumericError(f"symmetric eigensolver failed: {exc}") from exc
                    eigs.flags.writeable = False
                    self._eigs = eigs
        return self._eigs

    @property
    def norm2(self) -> float:
        eigs = self.spectrum()
        return float(max(abs(eigs[0]), abs(eigs[-1])))

    @property
    def lambda_min(self) -> float:
        return float(self.spectrum()[-1])

    def shifted(self, mu: float) -> np.ndarray:
        """Dense ``A + mu*I``."""
        return self._entries + mu * np.eye(self.n)

    def scaled(self, factor: float) -> "SpdMatrix":
        return SpdMatrix(factor * self._entries, Derived(f"{factor:g} * {self.provenance}"), check_psd=False)


@dataclass(frozen=True)
class SyntheticSpec:
    """Diagonal-plus-noise test problem with ``r`` leading eigenvalues ``beta``.

    ``kind`` is ``"exp"`` (``param`` = q), ``"poly"`` (``param`` = p) or
    ``"noise"`` (``param`` = xi).
    """

    kind: str
    param: float
    n: int = 100
    r: int = 10
    beta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise ConfigError(f"unknown synthetic kind {self.kind!r}; expected one of {SYNTHETIC_KINDS}")
        if not (1 <= self.r < self.n):
            raise ConfigError(f"need 1 <= r < n, got r={self.r}, n={self.n}")
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if self.kind == "noise":
            if self.param < 0:
                raise ConfigError("noise level xi must be nonnegative")
        elif not self.param > 0:
            raise ConfigError(f"decay parameter must be positive, got {self.param}")


def synthetic_diagonal(spec: SyntheticSpec) -> np.ndarray:
    """Diagonal of the exponential/polynomial decay matrices (or the noise-free part)."""
    tail = np.arange(1, spec.n - spec.r + 1, dtype=np.float64)
    if spec.kind == "exp":
        tail = 10.0 ** (-spec.param * tail)
    elif spec.kind == "poly":
        tail = (tail + 1.0) ** (-spec.param)
    else:
        tail = np.zeros_like(tail)
    return np.concatenate([np.full(spec.r, float(spec.beta)), tail])


def gen_synthetic(spec: SyntheticSpec) -> SpdMatrix:
    a = np.diag(synthetic_diagonal(spec))
    if spec.kind == "noise" and spec.param > 0:
        g = standard_normal((spec.n, spec.n), spec.seed)
        a = a + (spec.param / spec.n) * (g @ g.T)
    prov = Synthetic(spec.kind, float(spec.param), spec.n, spec.r, float(spec.beta), spec.seed)
    return SpdMatrix(a, prov)


def gen_gaussian_kernel(Y, sigma: float, source: str = "array") -> SpdMatrix:
    """Gaussian kernel matrix ``exp(-|y_i - y_j|^2 / (2 sigma^2))`` of the rows of ``Y``."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] < 1:
        raise ValueError("need at least one feature row")
    if not np.all(np.isfinite(Y)):
        raise ValueError("feature matrix has non-finite values")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    # cdist works on differences, so the diagonal is exactly zero
    d2 = cdist(Y, Y, metric="sqeuclidean")
    return SpdMatrix(np.exp(-d2 / (2.0 * sigma**2)), Kernel(str(source), float(sigma)))


def spectrum(A: SpdMatrix) -> np.ndarray:
    return A.spectrum()


_MM_FIELDS = ("real", "integer", "double")


def load_matrix_market(path: str | PathLike) -> SpdMatrix:
    """Read a real symmetric coordinate Matrix Market file into a dense matrix."""
    path = Path(path)
    try:
        fh = open(path, encoding="ascii", errors="replace")
    except OSError as exc:
        raise MatrixMarketError(f"cannot open file: {exc.strerror}", path) from exc
    with fh:
        header = fh.readline()
        tokens = header.strip().split()
        if len(tokens) != 5 or tokens[0].lower() != "%%matrixmarket":
            raise MatrixMarketError("missing %%MatrixMarket header", path, 1)
        obj, fmt, fld, sym = (t.lower() for t in tokens[1:])
        if obj != "matrix" or fmt != "coordinate":
            raise MatrixMarketError(f"unsupported layout '{obj} {fmt}', need 'matrix coordinate'", path, 1)
        if fld not in _MM_FIELDS:
            raise MatrixMarketError(f"unsupported field '{fld}', need real", path, 1)
        if sym != "symmetric":
            raise MatrixMarketError(f"symmetry field is '{sym}', need 'symmetric'", path, 1)

        lineno = 1
        size = None
        a = None
        count = 0
        for line in fh:
            lineno += 1
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            parts = s.split()
            if size is None:
                try:
                    rows, cols, nnz = (int(p) for p in parts)
                except ValueError:
                    raise MatrixMarketError(f"bad size line {s!r}", path, lineno) from None
                if rows != cols:
                    raise MatrixMarketError(f"symmetric matrix must be square, got {rows}x{cols}", path, lineno)
                size = (rows, nnz)
                a = np.zeros((rows, rows))
                continue
            if len(parts) != 3:
                raise MatrixMarketError(f"expected 'i j value', got {s!r}", path, lineno)
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise MatrixMarketError(f"cannot parse entry {s!r}", path, lineno) from None
            n = size[0]
            if not (1 <= i <= n and 1 <= j <= n):
                raise MatrixMarketError(f"index ({i}, {j}) outside a {n}x{n} matrix", path, lineno)
            a[i - 1, j - 1] = v
            a[j - 1, i - 1] = v
            count += 1
    if size is None:
        raise MatrixMarketError("missing size line", path, lineno)
    if count != size[1]:
        raise MatrixMarketError(f"declared {size[1]} entries but found {count}", path, lineno)
    return SpdMatrix(a, File(str(path)))


def save_matrix_market(A, path: str | PathLike, comment: str | None = None) -> None:
    """Write the lower triangle of a symmetric matrix with 17 significant digits."""
    a = np.asarray(A, dtype=np.float64)
    n = a.shape[0]
    rows, cols = np.nonzero(np.tril(a))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        if comment:
            for c in comment.splitlines():
                fh.write(f"% {c}\n")
        fh.write(f"{n} {n} {len(rows)}\n")
        for i, j in zip(rows, cols):
            fh.write(f"{i + 1} {j + 1} {a[i, j]:.17g}\n")


def load_features_csv(path: str | PathLike) -> np.ndarray:
    """One feature row per line, comma separated."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric feature value") from None
    if not rows:
        raise ConfigError(f"{path}: no feature rows")
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{path}: rows have differing lengths")
    return np.array(rows)


def write_spectrum_csv(eigenvalues, path: str | PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "lambda_k"])
        for k, lam in enumerate(np.asarray(eigenvalues, dtype=np.float64), start=1):
            w.writerow([k, f"{lam:.17g}"])
