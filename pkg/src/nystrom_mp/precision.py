"""Simulated low-precision floating-point formats.

Values are always held as float64 arrays constrained to the grid of the
target format; nothing is bit-packed. Rounding is round-to-nearest with
ties to even, subnormals are kept, and overflow is either an error or
saturates to +/-inf depending on the format's policy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from math import ldexp

import numpy as np

from .errors import ConfigError, FormatOverflowError

__all__ = [
    "OverflowPolicy",
    "MatmulMode",
    "FloatFormat",
    "FormatOverflowError",
    "FORMAT_NAMES",
    "builtin_format",
    "round_to",
    "matmul_lowprec",
]


class OverflowPolicy(enum.Enum):
    ERROR = "error"
    SATURATE_TO_INF = "saturate"


class MatmulMode(enum.Enum):
    PER_OP = "perop"
    ROUND_IO = "roundio"

    @classmethod
    def parse(cls, value: "MatmulMode | str") -> "MatmulMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown matmul mode {value!r} (expected 'perop' or 'roundio')") from None


@dataclass(frozen=True)
class FloatFormat:
    name: str
    significand_bits: int  # stored bits, implicit leading bit excluded
    exponent_bits: int
    unit_roundoff: float
    x_min: float  # smallest positive normal
    x_s_min: float  # smallest positive subnormal
    x_max: float  # largest finite
    overflow_policy: OverflowPolicy = OverflowPolicy.ERROR
    emin: int = 0  # exponent of x_min

    @property
    def precision(self) -> int:
        """Significand precision in bits, implicit bit included."""
        return self.significand_bits + 1

    @property
    def is_working(self) -> bool:
        """True when the format is the float64 working precision itself."""
        return self.significand_bits >= 52 and self.emin <= -1022

    def with_policy(self, policy: OverflowPolicy | str) -> "FloatFormat":
        if not isinstance(policy, OverflowPolicy):
            policy = OverflowPolicy(policy)
        return replace(self, overflow_policy=policy)


def _make(
    name: str,
    significand_bits: int,
    exponent_bits: int,
    x_max: float | None = None,
    unit_roundoff: float | None = None,
) -> FloatFormat:
    emin = 2 - 2 ** (exponent_bits - 1)
    emax = 2 ** (exponent_bits - 1) - 1
    if x_max is None:
        x_max = ldexp(2.0 - ldexp(1.0, -significand_bits), emax)
    x_min = ldexp(1.0, emin)
    return FloatFormat(
        name=name,
        significand_bits=significand_bits,
        exponent_bits=exponent_bits,
        unit_roundoff=ldexp(1.0, -(significand_bits + 1)) if unit_roundoff is None else unit_roundoff,
        x_min=x_min,
        x_s_min=ldexp(1.0, emin - significand_bits),
        x_max=x_max,
        emin=emin,
    )


_FP16_MAX = ldexp(2.0 - ldexp(1.0, -10), 15)

# fp8 ranges follow the NVIDIA definitions: e4m3 tops out at 448 (no inf
# encoding), e5m2 shares half precision's range. Their nominal unit
# roundoffs are the commonly quoted 2^-2 and 2^-3, twice the half-spacing of
# the rounding grid, so |fl(x) - x| <= u|x| still holds.
_BUILTIN = {
    "fp16": _make("fp16", 10, 5),
    "fp32": _make("fp32", 23, 8),
    "fp64": _make("fp64", 52, 11),
    "fp8e5m2": _make("fp8e5m2", 2, 5, x_max=_FP16_MAX, unit_roundoff=2.0**-2),
    "fp8e4m3": _make("fp8e4m3", 3, 4, x_max=448.0, unit_roundoff=2.0**-3),
}

FORMAT_NAMES = tuple(_BUILTIN)

# numpy's own float64 -> narrower casts round to nearest-even and keep
# subnormals, so they are used where they match the format exactly.
_NATIVE = {"fp16": np.float16, "fp32": np.float32}


def builtin_format(name: str) -> FloatFormat:
    """Return one of the built-in formats by name.

    Accepted names are ``fp16``, ``fp32``, ``fp64``, ``fp8e5m2`` and
    ``fp8e4m3`` (case-insensitive, ``-``/``_`` ignored).
    """
    key = str(name).lower().replace("-", "").replace("_", "")
    try:
        return _BUILTIN[key]
    except KeyError:
        raise ConfigError(f"unknown floating-point format {name!r}; expected one of {', '.join(FORMAT_NAMES)}") from None


def _round_generic(x: np.ndarray, precision: int, emin: int) -> np.ndarray:
    _, e = np.frexp(x)
    # exponent of the leading bit, clamped at emin so the subnormal range
    # keeps a fixed spacing
    lead = np.maximum(e - 1, emin)
    ulp_exp = lead - (precision - 1)
    return np.ldexp(np.rint(np.ldexp(x, -ulp_exp)), ulp_exp)


def _round_array(x: np.ndarray, fmt: FloatFormat) -> np.ndarray:
    if fmt.is_working:
        return np.array(x, dtype=np.float64, copy=True)
    native = _NATIVE.get(fmt.name)
    if native is not None and _BUILTIN[fmt.name].x_max == fmt.x_max:
        with np.errstate(over="ignore"):
            r = x.astype(native).astype(np.float64)
    else:
        r = _round_generic(x, fmt.precision, fmt.emin)
    over = np.abs(r) > fmt.x_max
    if over.any():
        if fmt.overflow_policy is OverflowPolicy.ERROR:
            raise FormatOverflowError(fmt.name, float(np.max(np.abs(x[over]))))
        r = np.where(over, np.copysign(np.inf, r), r)
    return r


def round_to(x, fmt: FloatFormat):
    """Round ``x`` (scalar or array) to the nearest value of ``fmt``.

    Scalars come back as ``float``, arrays as float64 ndarrays. Raises
    :class:`FormatOverflowError` when a rounded magnitude exceeds
    ``fmt.x_max`` and the policy is ``ERROR``.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("round_to expects finite input")
    r = _round_array(arr, fmt)
    if r.ndim == 0:
        return float(r)
    return r


def matmul_lowprec(A, B, fmt: FloatFormat, mode: MatmulMode | str = MatmulMode.PER_OP) -> np.ndarray:
    """Matrix product ``A @ B`` evaluated in the simulated format ``fmt``.

    Both operands are first rounded into ``fmt``. In ``PER_OP`` mode every
    scalar multiply and every add of the inner products is rounded, with
    the summation index traversed in ascending order. ``ROUND_IO`` only
    rounds the operands and the float64 product. With the fp64 format the
    working-precision product is returned unchanged.
    """
    mode = MatmulMode.parse(mode)
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ValueError(f"non-conformable operands {A.shape} and {B.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("matmul_lowprec expects finite operands")

    Ar = _round_array(A, fmt)
    Br = _round_array(B, fmt)
    if fmt.is_working:
        return Ar @ Br
    if mode is MatmulMode.ROUND_IO:
        return _round_array(Ar @ Br, fmt)

    acc = np.zeros((A.shape[0], B.shape[1]))
    for j in range(A.shape[1]):
        # float64 holds these products and sums exactly, except fp32 sums of
        # addends more than 2^29 apart, whose fp32 rounding is unaffected
        prod = _round_array(np.multiply.outer(Ar[:, j], Br[j, :]), fmt)
        acc = _round_array(acc + prod, fmt)
    return acc
