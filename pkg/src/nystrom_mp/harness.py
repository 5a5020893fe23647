"""Multi-seed experiment sweeps and their CSV output.

A sweep covers every combination of problem, rank ``k``, low-precision
format and seed (and shift ``mu`` for preconditioning runs). Each grid point
becomes one row; failures inside a cell (overflow, formats outside the
problem's range, Cholesky breakdown) are recorded on the row instead of
aborting the run. Means over seeds are stored per cell.

Config files are flat ``key = value`` text; list-valued keys may be repeated
or given comma-separated values::

    problem = poly1 synthetic kind=poly param=1 n=100 r=10 beta=1,1e2 seed=0
    problem = bus mtx path=data/494_bus.mtx
    k = 1, 5, 10
    format = fp16
    format = fp32
    seeds = 1..10
    outputs = results
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .errors import CholeskyError, ConfigError, FormatOverflowError, NumericError
from .matrices import SpdMatrix, SyntheticSpec, gen_gaussian_kernel, gen_synthetic, load_features_csv, load_matrix_market
from .nystrom import FP64, NystromApprox, approx_errors, nystrom_approx, sym_norm2
from .pcg import DEFAULT_RHS_SEED, PcgConfig, pcg_solve, rhs_uniform
from .precision import FloatFormat, MatmulMode, builtin_format
from .precond import build_lmp, cond_bounds, kappa_shifted, measured_condition_number

log = logging.getLogger(__name__)

OUTPUT_ENV = "NYSTROM_MP_OUTPUT"

APPROX_COLUMNS = [
    "problem", "n", "k", "up", "seed", "status", "note",
    "total_error", "finite_error", "exact_error",
    "proxy", "theorem_term", "expected_bound",
    "heuristic_ratio", "heuristic_threshold", "heuristic_flag",
]

PRECOND_COLUMNS = [
    "problem", "n", "k", "up", "mu", "seed", "status", "note",
    "total_error", "finite_error", "exact_error", "lambda_k_hat",
    "kappa_unprec", "kappa_prec",
    "b_low_est", "b_upp_est", "b_uppspd_est",
    "b_low_meas", "b_upp_meas", "b_uppspd_meas",
    "iters_unprec", "iters_prec", "converged_unprec", "converged_prec",
]

_KEY_COLUMNS = {"problem", "n", "k", "up", "mu", "seed", "status", "note"}


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    source: str  # synthetic | mtx | kernel | matrix
    params: tuple = ()
    matrix: SpdMatrix | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_matrix(cls, name: str, A: SpdMatrix) -> "ProblemSpec":
        """Wrap an already built matrix (library use; not expressible in config files)."""
        return cls(name, "matrix", (), A)

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    def build(self) -> SpdMatrix:
        if self.matrix is not None:
            return self.matrix
        p = dict(self.params)
        try:
            if self.source == "synthetic":
                return gen_synthetic(
                    SyntheticSpec(
                        kind=p["kind"],
                        param=float(p["param"]),
                        n=int(p.get("n", 100)),
                        r=int(p.get("r", 10)),
                        beta=float(p.get("beta", 1.0)),
                        seed=int(p.get("seed", 0)),
                    )
                )
            if self.source == "mtx":
                return load_matrix_market(p["path"])
            if self.source == "kernel":
                Y = load_features_csv(p["path"])
                return gen_gaussian_kernel(Y, float(p.get("sigma", 0.5)), source=p["path"])
        except KeyError as exc:
            raise ConfigError(f"problem {self.name!r}: missing parameter {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"problem {self.name!r}: {exc}") from exc
        raise ConfigError(f"problem {self.name!r}: unknown source {self.source!r} (synthetic, mtx or kernel)")


@dataclass
class ExperimentConfig:
    problems: list
    ks: list
    formats: list
    mus: list = field(default_factory=lambda: [0.0])
    seeds: list = field(default_factory=lambda: list(range(1, 11)))
    mode: MatmulMode = MatmulMode.PER_OP
    outputs: Path = Path("results")
    alpha: float = 0.1
    t: float = 3.0
    tol: float = 1e-6
    precondition: bool = True
    rhs_seed: int = DEFAULT_RHS_SEED
    oversampling: int = 0

    def __post_init__(self):
        for name in ("problems", "ks", "formats", "mus", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"config list '{name}' is empty")
        self.formats = [f if isinstance(f, FloatFormat) else builtin_format(f) for f in self.formats]
        self.mode = MatmulMode.parse(self.mode)
        self.outputs = Path(self.outputs)
        if any(k < 1 for k in self.ks):
            raise ConfigError("ranks k must be positive")
        if any(m < 0 for m in self.mus):
            raise ConfigError("shifts mu must be nonnegative")


@dataclass
class ExperimentReport:
    kind: str
    columns: list
    key_columns: list
    rows: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)


# --- config parsing -------------------------------------------------------

_LIST_KEYS = {"problem", "k", "format", "mu", "seed", "seeds"}
_SCALAR_KEYS = {"mode", "outputs", "alpha", "t", "tol", "precondition", "rhs_seed", "oversampling"}


def _split_values(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _int_values(values: list[str], key: str) -> list[int]:
    out = []
    for v in values:
        try:
            if ".." in v:
                lo, hi = v.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(v))
        except ValueError:
            raise ConfigError(f"{key}: expected integers, got {v!r}") from None
    return out


def _parse_problem(value: str, base_dir: Path) -> list[ProblemSpec]:
    tokens = value.split()
    if len(tokens) < 2:
        raise ConfigError(f"problem line needs '<name> <source> key=value ...', got {value!r}")
    name, source, rest = tokens[0], tokens[1].lower(), tokens[2:]
    axes = []
    for tok in rest:
        if "=" not in tok:
            raise ConfigError(f"problem {name!r}: expected key=value, got {tok!r}")
        key, val = tok.split("=", 1)
        if key == "path":
            p = Path(val)
            vals = [str(p if p.is_absolute() else base_dir / p)]
        else:
            vals = _split_values(val)
        axes.append([(key, v) for v in vals])
    specs = []
    combos = list(itertools.product(*axes)) if axes else [()]
    for combo in combos:
        label = name
        varying = [f"{k}={v}" for (k, v), ax in zip(combo, axes) if len(ax) > 1]
        if varying:
            label = f"{name}[{','.join(varying)}]"
        specs.append(ProblemSpec(label, source, tuple(combo)))
    return specs


def parse_config(text: str, base_dir: str | os.PathLike = ".") -> ExperimentConfig:
    base_dir = Path(base_dir)
    lists: dict[str, list] = {k: [] for k in _LIST_KEYS}
    scalars: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key == "seeds":
            key = "seed"
        if key in _LIST_KEYS:
            if key == "problem":
                lists[key].extend(_parse_problem(value, base_dir))
            else:
                lists[key].extend(_split_values(value))
        elif key in _SCALAR_KEYS:
            scalars[key] = value
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    kwargs: dict = {
        "problems": lists["problem"],
        "ks": _int_values(lists["k"], "k"),
        "formats": lists["format"],
    }
    if lists["mu"]:
        try:
            kwargs["mus"] = [float(v) for v in lists["mu"]]
        except ValueError:
            raise ConfigError(f"mu: expected numbers, got {lists['mu']}") from None
    if lists["seed"]:
        kwargs["seeds"] = _int_values(lists["seed"], "seed")
    try:
        if "mode" in scalars:
            kwargs["mode"] = MatmulMode.parse(scalars["mode"])
        if "outputs" in scalars:
            out = Path(scalars["outputs"])
            kwargs["outputs"] = out if out.is_absolute() else base_dir / out
        for key in ("alpha", "t", "tol"):
            if key in scalars:
                kwargs[key] = float(scalars[key])
        for key in ("rhs_seed", "oversampling"):
            if key in scalars:
                kwargs[key] = int(scalars[key])
        if "precondition" in scalars:
            flag = scalars["precondition"].lower()
            if flag not in ("on", "off", "true", "false", "yes", "no"):
                raise ConfigError(f"precondition: expected on/off, got {flag!r}")
            kwargs["precondition"] = flag in ("on", "true", "yes")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    if not kwargs["formats"]:
        raise ConfigError("config list 'formats' is empty")
    return ExperimentConfig(**kwargs)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    cfg = parse_config(text, path.parent)
    override = os.environ.get(OUTPUT_ENV)
    if override:
        cfg.outputs = Path(override)
    return cfg


# --- sweeps ---------------------------------------------------------------


def range_limit(fmt: FloatFormat) -> float:
    """Largest ``|A|_2`` (exclusive) for which a format is used at all.

    The power of ten just above ``x_max``: 1e5 for fp16 and fp8-e5m2,
    1e3 for fp8-e4m3.
    """
    exponent = math.ceil(math.log10(fmt.x_max))
    return math.inf if exponent > 308 else 10.0**exponent


class _Problems:
    def __init__(self, specs):
        self.specs = specs
        self._cache: dict[str, SpdMatrix] = {}

    def get(self, spec: ProblemSpec) -> SpdMatrix:
        if spec.name not in self._cache:
            log.info("building problem %s", spec.name)
            self._cache[spec.name] = spec.build()
        return self._cache[spec.name]


def _check_ranks(cfg: ExperimentConfig, problems: _Problems) -> None:
    for spec in cfg.problems:
        n = problems.get(spec).n
        bad = [k for k in cfg.ks if k + cfg.oversampling >= n]
        if bad:
            raise ConfigError(f"problem {spec.name!r} (n={n}): ranks {bad} are not below n")


def _blank(columns) -> dict:
    return {c: None for c in columns}


def _try_approx(A, k, fmt, cfg, seed):
    """Return (approx, status, note)."""
    if A.norm2 >= range_limit(fmt):
        return None, "skipped", f"|A|_2={A.norm2:.3g} outside {fmt.name} range"
    try:
        return nystrom_approx(A, k, cfg.oversampling, fmt, cfg.mode, seed), "ok", ""
    except FormatOverflowError as exc:
        return None, "overflow", str(exc)
    except CholeskyError as exc:
        return None, "cholesky", str(exc)
    except NumericError as exc:
        return None, "error", str(exc)


def _aggregate(report: ExperimentReport) -> None:
    numeric = [c for c in report.columns if c not in _KEY_COLUMNS]
    cells: dict[tuple, list] = {}
    for row in report.rows:
        key = tuple(row[c] for c in report.key_columns)
        cells.setdefault(key, []).append(row)
    report.aggregates = []
    for key, rows in cells.items():
        ok = [r for r in rows if r["status"] == "ok"]
        agg = dict(zip(report.key_columns, key))
        agg["n"] = rows[0]["n"]
        agg["count"] = len(ok)
        agg["cells"] = len(rows)
        for c in numeric:
            vals = [r[c] for r in ok if r[c] is not None]
            if vals and len(vals) == len(ok):
                agg[c] = math.fsum(float(v) for v in vals) / len(vals)
            else:
                agg[c] = None
        report.aggregates.append(agg)


def aggregate_columns(report: ExperimentReport) -> list:
    numeric = [c for c in report.columns if c not in _KEY_COLUMNS]
    return list(report.key_columns) + ["n", "count", "cells"] + numeric


def run_approx_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Errors, bounds and heuristic for every (problem, k, format, seed)."""
    problems = _Problems(cfg.problems)
    _check_ranks(cfg, problems)
    report = ExperimentReport("approx", APPROX_COLUMNS, ["problem", "k", "up"])
    for spec in cfg.problems:
        A = problems.get(spec)
        for k in cfg.ks:
            bounds = {fmt.name: analysis.bound_report(A, k, fmt, cfg.alpha, cfg.t) for fmt in cfg.formats}
            refs: dict[int, tuple] = {}
            for fmt in cfg.formats:
                b = bounds[fmt.name]
                for seed in cfg.seeds:
                    row = _blank(APPROX_COLUMNS)
                    row.update(problem=spec.name, n=A.n, k=k, up=fmt.name, seed=seed)
                    row.update(
                        proxy=b.finite_error_proxy,
                        theorem_term=b.theorem_bound,
                        expected_bound=b.exact_error_expected,
                        heuristic_ratio=b.heuristic_ratio,
                        heuristic_threshold=b.heuristic_threshold,
                        heuristic_flag=b.heuristic_flag,
                    )
                    if seed not in refs:
                        refs[seed] = _try_approx(A, k, FP64, cfg, seed)
                    ref, ref_status, ref_note = refs[seed]
                    approx, status, note = _try_approx(A, k, fmt, cfg, seed) if not fmt.is_working else refs[seed]
                    row["status"], row["note"] = status, note
                    if approx is not None:
                        if ref is None:
                            row["status"], row["note"] = "reference_failed", f"fp64 reference: {ref_note}"
                        else:
                            errs = approx_errors(A, approx, ref)
                            row["total_error"] = errs.total_error
                            row["finite_error"] = errs.finite_precision_error
                            row["exact_error"] = sym_norm2(A.entries - ref.dense())
                    log.debug("approx %s k=%d %s seed=%d: %s", spec.name, k, fmt.name, seed, row["status"])
                    report.rows.append(row)
    _aggregate(report)
    return report


def run_precond_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Condition numbers, bounds and PCG iteration counts for every
    (problem, k, format, mu, seed)."""
    problems = _Problems(cfg.problems)
    _check_ranks(cfg, problems)
    report = ExperimentReport("precond", PRECOND_COLUMNS, ["problem", "k", "up", "mu"])
    for spec in cfg.problems:
        A = problems.get(spec)
        b = rhs_uniform(A.n, cfg.rhs_seed)
        unprec = {}
        for mu in cfg.mus:
            res = pcg_solve(A, b, None, PcgConfig(tol=cfg.tol, mu=mu))
            unprec[mu] = res
        eigs = A.spectrum()
        for k in cfg.ks:
            try:
                expected = analysis.expected_exact_error_bound(eigs, k)
            except ValueError:
                expected = None
            refs: dict[int, tuple] = {}
            for fmt in cfg.formats:
                try:
                    proxy = analysis.finite_error_proxy(A, fmt)
                except analysis.TheoryRangeError:
                    proxy = None
                approxes = {}
                for seed in cfg.seeds:
                    if seed not in refs:
                        refs[seed] = _try_approx(A, k, FP64, cfg, seed)
                    approxes[seed] = refs[seed] if fmt.is_working else _try_approx(A, k, fmt, cfg, seed)
                for mu in cfg.mus:
                    for seed in cfg.seeds:
                        row = _blank(PRECOND_COLUMNS)
                        row.update(problem=spec.name, n=A.n, k=k, up=fmt.name, mu=mu, seed=seed)
                        row["kappa_unprec"] = kappa_shifted(A, mu)
                        row["iters_unprec"] = unprec[mu].iterations
                        row["converged_unprec"] = unprec[mu].converged
                        approx, status, note = approxes[seed]
                        ref, _, ref_note = refs[seed]
                        row["status"], row["note"] = status, note
                        if approx is not None and ref is None:
                            row["status"], row["note"] = "reference_failed", f"fp64 reference: {ref_note}"
                        elif approx is not None:
                            try:
                                _precond_cell(A, approx, ref, mu, b, cfg, expected, proxy, row)
                            except NumericError as exc:
                                row["status"], row["note"] = "error", str(exc)
                        report.rows.append(row)
    _aggregate(report)
    return report


def _precond_cell(A, approx: NystromApprox, ref: NystromApprox, mu, b, cfg, expected, proxy, row) -> None:
    errs = approx_errors(A, approx, ref)
    exact = sym_norm2(A.entries - ref.dense())
    row.update(total_error=errs.total_error, finite_error=errs.finite_precision_error, exact_error=exact)
    if not cfg.precondition:
        row.update(kappa_prec=row["kappa_unprec"], iters_prec=row["iters_unprec"], converged_prec=row["converged_unprec"])
        return
    P = build_lmp(approx, mu)
    row["lambda_k_hat"] = P.lambda_k_hat
    kappa = measured_condition_number(A, P, mu)
    row["kappa_prec"] = kappa
    meas = cond_bounds(A, P, exact, errs.finite_precision_error, estimates_used=False, kappa_prec=kappa)
    row.update(b_low_meas=meas.b_low, b_upp_meas=meas.b_upp, b_uppspd_meas=meas.b_uppspd)
    if expected is not None and proxy is not None:
        est = cond_bounds(A, P, expected, proxy, estimates_used=True, kappa_prec=kappa)
        row.update(b_low_est=est.b_low, b_upp_est=est.b_upp, b_uppspd_est=est.b_uppspd)
    res = pcg_solve(A, b, P, PcgConfig(tol=cfg.tol, mu=mu))
    row.update(iters_prec=res.iterations, converged_prec=res.converged)


# --- output ---------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write(path: Path, columns, records) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for rec in records:
                w.writerow([_fmt(rec.get(c)) for c in columns])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def emit_csv(report: ExperimentReport, path: str | os.PathLike) -> tuple[Path, Path]:
    """Write ``<kind>_rows.csv`` and ``<kind>_aggregates.csv`` into directory ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    rows_path = out / f"{report.kind}_rows.csv"
    agg_path = out / f"{report.kind}_aggregates.csv"
    _write(rows_path, report.columns, report.rows)
    _write(agg_path, aggregate_columns(report), report.aggregates)
    return rows_path, agg_path
