"""Convergence studies, assumption audits and CSV reports."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .discretization import DiscreteSpace, build_space, consistency_measure
from .integrators import (GLOBAL_CONVENTIONS, LOCAL_CONVENTIONS, BlowUpError, SchemeKind,
                          global_error, local_error_sweep)
from .phi import LinearPropagator
from .problems import get_problem
from .tableaus import builtin

__all__ = [
    "CSV_HEADER",
    "CflWarning",
    "ErrorReport",
    "PRESETS",
    "ReportRow",
    "StudyConfig",
    "assumption_audit",
    "emit_csv",
    "get_preset",
    "observed_order",
    "run_study",
    "thread_count",
]

CSV_HEADER = ("k", "h", "local_error", "global_error", "local_order", "global_order",
              "cfl_ratio", "status")
ERROR_KINDS = ("local", "global")


class CflWarning(UserWarning):
    pass


@dataclass(frozen=True)
class StudyConfig:
    problem: str
    scheme: str
    tableau: str
    space: str
    k_list: tuple[float, ...]
    h_list: tuple[float, ...] = ()
    nodes: int | None = None
    boundary_mode: str = "oracle"
    T: float = 1.0
    errors: tuple[str, ...] = ERROR_KINDS
    cfl_bound: float = 50.0
    local_convention: str = "first"
    global_convention: str = "final"
    reference: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "k_list", tuple(float(k) for k in self.k_list))
        object.__setattr__(self, "h_list", tuple(float(h) for h in self.h_list))
        SchemeKind(self.scheme)
        builtin(self.tableau)
        if not self.k_list or any(not k > 0 for k in self.k_list):
            raise ValueError("k list must hold positive steps")
        if list(self.k_list) != sorted(self.k_list, reverse=True):
            raise ValueError("k list must be sorted descending")
        if self.space == "collocation":
            if self.nodes is None:
                raise ValueError("collocation studies need a node count")
        else:
            if not self.h_list or any(not h > 0 for h in self.h_list):
                raise ValueError("finite-difference studies need positive spacings")
            if list(self.h_list) != sorted(self.h_list, reverse=True):
                raise ValueError("h list must be sorted descending")
        if not self.T > 0:
            raise ValueError("final time must be positive")
        if not set(self.errors) <= set(ERROR_KINDS) or not self.errors:
            raise ValueError(f"error kinds must be drawn from {ERROR_KINDS}")
        if self.boundary_mode not in ("oracle", "data"):
            raise ValueError("boundary mode must be 'oracle' or 'data'")
        if self.local_convention not in LOCAL_CONVENTIONS:
            raise ValueError(f"local convention must be one of {LOCAL_CONVENTIONS}")
        if self.global_convention not in GLOBAL_CONVENTIONS:
            raise ValueError(f"global convention must be one of {GLOBAL_CONVENTIONS}")

    def grids(self) -> list[tuple[float | None, int | None]]:
        if self.space == "collocation":
            return [(None, self.nodes)]
        return [(h, None) for h in self.h_list]


@dataclass
class ReportRow:
    k: float
    h: float
    local_error: float | None = None
    global_error: float | None = None
    local_order: float | None = None
    global_order: float | None = None
    cfl_ratio: float = 0.0
    status: str = "ok"


@dataclass
class ErrorReport:
    config: StudyConfig | None
    rows: list[ReportRow] = field(default_factory=list)
    audit: dict | None = None

    def column(self, name: str, h: float | None = None) -> list:
        return [getattr(r, name) for r in self.rows if h is None or r.h == h]

    def orders(self, kind: str = "local", h: float | None = None) -> list[float]:
        return [v for v in self.column(f"{kind}_order", h) if v is not None]

    @property
    def blew_up(self) -> bool:
        return any(r.status == "blowup" for r in self.rows)


def observed_order(e1, e2, k1, k2) -> float | None:
    """log(e1/e2)/log(k1/k2); None unless both errors are positive and finite."""
    if e1 is None or e2 is None:
        return None
    if not (0 < e1 < math.inf and 0 < e2 < math.inf):
        return None
    return math.log(e1 / e2) / math.log(k1 / k2)


def thread_count() -> int:
    raw = os.environ.get("LAWSON_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"LAWSON_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("LAWSON_THREADS must be non-negative")
    return n if n > 0 else (os.cpu_count() or 1)


@lru_cache(maxsize=16)
def cached_space(kind: str, h: float | None, nodes: int | None) -> DiscreteSpace:
    """Spaces are shared so propagator caches persist across studies."""
    return build_space(kind, h=h, nodes=nodes)


def _run_job(cfg: StudyConfig, h, nodes, k) -> ReportRow:
    space = cached_space(cfg.space, h, nodes)
    problem = get_problem(cfg.problem)
    tab = builtin(cfg.tableau)
    spacing = space.h
    row = ReportRow(k=k, h=spacing, cfl_ratio=k / spacing**space.gamma)
    scheme = SchemeKind(cfg.scheme)
    if scheme.order >= 3 and cfg.boundary_mode == "data" and row.cfl_ratio > cfg.cfl_bound:
        warnings.warn(f"k/h^gamma = {row.cfl_ratio:.3g} exceeds the bound {cfg.cfl_bound:g}",
                      CflWarning, stacklevel=2)
        row.status = "cfl-exceeded"
    try:
        if "local" in cfg.errors:
            row.local_error = local_error_sweep(space, problem, tab, scheme, k, cfg.T,
                                                cfg.boundary_mode, convention=cfg.local_convention)
        if "global" in cfg.errors:
            row.global_error = global_error(space, problem, tab, scheme, k, cfg.T,
                                            cfg.boundary_mode, cfg.global_convention)
    except BlowUpError:
        row.status = "blowup"
        if "local" in cfg.errors and row.local_error is None:
            row.local_error = math.inf
        if "global" in cfg.errors:
            row.global_error = math.inf
    return row


def run_study(cfg: StudyConfig, threads: int | None = None) -> ErrorReport:
    """Fill one row per (grid, k); rows are ordered by grid then k regardless of threads."""
    jobs = [(h, nodes, k) for h, nodes in cfg.grids() for k in cfg.k_list]
    # build spaces up front so worker threads share them
    for h, nodes in cfg.grids():
        cached_space(cfg.space, h, nodes)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(jobs) == 1:
        rows = [_run_job(cfg, *job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            rows = list(pool.map(lambda job: _run_job(cfg, *job), jobs))
    _fill_orders(rows)
    return ErrorReport(cfg, rows)


def _fill_orders(rows: list[ReportRow]) -> None:
    for prev, row in zip(rows, rows[1:]):
        if prev.h != row.h:
            continue
        row.local_order = observed_order(prev.local_error, row.local_error, prev.k, row.k)
        row.global_order = observed_order(prev.global_error, row.global_error, prev.k, row.k)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return repr(float(value))


def emit_csv(report: ErrorReport, path) -> None:
    """Write the report atomically (temporary file, then rename)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in report.rows:
        writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".lawsonrd-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- assumption audit -------------------------------------------------------

def _spectral(space) -> LinearPropagator:
    if space.kind == "fd-dirichlet":
        return space.propagator
    return LinearPropagator.spectral(space.matrix, check=False)


def _inf_norm(m) -> float:
    return float(np.max(np.sum(np.abs(m), axis=1)))


def assumption_audit(space, k_list, problem=None, taus=None, t_samples=(0.0, 0.5, 1.0)) -> dict:
    """Sample the operator bounds the convergence theory relies on.

    Returns a dict with ``exp_norm`` (tau -> |e^{tau A}|), ``inv_norm``
    (|A^-1|), ``inv_c_norm`` (|A^-1 C_h|), ``smoothing`` (tau -> |tau A e^{tau A}|),
    ``spp`` (k -> max over sampled n <= 1/k of |k A sum_{r=1}^{n-1} e^{r k A}|)
    and, when a problem is given, ``jacobian_similarity``
    (max over t of |A^-1 diag(phi'(P_h u(t))) A|) and ``consistency``
    ((eps_h, eta_h) at t = 0). All norms are max norms.
    """
    a = np.asarray(space.matrix, dtype=float)
    prop = _spectral(space)
    lam = prop.eigenvalues
    taus = sorted({1e-4, 1e-2, 1.0, 10.0, *map(float, k_list)}) if taus is None else list(taus)
    exp_norm = {tau: _inf_norm(prop.matrix_function(lambda z, s=tau: np.exp(s * z))) for tau in taus}
    smooth_taus = np.logspace(-4, 0, 9)
    smoothing = {float(tau): _inf_norm(prop.matrix_function(lambda z, s=tau: s * z * np.exp(s * z)))
                 for tau in smooth_taus}
    inv = np.linalg.inv(a)
    spp = {}
    for k in k_list:
        n_max = max(1, int(round(1.0 / k)))
        samples = sorted({2, max(2, n_max // 4), max(2, n_max // 2), max(2, n_max)})
        worst = 0.0
        for n in samples:
            def geometric(z, n=n, k=k):
                q = np.exp(k * z)
                # k z sum_{r=1}^{n-1} q^r, written to stay finite as z -> 0
                return np.where(np.abs(k * z) > 1e-12,
                                k * z * (q - q**n) / np.where(q == 1.0, 1.0, 1.0 - q),
                                0.0)
            worst = max(worst, _inf_norm(prop.matrix_function(geometric)))
        spp[float(k)] = worst
    record = {
        "dimension": space.size,
        "h": space.h,
        "exp_norm": exp_norm,
        "inv_norm": _inf_norm(inv),
        "inv_c_norm": _inf_norm(inv @ space.boundary_columns),
        "smoothing": smoothing,
        "smoothing_max": max(smoothing.values()),
        "spp": spp,
        "eigenvalue_range": (float(np.min(np.real(lam))), float(np.max(np.real(lam)))),
    }
    if problem is not None:
        sims = []
        for t in t_samples:
            u = space.project(lambda x, t=t: problem.exact(t, x))
            fu = problem.reaction.derivative(1, u)
            sims.append(_inf_norm(inv @ (fu[:, None] * a)))
        record["jacobian_similarity"] = max(sims)
        trace_kinds = space.boundary_kinds

        def trace(t=0.0):
            out = []
            for side, kind in zip(problem.sides, trace_kinds):
                m = 1 if kind != "dirichlet" else 0
                out.append(problem.exact_partial(0, m, t, side.x))
            return np.array(out)

        record["consistency"] = consistency_measure(
            space, lambda x: problem.exact(0.0, x),
            lambda x: problem.exact_partial(0, 2, 0.0, x), trace())
    return record


# -- presets ---------------------------------------------------------------

_K_SMALL = (1e-3, 5e-4, 2.5e-4, 1.25e-4)
_K_COARSE = (0.2, 0.1, 0.05, 0.025)

PRESETS: dict[str, StudyConfig] = {
    "table2": StudyConfig(
        "dirichlet-vanishing", "classical", "rk2", "fd-dirichlet", _K_SMALL, (5e-4,),
        reference={"local": {5e-4: (9.7450e-4, 4.8158e-4, 2.3693e-4, 1.1580e-4)},
                   "global": {5e-4: (1.3461e-3, 6.6579e-4, 3.2779e-4, 1.6034e-4)}}),
    "table3": StudyConfig(
        "dirichlet-nonvanishing", "classical", "rk2", "fd-dirichlet", _K_SMALL,
        (2e-3, 1e-3, 5e-4), errors=("local",),
        reference={"local": {2e-3: (124.04, 61.563, 30.339, 14.751),
                             1e-3: (499.02, 249.03, 124.04, 61.563),
                             5e-4: (1999.0, 999.02, 499.02, 249.03)}}),
    "table4": StudyConfig(
        "dirichlet-nonvanishing", "classical", "rk2", "fd-dirichlet", _K_SMALL,
        (2e-3, 1e-3, 5e-4), errors=("global",),
        reference={"global": {2e-3: (67.023, 33.264, 16.394, 7.9729),
                              1e-3: (269.62, 134.55, 67.023, 33.264),
                              5e-4: (1080.1, 539.77, 269.62, 134.55)}}),
    "table5": StudyConfig(
        "dirichlet-nonvanishing", "corrected2", "rk2", "fd-dirichlet", _K_SMALL, (5e-4,),
        reference={"local": {5e-4: (1.5664e-7, 3.9176e-8, 9.7933e-9, 2.4473e-9)},
                   "global": {5e-4: (8.2929e-7, 2.0714e-7, 5.1712e-8, 1.2903e-8)}}),
    "table6": StudyConfig(
        "dirichlet-nonvanishing", "corrected3", "rk2", "fd-dirichlet",
        (8e-3, 4e-3, 2e-3, 1e-3), (5e-4,), boundary_mode="data",
        reference={"local": {5e-4: (1.3126e-7, 1.6797e-8, 2.1350e-9, 2.7857e-10)},
                   "global": {5e-4: (5.9892e-7, 1.4972e-7, 3.7367e-8, 9.2309e-9)}}),
    "table7": StudyConfig(
        "mixed-nonvanishing", "classical", "heun3", "fd-mixed", _K_COARSE, (1e-3,),
        reference={"local": {1e-3: (0.97639, 0.98964, 0.99108, 0.98877)},
                   "global": {1e-3: (0.53822, 0.53736, 0.53613, 0.53439)}}),
    "table8": StudyConfig(
        "mixed-nonvanishing", "corrected3", "heun3", "fd-mixed", _K_COARSE, (1e-3,),
        boundary_mode="data",
        # second local entry: exponent -4 (not -3), consistent with the neighbouring orders
        reference={"local": {1e-3: (1.3911e-3, 1.7489e-4, 2.1806e-5, 2.7212e-6)},
                   "global": {1e-3: (1.5136e-3, 2.3369e-4, 2.9913e-5, 3.6533e-6)}}),
    "table9": StudyConfig(
        "dirichlet-nonvanishing", "corrected4", "rk4", "fd-dirichlet", _K_COARSE, (5e-4,),
        reference={"local": {5e-4: (1.8356e-4, 1.0396e-5, 6.1679e-7, 3.7509e-8)},
                   "global": {5e-4: (1.9072e-4, 9.3054e-6, 5.4646e-7, 3.5333e-8)}}),
    "table10": StudyConfig(
        "dirichlet-nonvanishing", "corrected4", "rk4", "collocation",
        (2.5e-2, 1.25e-2, 6.25e-3, 3.125e-3), nodes=17, boundary_mode="data",
        reference={"local": {None: (3.4537e-8, 2.0441e-9, 1.1954e-10, 6.8247e-12)},
                   "global": {None: (3.3314e-8, 2.0054e-9, 1.1968e-10, 7.0050e-12)}}),
}


def get_preset(name: str, **overrides) -> StudyConfig:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(cfg, **overrides) if overrides else cfg
