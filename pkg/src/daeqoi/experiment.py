"""Experiment sweeps: (problem x dt x T x QoI x method) tables.

A configuration names one problem, one QoI and lists of step sizes and
horizons; running it produces one row per (dt, T, method) with the error
estimate, the reference error, the effectivity ratio and the term-by-term
breakdown.  Rows are ordered dt-outer, T-inner, method-last, independent of
how the cells were scheduled, and identical configs reproduce identical
numbers (wall times excepted).
"""

import concurrent.futures
import csv
import io
import time
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from .adjoint import DAE_PATH, ODE_PATH, solve_adjoint_backward
from .core import QoISpec, TimeGrid
from .estimator import (
    ANALYTIC_BACKEND,
    RICHARDSON_BACKEND,
    RK_BACKEND,
    effectivity,
    estimate_error,
    reference_qoi_error,
)
from .exceptions import ConfigError, DaeqoiError, OutputError
from .forward import NewtonSettings, bdf1_solve
from .problems import build_problem
from .reduction import ReducedODE, solve_reference

SCHEMA_VERSION = 1

METHOD_DAE = "adjoint-dae"
METHOD_ODE = "adjoint-ode"
_METHOD_PATHS = {METHOD_DAE: DAE_PATH, METHOD_ODE: ODE_PATH}

_BACKENDS = (ANALYTIC_BACKEND, RK_BACKEND, RICHARDSON_BACKEND)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated contents of an experiment configuration."""

    problem: str
    dts: tuple
    horizons: tuple
    qoi: dict
    method: str = "both"
    params: dict = field(default_factory=dict)
    refinement: Optional[int] = None
    reference: Optional[str] = None
    newton: NewtonSettings = NewtonSettings()
    output_path: Optional[str] = None
    output_format: str = "csv"

    @classmethod
    def from_dict(cls, raw):
        data = dict(raw)
        if data.pop("schema", None) != SCHEMA_VERSION:
            raise ConfigError(f"config must declare schema = {SCHEMA_VERSION}")
        try:
            problem = data.pop("problem")
            dts = tuple(float(v) for v in _as_list(data.pop("dt")))
            horizons = tuple(float(v) for v in _as_list(data.pop("T")))
            qoi = dict(data.pop("qoi"))
        except KeyError as exc:
            raise ConfigError(f"missing required key {exc.args[0]!r}") from None
        method = data.pop("method", "both")
        if method not in ("both", METHOD_DAE, METHOD_ODE):
            raise ConfigError(f"unknown method {method!r}")
        refinement = data.pop("refinement", None)
        if refinement is not None and int(refinement) < 1:
            raise ConfigError("refinement must be a positive integer")
        reference = data.pop("reference", None)
        if reference is not None and reference not in _BACKENDS:
            raise ConfigError(f"unknown reference backend {reference!r}")
        params = dict(data.pop("params", {}))
        newton_raw = dict(data.pop("newton", {}))
        try:
            newton = NewtonSettings(**newton_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad newton settings: {exc}") from exc
        output = dict(data.pop("output", {}))
        output_format = output.get("format", "csv")
        if output_format not in ("csv", "markdown"):
            raise ConfigError(f"unknown output format {output_format!r}")
        if data:
            raise ConfigError(f"unknown config keys: {sorted(data)}")
        if not dts or not horizons:
            raise ConfigError("dt and T must be non-empty lists")
        for dt in dts:
            if dt <= 0:
                raise ConfigError("dt values must be positive")
        config = cls(problem=problem, dts=dts, horizons=horizons, qoi=qoi,
                     method=method, params=params,
                     refinement=None if refinement is None else int(refinement),
                     reference=reference, newton=newton,
                     output_path=output.get("path"), output_format=output_format)
        for dt in dts:
            for T in horizons:
                config.steps_for(dt, T)  # validates divisibility
        return config

    @classmethod
    def from_toml(cls, path):
        try:
            with open(path, "rb") as handle:
                raw = tomllib.load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        return cls.from_dict(raw)

    @staticmethod
    def steps_for(dt, T):
        steps = round(T / dt)
        if steps < 1 or abs(steps * dt - T) > 1e-12 * max(abs(T), 1.0):
            raise ConfigError(f"dt={dt} does not divide T={T}")
        return int(steps)

    @property
    def methods(self):
        if self.method == "both":
            return (METHOD_DAE, METHOD_ODE)
        return (self.method,)


def _as_list(value):
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def expand_components(values, dim, label):
    """Expand a scalar or blockwise mask to a full component vector.

    A scalar fills the whole vector; a list whose length divides ``dim``
    repeats each entry over a contiguous block (so ``[1, 0, 1, 0]`` selects
    the first and third quarters).
    """
    if np.isscalar(values):
        return np.full(dim, float(values))
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.shape[0] == dim:
        return arr
    if dim % arr.shape[0] == 0:
        return np.repeat(arr, dim // arr.shape[0])
    raise ConfigError(
        f"{label} has {arr.shape[0]} entries; need {dim} or a divisor of it")


def build_qoi(raw, n, m):
    """Construct a QoISpec from config fields for an (n, m)-dimensional problem."""
    raw = dict(raw)
    kind = raw.pop("kind", None)
    if kind == QoISpec.CUMULATIVE:
        psi_y = expand_components(raw.pop("psi_y", 0.0), n, "psi_y")
        psi_z = expand_components(raw.pop("psi_z", 0.0), m, "psi_z")
        if raw:
            raise ConfigError(f"unknown qoi keys: {sorted(raw)}")
        return QoISpec.cumulative(psi_y, psi_z)
    if kind == QoISpec.TERMINAL:
        zeta_y = expand_components(raw.pop("zeta_y", 0.0), n, "zeta_y")
        zeta_z = expand_components(raw.pop("zeta_z", 0.0), m, "zeta_z")
        if raw:
            raise ConfigError(f"unknown qoi keys: {sorted(raw)}")
        return QoISpec.terminal(zeta_y, zeta_z)
    raise ConfigError("qoi.kind must be 'cumulative' or 'terminal'")


def default_refinement(problem_name):
    return 3 if problem_name == "ennpe" else 4


def default_reference(problem):
    # the analytic ENNPE solution solves the PDE, not the semi-discrete
    # system, so a fine-grid reference is the faithful default there
    return RICHARDSON_BACKEND if problem.name == "ennpe" else RK_BACKEND


@dataclass
class ResultRow:
    problem: str
    dt: float
    T: float
    method: str
    estimate: Optional[float] = None
    reference_error: Optional[float] = None
    effectivity: Optional[float] = None
    terms: dict = field(default_factory=dict)
    wall_ms: Optional[float] = None
    error: Optional[str] = None


class ResultTable:
    """Ordered experiment rows plus CSV / markdown rendering."""

    def __init__(self, rows):
        self.rows = list(rows)

    @property
    def term_names(self):
        names = []
        for row in self.rows:
            for name in row.terms:
                if name not in names:
                    names.append(name)
        return names

    @property
    def failed_rows(self):
        return [row for row in self.rows if row.error is not None]

    def to_csv(self):
        names = self.term_names
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        header = (["problem", "dt", "T", "method", "estimate",
                   "reference_error", "effectivity"]
                  + [f"term:{name}" for name in names] + ["wall_ms"])
        writer.writerow(header)
        for row in self.rows:
            if row.error is not None:
                continue
            record = [row.problem, repr(row.dt), repr(row.T), row.method,
                      _fmt(row.estimate), _fmt(row.reference_error),
                      _fmt(row.effectivity)]
            record += [_fmt(row.terms.get(name)) for name in names]
            record.append("" if row.wall_ms is None else f"{row.wall_ms:.3f}")
            writer.writerow(record)
        return buffer.getvalue()

    def to_markdown(self):
        lines = ["| problem | dt | T | method | Error Estimate | E-Ratio |",
                 "| --- | --- | --- | --- | --- | --- |"]
        for row in self.rows:
            if row.error is not None:
                estimate = ratio = f"error: {row.error}"
            else:
                estimate = _sig5(row.estimate)
                ratio = _sig5(row.effectivity)
            lines.append(
                f"| {row.problem} | {row.dt:g} | {row.T:g} | {row.method} "
                f"| {estimate} | {ratio} |")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse_csv(cls, text):
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        term_names = [name[5:] for name in header if name.startswith("term:")]
        rows = []
        for record in reader:
            values = dict(zip(header, record))
            terms = {}
            for name in term_names:
                cell = values.get(f"term:{name}", "")
                if cell != "":
                    terms[name] = float(cell)
            rows.append(ResultRow(
                problem=values["problem"], dt=float(values["dt"]),
                T=float(values["T"]), method=values["method"],
                estimate=_parse(values["estimate"]),
                reference_error=_parse(values["reference_error"]),
                effectivity=_parse(values["effectivity"]),
                terms=terms,
                wall_ms=_parse(values["wall_ms"])))
        return cls(rows)


def _fmt(value):
    return "" if value is None else repr(float(value))


def _parse(cell):
    return None if cell == "" else float(cell)


def _sig5(value):
    if value is None:
        return ""
    return f"{value:.4e}" if abs(value) < 1e-3 else f"{value:.5g}"


class _ReferenceCache:
    """Per-run cache of dense reference solutions, keyed by backend."""

    def __init__(self, problem, backend):
        self.problem = problem
        self.backend = backend
        self.solution = None

    def prepare(self, t_max):
        if self.backend != RK_BACKEND:
            return
        from .exceptions import StepSizeUnderflowError

        ode = ReducedODE(self.problem)
        ic = np.concatenate([self.problem.y0, self.problem.z0])
        try:
            self.solution = solve_reference(ode, (self.problem.t0, t_max), ic)
        except StepSizeUnderflowError:
            self.backend = RICHARDSON_BACKEND

    def error_for(self, traj, qoi, r, newton):
        return reference_qoi_error(
            self.problem, traj, qoi, backend=self.backend, r=r,
            reference=self.solution, newton_settings=newton)


def run_experiment(config, jobs=1):
    """Execute a sweep; failing cells are recorded per-row, the rest still run."""
    problem = build_problem(config.problem, **config.params)
    qoi = build_qoi(config.qoi, problem.n, problem.m)
    r = config.refinement or default_refinement(problem.name)
    backend = config.reference or default_reference(problem)

    cache = _ReferenceCache(problem, backend)
    cache.prepare(max(config.horizons))

    cells = [(dt, T) for dt in config.dts for T in config.horizons]

    def run_cell(cell):
        dt, T = cell
        rows = []
        started = time.perf_counter()
        try:
            grid = TimeGrid(problem.t0, problem.t0 + T,
                            ExperimentConfig.steps_for(dt, T))
            traj = bdf1_solve(problem, grid, config.newton)
            ref_error = cache.error_for(traj, qoi, r, config.newton)
        except DaeqoiError as exc:
            message = f"{type(exc).__name__}: {exc}"
            return [ResultRow(problem.name, dt, T, method, error=message)
                    for method in config.methods]
        shared_ms = 1000.0 * (time.perf_counter() - started)
        for method in config.methods:
            start = time.perf_counter()
            try:
                adjoint = solve_adjoint_backward(
                    problem, traj, qoi, path=_METHOD_PATHS[method], r=r)
                report = estimate_error(problem, traj, qoi, adjoint)
                report.reference_error = ref_error
                effectivity(report)
            except DaeqoiError as exc:
                rows.append(ResultRow(problem.name, dt, T, method,
                                      error=f"{type(exc).__name__}: {exc}"))
                continue
            wall = shared_ms + 1000.0 * (time.perf_counter() - start)
            rows.append(ResultRow(
                problem.name, dt, T, method,
                estimate=report.total_estimate,
                reference_error=report.reference_error,
                effectivity=report.effectivity,
                terms=dict(report.terms), wall_ms=wall))
        return rows

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            per_cell = list(pool.map(run_cell, cells))
    else:
        per_cell = [run_cell(cell) for cell in cells]

    rows = [row for cell_rows in per_cell for row in cell_rows]
    return ResultTable(rows)


def emit_report(table, fmt, path):
    """Write a result table to ``path`` as CSV or markdown."""
    if not table.rows:
        raise OutputError("refusing to write an empty table")
    if fmt == "csv":
        text = table.to_csv()
    elif fmt == "markdown":
        text = table.to_markdown()
    else:
        raise OutputError(f"unknown format {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
