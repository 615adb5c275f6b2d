"""Data model: DAE problems, time grids, trajectories, quantities of interest.

A problem is semi-explicit,

    y' = f(y, z, t),      y in R^n   (differential variables)
    0  = g(y, z, t),      z in R^m   (algebraic variables)

and is either index-1 (g_z invertible near the solution) or Hessenberg
index-2 (g independent of z, with g_y f_z invertible).  Derivative oracles
may be supplied analytically; any oracle left as ``None`` falls back to
finite differences.

Problems and trajectories are immutable after construction and safe to share
between concurrently running solves.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    InvalidGridError,
    OutOfDomainError,
    SingularMatrixError,
)
from .numerics import SQRT_EPS, fd_jacobian, lu_solve

INDEX_1 = 1
INDEX_2 = 2

CONSISTENCY_TOL = 1e-10


def _as_vector(x, length, label):
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.shape[0] != length:
        raise DimensionMismatchError(f"{label} has length {v.shape[0]}, expected {length}")
    return v


@dataclass(frozen=True)
class DAEProblem:
    """A semi-explicit DAE with consistent initial data and derivative oracles.

    Oracles follow the shapes ``f_y (n,n)``, ``f_z (n,m)``, ``g_y (m,n)``,
    ``g_z (m,m)``, ``g_t (m,)``, ``f_t (n,)``, ``g_yy (m,n,n)``,
    ``g_yt (m,n)``, ``g_tt (m,)``.  When ``vectorized`` is true, ``f``, ``g``
    and all supplied oracles must broadcast over leading batch axes of
    ``y``, ``z`` and ``t``.
    """

    name: str
    n: int
    m: int
    index: int
    f: Callable
    g: Callable
    y0: np.ndarray
    z0: np.ndarray
    t0: float = 0.0
    f_y: Optional[Callable] = None
    f_z: Optional[Callable] = None
    f_t: Optional[Callable] = None
    g_y: Optional[Callable] = None
    g_z: Optional[Callable] = None
    g_t: Optional[Callable] = None
    g_yy: Optional[Callable] = None
    g_yt: Optional[Callable] = None
    g_tt: Optional[Callable] = None
    analytic_solution: Optional[Callable] = None
    vectorized: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise DimensionMismatchError("need n >= 1 and m >= 1")
        if self.index not in (INDEX_1, INDEX_2):
            raise DimensionMismatchError(f"unsupported index {self.index}")
        object.__setattr__(self, "y0", _as_vector(self.y0, self.n, "y0"))
        object.__setattr__(self, "z0", _as_vector(self.z0, self.m, "z0"))
        if not (np.all(np.isfinite(self.y0)) and np.all(np.isfinite(self.z0))):
            raise DimensionMismatchError("initial conditions must be finite")

    # -- derivative oracles with finite-difference fallback ----------------

    def fy(self, y, z, t):
        if self.f_y is not None:
            return np.asarray(self.f_y(y, z, t), dtype=float)
        return fd_jacobian(lambda yy: self.f(yy, z, t), y)

    def fz(self, y, z, t):
        if self.f_z is not None:
            return np.asarray(self.f_z(y, z, t), dtype=float)
        return fd_jacobian(lambda zz: self.f(y, zz, t), z)

    def ft(self, y, z, t):
        if self.f_t is not None:
            return np.asarray(self.f_t(y, z, t), dtype=float)
        return fd_jacobian(lambda tt: self.f(y, z, tt[0]), np.array([t]))[:, 0]

    def gy(self, y, z, t):
        if self.g_y is not None:
            return np.asarray(self.g_y(y, z, t), dtype=float)
        return fd_jacobian(lambda yy: self.g(yy, z, t), y)

    def gz(self, y, z, t):
        if self.g_z is not None:
            return np.asarray(self.g_z(y, z, t), dtype=float)
        return fd_jacobian(lambda zz: self.g(y, zz, t), z)

    def gt(self, y, z, t):
        if self.g_t is not None:
            return np.asarray(self.g_t(y, z, t), dtype=float)
        return fd_jacobian(lambda tt: self.g(y, z, tt[0]), np.array([t]))[:, 0]

    def gyy(self, y, t, z=None):
        """Second derivative of g in y, one Hessian slice per constraint."""
        if self.g_yy is not None:
            return np.asarray(self.g_yy(y, t), dtype=float)
        z = self._dummy_z(z)
        jac = fd_jacobian(lambda yy: self.gy(yy, z, t).reshape(-1), y)
        return jac.reshape(self.m, self.n, self.n)

    def gyt(self, y, t, z=None):
        if self.g_yt is not None:
            return np.asarray(self.g_yt(y, t), dtype=float)
        z = self._dummy_z(z)
        dt = SQRT_EPS * (1.0 + abs(t))
        return (self.gy(y, z, t + dt) - self.gy(y, z, t - dt)) / (2.0 * dt)

    def gtt(self, y, t, z=None):
        if self.g_tt is not None:
            return np.asarray(self.g_tt(y, t), dtype=float)
        z = self._dummy_z(z)
        dt = np.finfo(float).eps ** 0.25 * (1.0 + abs(t))
        g0 = np.asarray(self.g(y, z, t), dtype=float)
        gp = np.asarray(self.g(y, z, t + dt), dtype=float)
        gm = np.asarray(self.g(y, z, t - dt), dtype=float)
        return (gp - 2.0 * g0 + gm) / dt**2

    def _dummy_z(self, z):
        # index-2 constraints ignore z; any placeholder works
        return self.z0 if z is None else z


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_steps`` intervals on ``[t0, t_end]``."""

    t0: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise InvalidGridError("need at least one step")
        if not self.t_end > self.t0:
            raise InvalidGridError(f"need t_end > t0, got [{self.t0}, {self.t_end}]")
        nodes = np.linspace(self.t0, self.t_end, self.n_steps + 1)
        nodes.flags.writeable = False
        object.__setattr__(self, "_nodes", nodes)

    @property
    def dt(self):
        return (self.t_end - self.t0) / self.n_steps

    @property
    def nodes(self):
        return self._nodes

    def refined(self, r):
        """The grid with every interval split into ``r`` equal pieces."""
        if r < 1:
            raise InvalidGridError("refinement factor must be >= 1")
        return TimeGrid(self.t0, self.t_end, r * self.n_steps)


class Trajectory:
    """Nodal solution values on a uniform grid, piecewise linear in between."""

    def __init__(self, grid, Y, Z):
        Y = np.asarray(Y, dtype=float)
        Z = np.asarray(Z, dtype=float)
        if Y.shape[0] != grid.n_steps + 1 or Z.shape[0] != grid.n_steps + 1:
            raise DimensionMismatchError("node count does not match the grid")
        if Y.ndim != 2 or Z.ndim != 2:
            raise DimensionMismatchError("expected (nodes, dim) arrays")
        self.grid = grid
        self.Y = Y
        self.Z = Z
        self.Y.flags.writeable = False
        self.Z.flags.writeable = False

    @property
    def n(self):
        return self.Y.shape[1]

    @property
    def m(self):
        return self.Z.shape[1]

    def _locate(self, t):
        grid = self.grid
        slack = 1e-12 * max(abs(grid.t0), abs(grid.t_end))
        if t < grid.t0 - slack or t > grid.t_end + slack:
            raise OutOfDomainError(
                f"t={t!r} outside [{grid.t0}, {grid.t_end}]"
            )
        return min(max(t, grid.t0), grid.t_end)

    def interpolate(self, t):
        """Solution at time ``t``; exact nodal values at the nodes."""
        t = self._locate(t)
        nodes = self.grid.nodes
        j = int(np.searchsorted(nodes, t, side="right")) - 1
        if j < 0:
            j = 0
        if t == nodes[j]:
            return self.Y[j].copy(), self.Z[j].copy()
        if j >= self.grid.n_steps:
            j = self.grid.n_steps - 1
        theta = (t - nodes[j]) / (nodes[j + 1] - nodes[j])
        y = (1.0 - theta) * self.Y[j] + theta * self.Y[j + 1]
        z = (1.0 - theta) * self.Z[j] + theta * self.Z[j + 1]
        return y, z

    def derivative(self, t):
        """Piecewise slope at ``t``; nodes use the left interval's slope."""
        t = self._locate(t)
        nodes = self.grid.nodes
        j = int(np.searchsorted(nodes, t, side="right")) - 1
        if t == nodes[max(j, 0)] and j > 0:
            j -= 1
        j = min(max(j, 0), self.grid.n_steps - 1)
        dt = nodes[j + 1] - nodes[j]
        return (self.Y[j + 1] - self.Y[j]) / dt, (self.Z[j + 1] - self.Z[j]) / dt

    def values_at(self, times):
        """Vectorized interpolation at an array of times (no slack check)."""
        nodes = self.grid.nodes
        t = np.asarray(times, dtype=float)
        j = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, self.grid.n_steps - 1)
        theta = ((t - nodes[j]) / (nodes[j + 1] - nodes[j]))[..., None]
        Y = (1.0 - theta) * self.Y[j] + theta * self.Y[j + 1]
        Z = (1.0 - theta) * self.Z[j] + theta * self.Z[j + 1]
        return Y, Z


class QoISpec:
    """A quantity of interest: cumulative over time or terminal.

    Cumulative:  Q(x) = int_0^T psi_y . y + psi_z . z dt
    Terminal:    Q(x) = zeta_y . y(T) + zeta_z . z(T)

    Densities may be constant vectors or callables of time; callables must
    accept scalar times, and for the fast evaluation paths should broadcast
    over arrays.
    """

    CUMULATIVE = "cumulative"
    TERMINAL = "terminal"

    def __init__(self, kind, psi_y=None, psi_z=None, zeta_y=None, zeta_z=None):
        if kind not in (self.CUMULATIVE, self.TERMINAL):
            raise DimensionMismatchError(f"unknown QoI kind {kind!r}")
        self.kind = kind
        if kind == self.CUMULATIVE:
            if psi_y is None or psi_z is None:
                raise DimensionMismatchError("cumulative QoI needs psi_y and psi_z")
            self._psi_y = self._normalize(psi_y)
            self._psi_z = self._normalize(psi_z)
            self.zeta_y = None
            self.zeta_z = None
        else:
            if zeta_y is None or zeta_z is None:
                raise DimensionMismatchError("terminal QoI needs zeta_y and zeta_z")
            self.zeta_y = np.asarray(zeta_y, dtype=float).reshape(-1)
            self.zeta_z = np.asarray(zeta_z, dtype=float).reshape(-1)
            self._psi_y = None
            self._psi_z = None

    @classmethod
    def cumulative(cls, psi_y, psi_z):
        return cls(cls.CUMULATIVE, psi_y=psi_y, psi_z=psi_z)

    @classmethod
    def terminal(cls, zeta_y, zeta_z):
        return cls(cls.TERMINAL, zeta_y=zeta_y, zeta_z=zeta_z)

    @staticmethod
    def _normalize(density):
        if callable(density):
            return density
        return np.asarray(density, dtype=float).reshape(-1)

    @staticmethod
    def _eval(density, t):
        if callable(density):
            return np.asarray(density(t), dtype=float)
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return density
        return np.broadcast_to(density, t.shape + density.shape)

    def psi_y_at(self, t):
        return self._eval(self._psi_y, t)

    def psi_z_at(self, t):
        return self._eval(self._psi_z, t)


@dataclass(frozen=True)
class ConsistencyReport:
    """Residual norms of the constraint(s) at the initial time."""

    constraint_residual: float
    hidden_constraint_residual: Optional[float]
    index_condition_ok: bool
    passed: bool

    def __str__(self):
        parts = [f"|g(y0,z0,t0)| = {self.constraint_residual:.3e}"]
        if self.hidden_constraint_residual is not None:
            parts.append(f"|g_y f + g_t| = {self.hidden_constraint_residual:.3e}")
        parts.append("index condition ok" if self.index_condition_ok else "index condition FAILED")
        parts.append("PASS" if self.passed else "FAIL")
        return ", ".join(parts)


def check_consistency(problem, tol=CONSISTENCY_TOL):
    """Diagnose whether the initial conditions are consistent.

    Index-1 problems must satisfy g = 0 at the initial point; index-2
    problems additionally need the hidden constraint g_y f + g_t = 0.
    """
    y0, z0, t0 = problem.y0, problem.z0, problem.t0
    g0 = np.asarray(problem.g(y0, z0, t0), dtype=float)
    constraint = float(np.max(np.abs(g0))) if g0.size else 0.0
    hidden = None
    ok = True
    if problem.index == INDEX_2:
        resid = problem.gy(y0, z0, t0) @ problem.f(y0, z0, t0) + problem.gt(y0, z0, t0)
        hidden = float(np.max(np.abs(resid)))
        try:
            lu_solve(problem.gy(y0, z0, t0) @ problem.fz(y0, z0, t0), np.zeros(problem.m))
        except SingularMatrixError:
            ok = False
    else:
        try:
            lu_solve(problem.gz(y0, z0, t0), np.zeros(problem.m))
        except SingularMatrixError:
            ok = False
    passed = constraint <= tol and (hidden is None or hidden <= tol)
    return ConsistencyReport(constraint, hidden, ok, passed)
