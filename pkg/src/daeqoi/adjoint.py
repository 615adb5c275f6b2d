"""Backward-in-time adjoint solves on a refined grid.

Two formulations are supported.  The "dae" path keeps the differential /
algebraic split of the original problem,

    -phi_y' = fy^T phi_y + gy^T phi_z + psi_y,
    0       = fz^T phi_y + gz^T phi_z + psi_z,

which is linear, so each backward BDF-1 step is a single block solve for
(phi_y, phi_z) together; coupling the algebraic adjoint variable into the
step avoids drift in the algebraic adjoint equation.  The "ode" path applies
the classical adjoint to the index-reduced ODE,

    -nu' = J^T nu + psi,    J = [[fy, fz], [hy, hz]].

All Jacobians are evaluated at the piecewise-linear interpolant of the
numerical solution.  The backward grid refines the forward grid by an integer
factor r so that the adjoint discretization error stays subordinate to the
forward error being estimated.

Terminal values at t = T encode the QoI and the problem index; see
:func:`terminal_condition` for the case table.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import INDEX_1, INDEX_2, QoISpec, Trajectory
from .exceptions import PathMismatchError, SingularMatrixError
from .numerics import SQRT_EPS, fd_jacobian, lu_solve
from .reduction import reduced_h_batched, reduced_rhs

DAE_PATH = "dae"
ODE_PATH = "ode"

# above this system size, per-step assembly replaces big batched arrays
_BATCH_P = 32

DEFAULT_REFINEMENT = 4


@dataclass
class LinearizedOps:
    """Jacobian blocks at one time, evaluated at the numerical solution."""

    t: float
    fy: np.ndarray
    fz: np.ndarray
    gy: np.ndarray
    gz: np.ndarray
    hy: Optional[np.ndarray] = None
    hz: Optional[np.ndarray] = None


def linearized_ops_at(problem, traj, t, path=DAE_PATH):
    """Jacobian blocks at time ``t`` along the interpolated trajectory.

    For the "ode" path the blocks hy, hz of the reduced right-hand side are
    obtained by central finite differences of h; analytic versions would need
    third derivatives of the constraint.
    """
    y, z = traj.interpolate(t)
    fy = problem.fy(y, z, t)
    fz = problem.fz(y, z, t)
    gy = problem.gy(y, z, t)
    if problem.index == INDEX_2:
        gz = np.zeros((problem.m, problem.m))
    else:
        gz = problem.gz(y, z, t)
    hy = hz = None
    if path == ODE_PATH:
        n = problem.n

        def h_of_state(x):
            return reduced_rhs(problem, x[:n], x[n:], t)[1]

        jac = fd_jacobian(h_of_state, np.concatenate([y, z]))
        hy, hz = jac[:, :n], jac[:, n:]
    return LinearizedOps(t=t, fy=fy, fz=fz, gy=gy, gz=gz, hy=hy, hz=hz)


def projector(ops):
    """The oblique projector P = I - fz (gy fz)^(-1) gy annihilated by gy.

    Only meaningful for index-2 problems, where gy fz is invertible.
    """
    n = ops.fy.shape[0]
    core = lu_solve(ops.gy @ ops.fz, ops.gy)
    return np.eye(n) - ops.fz @ core


def apply_projector_transpose(ops, v):
    """P^T v computed through one m-by-m solve."""
    w = lu_solve((ops.gy @ ops.fz).T, ops.fz.T @ v)
    return v - ops.gy.T @ w


def gy_transpose_time_derivative(problem, traj, t, delta):
    """d(g_y^T)/dt along the numerical solution, an (n, m) matrix.

    Uses the chain rule (g_yy Ydot + g_yt)^T when the problem supplies an
    analytic g_yy; otherwise a one-sided difference with step ``delta``
    (the refined grid spacing) looking backward from ``t``.
    """
    y, z = traj.interpolate(t)
    if problem.g_yy is not None:
        ydot, _ = traj.derivative(t)
        dgy = np.einsum("ijk,k->ij", problem.gyy(y, t, z), ydot)
        dgy = dgy + problem.gyt(y, t, z)
        return dgy.T
    tm = t - delta
    ym, zm = traj.interpolate(tm)
    return (problem.gy(y, z, t).T - problem.gy(ym, zm, tm).T) / delta


def terminal_condition(problem, qoi, ops_T, traj, path=DAE_PATH, delta=None):
    """Adjoint value at t = T for the given QoI, path and problem index.

    Returns ``(value, kind)`` where ``value`` is phi_y(T) (length n) on the
    DAE path or nu(T) (length n+m) on the ODE path.  Cases:

    * ODE path: zero for cumulative QoIs, zeta for terminal QoIs.
    * DAE, index-1, cumulative: zero.
    * DAE, index-1, terminal: zeta_y - gy^T (gz^T)^(-1) zeta_z.
    * DAE, index-2, cumulative: -gy^T (fz^T gy^T)^(-1) psi_z(T).
    * DAE, index-2, terminal:
      P^T [zeta_y - fy^T gy^T (fz^T gy^T)^(-1) zeta_z
           - d(gy^T)/dt (fz^T gy^T)^(-1) zeta_z];
      with zeta_z = 0 this reduces to P^T zeta_y.
    """
    n, m = problem.n, problem.m
    if path == ODE_PATH:
        if qoi.kind == QoISpec.CUMULATIVE:
            return np.zeros(n + m), "ode-cumulative"
        return np.concatenate([qoi.zeta_y, qoi.zeta_z]), "ode-terminal"

    if qoi.kind == QoISpec.CUMULATIVE:
        if problem.index == INDEX_1:
            return np.zeros(n), "dae1-cumulative"
        psi_z_T = qoi.psi_z_at(ops_T.t)
        value = -ops_T.gy.T @ lu_solve((ops_T.gy @ ops_T.fz).T, psi_z_T)
        return value, "dae2-cumulative"

    zeta_y = np.asarray(qoi.zeta_y, dtype=float)
    zeta_z = np.asarray(qoi.zeta_z, dtype=float)
    if problem.index == INDEX_1:
        value = zeta_y - ops_T.gy.T @ lu_solve(ops_T.gz.T, zeta_z)
        return value, "dae1-terminal"

    core = zeta_y.copy()
    if np.any(zeta_z != 0.0):
        fzTgyT = (ops_T.gy @ ops_T.fz).T
        w = lu_solve(fzTgyT, zeta_z)
        if delta is None:
            delta = traj.grid.dt / DEFAULT_REFINEMENT
        dgyT = gy_transpose_time_derivative(problem, traj, ops_T.t, delta)
        core = core - ops_T.fy.T @ (ops_T.gy.T @ w) - dgyT @ w
    value = apply_projector_transpose(ops_T, core)
    return value, "dae2-terminal"


class AdjointSolution:
    """Nodal adjoint values on the refined grid, linear in between."""

    def __init__(self, traj, path, terminal_kind, terminal_value, r, qoi,
                 problem_index, alg_residual=None):
        self.traj = traj
        self.path = path
        self.terminal_kind = terminal_kind
        self.terminal_value = terminal_value
        self.r = r
        self.qoi = qoi
        self.problem_index = problem_index
        self.alg_residual = alg_residual

    @property
    def grid(self):
        return self.traj.grid

    @property
    def phi_y(self):
        return self.traj.Y

    @property
    def phi_z(self):
        return self.traj.Z


def _eval_density(qoi, times, n, m):
    """(psi_y, psi_z) stacked over ``times``; zeros for terminal QoIs."""
    K1 = times.shape[0]
    if qoi.kind != QoISpec.CUMULATIVE:
        return np.zeros((K1, n)), np.zeros((K1, m))

    def stack(evaluate, dim):
        values = evaluate(times)
        if values.shape != (K1, dim):  # non-broadcasting callable
            values = np.stack([np.asarray(evaluate(float(t)), dtype=float)
                               for t in times])
        return values

    return stack(qoi.psi_y_at, n), stack(qoi.psi_z_at, m)


def _pointwise_blocks(problem, y, z, t):
    fy = problem.fy(y, z, t)
    fz = problem.fz(y, z, t)
    gy = problem.gy(y, z, t)
    if problem.index == INDEX_2:
        gz = np.zeros((problem.m, problem.m))
    else:
        gz = problem.gz(y, z, t)
    return fy, fz, gy, gz


def _batched_blocks(problem, Y, Z, times):
    fy = problem.fy(Y, Z, times)
    fz = problem.fz(Y, Z, times)
    gy = problem.gy(Y, Z, times)
    if problem.index == INDEX_2:
        gz = np.zeros(gy.shape[:-2] + (problem.m, problem.m))
    else:
        gz = problem.gz(Y, Z, times)
    return fy, fz, gy, gz


def _h_jacobian_batched(problem, Y, Z, times):
    """Central-difference Jacobian blocks (hy, hz) of the reduced h, batched."""
    n = problem.n
    X = np.concatenate([Y, Z], axis=1)
    steps = SQRT_EPS * (1.0 + np.abs(X))
    columns = []
    for c in range(X.shape[1]):
        Xp = X.copy()
        Xm = X.copy()
        Xp[:, c] += steps[:, c]
        Xm[:, c] -= steps[:, c]
        hp = reduced_h_batched(problem, Xp[:, :n], Xp[:, n:], times)
        hm = reduced_h_batched(problem, Xm[:, :n], Xm[:, n:], times)
        columns.append((hp - hm) / (2.0 * steps[:, c])[:, None])
    jac = np.stack(columns, axis=-1)
    return jac[..., :n], jac[..., n:]


def solve_adjoint_backward(problem, traj, qoi, path=DAE_PATH, r=DEFAULT_REFINEMENT):
    """Solve the adjoint problem backward from T to t0 on an r-refined grid.

    Both paths are linear, so every backward BDF-1 step is one linear solve;
    no Newton iteration is involved.  On the DAE path the solution also
    records the worst residual of the algebraic adjoint equation over all
    refined nodes (a solver-quality diagnostic).
    """
    if path not in (DAE_PATH, ODE_PATH):
        raise PathMismatchError(f"unknown adjoint path {path!r}")
    n, m = problem.n, problem.m
    grid = traj.grid.refined(r)
    times = grid.nodes
    K = grid.n_steps
    dtr = grid.dt

    psi_y, psi_z = _eval_density(qoi, times, n, m)
    ops_T = linearized_ops_at(problem, traj, times[-1], path=DAE_PATH)
    terminal, kind = terminal_condition(problem, qoi, ops_T, traj, path=path,
                                        delta=dtr)

    if path == DAE_PATH:
        phi_y, phi_z, alg_residual = _backward_dae(
            problem, traj, times, dtr, psi_y, psi_z, terminal, ops_T)
        adj_traj = Trajectory(grid, phi_y, phi_z)
        return AdjointSolution(adj_traj, path, kind, terminal, r, qoi,
                               problem.index, alg_residual=alg_residual)

    nu = _backward_ode(problem, traj, times, dtr, psi_y, psi_z, terminal)
    adj_traj = Trajectory(grid, nu[:, :n], nu[:, n:])
    return AdjointSolution(adj_traj, path, kind, terminal, r, qoi,
                           problem.index)


def _backward_dae(problem, traj, times, dtr, psi_y, psi_z, terminal, ops_T):
    n, m = problem.n, problem.m
    p = n + m
    K = times.shape[0] - 1
    phi_y = np.empty((K + 1, n))
    phi_z = np.empty((K + 1, m))
    phi_y[K] = terminal

    batched = problem.vectorized and p <= _BATCH_P
    if batched:
        Y, Z = traj.values_at(times)
        fy, fz, gy, gz = _batched_blocks(problem, Y, Z, times)
        M = np.empty((K, p, p))
        M[:, :n, :n] = -dtr * np.swapaxes(fy[:K], 1, 2)
        idx = np.arange(n)
        M[:, idx, idx] += 1.0
        M[:, :n, n:] = -dtr * np.swapaxes(gy[:K], 1, 2)
        M[:, n:, :n] = np.swapaxes(fz[:K], 1, 2)
        M[:, n:, n:] = np.swapaxes(gz[:K], 1, 2)

    if problem.index == INDEX_1:
        phi_z[K] = lu_solve(ops_T.gz.T, -(ops_T.fz.T @ phi_y[K]) - psi_z[K])

    rhs = np.empty(p)
    if batched:
        for j in range(K - 1, -1, -1):
            rhs[:n] = phi_y[j + 1] + dtr * psi_y[j]
            rhs[n:] = -psi_z[j]
            try:
                sol = np.linalg.solve(M[j], rhs)
            except np.linalg.LinAlgError as exc:
                raise SingularMatrixError(
                    f"singular adjoint step matrix at t={times[j]:.6g}") from exc
            phi_y[j] = sol[:n]
            phi_z[j] = sol[n:]
    else:
        Y, Z = traj.values_at(times)
        M_step = np.empty((p, p))
        for j in range(K - 1, -1, -1):
            fy, fz, gy, gz = _pointwise_blocks(problem, Y[j], Z[j], times[j])
            M_step[:n, :n] = -dtr * fy.T
            M_step[:n, :n].flat[:: n + 1] += 1.0
            M_step[:n, n:] = -dtr * gy.T
            M_step[n:, :n] = fz.T
            M_step[n:, n:] = gz.T
            rhs[:n] = phi_y[j + 1] + dtr * psi_y[j]
            rhs[n:] = -psi_z[j]
            try:
                sol = np.linalg.solve(M_step, rhs)
            except np.linalg.LinAlgError as exc:
                raise SingularMatrixError(
                    f"singular adjoint step matrix at t={times[j]:.6g}") from exc
            phi_y[j] = sol[:n]
            phi_z[j] = sol[n:]

    if problem.index == INDEX_2:
        # the index-2 algebraic adjoint equation does not involve phi_z at T;
        # carry the first backward value so interpolation stays defined
        phi_z[K] = phi_z[K - 1]

    if batched:
        resid = (np.einsum("knm,kn->km", fz, phi_y)
                 + np.einsum("kqm,kq->km", gz, phi_z) + psi_z)
    else:
        resid = np.empty((K + 1, m))
        for j in range(K + 1):
            _, fz, _, gz = _pointwise_blocks(problem, Y[j], Z[j], times[j])
            resid[j] = fz.T @ phi_y[j] + gz.T @ phi_z[j] + psi_z[j]
    if problem.index == INDEX_2:
        # phi_z does not enter the index-2 algebraic adjoint equation at T
        resid[K] = ops_T.fz.T @ phi_y[K] + psi_z[K]
    alg_residual = float(np.max(np.abs(resid)))
    return phi_y, phi_z, alg_residual


def _backward_ode(problem, traj, times, dtr, psi_y, psi_z, terminal):
    n, m = problem.n, problem.m
    p = n + m
    K = times.shape[0] - 1
    nu = np.empty((K + 1, p))
    nu[K] = terminal
    psi = np.concatenate([psi_y, psi_z], axis=1)

    batched = problem.vectorized and p <= _BATCH_P
    if batched:
        Y, Z = traj.values_at(times)
        fy, fz, _, _ = _batched_blocks(problem, Y, Z, times)
        hy, hz = _h_jacobian_batched(problem, Y, Z, times)
        M = np.empty((K, p, p))
        M[:, :n, :n] = -dtr * np.swapaxes(fy[:K], 1, 2)
        M[:, :n, n:] = -dtr * np.swapaxes(hy[:K], 1, 2)
        M[:, n:, :n] = -dtr * np.swapaxes(fz[:K], 1, 2)
        M[:, n:, n:] = -dtr * np.swapaxes(hz[:K], 1, 2)
        idx = np.arange(p)
        M[:, idx, idx] += 1.0
        for j in range(K - 1, -1, -1):
            rhs = nu[j + 1] + dtr * psi[j]
            try:
                nu[j] = np.linalg.solve(M[j], rhs)
            except np.linalg.LinAlgError as exc:
                raise SingularMatrixError(
                    f"singular adjoint step matrix at t={times[j]:.6g}") from exc
    else:
        M_step = np.empty((p, p))
        for j in range(K - 1, -1, -1):
            ops = linearized_ops_at(problem, traj, times[j], path=ODE_PATH)
            M_step[:n, :n] = -dtr * ops.fy.T
            M_step[:n, n:] = -dtr * ops.hy.T
            M_step[n:, :n] = -dtr * ops.fz.T
            M_step[n:, n:] = -dtr * ops.hz.T
            M_step.flat[:: p + 1] += 1.0
            rhs = nu[j + 1] + dtr * psi[j]
            try:
                nu[j] = np.linalg.solve(M_step, rhs)
            except np.linalg.LinAlgError as exc:
                raise SingularMatrixError(
                    f"singular adjoint step matrix at t={times[j]:.6g}") from exc
    return nu
