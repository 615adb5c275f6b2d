"""Forward integration: implicit Euler (BDF-1) with a damped Newton solve.

Each step solves the (n+m)-dimensional implicit system

    Y_{k+1} = Y_k + dt f(Y_{k+1}, Z_{k+1}, t_{k+1}),
    0       = g(Y_{k+1}, Z_{k+1}, t_{k+1}),

warm-started from the previous step.  At least one Newton refinement is taken
per step so that linear constraint rows are satisfied to solver precision
rather than merely to the residual tolerance.  Step sizes are fixed; a step
whose Newton iteration stalls is an error, never silently accepted.
"""

from dataclasses import dataclass

import numpy as np

from .core import INDEX_2, Trajectory
from .exceptions import InvalidGridError, NewtonDivergedError, SingularMatrixError


@dataclass(frozen=True)
class NewtonSettings:
    """Stopping and damping controls for the per-step Newton iteration."""

    tol: float = 1e-12
    max_iters: int = 50
    damping: float = 0.5
    max_halvings: int = 20

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def bdf1_solve(problem, grid, settings=None):
    """Integrate a DAE over ``grid`` with BDF-1, returning a Trajectory.

    Raises
    ------
    NewtonDivergedError
        When a step exhausts the iteration budget; usually the step size is
        too large or an index assumption is violated.
    SingularMatrixError
        When a Newton Jacobian is singular.
    """
    if settings is None:
        settings = NewtonSettings()
    if abs(grid.t0 - problem.t0) > 1e-12 * max(1.0, abs(problem.t0)):
        raise InvalidGridError(
            f"grid starts at {grid.t0}, problem at {problem.t0}"
        )
    n, m = problem.n, problem.m
    p = n + m
    N = grid.n_steps
    dt = grid.dt
    nodes = grid.nodes
    f, g = problem.f, problem.g
    index2 = problem.index == INDEX_2

    Y = np.empty((N + 1, n))
    Z = np.empty((N + 1, m))
    Y[0] = problem.y0
    Z[0] = problem.z0

    J = np.empty((p, p))
    rhs = np.empty(p)
    diag = np.arange(n)
    if index2:
        J[n:, n:] = 0.0

    for k in range(N):
        t1 = nodes[k + 1]
        y_prev = Y[k]
        y = Y[k].copy()
        z = Z[k].copy()

        ry = y - y_prev - dt * f(y, z, t1)
        rz = np.asarray(g(y, z, t1), dtype=float)
        rnorm = max(np.max(np.abs(ry)), np.max(np.abs(rz)))

        converged = False
        for _ in range(settings.max_iters):
            J[:n, :n] = -dt * problem.fy(y, z, t1)
            J[diag, diag] += 1.0
            J[:n, n:] = -dt * problem.fz(y, z, t1)
            J[n:, :n] = problem.gy(y, z, t1)
            if not index2:
                J[n:, n:] = problem.gz(y, z, t1)
            rhs[:n] = ry
            rhs[n:] = rz
            try:
                step = np.linalg.solve(J, rhs)
            except np.linalg.LinAlgError as exc:
                raise SingularMatrixError(
                    f"singular Newton Jacobian at step {k + 1} (t={t1:.6g})"
                ) from exc

            lam = 1.0
            accepted = False
            for _ in range(settings.max_halvings + 1):
                y_try = y - lam * step[:n]
                z_try = z - lam * step[n:]
                ry_try = y_try - y_prev - dt * f(y_try, z_try, t1)
                rz_try = np.asarray(g(y_try, z_try, t1), dtype=float)
                rnorm_try = max(np.max(np.abs(ry_try)), np.max(np.abs(rz_try)))
                if rnorm_try <= settings.tol or rnorm_try < rnorm:
                    y, z, ry, rz, rnorm = y_try, z_try, ry_try, rz_try, rnorm_try
                    accepted = True
                    break
                lam *= settings.damping

            if not accepted:
                if rnorm <= settings.tol:
                    converged = True  # step is round-off noise; keep current
                    break
                raise NewtonDivergedError(k + 1, t1, rnorm)
            if rnorm <= settings.tol:
                converged = True
                break

        if not converged:
            raise NewtonDivergedError(k + 1, t1, rnorm)
        Y[k + 1] = y
        Z[k + 1] = z

    return Trajectory(grid, Y, Z)
