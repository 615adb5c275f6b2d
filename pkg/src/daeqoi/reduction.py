"""Index reduction: the ODE underlying a DAE, and high-accuracy references.

Differentiating the constraint once (index-1) or the hidden constraint
(index-2) yields explicit differential equations z' = h(y, z, t) for the
algebraic variables; the original constraints become invariants of the
resulting ODE.  The reduced system is used as an analytical device for the
adjoint-ODE error analysis and, integrated with tight tolerances, as a
reference solution for effectivity ratios.  Production forward solves always
go through :mod:`daeqoi.forward`.
"""

import numpy as np
import scipy.integrate

from .core import INDEX_1
from .exceptions import (
    SingularMatrixError,
    StepSizeUnderflowError,
    ToleranceUnreachableError,
)
from .numerics import contract_quadratic, lu_solve

REFERENCE_ATOL = 1e-12
REFERENCE_RTOL = 1e-10


def reduced_rhs(problem, y, z, t):
    """Right-hand side (f, h) of the ODE obtained by index reduction.

    Index-1:  h = -g_z^{-1} (g_y f + g_t).
    Index-2:  h = -(g_y f_z)^{-1} (f^T g_yy f + g_y f_y f + 2 g_yt f
                                   + g_y f_t + g_tt).

    Raises
    ------
    SingularMatrixError
        When the index assumption fails at ``(y, z, t)``.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    f = np.asarray(problem.f(y, z, t), dtype=float)
    gy = problem.gy(y, z, t)
    if problem.index == INDEX_1:
        rhs = gy @ f + problem.gt(y, z, t)
        h = -lu_solve(problem.gz(y, z, t), rhs)
    else:
        fy = problem.fy(y, z, t)
        rhs = (
            contract_quadratic(problem.gyy(y, t, z), f)
            + gy @ (fy @ f)
            + 2.0 * problem.gyt(y, t, z) @ f
            + gy @ problem.ft(y, z, t)
            + problem.gtt(y, t, z)
        )
        h = -lu_solve(gy @ problem.fz(y, z, t), rhs)
    return f, h


def reduced_h_batched(problem, Y, Z, t):
    """Vectorized ``h`` over leading batch axes (vectorized problems only)."""
    f = np.asarray(problem.f(Y, Z, t), dtype=float)
    gy = problem.gy(Y, Z, t)
    if problem.index == INDEX_1:
        rhs = np.einsum("...ij,...j->...i", gy, f) + problem.gt(Y, Z, t)
        A = problem.gz(Y, Z, t)
    else:
        fy = problem.fy(Y, Z, t)
        rhs = (
            contract_quadratic(problem.gyy(Y, t, Z), f)
            + np.einsum("...ij,...jk,...k->...i", gy, fy, f)
            + 2.0 * np.einsum("...ij,...j->...i", problem.gyt(Y, t, Z), f)
            + np.einsum("...ij,...j->...i", gy, problem.ft(Y, Z, t))
            + problem.gtt(Y, t, Z)
        )
        A = np.einsum("...ij,...jk->...ik", gy, problem.fz(Y, Z, t))
    try:
        if problem.m == 1:
            return -(rhs / A[..., 0, 0][..., None])
        return -np.linalg.solve(A, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("index assumption violated in batch") from exc


class ReducedODE:
    """The ODE x' = [f, h](x, t) whose invariants are the DAE constraints."""

    def __init__(self, problem):
        self.problem = problem
        self.dimension = problem.n + problem.m

    def rhs(self, t, x):
        n = self.problem.n
        f, h = reduced_rhs(self.problem, x[:n], x[n:], t)
        return np.concatenate([f, h])

    def invariant_residual(self, y, z, t):
        """Max-norm residual of g (and of the hidden constraint, index-2)."""
        p = self.problem
        res = float(np.max(np.abs(p.g(y, z, t))))
        if p.index != INDEX_1:
            hidden = p.gy(y, z, t) @ p.f(y, z, t) + p.gt(y, z, t)
            res = max(res, float(np.max(np.abs(hidden))))
        return res


class ReferenceSolution:
    """Dense-output reference trajectory with an invariant-drift report."""

    def __init__(self, ode, sol, t_span, drift):
        self.ode = ode
        self.sol = sol
        self.t_span = t_span
        self.drift = drift

    def __call__(self, t):
        """State(s) at ``t``; shape (p,) for scalars, (len(t), p) for arrays."""
        x = self.sol(t)
        return x.T if np.ndim(t) else x

    def y_z(self, t):
        n = self.ode.problem.n
        x = self(t)
        return x[..., :n], x[..., n:]


def solve_reference(ode, t_span, ic, atol=REFERENCE_ATOL, rtol=REFERENCE_RTOL,
                    drift_samples=256):
    """Integrate a reduced ODE with an adaptive embedded RK 5(4) pair.

    Dense output is produced by the pair's quartic interpolant.  The returned
    object records the maximum invariant drift over ``drift_samples``
    equispaced sample times.

    Raises
    ------
    StepSizeUnderflowError
        The integrator's step size underflowed; the problem is too stiff for
        an explicit method on this horizon.
    ToleranceUnreachableError
        Integration failed for any other reason.
    """
    t0, t_end = float(t_span[0]), float(t_span[1])
    result = scipy.integrate.solve_ivp(
        ode.rhs, (t0, t_end), np.asarray(ic, dtype=float),
        method="RK45", dense_output=True, atol=atol, rtol=rtol,
    )
    if not result.success:
        message = (result.message or "").lower()
        if "step size" in message:
            raise StepSizeUnderflowError(result.message)
        raise ToleranceUnreachableError(result.message)
    ts = np.linspace(t0, t_end, drift_samples)
    n = ode.problem.n
    drift = 0.0
    for t in ts:
        x = result.sol(t)
        drift = max(drift, ode.invariant_residual(x[:n], x[n:], t))
    return ReferenceSolution(ode, result.sol, (t0, t_end), drift)
