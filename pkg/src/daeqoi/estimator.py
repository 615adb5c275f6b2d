"""Adjoint-weighted a posteriori error estimates and effectivity ratios.

The estimate of the QoI error is a sum of named contributions:

* ``initial_condition_term`` -- pairing of the adjoint at t0 with a
  user-supplied initial error (zero for consistent initial data);
* ``residual_integral_y`` -- the adjoint-weighted residual of the
  differential equations, integrated over [t0, T];
* ``constraint_integral_z`` -- on the DAE path the adjoint-weighted
  constraint residual, on the ODE path the weighted residual of the reduced
  equations for the algebraic variables;
* named boundary corrections at t = T that depend on the QoI and the index.

All integrals use the composite 5-point Gauss-Legendre rule with one panel
per refined-grid interval, so adjoint nodal values are only ever interpolated
within a single refined interval, and the piecewise slopes of the numerical
solution are constant on every panel.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .adjoint import ODE_PATH, linearized_ops_at
from .core import INDEX_1, INDEX_2, QoISpec, TimeGrid
from .exceptions import (
    NoAnalyticSolutionError,
    NonFiniteIntegrandError,
    PartitionMismatchError,
    PathMismatchError,
    StepSizeUnderflowError,
    ZeroReferenceError,
)
from .forward import bdf1_solve
from .numerics import GL5_NODES, GL5_WEIGHTS, lu_solve
from .reduction import ReducedODE, reduced_h_batched, reduced_rhs, solve_reference

UNRELIABLE_REFERENCE_FACTOR = 1e-10

_PANEL_CHUNK = 131072


@dataclass
class ErrorReport:
    """Term-by-term error estimate, optionally with reference and effectivity."""

    terms: dict
    total_estimate: float
    reference_error: Optional[float] = None
    effectivity: Optional[float] = None
    qoi_value: Optional[float] = None
    unreliable: bool = False

    def __str__(self):
        lines = [f"  {name:32s} {value: .6e}" for name, value in self.terms.items()]
        lines.append(f"  {'total_estimate':32s} {self.total_estimate: .6e}")
        if self.reference_error is not None:
            lines.append(f"  {'reference_error':32s} {self.reference_error: .6e}")
        if self.effectivity is not None:
            flag = "  (UNRELIABLE)" if self.unreliable else ""
            lines.append(f"  {'effectivity':32s} {self.effectivity: .6f}{flag}")
        return "\n".join(lines)


def _same_qoi(a, b):
    if a is b:
        return True
    if a.kind != b.kind:
        return False
    if a.kind == QoISpec.TERMINAL:
        return (np.array_equal(a.zeta_y, b.zeta_y)
                and np.array_equal(a.zeta_z, b.zeta_z))
    for x, y in ((a._psi_y, b._psi_y), (a._psi_z, b._psi_z)):
        if callable(x) or callable(y):
            if x is not y:
                return False
        elif not np.array_equal(x, y):
            return False
    return True


def _check_compatible(problem, traj, qoi, adjoint):
    if adjoint.problem_index != problem.index:
        raise PathMismatchError("adjoint was built for a different index")
    if not _same_qoi(adjoint.qoi, qoi):
        raise PathMismatchError("adjoint was built for a different QoI")
    fw, ad = traj.grid, adjoint.grid
    if fw.t0 != ad.t0 or fw.t_end != ad.t_end or ad.n_steps % fw.n_steps:
        raise PathMismatchError("adjoint grid does not refine the forward grid")


def _density_at(evaluate, times, dim):
    values = np.asarray(evaluate(times), dtype=float)
    if values.shape != times.shape + (dim,):
        flat = np.stack([np.asarray(evaluate(float(t)), dtype=float)
                         for t in times.ravel()])
        values = flat.reshape(times.shape + (dim,))
    return values


def _eval_vectorish(fn, Y, Z, times, dim, vectorized):
    if vectorized:
        return np.asarray(fn(Y, Z, times), dtype=float)
    flatY = Y.reshape(-1, Y.shape[-1])
    flatZ = Z.reshape(-1, Z.shape[-1])
    flatT = times.ravel()
    out = np.empty((flatT.shape[0], dim))
    for i in range(flatT.shape[0]):
        out[i] = fn(flatY[i], flatZ[i], flatT[i])
    return out.reshape(times.shape + (dim,))


class _PanelBatch:
    """States, slopes and adjoint values on a chunk of quadrature panels.

    Panel ``j`` of the refined grid carries 5 Gauss points; the forward
    interval containing it is ``j // r``, found by integer arithmetic so no
    floating-point binning is involved.
    """

    def __init__(self, traj, refined_grid, r, start, stop, adjoint_traj=None):
        grid = traj.grid
        rnodes = refined_grid.nodes
        dtr = refined_grid.dt
        j = np.arange(start, stop)
        xi = 0.5 * (GL5_NODES + 1.0)
        self.times = rnodes[j][:, None] + dtr * xi[None, :]
        self.weights = 0.5 * dtr * GL5_WEIGHTS
        k = j // r
        theta = ((self.times - grid.nodes[k][:, None]) / grid.dt)[..., None]
        self.Y = (1.0 - theta) * traj.Y[k][:, None, :] + theta * traj.Y[k + 1][:, None, :]
        self.Z = (1.0 - theta) * traj.Z[k][:, None, :] + theta * traj.Z[k + 1][:, None, :]
        self.Ydot = ((traj.Y[k + 1] - traj.Y[k]) / grid.dt)[:, None, :]
        self.Zdot = ((traj.Z[k + 1] - traj.Z[k]) / grid.dt)[:, None, :]
        if adjoint_traj is not None:
            lam = xi[None, :, None]
            self.phi_y = ((1.0 - lam) * adjoint_traj.Y[j][:, None, :]
                          + lam * adjoint_traj.Y[j + 1][:, None, :])
            self.phi_z = ((1.0 - lam) * adjoint_traj.Z[j][:, None, :]
                          + lam * adjoint_traj.Z[j + 1][:, None, :])

    def integrate(self, values):
        """Sum of weights * values over the chunk, values shaped (c, 5)."""
        return float(np.sum(values @ self.weights))


def _iter_panels(total):
    for start in range(0, total, _PANEL_CHUNK):
        yield start, min(start + _PANEL_CHUNK, total)


def estimate_error(problem, traj, qoi, adjoint, initial_error=None):
    """Evaluate the error representation matching ``adjoint`` by quadrature.

    ``initial_error`` is an optional pair ``(e_y0, e_z0)`` of initial-data
    errors; built-in problems start from consistent data, so it defaults to
    zero.  Returns an :class:`ErrorReport` whose total is the exact sum of
    the named terms.
    """
    _check_compatible(problem, traj, qoi, adjoint)
    n, m = problem.n, problem.m
    r = adjoint.grid.n_steps // traj.grid.n_steps
    K = adjoint.grid.n_steps
    cumulative = qoi.kind == QoISpec.CUMULATIVE
    ode_path = adjoint.path == ODE_PATH

    residual_y = 0.0
    constraint_z = 0.0
    qoi_value = 0.0
    for start, stop in _iter_panels(K):
        batch = _PanelBatch(traj, adjoint.grid, r, start, stop,
                            adjoint_traj=adjoint.traj)
        f_vals = _eval_vectorish(problem.f, batch.Y, batch.Z, batch.times, n,
                                 problem.vectorized)
        resid = np.einsum("csn,csn->cs", batch.phi_y, f_vals - batch.Ydot)
        residual_y += batch.integrate(resid)
        if ode_path:
            if problem.vectorized:
                h_vals = reduced_h_batched(problem, batch.Y, batch.Z, batch.times)
            else:
                h_vals = _eval_vectorish(
                    lambda y, z, t: reduced_rhs(problem, y, z, t)[1],
                    batch.Y, batch.Z, batch.times, m, False)
            resid_z = np.einsum("csm,csm->cs", batch.phi_z, h_vals - batch.Zdot)
        else:
            g_vals = _eval_vectorish(problem.g, batch.Y, batch.Z, batch.times, m,
                                     problem.vectorized)
            resid_z = np.einsum("csm,csm->cs", batch.phi_z, g_vals)
        constraint_z += batch.integrate(resid_z)
        if cumulative:
            psi_y = _density_at(qoi.psi_y_at, batch.times, n)
            psi_z = _density_at(qoi.psi_z_at, batch.times, m)
            density = (np.einsum("csn,csn->cs", psi_y, batch.Y)
                       + np.einsum("csm,csm->cs", psi_z, batch.Z))
            qoi_value += batch.integrate(density)

    if not np.isfinite(residual_y) or not np.isfinite(constraint_z):
        raise NonFiniteIntegrandError("non-finite estimate integrand")

    terms = {}
    terms["initial_condition_term"] = _initial_term(adjoint, initial_error, n, m)
    terms["residual_integral_y"] = residual_y
    terms["constraint_integral_z"] = constraint_z
    terms.update(_boundary_corrections(problem, traj, qoi, adjoint))

    if not cumulative:
        yT, zT = traj.Y[-1], traj.Z[-1]
        qoi_value = float(qoi.zeta_y @ yT + qoi.zeta_z @ zT)

    total = float(sum(terms.values()))
    return ErrorReport(terms=terms, total_estimate=total, qoi_value=qoi_value)


def _initial_term(adjoint, initial_error, n, m):
    if initial_error is None:
        return 0.0
    e_y0 = np.asarray(initial_error[0], dtype=float).reshape(n)
    value = float(adjoint.phi_y[0] @ e_y0)
    if adjoint.path == ODE_PATH:
        e_z0 = np.asarray(initial_error[1], dtype=float).reshape(m)
        value += float(adjoint.phi_z[0] @ e_z0)
    return value


def _boundary_corrections(problem, traj, qoi, adjoint):
    """Named boundary terms at t = T; empty for the ODE path."""
    if adjoint.path == ODE_PATH:
        return {}
    T = traj.grid.t_end
    ops = linearized_ops_at(problem, traj, T)
    yT, zT = traj.Y[-1], traj.Z[-1]
    gT = np.asarray(problem.g(yT, zT, T), dtype=float)
    terms = {}

    if qoi.kind == QoISpec.CUMULATIVE:
        if problem.index == INDEX_2:
            psi_z_T = qoi.psi_z_at(T)
            if np.any(psi_z_T != 0.0):
                w = lu_solve((ops.gy @ ops.fz).T, psi_z_T)
                terms["constraint_mismatch_at_T"] = -float(gT @ w)
        return terms

    zeta_y = qoi.zeta_y
    zeta_z = qoi.zeta_z
    if problem.index == INDEX_1:
        if np.any(zeta_z != 0.0):
            w = lu_solve(ops.gz.T, zeta_z)
            terms["constraint_mismatch_at_T"] = -float(w @ gT)
        return terms

    fzTgyT = (ops.gy @ ops.fz).T
    if np.any(zeta_y != 0.0):
        u = lu_solve(fzTgyT, ops.fz.T @ zeta_y)
        terms["g_weighted_zeta_y_at_T"] = -float(u @ gT)
    if np.any(zeta_z != 0.0):
        w = lu_solve(fzTgyT, zeta_z)
        gyTw = ops.gy.T @ w
        ydotT, _ = traj.derivative(T)
        fT = np.asarray(problem.f(yT, zT, T), dtype=float)
        terms["f_weighted_zeta_z_at_T"] = -float(gyTw @ fT)
        terms["ydot_weighted_zeta_z_at_T"] = float(gyTw @ ydotT)
        u2 = lu_solve(fzTgyT, ops.fz.T @ (ops.fy.T @ gyTw))
        terms["g_weighted_fy_zeta_z_at_T"] = float(u2 @ gT)
        dgdt = ops.gy @ ydotT + problem.gt(yT, zT, T)
        terms["dgdt_weighted_zeta_z_at_T"] = -float(w @ dgdt)
    return terms


def _difference_qoi(problem, traj, qoi, r, reference_at):
    """Q(reference) - Q(X) with the difference integrated directly."""
    if qoi.kind == QoISpec.TERMINAL:
        T = traj.grid.t_end
        x_ref = np.asarray(reference_at(T), dtype=float)
        y_ref, z_ref = x_ref[: problem.n], x_ref[problem.n:]
        return float(qoi.zeta_y @ (y_ref - traj.Y[-1])
                     + qoi.zeta_z @ (z_ref - traj.Z[-1]))
    refined = traj.grid.refined(r)
    total = 0.0
    for start, stop in _iter_panels(refined.n_steps):
        batch = _PanelBatch(traj, refined, r, start, stop)
        x_ref = np.asarray(reference_at(batch.times.ravel()), dtype=float)
        x_ref = x_ref.reshape(batch.times.shape + (problem.n + problem.m,))
        psi_y = _density_at(qoi.psi_y_at, batch.times, problem.n)
        psi_z = _density_at(qoi.psi_z_at, batch.times, problem.m)
        diff = (np.einsum("csn,csn->cs", psi_y, x_ref[..., :problem.n] - batch.Y)
                + np.einsum("csm,csm->cs", psi_z, x_ref[..., problem.n:] - batch.Z))
        total += batch.integrate(diff)
    return total


ANALYTIC_BACKEND = "analytic"
RK_BACKEND = "rk-adaptive"
RICHARDSON_BACKEND = "fine-bdf-richardson"

RICHARDSON_REFINE = 32


def reference_qoi_error(problem, traj, qoi, backend=RK_BACKEND, r=4,
                        reference=None, atol=None, rtol=None,
                        newton_settings=None):
    """Reference value of Q(x) - Q(X) for effectivity ratios.

    Backends:

    * ``analytic``: uses the problem's analytic solution.
    * ``rk-adaptive``: tight-tolerance adaptive RK on the index-reduced ODE;
      if the explicit integrator underflows its step size (severe
      stiffness), automatically falls back to the Richardson backend.
    * ``fine-bdf-richardson``: two fine implicit-Euler solves (dt/32 and
      dt/64 by default) extrapolated to remove the leading error term.

    ``reference`` may carry a precomputed :class:`ReferenceSolution` valid on
    a span containing this trajectory, to share work across experiments.
    """
    if backend == ANALYTIC_BACKEND:
        if problem.analytic_solution is None:
            raise NoAnalyticSolutionError(problem.name)

        def reference_at(t):
            y, z = problem.analytic_solution(t)
            return np.concatenate([np.atleast_1d(y), np.atleast_1d(z)], axis=-1)

        return _difference_qoi(problem, traj, qoi, r, reference_at)

    if backend == RK_BACKEND:
        if reference is None:
            ode = ReducedODE(problem)
            ic = np.concatenate([problem.y0, problem.z0])
            kwargs = {}
            if atol is not None:
                kwargs["atol"] = atol
            if rtol is not None:
                kwargs["rtol"] = rtol
            try:
                reference = solve_reference(
                    ode, (problem.t0, traj.grid.t_end), ic, **kwargs)
            except StepSizeUnderflowError:
                return reference_qoi_error(
                    problem, traj, qoi, backend=RICHARDSON_BACKEND, r=r,
                    newton_settings=newton_settings)
        return _difference_qoi(problem, traj, qoi, r, reference)

    if backend == RICHARDSON_BACKEND:
        t_end = traj.grid.t_end
        n_fine = traj.grid.n_steps * RICHARDSON_REFINE
        grid1 = TimeGrid(problem.t0, t_end, n_fine)
        grid2 = TimeGrid(problem.t0, t_end, 2 * n_fine)
        e1 = _fine_minus_coarse_qoi(problem, bdf1_solve(problem, grid1, newton_settings),
                                    traj, qoi)
        e2 = _fine_minus_coarse_qoi(problem, bdf1_solve(problem, grid2, newton_settings),
                                    traj, qoi)
        return 2.0 * e2 - e1

    raise PathMismatchError(f"unknown reference backend {backend!r}")


def _fine_minus_coarse_qoi(problem, fine, coarse, qoi):
    """Q(fine) - Q(coarse) for nested piecewise-linear trajectories."""
    if qoi.kind == QoISpec.TERMINAL:
        return float(qoi.zeta_y @ (fine.Y[-1] - coarse.Y[-1])
                     + qoi.zeta_z @ (fine.Z[-1] - coarse.Z[-1]))

    def reference_at(t):
        Y, Z = fine.values_at(t)
        return np.concatenate([Y, Z], axis=-1)

    ratio = fine.grid.n_steps // coarse.grid.n_steps
    return _difference_qoi(problem, coarse, qoi, ratio, reference_at)


def effectivity(report, qoi_scale=None):
    """Estimate / reference ratio; flags the cancellation regime.

    The ratio is marked unreliable when the reference error is smaller than
    ``1e-10`` times the magnitude of the computed QoI, where round-off and
    cancellation dominate both numerator and denominator.
    """
    if report.reference_error is None or report.reference_error == 0.0:
        raise ZeroReferenceError("reference error absent or exactly zero")
    ratio = report.total_estimate / report.reference_error
    scale = qoi_scale if qoi_scale is not None else report.qoi_value
    if scale is not None and abs(report.reference_error) < (
            UNRELIABLE_REFERENCE_FACTOR * abs(scale)):
        report.unreliable = True
    report.effectivity = ratio
    return ratio


def cancellation_split(problem, traj, adjoint, parts=4):
    """Split the residual integral by contiguous blocks of components.

    Returns the array ``[I_1, ..., I_parts]`` with
    ``I_i = <phi_y_i, f_i(Y,Z) - Ydot_i>``; the blocks partition the
    differential variables, so the values sum to the full residual integral.
    Equal-magnitude, alternating-sign blocks diagnose catastrophic
    cancellation in the total.
    """
    n = problem.n
    if n % parts:
        raise PartitionMismatchError(f"n={n} not divisible into {parts} parts")
    width = n // parts
    r = adjoint.grid.n_steps // traj.grid.n_steps
    K = adjoint.grid.n_steps
    totals = np.zeros(parts)
    for start, stop in _iter_panels(K):
        batch = _PanelBatch(traj, adjoint.grid, r, start, stop,
                            adjoint_traj=adjoint.traj)
        f_vals = _eval_vectorish(problem.f, batch.Y, batch.Z, batch.times, n,
                                 problem.vectorized)
        resid = batch.phi_y * (f_vals - batch.Ydot)
        for i in range(parts):
            block = resid[..., i * width:(i + 1) * width].sum(axis=-1)
            totals[i] += batch.integrate(block)
    return totals
