"""Dense numerical kernels: LU solves, quadrature, finite differences.

Everything here is a pure function of its inputs, so concurrent use is safe.
The kernels are deliberately dense-only; the systems handled by this package
stay below a thousand unknowns.
"""

import warnings

import numpy as np
import scipy.linalg

from .exceptions import (
    DimensionMismatchError,
    NonFiniteEvaluationError,
    NonFiniteIntegrandError,
    SingularMatrixError,
)

SQRT_EPS = float(np.sqrt(np.finfo(float).eps))

# 5-point Gauss-Legendre rule on [-1, 1]; exact through degree 9.
GL5_NODES = np.array(
    [
        -0.9061798459386639928,
        -0.5384693101056830910,
        0.0,
        0.5384693101056830910,
        0.9061798459386639928,
    ]
)
GL5_WEIGHTS = np.array(
    [
        0.2369268850561890875,
        0.4786286704993664680,
        0.5688888888888888889,
        0.4786286704993664680,
        0.2369268850561890875,
    ]
)


def lu_solve(A, b, pivot_floor=1e-14):
    """Solve ``A x = b`` by dense LU with partial pivoting.

    Parameters
    ----------
    A : (p, p) array_like
        Square coefficient matrix.
    b : (p,) or (p, k) array_like
        Right-hand side(s).
    pivot_floor : float
        A pivot whose magnitude falls below ``pivot_floor * max(1, |A|_max)``
        makes the matrix count as singular.

    Raises
    ------
    SingularMatrixError
        If a pivot falls below the floor.  On DAE Jacobian blocks this is the
        symptom of a violated index assumption.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise DimensionMismatchError(
            f"rhs length {b.shape[0]} does not match matrix size {A.shape[0]}"
        )
    try:
        with warnings.catch_warnings():
            # singularity is diagnosed below against the pivot floor
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    except scipy.linalg.LinAlgError as exc:  # exact singularity
        raise SingularMatrixError(str(exc)) from exc
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 1.0)
    pivots = np.abs(np.diag(lu))
    if np.any(pivots < pivot_floor * scale) or not np.all(np.isfinite(pivots)):
        raise SingularMatrixError(
            f"pivot {pivots.min():.3e} below floor {pivot_floor * scale:.3e}"
        )
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def gl5_panels(a, b, subintervals):
    """Nodes and weights of the composite 5-point Gauss-Legendre rule.

    Returns ``(times, weights)`` with shape ``(subintervals, 5)`` each, panel
    ``i`` covering ``[a + i*h, a + (i+1)*h]`` with ``h = (b - a)/subintervals``.
    """
    if not b > a:
        raise DimensionMismatchError(f"need a < b, got a={a}, b={b}")
    if subintervals < 1:
        raise DimensionMismatchError("subintervals must be >= 1")
    h = (b - a) / subintervals
    left = a + h * np.arange(subintervals)[:, None]
    times = left + 0.5 * h * (GL5_NODES[None, :] + 1.0)
    weights = np.broadcast_to(0.5 * h * GL5_WEIGHTS, times.shape)
    return times, weights


def gauss_legendre_5(integrand, a, b, subintervals=1):
    """Integrate a vector-valued function by composite 5-point Gauss-Legendre.

    The rule is exact for polynomials of degree <= 9 on each panel.

    Parameters
    ----------
    integrand : callable
        Maps a scalar time to a float or a 1-d array.
    a, b : float
        Integration limits, ``a < b``.
    subintervals : int
        Number of equal panels.

    Raises
    ------
    NonFiniteIntegrandError
        If any evaluation is non-finite.
    """
    times, weights = gl5_panels(a, b, subintervals)
    total = None
    for t, w in zip(times.ravel(), weights.ravel()):
        value = np.asarray(integrand(t), dtype=float)
        if not np.all(np.isfinite(value)):
            raise NonFiniteIntegrandError(f"integrand non-finite at t={t!r}")
        total = w * value if total is None else total + w * value
    return total


def fd_jacobian(fn, at, step=None):
    """Central finite-difference Jacobian of ``fn`` at ``at``.

    The default step balances truncation against round-off:
    ``sqrt(eps) * (1 + |x_j|)`` per component.  The approximation error is
    O(step^2) for smooth ``fn``.
    """
    x = np.asarray(at, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatchError("expansion point must be a vector")
    if step is None:
        steps = SQRT_EPS * (1.0 + np.abs(x))
    else:
        if not step > 0:
            raise DimensionMismatchError("step must be positive")
        steps = np.full(x.shape, float(step))
    f0 = np.asarray(fn(x), dtype=float)
    if not np.all(np.isfinite(f0)):
        raise NonFiniteEvaluationError("function non-finite at expansion point")
    jac = np.empty((f0.shape[0], x.shape[0]))
    for j in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[j] += steps[j]
        xm[j] -= steps[j]
        fp = np.asarray(fn(xp), dtype=float)
        fm = np.asarray(fn(xm), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFiniteEvaluationError(
                f"function non-finite at perturbation of component {j}"
            )
        jac[:, j] = (fp - fm) / (2.0 * steps[j])
    return jac


def contract_quadratic(tensor, v):
    """Contract a stack of Hessians against a vector twice.

    ``tensor`` has shape ``(m, n, n)`` (or a batch ``(..., m, n, n)``) and the
    result has components ``out_i = v^T tensor[i] v``.
    """
    T = np.asarray(tensor, dtype=float)
    v = np.asarray(v, dtype=float)
    if T.ndim < 3 or T.shape[-1] != T.shape[-2]:
        raise DimensionMismatchError(f"expected (..., m, n, n) tensor, got {T.shape}")
    if v.shape[-1] != T.shape[-1]:
        raise DimensionMismatchError(
            f"vector length {v.shape[-1]} does not match tensor dimension {T.shape[-1]}"
        )
    return np.einsum("...ijk,...j,...k->...i", T, v, v)
