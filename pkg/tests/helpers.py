"""Small hand-built problems used as test fixtures and oracles."""

import numpy as np

from daeqoi.core import INDEX_1, DAEProblem


def scalar_linear(rate=-1.0):
    """y' = rate*y with the algebraic variable pinned to y (index-1).

    Closed form: y(t) = z(t) = exp(rate*t).  Implicit Euler has the closed
    form Y_n = (1 - rate*dt)^(-n), handy as an independent oracle.
    """

    def f(y, z, t):
        return rate * y

    def g(y, z, t):
        return y - z

    def analytic(t):
        t = np.asarray(t, dtype=float)
        y = np.exp(rate * t)[..., None]
        return y, y.copy()

    shape = lambda y, z, t: np.broadcast_shapes(np.shape(y)[:-1], np.shape(z)[:-1], np.shape(t))
    return DAEProblem(
        name="scalar-linear", n=1, m=1, index=INDEX_1, f=f, g=g,
        f_y=lambda y, z, t: np.full(shape(y, z, t) + (1, 1), rate),
        f_z=lambda y, z, t: np.zeros(shape(y, z, t) + (1, 1)),
        f_t=lambda y, z, t: np.zeros(shape(y, z, t) + (1,)),
        g_y=lambda y, z, t: np.ones(shape(y, z, t) + (1, 1)),
        g_z=lambda y, z, t: -np.ones(shape(y, z, t) + (1, 1)),
        g_t=lambda y, z, t: np.zeros(shape(y, z, t) + (1,)),
        y0=np.array([1.0]), z0=np.array([1.0]),
        analytic_solution=analytic, vectorized=True,
    )


def decoupled_scalar(rate):
    """y' = rate*y with an inert algebraic variable (g = z, so z = 0).

    The adjoint differential equation decouples into -phi' = rate*phi, whose
    backward implicit-Euler recursion has the closed form
    phi_{j} = phi_{j+1} / (1 - rate*dt).
    """

    def f(y, z, t):
        return rate * y

    def g(y, z, t):
        return z.copy()

    shape = lambda y, z, t: np.broadcast_shapes(np.shape(y)[:-1], np.shape(z)[:-1], np.shape(t))
    return DAEProblem(
        name="decoupled-scalar", n=1, m=1, index=INDEX_1, f=f, g=g,
        f_y=lambda y, z, t: np.full(shape(y, z, t) + (1, 1), rate),
        f_z=lambda y, z, t: np.zeros(shape(y, z, t) + (1, 1)),
        f_t=lambda y, z, t: np.zeros(shape(y, z, t) + (1,)),
        g_y=lambda y, z, t: np.zeros(shape(y, z, t) + (1, 1)),
        g_z=lambda y, z, t: np.ones(shape(y, z, t) + (1, 1)),
        g_t=lambda y, z, t: np.zeros(shape(y, z, t) + (1,)),
        y0=np.array([1.0]), z0=np.array([0.0]), vectorized=True,
    )


def unit_slope(dt_power_of_two=True):
    """y' = 1 with z = y; implicit Euler reproduces y = t exactly.

    On a grid with power-of-two dt every nodal value is an exact float, so
    residuals vanish identically and any adjoint-weighted estimate must be
    exactly zero.
    """

    def f(y, z, t):
        return np.ones_like(y)

    def g(y, z, t):
        return y - z

    shape = lambda y, z, t: np.broadcast_shapes(np.shape(y)[:-1], np.shape(z)[:-1], np.shape(t))
    def analytic(t):
        t = np.asarray(t, dtype=float)
        y = t[..., None].copy()
        return y, y.copy()

    return DAEProblem(
        name="unit-slope", n=1, m=1, index=INDEX_1, f=f, g=g,
        f_y=lambda y, z, t: np.zeros(shape(y, z, t) + (1, 1)),
        f_z=lambda y, z, t: np.zeros(shape(y, z, t) + (1, 1)),
        f_t=lambda y, z, t: np.zeros(shape(y, z, t) + (1,)),
        g_y=lambda y, z, t: np.ones(shape(y, z, t) + (1, 1)),
        g_z=lambda y, z, t: -np.ones(shape(y, z, t) + (1, 1)),
        g_t=lambda y, z, t: np.zeros(shape(y, z, t) + (1,)),
        y0=np.array([0.0]), z0=np.array([0.0]),
        analytic_solution=analytic, vectorized=True,
    )


def quadratic_blowup():
    """y' = y^2, z = y: Newton has no real solution for large dt."""

    def f(y, z, t):
        return y**2

    def g(y, z, t):
        return z - y

    return DAEProblem(
        name="quadratic-blowup", n=1, m=1, index=INDEX_1, f=f, g=g,
        y0=np.array([1.0]), z0=np.array([1.0]),
    )
