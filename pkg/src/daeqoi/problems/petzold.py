"""A nonlinear, non-autonomous Hessenberg index-2 test problem.

    y1' = lam y1 - z
    y2' = (2 lam - sin^2 t) y2 + (sin^2 t)(y1 - 1)^2
    0   = y2 - (y1 - 1)^2

The constraint is z-free and g_y f_z = 2 (y1 - 1) stays nonsingular along
solutions started from y1(0) = 2.  The problem has the closed-form solution
y1 = 1 + exp(lam t), y2 = exp(2 lam t), z = lam, which makes it a convenient
exact-reference test case.
"""

import numpy as np

from ..core import INDEX_2, DAEProblem
from ..exceptions import InvalidParamsError
from ._shapes import batch_shape


def build(lam=-1.0):
    """Nonlinear non-autonomous Hessenberg index-2 problem (n=2, m=1).

    Carries the closed-form solution y1 = 1 + exp(lam t), y2 = exp(2 lam t),
    z = lam, so exact reference errors are available for any horizon.
    """
    lam = float(lam)
    if lam == 0.0:
        raise InvalidParamsError("lam must be nonzero")

    def _f(y, z, t):
        s2 = np.sin(t) ** 2
        w = z[..., 0]
        u = y[..., 0] - 1.0
        f1 = lam * y[..., 0] - w
        f2 = (2.0 * lam - s2) * y[..., 1] + s2 * u**2
        return np.stack(np.broadcast_arrays(f1, f2), axis=-1)

    def _g(y, z, t):
        return (y[..., 1] - (y[..., 0] - 1.0) ** 2)[..., None]

    def _f_y(y, z, t):
        out = np.zeros(batch_shape(y, z, t) + (2, 2))
        s2 = np.sin(t) ** 2
        out[..., 0, 0] = lam
        out[..., 1, 0] = 2.0 * s2 * (y[..., 0] - 1.0)
        out[..., 1, 1] = 2.0 * lam - s2
        return out

    def _f_z(y, z, t):
        out = np.zeros(batch_shape(y, z, t) + (2, 1))
        out[..., 0, 0] = -1.0
        return out

    def _f_t(y, z, t):
        out = np.zeros(batch_shape(y, z, t) + (2,))
        u = y[..., 0] - 1.0
        out[..., 1] = np.sin(2.0 * t) * (u**2 - y[..., 1])
        return out

    def _g_y(y, z, t):
        out = np.empty(batch_shape(y, z, t) + (1, 2))
        out[..., 0, 0] = -2.0 * (y[..., 0] - 1.0)
        out[..., 0, 1] = 1.0
        return out

    def _g_t(y, z, t):
        return np.zeros(batch_shape(y, z, t) + (1,))

    def _g_yy(y, t):
        shape = np.broadcast_shapes(np.shape(y)[:-1], np.shape(t))
        out = np.zeros(shape + (1, 2, 2))
        out[..., 0, 0, 0] = -2.0
        return out

    def _g_yt(y, t):
        shape = np.broadcast_shapes(np.shape(y)[:-1], np.shape(t))
        return np.zeros(shape + (1, 2))

    def _g_tt(y, t):
        shape = np.broadcast_shapes(np.shape(y)[:-1], np.shape(t))
        return np.zeros(shape + (1,))

    def _analytic(t):
        t = np.asarray(t, dtype=float)
        e = np.exp(lam * t)
        y = np.stack(np.broadcast_arrays(1.0 + e, e**2), axis=-1)
        z = np.full(t.shape + (1,), lam)
        return y, z

    return DAEProblem(
        name="petzold2", n=2, m=1, index=INDEX_2,
        f=_f, g=_g, f_y=_f_y, f_z=_f_z, f_t=_f_t,
        g_y=_g_y, g_t=_g_t, g_yy=_g_yy, g_yt=_g_yt, g_tt=_g_tt,
        y0=np.array([2.0, 1.0]), z0=np.array([lam]),
        analytic_solution=_analytic, vectorized=True,
        params={"lam": lam},
    )
