"""Planar pendulum in Cartesian coordinates, index-1 and index-2 variants.

State is (x, y, vx, vy) with the rod force entering through the Lagrange
multiplier z.  Differentiating the length constraint once gives the index-2
tangency condition y1 y3 + y2 y4 = 0; differentiating again gives the
index-1 force-balance constraint

    mass (y3^2 + y4^2 - gravity y2) - 2 z (y1^2 + y2^2) = 0.

Both variants share the dynamics and the consistent initial state hanging
horizontally with unit tangential speed.
"""

import numpy as np

from ..core import INDEX_1, INDEX_2, DAEProblem
from ..exceptions import InvalidParamsError
from ._shapes import batch_shape


def _make_f(mass, gravity):
    def _f(y, z, t):
        w = z[..., 0]
        f1 = y[..., 2]
        f2 = y[..., 3]
        f3 = -2.0 * y[..., 0] * w / mass
        f4 = -gravity - 2.0 * y[..., 1] * w / mass
        return np.stack(np.broadcast_arrays(f1, f2, f3, f4), axis=-1)

    def _f_y(y, z, t):
        out = np.zeros(batch_shape(y, z, t) + (4, 4))
        w = z[..., 0]
        out[..., 0, 2] = 1.0
        out[..., 1, 3] = 1.0
        out[..., 2, 0] = -2.0 * w / mass
        out[..., 3, 1] = -2.0 * w / mass
        return out

    def _f_z(y, z, t):
        out = np.zeros(batch_shape(y, z, t) + (4, 1))
        out[..., 2, 0] = -2.0 * y[..., 0] / mass
        out[..., 3, 0] = -2.0 * y[..., 1] / mass
        return out

    def _f_t(y, z, t):
        return np.zeros(batch_shape(y, z, t) + (4,))

    return _f, _f_y, _f_z, _f_t


def _validate(mass, gravity, length):
    if mass <= 0 or length <= 0:
        raise InvalidParamsError("mass and length must be positive")
    if gravity <= 0:
        raise InvalidParamsError("gravity must be positive")


def _initial_state(mass, gravity, length):
    y0 = np.array([0.0, -length, 1.0, 0.0])
    z0 = np.array([mass * (1.0 + length * gravity) / (2.0 * length**2)])
    return y0, z0


def build_index1(mass=1.0, gravity=9.81, length=1.0):
    """Pendulum with the twice-differentiated (force balance) constraint; index-1."""
    _validate(mass, gravity, length)
    _f, _f_y, _f_z, _f_t = _make_f(mass, gravity)

    def _g(y, z, t):
        w = z[..., 0]
        value = (mass * (y[..., 2] ** 2 + y[..., 3] ** 2 - gravity * y[..., 1])
                 - 2.0 * w * (y[..., 0] ** 2 + y[..., 1] ** 2))
        return value[..., None]

    def _g_y(y, z, t):
        out = np.empty(batch_shape(y, z, t) + (1, 4))
        w = z[..., 0]
        out[..., 0, 0] = -4.0 * w * y[..., 0]
        out[..., 0, 1] = -mass * gravity - 4.0 * w * y[..., 1]
        out[..., 0, 2] = 2.0 * mass * y[..., 2]
        out[..., 0, 3] = 2.0 * mass * y[..., 3]
        return out

    def _g_z(y, z, t):
        out = np.empty(batch_shape(y, z, t) + (1, 1))
        out[..., 0, 0] = -2.0 * (y[..., 0] ** 2 + y[..., 1] ** 2)
        return out

    def _g_t(y, z, t):
        return np.zeros(batch_shape(y, z, t) + (1,))

    y0, z0 = _initial_state(mass, gravity, length)
    return DAEProblem(
        name="pendulum1", n=4, m=1, index=INDEX_1,
        f=_f, g=_g, f_y=_f_y, f_z=_f_z, f_t=_f_t,
        g_y=_g_y, g_z=_g_z, g_t=_g_t,
        y0=y0, z0=z0, vectorized=True,
        params={"mass": mass, "gravity": gravity, "length": length},
    )


def build_index2(mass=1.0, gravity=9.81, length=1.0):
    """Pendulum with the tangency constraint y1 y3 + y2 y4 = 0; Hessenberg index-2."""
    _validate(mass, gravity, length)
    _f, _f_y, _f_z, _f_t = _make_f(mass, gravity)

    def _g(y, z, t):
        return (y[..., 0] * y[..., 2] + y[..., 1] * y[..., 3])[..., None]

    def _g_y(y, z, t):
        out = np.empty(batch_shape(y, z, t) + (1, 4))
        out[..., 0, 0] = y[..., 2]
        out[..., 0, 1] = y[..., 3]
        out[..., 0, 2] = y[..., 0]
        out[..., 0, 3] = y[..., 1]
        return out

    def _g_t(y, z, t):
        return np.zeros(batch_shape(y, z, t) + (1,))

    def _g_yy(y, t):
        out = np.zeros(np.shape(y)[:-1] + (1, 4, 4))
        out[..., 0, 0, 2] = 1.0
        out[..., 0, 2, 0] = 1.0
        out[..., 0, 1, 3] = 1.0
        out[..., 0, 3, 1] = 1.0
        return np.broadcast_to(out, np.broadcast_shapes(np.shape(y)[:-1], np.shape(t)) + (1, 4, 4))

    def _g_yt(y, t):
        return np.zeros(np.broadcast_shapes(np.shape(y)[:-1], np.shape(t)) + (1, 4))

    def _g_tt(y, t):
        return np.zeros(np.broadcast_shapes(np.shape(y)[:-1], np.shape(t)) + (1,))

    y0, z0 = _initial_state(mass, gravity, length)
    return DAEProblem(
        name="pendulum2", n=4, m=1, index=INDEX_2,
        f=_f, g=_g, f_y=_f_y, f_z=_f_z, f_t=_f_t,
        g_y=_g_y, g_t=_g_t, g_yy=_g_yy, g_yt=_g_yt, g_tt=_g_tt,
        y0=y0, z0=z0, vectorized=True,
        params={"mass": mass, "gravity": gravity, "length": length},
    )
