"""Robertson chemical kinetics in semi-explicit index-1 form.

The classic stiff three-species reaction network, written with the third
species as an algebraic variable through the mass-balance constraint
y1 + y2 + z = 1:

    y1' = -0.04 y1 + 1e4 y2 z
    y2' =  0.04 y1 - 1e4 y2 z - 3e7 y2^2
    0   =  y1 + y2 + z - 1
"""

import numpy as np

from ..core import INDEX_1, DAEProblem
from ._shapes import batch_shape

K1 = 0.04
K2 = 1.0e4
K3 = 3.0e7


def _f(y, z, t):
    y1, y2 = y[..., 0], y[..., 1]
    w = z[..., 0]
    f1 = -K1 * y1 + K2 * y2 * w
    f2 = K1 * y1 - K2 * y2 * w - K3 * y2**2
    return np.stack(np.broadcast_arrays(f1, f2), axis=-1)


def _g(y, z, t):
    return (y[..., 0] + y[..., 1] + z[..., 0] - 1.0)[..., None]


def _f_y(y, z, t):
    out = np.zeros(batch_shape(y, z, t) + (2, 2))
    w = z[..., 0]
    out[..., 0, 0] = -K1
    out[..., 0, 1] = K2 * w
    out[..., 1, 0] = K1
    out[..., 1, 1] = -K2 * w - 2.0 * K3 * y[..., 1]
    return out


def _f_z(y, z, t):
    out = np.zeros(batch_shape(y, z, t) + (2, 1))
    out[..., 0, 0] = K2 * y[..., 1]
    out[..., 1, 0] = -K2 * y[..., 1]
    return out


def _f_t(y, z, t):
    return np.zeros(batch_shape(y, z, t) + (2,))


def _g_y(y, z, t):
    return np.ones(batch_shape(y, z, t) + (1, 2))


def _g_z(y, z, t):
    return np.ones(batch_shape(y, z, t) + (1, 1))


def _g_t(y, z, t):
    return np.zeros(batch_shape(y, z, t) + (1,))


def build():
    """Robertson reaction kinetics as an index-1 DAE (n=2, m=1).

    Stiff three-species autocatalytic reaction with the third concentration
    eliminated through the mass balance y1 + y2 + z = 1.
    """
    return DAEProblem(
        name="robertson",
        n=2,
        m=1,
        index=INDEX_1,
        f=_f,
        g=_g,
        f_y=_f_y,
        f_z=_f_z,
        f_t=_f_t,
        g_y=_g_y,
        g_z=_g_z,
        g_t=_g_t,
        y0=np.array([1.0, 0.0]),
        z0=np.array([0.0]),
        vectorized=True,
    )
