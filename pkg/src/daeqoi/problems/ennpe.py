"""Electro-neutral two-ion transport, semi-discretized on a staggered grid.

Cation and anion concentrations C, A live at cell centers, the electric
potential gradient W at interior cell edges.  Central differences in flux
form give

    C' = D_c div( grad C + avg(C) W ),
    A' = D_a div( grad A - avg(A) W ),
    0  = C_j - A_j   for the first Ns-1 cells,

with zero boundary fluxes.  Because the discrete fluxes telescope, the cell
sums of C and A are conserved exactly, which makes the constraint in the
final cell redundant: enforcing electro-neutrality on the first Ns-1 cells
keeps the last cell neutral automatically.  Dropping that final row (the
truncation below) is what renders the system a Hessenberg index-2 DAE with
g_y f_z invertible.

The continuum problem with initial data 2 + cos(pi x) separates, giving the
closed-form solution used as a reference; see :func:`ennpe_analytic`.
"""

from dataclasses import dataclass, field

import numpy as np

from ..core import INDEX_2, DAEProblem
from ..exceptions import InvalidGridError, InvalidParamsError
from ._shapes import batch_shape


def truncate(v):
    """Drop the final cell value: the projection onto the first Ns-1 cells."""
    return v[..., :-1]


@dataclass(frozen=True)
class EnnpeAssembly:
    """Grid data and operators of the staggered-grid semi-discretization."""

    ns: int
    d_c: float
    d_a: float
    dx: float = field(init=False)
    centers: np.ndarray = field(init=False)
    edges: np.ndarray = field(init=False)
    M: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.ns < 3:
            raise InvalidGridError("need at least 3 cells")
        if self.d_c <= 0 or self.d_a <= 0:
            raise InvalidParamsError("diffusion coefficients must be positive")
        dx = 1.0 / self.ns
        object.__setattr__(self, "dx", dx)
        centers = (2.0 * np.arange(1, self.ns + 1) - 1.0) * dx / 2.0
        edges = dx * np.arange(1, self.ns)
        M = np.zeros((self.ns, self.ns))
        idx = np.arange(self.ns)
        M[idx, idx] = -2.0
        M[0, 0] = M[-1, -1] = -1.0
        M[idx[:-1], idx[:-1] + 1] = 1.0
        M[idx[1:], idx[1:] - 1] = 1.0
        M /= dx**2
        for a in (centers, edges, M):
            a.flags.writeable = False
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "M", M)

    def _divergence(self, flux):
        """Difference of edge fluxes per cell, zero flux at the boundary."""
        shape = flux.shape[:-1] + (self.ns + 1,)
        padded = np.zeros(shape)
        padded[..., 1:-1] = flux
        return padded[..., 1:] - padded[..., :-1]

    def edge_average(self, v):
        return 0.5 * (v[..., :-1] + v[..., 1:])

    def drift_cation(self, C, W):
        """The drift stencil B_C: divergence of edge-averaged C times W."""
        return self._divergence(self.edge_average(C) * W / self.dx)

    def drift_anion(self, A, W):
        return self._divergence(self.edge_average(A) * W / self.dx)

    def cation_rhs(self, C, W):
        flux = (C[..., 1:] - C[..., :-1]) / self.dx**2 + self.edge_average(C) * W / self.dx
        return self.d_c * self._divergence(flux)

    def anion_rhs(self, A, W):
        flux = (A[..., 1:] - A[..., :-1]) / self.dx**2 - self.edge_average(A) * W / self.dx
        return self.d_a * self._divergence(flux)


def ennpe_assemble(ns, d_c, d_a):
    """Build the staggered-grid operators for ``ns`` cells on [0, 1]."""
    return EnnpeAssembly(ns=int(ns), d_c=float(d_c), d_a=float(d_a))


def ennpe_initial_conditions(assembly, mode="discrete"):
    """Consistent initial data (C0, A0, W0).

    ``discrete`` solves the flux-matching condition of the semi-discrete
    hidden constraint exactly; ``analytic`` samples the continuum potential
    gradient at the edges and is consistent only up to the O(dx^2) spatial
    error.
    """
    a = assembly
    C0 = 2.0 + np.cos(np.pi * a.centers)
    A0 = C0.copy()
    if mode == "discrete":
        num = (a.d_c * (C0[:-1] - C0[1:]) - a.d_a * (A0[:-1] - A0[1:])) / a.dx
        den = a.d_c * (C0[:-1] + C0[1:]) / 2.0 + a.d_a * (A0[:-1] + A0[1:]) / 2.0
        W0 = num / den
    elif mode == "analytic":
        # continuum potential gradient at t=0; equals the closed-form w and
        # the divergence-free-flux condition (D_a - D_c) c_x + (D_c + D_a) c w = 0
        x = a.edges
        W0 = ((a.d_a - a.d_c) * (-np.pi * np.sin(np.pi * x))
              / ((a.d_a + a.d_c) * (2.0 + np.cos(np.pi * x))))
    else:
        raise InvalidParamsError(f"unknown initial-condition mode {mode!r}")
    return C0, A0, W0


def ennpe_analytic(assembly, t):
    """Separated-variables solution sampled on the staggered grid.

    Returns ``(c, a, w)`` with the concentrations at cell centers and the
    potential gradient at interior edges; broadcasts over array ``t``.
    """
    a = assembly
    d_eff = 2.0 * a.d_c * a.d_a / (a.d_c + a.d_a)
    t = np.asarray(t, dtype=float)
    decay = np.exp(-np.pi**2 * d_eff * t)[..., None]
    c = 2.0 + decay * np.cos(np.pi * a.centers)
    w = ((a.d_a - a.d_c) / (a.d_a + a.d_c)) * (
        -np.pi * decay * np.sin(np.pi * a.edges)
        / (2.0 + decay * np.cos(np.pi * a.edges)))
    return c, c.copy(), w


def build(ns=50, d_c=1.0, d_a=2.0, ic="discrete"):
    """Semi-discretized electro-neutral ion transport (n=2*ns, m=ns-1).

    Staggered-grid finite differences on [0, 1]: concentrations at ``ns``
    cell centers, the potential gradient at interior cell edges, zero-flux
    boundaries, and the electro-neutrality constraint imposed on the first
    ns-1 cells (the conservative fluxes keep the last cell neutral for
    free).  The result is a Hessenberg index-2 system with a separable
    closed-form solution available as the reference.
    """
    asm = ennpe_assemble(ns, d_c, d_a)
    ns = asm.ns
    n, m = 2 * ns, ns - 1
    C0, A0, W0 = ennpe_initial_conditions(asm, ic)
    dx = asm.dx

    def _f(y, z, t):
        C, A = y[..., :ns], y[..., ns:]
        return np.concatenate([asm.cation_rhs(C, z), asm.anion_rhs(A, z)], axis=-1)

    def _g(y, z, t):
        return truncate(y[..., :ns]) - truncate(y[..., ns:])

    def _f_y(y, z, t):
        shape = batch_shape(y, z, t)
        out = np.zeros(shape + (n, n))
        a_edge = z / (2.0 * dx)  # (..., ns-1) edge drift coefficients
        zero = np.zeros(shape + (1,))
        aL = np.concatenate([zero, a_edge], axis=-1)
        aR = np.concatenate([a_edge, zero], axis=-1)
        j = np.arange(ns)
        mdiag = np.diagonal(asm.M)
        out[..., j, j] = asm.d_c * (mdiag + aR - aL)
        out[..., j[:-1], j[:-1] + 1] = asm.d_c * (1.0 / dx**2 + a_edge)
        out[..., j[1:], j[1:] - 1] = asm.d_c * (1.0 / dx**2 - a_edge)
        ja = ns + j
        out[..., ja, ja] = asm.d_a * (mdiag - (aR - aL))
        out[..., ja[:-1], ja[:-1] + 1] = asm.d_a * (1.0 / dx**2 - a_edge)
        out[..., ja[1:], ja[1:] - 1] = asm.d_a * (1.0 / dx**2 + a_edge)
        return out

    def _f_z(y, z, t):
        out = np.zeros(batch_shape(y, z, t) + (n, m))
        C, A = y[..., :ns], y[..., ns:]
        sc = asm.edge_average(C) / dx  # (..., ns-1)
        sa = asm.edge_average(A) / dx
        i = np.arange(m)
        out[..., i, i] = asm.d_c * sc
        out[..., i + 1, i] = -asm.d_c * sc
        out[..., ns + i, i] = -asm.d_a * sa
        out[..., ns + i + 1, i] = asm.d_a * sa
        return out

    def _f_t(y, z, t):
        return np.zeros(batch_shape(y, z, t) + (n,))

    gy_const = np.zeros((m, n))
    i = np.arange(m)
    gy_const[i, i] = 1.0
    gy_const[i, ns + i] = -1.0
    gy_const.flags.writeable = False

    def _g_y(y, z, t):
        return np.broadcast_to(gy_const, batch_shape(y, z, t) + (m, n))

    def _g_t(y, z, t):
        return np.zeros(batch_shape(y, z, t) + (m,))

    def _g_yy(y, t):
        shape = np.broadcast_shapes(np.shape(y)[:-1], np.shape(t))
        return np.zeros(shape + (m, n, n))

    def _g_yt(y, t):
        shape = np.broadcast_shapes(np.shape(y)[:-1], np.shape(t))
        return np.zeros(shape + (m, n))

    def _g_tt(y, t):
        shape = np.broadcast_shapes(np.shape(y)[:-1], np.shape(t))
        return np.zeros(shape + (m,))

    def _analytic(t):
        c, a, w = ennpe_analytic(asm, t)
        return np.concatenate([c, a], axis=-1), w

    problem = DAEProblem(
        name="ennpe", n=n, m=m, index=INDEX_2,
        f=_f, g=_g, f_y=_f_y, f_z=_f_z, f_t=_f_t,
        g_y=_g_y, g_t=_g_t, g_yy=_g_yy, g_yt=_g_yt, g_tt=_g_tt,
        y0=np.concatenate([C0, A0]), z0=W0,
        analytic_solution=_analytic, vectorized=True,
        params={"ns": ns, "d_c": asm.d_c, "d_a": asm.d_a, "ic": ic},
    )
    return problem
