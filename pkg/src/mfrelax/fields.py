"""Analytic initial conditions and the divergence-free projection.

Both built-in fields are divergence-free in closed form.  Discrete initial
data is produced by canonical DOF interpolation followed by a saddle-point
projection onto the discretely divergence-free subspace; the zero-mean
pressure constraint is enforced with a single scalar multiplier rather
than by pinning a cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .derham import FieldVec, SpaceKind, require_space
from .linsolve import factorize


@dataclass(frozen=True)
class HopfParams:
    """Winding numbers and scale of the twisted toroidal field."""

    omega1: float = 3.0
    omega2: float = 2.0
    scale: float = 1.0

    def __post_init__(self):
        if self.omega1 ** 2 + self.omega2 ** 2 <= 0.0:
            raise ValueError("winding numbers must not both vanish")
        if self.scale < 0.0:
            raise ValueError("scale must be nonnegative")


def hopf_field(params: HopfParams):
    """Twisted linked-field-line configuration; smooth and div-free.

    Returns a vectorized callable mapping (n, 3) points to (n, 3) values.
    """
    w1, w2, s = params.omega1, params.omega2, params.scale
    amp = 4.0 * np.sqrt(s) / (np.pi * np.sqrt(w1 * w1 + w2 * w2))

    def field(points):
        points = np.asarray(points, dtype=float)
        x, y, z = points[:, 0], points[:, 1], points[:, 2]
        r2 = x * x + y * y + z * z
        pref = amp / (1.0 + r2) ** 3
        out = np.empty_like(points)
        out[:, 0] = pref * 2.0 * (w2 * y - w1 * x * z)
        out[:, 1] = pref * (-2.0) * (w2 * x + w1 * y * z)
        out[:, 2] = pref * w1 * (-1.0 + x * x + y * y - z * z)
        return out

    return field


def isohelix_field():
    """Twisted homogeneous field: zero helicity, unit vertical component."""

    def field(points):
        points = np.asarray(points, dtype=float)
        x, y, z = points[:, 0], points[:, 1], points[:, 2]
        alpha = 0.5 * np.pi * z * np.exp(-0.5 * (x * x + y * y) - 0.25 * z * z)
        out = np.empty_like(points)
        out[:, 0] = alpha * y
        out[:, 1] = -alpha * x
        out[:, 2] = 1.0
        return out

    return field


def project_divfree(cx, raw):
    """Project a face-space field onto the discretely divergence-free
    subspace (mass-orthogonal projection), returning the projected field and
    the zero-mean pressure.

    Saddle system: minimize the mass-norm distance to ``raw`` subject to
    div B = 0; the scalar multiplier pins the pressure mean.
    """
    require_space(raw, SpaceKind.FACE)
    n_f = cx.dims[SpaceKind.FACE]
    n_c = cx.dims[SpaceKind.CELL]

    div_pair = (cx.mass_cell @ cx.div).tocsr()  # (q, div B) pairing
    ones = np.ones(n_c)  # (q, 1) = sum of cell integrals
    system = sp.bmat(
        [
            [cx.mass_face, -div_pair.T, None],
            [-div_pair, None, -ones[:, None]],
            [None, -ones[None, :], None],
        ],
        format="csc",
    )
    rhs = np.concatenate([cx.mass_face @ raw.data, np.zeros(n_c + 1)])
    sol = factorize(system).solve(rhs)
    projected = FieldVec(SpaceKind.FACE, sol[:n_f])
    pressure = FieldVec(SpaceKind.CELL, sol[n_f : n_f + n_c])
    return projected, pressure
