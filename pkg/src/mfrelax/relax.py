"""Implicit-midpoint time integration of the magneto-frictional schemes.

Four schemes share one Newton driver over the monolithic stage system:

* ``sp``: the four-field structure-preserving scheme with auxiliary
  current and magnetic field (both L2-projected into the edge space);
* ``hdiv_noH``: the same with the auxiliary magnetic field replaced by
  the flux field itself (loses helicity conservation);
* ``hcurl``: circulation-based magnetic field without essential BCs,
  velocity in the normal-flux space;
* ``h1``: continuous vector-nodal magnetic field and velocity with
  normal components pinned on the boundary planes.

Every nonlinear form is assembled with the same 3-point tensor Gauss rule
used for its Jacobian, so stage equations and their linearizations are
consistent to machine precision.  Linear terms use the closed-form mass
matrices.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dataclass_field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .derham import (
    BilinearPattern,
    CellBasisTables,
    FieldVec,
    SpaceError,
    SpaceKind,
    full_to_free_map,
    interpolate,
    interpolate_nodal,
    require_space,
)
from .fields import project_divfree
from .linsolve import factorize


class SchemeKind(str, Enum):
    SP = "sp"
    HDIV_NO_H = "hdiv_noH"
    HCURL = "hcurl"
    H1 = "h1"


@dataclass
class StepperConfig:
    """Time step, coupling strength and Newton controls."""

    dt: float
    tau: float
    newton_abs_tol: float = 1e-10
    newton_max_iter: int = 20
    allow_dt_halving: bool = False

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.tau < 0.0:
            raise ValueError("tau must be nonnegative")


@dataclass
class SchemeState:
    t: float
    B: FieldVec
    scheme: SchemeKind

    def copy(self):
        return SchemeState(self.t, self.B.copy(), self.scheme)


@dataclass
class StepReport:
    newton_iters: int
    residual: float
    residual_history: list
    stage: dict
    lorentz_sq: float
    dt_used: float
    wall_time: float


class StepError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class _NewtonFailure(Exception):
    def __init__(self, history):
        self.history = history


def _crossmat(v):
    """Matrix C(v) with C(v) @ w = v x w, batched over leading axes."""
    c = np.zeros(v.shape[:-1] + (3, 3))
    c[..., 0, 1] = -v[..., 2]
    c[..., 0, 2] = v[..., 1]
    c[..., 1, 0] = v[..., 2]
    c[..., 1, 2] = -v[..., 0]
    c[..., 2, 0] = -v[..., 1]
    c[..., 2, 1] = v[..., 0]
    return c


def _outer(a, b):
    return np.einsum("cqa,cqb->cqab", a, b)


_EYE3 = np.eye(3)


class _StepperBase:
    """Newton driver shared by the four schemes.

    Subclasses define the stage layout, residual, Jacobian, consistent
    stage initialization, and the end-of-step update.
    """

    scheme: SchemeKind
    state_space: SpaceKind

    def __init__(self, cx, cfg: StepperConfig):
        self.cx = cx
        self.cfg = cfg
        self.tables = CellBasisTables(cx.mesh)
        self.reference_norm = None

    # -- interface used by the driver ---------------------------------

    def set_reference(self, B: FieldVec):
        """Pin the Newton tolerance scale to the run's initial field."""
        self.reference_norm = max(1.0, float(np.sqrt(B.data @ (self.mass_B @ B.data))))

    def energy(self, B: FieldVec):
        return float(B.data @ (self.mass_B @ B.data))

    def div_norm(self, B: FieldVec):
        raise NotImplementedError

    def step(self, state: SchemeState, dt=None):
        if state.scheme is not self.scheme:
            raise SpaceError(
                f"stepper for {self.scheme.value} got a {state.scheme.value} state"
            )
        dt_used = self.cfg.dt if dt is None else dt
        started = time.perf_counter()
        try:
            new_B, stage, history = self._newton(state.B.data, dt_used)
        except _NewtonFailure as fail:
            if self.cfg.allow_dt_halving and dt is None:
                dt_used = 0.5 * dt_used
                try:
                    new_B, stage, history = self._newton(state.B.data, dt_used)
                except _NewtonFailure as fail2:
                    raise StepError(
                        f"Newton failed at t={state.t} even after halving dt "
                        f"(residuals {fail2.history[-3:]})"
                    ) from None
            else:
                raise StepError(
                    f"Newton failed at t={state.t} "
                    f"(residuals {fail.history[-3:]})"
                ) from None
        report = StepReport(
            newton_iters=len(history) - 1,
            residual=history[-1],
            residual_history=history,
            stage=self._stage_dict(stage),
            lorentz_sq=self._lorentz_sq(stage),
            dt_used=dt_used,
            wall_time=time.perf_counter() - started,
        )
        new_state = SchemeState(
            state.t + dt_used, FieldVec(self.state_space, new_B), self.scheme
        )
        return new_state, report

    # -- Newton loop ----------------------------------------------------

    def _newton(self, B_prev, dt):
        stage = self._initial_stage(B_prev, dt)
        scale = self.reference_norm
        if scale is None:
            scale = max(1.0, float(np.sqrt(B_prev @ (self.mass_B @ B_prev))))
        tol = self.cfg.newton_abs_tol * scale
        history = []
        for iteration in range(self.cfg.newton_max_iter + 1):
            residual = self._residual(B_prev, stage, dt)
            rnorm = float(np.linalg.norm(residual))
            history.append(rnorm)
            if not np.isfinite(rnorm):
                raise _NewtonFailure(history)
            if rnorm <= tol:
                return self._update(B_prev, stage), stage, history
            if iteration == self.cfg.newton_max_iter:
                break
            jac = self._jacobian(B_prev, stage, dt)
            delta = factorize(jac).solve(residual)
            stage = stage - delta
        raise _NewtonFailure(history)


# ----------------------------------------------------------------------
# structure-preserving four-field scheme


class SpStepper(_StepperBase):
    """Stage unknowns (B_mid, E, j, H), solved monolithically."""

    scheme = SchemeKind.SP
    state_space = SpaceKind.FACE

    def __init__(self, cx, cfg):
        super().__init__(cx, cfg)
        self.n_face = cx.dims[SpaceKind.FACE]
        self.n_edge = cx.dims[SpaceKind.EDGE]
        self.mass_B = cx.mass_face
        self.Me = cx.mass_edge
        self.Mx = cx.mass_edge_face
        self.MfC = (cx.mass_face @ cx.curl).tocsr()
        self.CtMf = self.MfC.T.tocsr()
        self._me_solver = factorize(self.Me)
        emap = full_to_free_map(cx.masks[SpaceKind.EDGE])
        t = self.tables
        self._edge_pattern = BilinearPattern(
            t.edge_cells, t.edge_cells, emap, emap, (self.n_edge, self.n_edge)
        )
        self._edge_free = cx.free_indices[SpaceKind.EDGE]
        self._n_edges_full = cx.mesh.n_edges

    def div_norm(self, B):
        return float(np.linalg.norm(self.cx.div @ B.data))

    def _edge_values(self, free_vec):
        full = np.zeros(self._n_edges_full)
        full[self._edge_free] = free_vec
        return self.tables.eval_field(self.tables.edge_cells, self.tables.edge_basis, full)

    def _edge_load(self, values):
        full = self.tables.load_vector(
            self.tables.edge_cells, self.tables.edge_basis, values, self._n_edges_full
        )
        return full[self._edge_free]

    def _split(self, stage):
        nf, ne = self.n_face, self.n_edge
        return (
            stage[:nf],
            stage[nf : nf + ne],
            stage[nf + ne : nf + 2 * ne],
            stage[nf + 2 * ne :],
        )

    def _initial_stage(self, B_prev, dt):
        j0 = self._me_solver.solve(self.CtMf @ B_prev)
        h0 = self._me_solver.solve(self.Mx @ B_prev)
        force = np.cross(np.cross(self._edge_values(j0), self._edge_values(h0)),
                         self._edge_values(h0))
        e0 = -self.cfg.tau * self._me_solver.solve(self._edge_load(force))
        return np.concatenate([B_prev, e0, j0, h0])

    def _residual(self, B_prev, stage, dt):
        b_mid, e, j, h = self._split(stage)
        jv, hv = self._edge_values(j), self._edge_values(h)
        force = np.cross(np.cross(jv, hv), hv)
        return np.concatenate(
            [
                self.mass_B @ ((2.0 / dt) * (b_mid - B_prev)) + self.MfC @ e,
                self.Me @ e + self.cfg.tau * self._edge_load(force),
                self.Me @ j - self.CtMf @ b_mid,
                self.Me @ h - self.Mx @ b_mid,
            ]
        )

    def _jacobian(self, B_prev, stage, dt):
        b_mid, e, j, h = self._split(stage)
        jv, hv = self._edge_values(j), self._edge_values(h)
        hh = np.einsum("cqv,cqv->cq", hv, hv)
        jh = np.einsum("cqv,cqv->cq", jv, hv)
        k_j = _outer(hv, hv) - hh[..., None, None] * _EYE3
        k_h = (
            jh[..., None, None] * _EYE3
            - 2.0 * _outer(jv, hv)
            + _outer(hv, jv)
        )
        t = self.tables
        tau = self.cfg.tau
        d_j = self._edge_pattern.assemble(t.local_bilinear(t.edge_basis, t.edge_basis, k_j))
        d_h = self._edge_pattern.assemble(t.local_bilinear(t.edge_basis, t.edge_basis, k_h))
        return sp.bmat(
            [
                [(2.0 / dt) * self.mass_B, self.MfC, None, None],
                [None, self.Me, tau * d_j, tau * d_h],
                [-self.CtMf, None, self.Me, None],
                [-self.Mx, None, None, self.Me],
            ],
            format="csc",
        )

    def _update(self, B_prev, stage):
        b_mid = self._split(stage)[0]
        return 2.0 * b_mid - B_prev

    def _stage_dict(self, stage):
        _, e, j, h = self._split(stage)
        return {"E": e, "j": j, "H": h}

    def _lorentz_sq(self, stage):
        _, _, j, h = self._split(stage)
        force = np.cross(self._edge_values(j), self._edge_values(h))
        return self.tables.quadrature_l2_sq(force)


# ----------------------------------------------------------------------
# flux-conforming scheme without the auxiliary magnetic field


class HdivNoHStepper(_StepperBase):
    """Stage unknowns (B_mid, E, j); the cross products pair the edge-space
    current against the flux-space magnetic field at shared quadrature
    points."""

    scheme = SchemeKind.HDIV_NO_H
    state_space = SpaceKind.FACE

    def __init__(self, cx, cfg):
        super().__init__(cx, cfg)
        self.n_face = cx.dims[SpaceKind.FACE]
        self.n_edge = cx.dims[SpaceKind.EDGE]
        self.mass_B = cx.mass_face
        self.Me = cx.mass_edge
        self.MfC = (cx.mass_face @ cx.curl).tocsr()
        self.CtMf = self.MfC.T.tocsr()
        self._me_solver = factorize(self.Me)
        emap = full_to_free_map(cx.masks[SpaceKind.EDGE])
        fmap = full_to_free_map(cx.masks[SpaceKind.FACE])
        t = self.tables
        self._ee_pattern = BilinearPattern(
            t.edge_cells, t.edge_cells, emap, emap, (self.n_edge, self.n_edge)
        )
        self._ef_pattern = BilinearPattern(
            t.edge_cells, t.face_cells, emap, fmap, (self.n_edge, self.n_face)
        )
        self._edge_free = cx.free_indices[SpaceKind.EDGE]
        self._face_free = cx.free_indices[SpaceKind.FACE]
        self._n_edges_full = cx.mesh.n_edges
        self._n_faces_full = cx.mesh.n_faces

    def div_norm(self, B):
        return float(np.linalg.norm(self.cx.div @ B.data))

    def _edge_values(self, free_vec):
        full = np.zeros(self._n_edges_full)
        full[self._edge_free] = free_vec
        return self.tables.eval_field(self.tables.edge_cells, self.tables.edge_basis, full)

    def _face_values(self, free_vec):
        full = np.zeros(self._n_faces_full)
        full[self._face_free] = free_vec
        return self.tables.eval_field(self.tables.face_cells, self.tables.face_basis, full)

    def _edge_load(self, values):
        full = self.tables.load_vector(
            self.tables.edge_cells, self.tables.edge_basis, values, self._n_edges_full
        )
        return full[self._edge_free]

    def _split(self, stage):
        nf, ne = self.n_face, self.n_edge
        return stage[:nf], stage[nf : nf + ne], stage[nf + ne :]

    def _initial_stage(self, B_prev, dt):
        j0 = self._me_solver.solve(self.CtMf @ B_prev)
        bv = self._face_values(B_prev)
        force = np.cross(np.cross(self._edge_values(j0), bv), bv)
        e0 = -self.cfg.tau * self._me_solver.solve(self._edge_load(force))
        return np.concatenate([B_prev, e0, j0])

    def _residual(self, B_prev, stage, dt):
        b_mid, e, j = self._split(stage)
        jv, bv = self._edge_values(j), self._face_values(b_mid)
        force = np.cross(np.cross(jv, bv), bv)
        return np.concatenate(
            [
                self.mass_B @ ((2.0 / dt) * (b_mid - B_prev)) + self.MfC @ e,
                self.Me @ e + self.cfg.tau * self._edge_load(force),
                self.Me @ j - self.CtMf @ b_mid,
            ]
        )

    def _jacobian(self, B_prev, stage, dt):
        b_mid, e, j = self._split(stage)
        jv, bv = self._edge_values(j), self._face_values(b_mid)
        bb = np.einsum("cqv,cqv->cq", bv, bv)
        jb = np.einsum("cqv,cqv->cq", jv, bv)
        k_j = _outer(bv, bv) - bb[..., None, None] * _EYE3
        k_b = (
            jb[..., None, None] * _EYE3
            - 2.0 * _outer(jv, bv)
            + _outer(bv, jv)
        )
        t = self.tables
        tau = self.cfg.tau
        d_j = self._ee_pattern.assemble(t.local_bilinear(t.edge_basis, t.edge_basis, k_j))
        d_b = self._ef_pattern.assemble(t.local_bilinear(t.edge_basis, t.face_basis, k_b))
        return sp.bmat(
            [
                [(2.0 / dt) * self.mass_B, self.MfC, None],
                [tau * d_b, self.Me, tau * d_j],
                [-self.CtMf, None, self.Me],
            ],
            format="csc",
        )

    def _update(self, B_prev, stage):
        return 2.0 * self._split(stage)[0] - B_prev

    def _stage_dict(self, stage):
        _, e, j = self._split(stage)
        return {"E": e, "j": j}

    def _lorentz_sq(self, stage):
        b_mid, _, j = self._split(stage)
        force = np.cross(self._edge_values(j), self._face_values(b_mid))
        return self.tables.quadrature_l2_sq(force)


# ----------------------------------------------------------------------
# circulation-conforming scheme (no essential BC on B)


class HcurlStepper(_StepperBase):
    """Stage unknowns (B_mid over all edges, u over free faces).  The
    advection term is tested against curls of the full edge space, so the
    normal boundary condition on B is imposed only weakly."""

    scheme = SchemeKind.HCURL
    state_space = SpaceKind.EDGE

    def __init__(self, cx, cfg):
        super().__init__(cx, cfg)
        mesh = cx.mesh
        self.n_edge = mesh.n_edges  # full space: no essential BC
        self.n_face_free = cx.dims[SpaceKind.FACE]
        self.mass_B = cx.mass_edge_full
        self.Mf = cx.mass_face
        self.Cf = cx.curl_full
        self._mf_solver = factorize(self.Mf)
        t = self.tables
        edge_ident = np.arange(mesh.n_edges, dtype=np.int64)
        face_ident = np.arange(mesh.n_faces, dtype=np.int64)
        fmap = full_to_free_map(cx.masks[SpaceKind.FACE])
        self._af_e = BilinearPattern(
            t.face_cells, t.edge_cells, face_ident, edge_ident,
            (mesh.n_faces, mesh.n_edges),
        )
        self._af_ff = BilinearPattern(
            t.face_cells, t.face_cells, face_ident, fmap,
            (mesh.n_faces, self.n_face_free),
        )
        self._ff_af = BilinearPattern(
            t.face_cells, t.face_cells, fmap, face_ident,
            (self.n_face_free, mesh.n_faces),
        )
        self._ff_e = BilinearPattern(
            t.face_cells, t.edge_cells, fmap, edge_ident,
            (self.n_face_free, mesh.n_edges),
        )
        self._face_free = cx.free_indices[SpaceKind.FACE]
        self._n_faces_full = mesh.n_faces

    def div_norm(self, B):
        return float("nan")  # divergence is ill-defined for circulation DOFs

    def _edge_values(self, full_vec):
        return self.tables.eval_field(self.tables.edge_cells, self.tables.edge_basis, full_vec)

    def _face_values_full(self, full_vec):
        return self.tables.eval_field(self.tables.face_cells, self.tables.face_basis, full_vec)

    def _face_values(self, free_vec):
        full = np.zeros(self._n_faces_full)
        full[self._face_free] = free_vec
        return self._face_values_full(full)

    def _face_load_full(self, values):
        return self.tables.load_vector(
            self.tables.face_cells, self.tables.face_basis, values, self._n_faces_full
        )

    def _split(self, stage):
        return stage[: self.n_edge], stage[self.n_edge :]

    def _force_load(self, b_full):
        curl_b = self._face_values_full(self.Cf @ b_full)
        bv = self._edge_values(b_full)
        return self._face_load_full(np.cross(curl_b, bv))[self._face_free]

    def _initial_stage(self, B_prev, dt):
        u0 = self.cfg.tau * self._mf_solver.solve(self._force_load(B_prev))
        return np.concatenate([B_prev, u0])

    def _residual(self, B_prev, stage, dt):
        b_mid, u = self._split(stage)
        bv = self._edge_values(b_mid)
        uv = self._face_values(u)
        adv = self._face_load_full(np.cross(uv, bv))
        return np.concatenate(
            [
                self.mass_B @ ((2.0 / dt) * (b_mid - B_prev)) - self.Cf.T @ adv,
                self.Mf @ u - self.cfg.tau * self._force_load(b_mid),
            ]
        )

    def _jacobian(self, B_prev, stage, dt):
        b_mid, u = self._split(stage)
        bv = self._edge_values(b_mid)
        uv = self._face_values(u)
        curl_b = self._face_values_full(self.Cf @ b_mid)
        t = self.tables
        tau = self.cfg.tau
        adv_b = self._af_e.assemble(
            t.local_bilinear(t.face_basis, t.edge_basis, _crossmat(uv))
        )
        adv_u = self._af_ff.assemble(
            t.local_bilinear(t.face_basis, t.face_basis, -_crossmat(bv))
        )
        force_curl = self._ff_af.assemble(
            t.local_bilinear(t.face_basis, t.face_basis, -_crossmat(bv))
        )
        force_b = self._ff_e.assemble(
            t.local_bilinear(t.face_basis, t.edge_basis, _crossmat(curl_b))
        )
        j11 = (2.0 / dt) * self.mass_B - self.Cf.T @ adv_b
        j12 = -self.Cf.T @ adv_u
        j21 = -tau * (force_curl @ self.Cf + force_b)
        return sp.bmat([[j11, j12], [j21, self.Mf]], format="csc")

    def _update(self, B_prev, stage):
        return 2.0 * self._split(stage)[0] - B_prev

    def _stage_dict(self, stage):
        return {"u": self._split(stage)[1]}

    def _lorentz_sq(self, stage):
        if self.cfg.tau == 0.0:
            return 0.0
        u = self._split(stage)[1]
        return float(u @ (self.Mf @ u)) / self.cfg.tau ** 2


# ----------------------------------------------------------------------
# continuous vector-nodal scheme


def vnode_mask(mesh):
    """Constrained DOFs of the vector-nodal space: component a vanishes on
    the boundary planes normal to axis a (all memberships applied at
    corners)."""
    return np.concatenate([mesh.normal_plane_vertex_mask(a) for a in range(3)])


def interpolate_vnode(mesh, analytic_field, apply_bc=True):
    """Vertex interpolation into the continuous vector-nodal space,
    components blocked, constrained normal components forced to zero."""
    coords = [mesh.node_coords(a) for a in range(3)]
    zz, yy, xx = np.meshgrid(coords[2], coords[1], coords[0], indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    vals = np.asarray(analytic_field(pts))
    full = np.concatenate([vals[:, 0], vals[:, 1], vals[:, 2]])
    if not apply_bc:
        return FieldVec(SpaceKind.VNODE, full)
    return FieldVec(SpaceKind.VNODE, full[~vnode_mask(mesh)])


class H1Stepper(_StepperBase):
    """Stage unknowns (B_mid, u), both in the constrained vector-nodal
    space; curls are evaluated from the nodal basis gradients."""

    scheme = SchemeKind.H1
    state_space = SpaceKind.VNODE

    def __init__(self, cx, cfg):
        super().__init__(cx, cfg)
        mesh = cx.mesh
        self.mask = vnode_mask(mesh)
        self.free = np.flatnonzero(~self.mask)
        self.n_free = len(self.free)
        mass_full = sp.block_diag([cx.mass_node_full] * 3, format="csr")
        self.mass_B = mass_full[self.free][:, self.free].tocsr()
        self._mass_solver = factorize(self.mass_B)
        vmap = full_to_free_map(self.mask)
        t = self.tables
        self._pattern = BilinearPattern(
            t.vnode_cells, t.vnode_cells, vmap, vmap, (self.n_free, self.n_free)
        )
        self._n_full = 3 * mesh.n_vertices

    def div_norm(self, B):
        """Weak (cellwise quadrature) L2 norm of the divergence."""
        full = np.zeros(self._n_full)
        full[self.free] = B.data
        local = full[self.tables.vnode_cells]
        div = np.einsum("cl,lq->cq", local, self.tables.vnode_div)
        return float(np.sqrt(np.einsum("cq,cq,q->", div, div, self.tables.weights)))

    def _values(self, free_vec, basis):
        full = np.zeros(self._n_full)
        full[self.free] = free_vec
        return self.tables.eval_field(self.tables.vnode_cells, basis, full)

    def _load(self, values, basis):
        full = self.tables.load_vector(
            self.tables.vnode_cells, basis, values, self._n_full
        )
        return full[self.free]

    def _split(self, stage):
        return stage[: self.n_free], stage[self.n_free :]

    def _force_load(self, b_free):
        curl_b = self._values(b_free, self.tables.vnode_curl)
        bv = self._values(b_free, self.tables.vnode_basis)
        return self._load(np.cross(curl_b, bv), self.tables.vnode_basis)

    def _initial_stage(self, B_prev, dt):
        u0 = self.cfg.tau * self._mass_solver.solve(self._force_load(B_prev))
        return np.concatenate([B_prev, u0])

    def _residual(self, B_prev, stage, dt):
        b_mid, u = self._split(stage)
        bv = self._values(b_mid, self.tables.vnode_basis)
        uv = self._values(u, self.tables.vnode_basis)
        adv = self._load(np.cross(uv, bv), self.tables.vnode_curl)
        return np.concatenate(
            [
                self.mass_B @ ((2.0 / dt) * (b_mid - B_prev)) - adv,
                self.mass_B @ u - self.cfg.tau * self._force_load(b_mid),
            ]
        )

    def _jacobian(self, B_prev, stage, dt):
        b_mid, u = self._split(stage)
        t = self.tables
        tau = self.cfg.tau
        bv = self._values(b_mid, t.vnode_basis)
        uv = self._values(u, t.vnode_basis)
        curl_b = self._values(b_mid, t.vnode_curl)
        adv_b = self._pattern.assemble(
            t.local_bilinear(t.vnode_curl, t.vnode_basis, _crossmat(uv))
        )
        adv_u = self._pattern.assemble(
            t.local_bilinear(t.vnode_curl, t.vnode_basis, -_crossmat(bv))
        )
        force_curl = self._pattern.assemble(
            t.local_bilinear(t.vnode_basis, t.vnode_curl, -_crossmat(bv))
        )
        force_b = self._pattern.assemble(
            t.local_bilinear(t.vnode_basis, t.vnode_basis, _crossmat(curl_b))
        )
        j11 = (2.0 / dt) * self.mass_B - adv_b
        j12 = -adv_u
        j21 = -tau * (force_curl + force_b)
        return sp.bmat([[j11, j12], [j21, self.mass_B]], format="csc")

    def _update(self, B_prev, stage):
        return 2.0 * self._split(stage)[0] - B_prev

    def _stage_dict(self, stage):
        return {"u": self._split(stage)[1]}

    def _lorentz_sq(self, stage):
        if self.cfg.tau == 0.0:
            return 0.0
        u = self._split(stage)[1]
        return float(u @ (self.mass_B @ u)) / self.cfg.tau ** 2


# ----------------------------------------------------------------------


_STEPPERS = {
    SchemeKind.SP: SpStepper,
    SchemeKind.HDIV_NO_H: HdivNoHStepper,
    SchemeKind.HCURL: HcurlStepper,
    SchemeKind.H1: H1Stepper,
}


def make_stepper(cx, scheme, cfg):
    return _STEPPERS[SchemeKind(scheme)](cx, cfg)


def build_initial_state(cx, scheme, analytic_field):
    """Interpolate an analytic field into the scheme's space.

    Flux-based schemes additionally project onto the discretely
    divergence-free subspace; the comparison schemes take the plain
    constrained interpolant of their space.
    """
    scheme = SchemeKind(scheme)
    mesh = cx.mesh
    if scheme in (SchemeKind.SP, SchemeKind.HDIV_NO_H):
        raw = interpolate(mesh, analytic_field, SpaceKind.FACE)
        B0, _ = project_divfree(cx, raw)
    elif scheme is SchemeKind.HCURL:
        B0 = interpolate(mesh, analytic_field, SpaceKind.EDGE, apply_bc=False)
    else:
        B0 = interpolate_vnode(mesh, analytic_field)
    return SchemeState(0.0, B0, scheme)


# thin functional wrappers over the stage algebra, with space-tag checks


def _sp_stage_vector(cx, stage):
    b_mid, e, j, h = stage
    require_space(b_mid, SpaceKind.FACE)
    for vec in (e, j, h):
        require_space(vec, SpaceKind.EDGE)
    return np.concatenate([b_mid.data, e.data, j.data, h.data])


def residual_sp(cx, B_prev, stage, cfg):
    """Stacked four-block residual of the structure-preserving stage system
    at (B_mid, E, j, H)."""
    require_space(B_prev, SpaceKind.FACE)
    stepper = SpStepper(cx, cfg)
    return stepper._residual(B_prev.data, _sp_stage_vector(cx, stage), cfg.dt)


def jacobian_sp(cx, B_prev, stage, cfg):
    """Analytic block Jacobian matching :func:`residual_sp`."""
    require_space(B_prev, SpaceKind.FACE)
    stepper = SpStepper(cx, cfg)
    return stepper._jacobian(B_prev.data, _sp_stage_vector(cx, stage), cfg.dt)
