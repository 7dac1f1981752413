"""Lowest-order tensor-product de Rham complex on a box mesh.

DOFs are integrals: point values at vertices, circulations along edges,
fluxes through faces, integrals over cells.  With that convention grad,
curl and div are pure signed incidence matrices (entries in {-1, 0, +1})
and the complex identities curl@grad = 0 and div@curl = 0 hold exactly in
integer arithmetic.  Mass matrices come from closed-form 1D hat/indicator
integrals via Kronecker products; a tensor-Gauss quadrature assembly path
exists as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .mesh import BoxMesh, EDGE_KINDS, FACE_KINDS


class SpaceKind(Enum):
    """DOF spaces: the four de Rham spaces plus the continuous vector-nodal
    space used by the nodal comparison scheme."""

    NODE = "node"
    EDGE = "edge"
    FACE = "face"
    CELL = "cell"
    VNODE = "vnode"


@dataclass
class FieldVec:
    """Coefficient vector tagged with its DOF space."""

    space: SpaceKind
    data: np.ndarray

    def copy(self):
        return FieldVec(self.space, self.data.copy())

    def __len__(self):
        return len(self.data)


class SpaceError(ValueError):
    """Space-tag mismatch in an operation's arguments."""


def require_space(vec, space):
    if vec.space is not space:
        raise SpaceError(f"expected a {space.value}-space vector, got {vec.space.value}")


# ----------------------------------------------------------------------
# 1D building blocks.  "hat" profiles live on lattice nodes, "seg"
# profiles are interval indicators scaled by 1/h (so that their integral
# DOF is 1).  Periodic variants identify the last node with the first.


def _hat_mass_1d(n, h, periodic):
    """<hat_i, hat_j> on a uniform 1D grid with n intervals."""
    if periodic:
        rows, cols, vals = [], [], []
        for i in range(n):
            rows += [i, i, i]
            cols += [i, (i + 1) % n, (i - 1) % n]
            vals += [2.0 * h / 3.0, h / 6.0, h / 6.0]
        # coo sums duplicates, which handles the n == 2 double overlap
        return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    m = n + 1
    diag = np.full(m, 2.0 * h / 3.0)
    diag[0] = diag[-1] = h / 3.0
    off = np.full(m - 1, h / 6.0)
    return sp.diags([off, diag, off], [-1, 0, 1]).tocsr()


def _seg_mass_1d(n, h):
    """<seg_i, seg_j> = (1/h) delta_ij for the 1/h interval indicators."""
    return sp.diags(np.full(n, 1.0 / h)).tocsr()


def _seg_hat_1d(n, periodic):
    """<seg_i, hat_j>: 1/2 for the two nodes bounding interval i."""
    m = n if periodic else n + 1
    rows = np.repeat(np.arange(n), 2)
    cols = np.column_stack([np.arange(n), (np.arange(n) + 1) % m]).ravel()
    vals = np.full(2 * n, 0.5)
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, m)).tocsr()


def _diff_1d(n, periodic):
    """Signed difference: value at interval i is node(i+1) - node(i)."""
    m = n if periodic else n + 1
    rows = np.repeat(np.arange(n), 2)
    cols = np.column_stack([np.arange(n), (np.arange(n) + 1) % m]).ravel()
    vals = np.tile([-1.0, 1.0], n)
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, m)).tocsr()


def _kron3(az, ay, ax):
    return sp.kron(az, sp.kron(ay, ax, format="csr"), format="csr")


def _eye(n):
    return sp.identity(n, format="csr")


# ----------------------------------------------------------------------


class DeRhamComplex:
    """The four DOF spaces, incidence operators and mass matrices.

    Full-space operators (``*_full``) live on all entities; the reduced
    operators restrict rows and columns to unconstrained DOFs, which
    enforces the essential boundary conditions by elimination.
    """

    def __init__(self, mesh: BoxMesh):
        self.mesh = mesh
        nx, ny, nz = mesh.resolution
        Nx, Ny, Nz = mesh.node_counts
        hx, hy, hz = mesh.spacings
        per = mesh.periodic_z

        Gx, Gy, Gz = _diff_1d(nx, False), _diff_1d(ny, False), _diff_1d(nz, per)
        Hx, Hy, Hz = (
            _hat_mass_1d(nx, hx, False),
            _hat_mass_1d(ny, hy, False),
            _hat_mass_1d(nz, hz, per),
        )
        Cx, Cy, Cz = _seg_mass_1d(nx, hx), _seg_mass_1d(ny, hy), _seg_mass_1d(nz, hz)
        Px, Py, Pz = _seg_hat_1d(nx, False), _seg_hat_1d(ny, False), _seg_hat_1d(nz, per)

        # incidence operators (exact, entries in {-1, 0, +1})
        self.grad_full = sp.vstack(
            [
                _kron3(_eye(Nz), _eye(Ny), Gx),
                _kron3(_eye(Nz), Gy, _eye(Nx)),
                _kron3(Gz, _eye(Ny), _eye(Nx)),
            ]
        ).tocsr()

        self.curl_full = sp.bmat(
            [
                # face_x rows: -d/dz on edge_y, +d/dy on edge_z
                [None, _kron3(-Gz, _eye(ny), _eye(Nx)), _kron3(_eye(nz), Gy, _eye(Nx))],
                # face_y rows: +d/dz on edge_x, -d/dx on edge_z
                [_kron3(Gz, _eye(Ny), _eye(nx)), None, _kron3(_eye(nz), _eye(Ny), -Gx)],
                # face_z rows: -d/dy on edge_x, +d/dx on edge_y
                [_kron3(_eye(Nz), -Gy, _eye(nx)), _kron3(_eye(Nz), _eye(ny), Gx), None],
            ],
            format="csr",
        )

        self.div_full = sp.hstack(
            [
                _kron3(_eye(nz), _eye(ny), Gx),
                _kron3(_eye(nz), Gy, _eye(nx)),
                _kron3(Gz, _eye(ny), _eye(nx)),
            ]
        ).tocsr()

        # closed-form mass matrices
        self.mass_node_full = _kron3(Hz, Hy, Hx)
        self.mass_edge_full = sp.block_diag(
            [_kron3(Hz, Hy, Cx), _kron3(Hz, Cy, Hx), _kron3(Cz, Hy, Hx)],
            format="csr",
        )
        self.mass_face_full = sp.block_diag(
            [_kron3(Cz, Cy, Hx), _kron3(Cz, Hy, Cx), _kron3(Hz, Cy, Cx)],
            format="csr",
        )
        self.mass_cell_full = _kron3(Cz, Cy, Cx)

        # mixed edge-test x face-trial pairing; only colinear axes couple
        self.mass_edge_face_full = sp.block_diag(
            [
                _kron3(Pz.T, Py.T, Px),
                _kron3(Pz.T, Py, Px.T),
                _kron3(Pz, Py.T, Px.T),
            ],
            format="csr",
        )
        # node-test x cell-trial pairing (used by summation-by-parts audits)
        self.mass_node_cell_full = _kron3(Pz.T, Py.T, Px.T)

        # boundary masks and free-DOF index maps
        self.masks = {
            SpaceKind.NODE: mesh.boundary_mask("node"),
            SpaceKind.EDGE: mesh.boundary_mask("edge"),
            SpaceKind.FACE: mesh.boundary_mask("face"),
            SpaceKind.CELL: mesh.boundary_mask("cell"),
        }
        self.free_indices = {
            space: np.flatnonzero(~mask) for space, mask in self.masks.items()
        }
        self.dims = {space: len(idx) for space, idx in self.free_indices.items()}

        fn = self.free_indices[SpaceKind.NODE]
        fe = self.free_indices[SpaceKind.EDGE]
        ff = self.free_indices[SpaceKind.FACE]
        fc = self.free_indices[SpaceKind.CELL]

        self.grad = self.grad_full[fe][:, fn].tocsr()
        self.curl = self.curl_full[ff][:, fe].tocsr()
        self.div = self.div_full[fc][:, ff].tocsr()
        self.mass_node = self.mass_node_full[fn][:, fn].tocsr()
        self.mass_edge = self.mass_edge_full[fe][:, fe].tocsr()
        self.mass_face = self.mass_face_full[ff][:, ff].tocsr()
        self.mass_cell = self.mass_cell_full[fc][:, fc].tocsr()
        self.mass_edge_face = self.mass_edge_face_full[fe][:, ff].tocsr()

    # ------------------------------------------------------------------

    @property
    def harmonic_dim(self):
        """Dimension of the harmonic space at the face level.

        The side-wall conditions keep the complex exact at the edge level
        on both supported topologies, so the face-level defect follows from
        a rank count: grad is injective on free nodes and div maps free
        faces onto the mean-zero cell space.
        """
        d = self.dims
        return (
            d[SpaceKind.FACE]
            - (d[SpaceKind.CELL] - 1)
            - (d[SpaceKind.EDGE] - d[SpaceKind.NODE])
        )

    def dim(self, space):
        return self.dims[space]

    def scatter(self, space, free_vec):
        """Embed a free-DOF vector into the full entity numbering (zeros on
        constrained DOFs)."""
        full = np.zeros(len(self.masks[space]))
        full[self.free_indices[space]] = free_vec
        return full

    def restrict(self, space, full_vec):
        """Drop constrained DOFs from a full-length vector."""
        return np.asarray(full_vec)[self.free_indices[space]]

    def zero_field(self, space):
        return FieldVec(space, np.zeros(self.dims[space]))

    def norm_m(self, vec):
        """Mass-weighted norm of a free-DOF field vector."""
        mass = {
            SpaceKind.NODE: self.mass_node,
            SpaceKind.EDGE: self.mass_edge,
            SpaceKind.FACE: self.mass_face,
            SpaceKind.CELL: self.mass_cell,
        }[vec.space]
        return float(np.sqrt(vec.data @ (mass @ vec.data)))

    @cached_property
    def curl_curl(self):
        """Reduced curl^T M_face curl operator on free edges (PSD, singular:
        its kernel is exactly the range of grad)."""
        return (self.curl.T @ self.mass_face @ self.curl).tocsr()


def build_complex(mesh):
    """Assemble the discrete de Rham complex for ``mesh``."""
    return DeRhamComplex(mesh)


def assemble_mass(mesh, space):
    """Closed-form mass matrix on the full (unreduced) space."""
    cx = DeRhamComplex(mesh)
    return {
        SpaceKind.NODE: cx.mass_node_full,
        SpaceKind.EDGE: cx.mass_edge_full,
        SpaceKind.FACE: cx.mass_face_full,
        SpaceKind.CELL: cx.mass_cell_full,
    }[space]


def assemble_mixed_mass(mesh):
    """Closed-form edge x face L2 pairing on the full spaces."""
    return DeRhamComplex(mesh).mass_edge_face_full


# ----------------------------------------------------------------------
# quadrature tables


def gauss_rule(npts):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


class CellBasisTables:
    """Local basis values at the per-cell tensor Gauss points.

    The mesh is uniform, so one reference table serves every cell; only the
    local-to-global DOF maps differ.  Families:

    * ``edge``: 12 local edge DOFs, vector-valued along the edge axis;
    * ``face``: 6 local face DOFs, vector-valued along the face normal;
    * ``vnode``: 24 local DOFs (3 components x 8 vertices) of the continuous
      vector-nodal space, with curl and divergence tables for the nodal
      comparison scheme.

    All global index maps use the full entity numbering.
    """

    def __init__(self, mesh: BoxMesh, npts=3):
        self.mesh = mesh
        self._pair_cache = {}
        nx, ny, nz = mesh.resolution
        Nx, Ny, Nz = mesh.node_counts
        hx, hy, hz = mesh.spacings
        g, w = gauss_rule(npts)

        # tensor points in the reference cell [0,1]^3, x fastest
        qz, qy, qx = np.meshgrid(g, g, g, indexing="ij")
        self.points = np.column_stack([qx.ravel(), qy.ravel(), qz.ravel()])
        wz, wy, wx = np.meshgrid(w, w, w, indexing="ij")
        self.weights = (wx * wy * wz).ravel() * (hx * hy * hz)
        nq = len(self.weights)

        ell = [1.0 - self.points, self.points]  # linear shape functions per axis

        def lin(side, axis):
            return ell[side][:, axis]

        # cell lattice indices, x fastest
        ck, cj, ci = np.meshgrid(
            np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij"
        )
        ci, cj, ck = ci.ravel(), cj.ravel(), ck.ravel()
        self.n_cells = len(ci)
        self.cell_origin = np.column_stack(
            [
                mesh.extents[0][0] + hx * ci,
                mesh.extents[1][0] + hy * cj,
                mesh.extents[2][0] + hz * ck,
            ]
        )

        def wrap_z(idx):
            return idx % Nz if mesh.periodic_z else idx

        def vert(i, j, k):
            return i + Nx * (j + Ny * wrap_z(k))

        n_ex, n_ey = nx * Ny * Nz, Nx * ny * Nz
        n_fx, n_fy = Nx * ny * nz, nx * Ny * nz

        def edge_x(i, j, k):
            return i + nx * (j + Ny * wrap_z(k))

        def edge_y(i, j, k):
            return n_ex + i + Nx * (j + ny * wrap_z(k))

        def edge_z(i, j, k):
            return n_ex + n_ey + i + Nx * (j + Ny * k)

        def face_x(i, j, k):
            return i + Nx * (j + ny * k)

        def face_y(i, j, k):
            return n_fx + i + nx * (j + Ny * k)

        def face_z(i, j, k):
            return n_fx + n_fy + i + nx * (j + ny * wrap_z(k))

        # --- edge family: 4 edges per axis at the transverse corners
        edge_cols = []
        edge_basis = np.zeros((12, nq, 3))
        loc = 0
        for sb in (0, 1):  # transverse corner flags, first transverse axis fastest
            for sa in (0, 1):
                edge_cols.append(edge_x(ci, cj + sa, ck + sb))
                edge_basis[loc, :, 0] = (1.0 / hx) * lin(sa, 1) * lin(sb, 2)
                loc += 1
        for sb in (0, 1):
            for sa in (0, 1):
                edge_cols.append(edge_y(ci + sa, cj, ck + sb))
                edge_basis[loc, :, 1] = (1.0 / hy) * lin(sa, 0) * lin(sb, 2)
                loc += 1
        for sb in (0, 1):
            for sa in (0, 1):
                edge_cols.append(edge_z(ci + sa, cj + sb, ck))
                edge_basis[loc, :, 2] = (1.0 / hz) * lin(sa, 0) * lin(sb, 1)
                loc += 1
        self.edge_cells = np.column_stack(edge_cols)
        self.edge_basis = edge_basis

        # --- face family: 2 opposing faces per axis
        face_cols = []
        face_basis = np.zeros((6, nq, 3))
        loc = 0
        for s in (0, 1):
            face_cols.append(face_x(ci + s, cj, ck))
            face_basis[loc, :, 0] = lin(s, 0) / (hy * hz)
            loc += 1
        for s in (0, 1):
            face_cols.append(face_y(ci, cj + s, ck))
            face_basis[loc, :, 1] = lin(s, 1) / (hx * hz)
            loc += 1
        for s in (0, 1):
            face_cols.append(face_z(ci, cj, ck + s))
            face_basis[loc, :, 2] = lin(s, 2) / (hx * hy)
            loc += 1
        self.face_cells = np.column_stack(face_cols)
        self.face_basis = face_basis

        # --- vector-nodal family: components blocked over all vertices
        h = (hx, hy, hz)
        corner_nodes = []
        phi = np.zeros((8, nq))
        dphi = np.zeros((8, nq, 3))  # physical gradient of each scalar hat
        loc = 0
        for sz in (0, 1):
            for sy in (0, 1):
                for sx in (0, 1):
                    corner_nodes.append(vert(ci + sx, cj + sy, ck + sz))
                    fx, fy, fz = lin(sx, 0), lin(sy, 1), lin(sz, 2)
                    phi[loc] = fx * fy * fz
                    sgn = (lambda s: 1.0 if s else -1.0)
                    dphi[loc, :, 0] = sgn(sx) / hx * fy * fz
                    dphi[loc, :, 1] = fx * sgn(sy) / hy * fz
                    dphi[loc, :, 2] = fx * fy * sgn(sz) / hz
                    loc += 1
        corner_nodes = np.column_stack(corner_nodes)  # (n_cells, 8)
        n_vert = Nx * Ny * Nz
        vnode_cols = [corner_nodes + comp * n_vert for comp in range(3)]
        self.vnode_cells = np.concatenate(vnode_cols, axis=1)  # (n_cells, 24)
        self.vnode_basis = np.zeros((24, nq, 3))
        self.vnode_curl = np.zeros((24, nq, 3))
        self.vnode_div = np.zeros((24, nq))
        for comp in range(3):
            for node in range(8):
                ldof = comp * 8 + node
                self.vnode_basis[ldof, :, comp] = phi[node]
                # curl(phi e_comp) = grad(phi) x e_comp
                e = np.zeros(3)
                e[comp] = 1.0
                self.vnode_curl[ldof] = np.cross(dphi[node], e)
                self.vnode_div[ldof] = dphi[node, :, comp]

        self.quad_points_phys = (
            self.cell_origin[:, None, :]
            + self.points[None, :, :] * np.array([hx, hy, hz])[None, None, :]
        )

    # ------------------------------------------------------------------

    def eval_field(self, cells, basis, full_coefs):
        """Pointwise values (n_cells, nq, 3) of a field given full coefficients."""
        local = np.asarray(full_coefs)[cells]  # (n_cells, nloc)
        return np.einsum("cl,lqv->cqv", local, basis)

    def load_vector(self, cells, basis, values, size):
        """Assemble sum_q w_q values(c,q,:) . basis_l(q,:) into a full vector."""
        local = np.einsum("cqv,lqv,q->cl", values, basis, self.weights)
        out = np.zeros(size)
        np.add.at(out, cells, local)
        return out

    def local_bilinear(self, test_basis, trial_basis, amat):
        """Local matrices sum_q w_q test_a A_ab trial_b; amat is (n_cells, nq, 3, 3).

        The basis pair tensor is cached per (test, trial) family so repeated
        assemblies reduce to one matmul.
        """
        key = (id(test_basis), id(trial_basis))
        cached = self._pair_cache.get(key)
        if cached is None:
            nt, ns = len(test_basis), len(trial_basis)
            pair = np.einsum("tqa,sqb->tsqab", test_basis, trial_basis)
            cached = (test_basis, trial_basis, pair.reshape(nt * ns, -1), nt, ns)
            self._pair_cache[key] = cached
        _, _, pair_flat, nt, ns = cached
        weighted = (amat * self.weights[None, :, None, None]).reshape(
            amat.shape[0], -1
        )
        return (weighted @ pair_flat.T).reshape(amat.shape[0], nt, ns)

    def quadrature_l2_sq(self, values):
        """Quadrature integral of |values|^2 over the mesh."""
        return float(np.einsum("cqv,cqv,q->", values, values, self.weights))


class BilinearPattern:
    """Precomputed scatter pattern for local-matrix assembly with masks.

    ``test_map``/``trial_map`` send full entity indices to reduced indices
    (-1 for constrained DOFs); entries touching constrained DOFs on either
    side are dropped once here so repeated assemblies just fill values.
    """

    def __init__(self, test_cells, trial_cells, test_map, trial_map, shape):
        nt, ns = test_cells.shape[1], trial_cells.shape[1]
        rows = np.repeat(test_map[test_cells][:, :, None], ns, axis=2)
        cols = np.repeat(trial_map[trial_cells][:, None, :], nt, axis=1)
        keep = (rows >= 0) & (cols >= 0)
        self.keep = keep.ravel()
        self.rows = rows.ravel()[self.keep]
        self.cols = cols.ravel()[self.keep]
        self.shape = shape

    def assemble(self, local_vals):
        vals = local_vals.ravel()[self.keep]
        return sp.coo_matrix(
            (vals, (self.rows, self.cols)), shape=self.shape
        ).tocsr()


def full_to_free_map(mask):
    """Map full entity indices to free indices, -1 on constrained entities."""
    out = np.full(len(mask), -1, dtype=np.int64)
    out[~mask] = np.arange(int((~mask).sum()))
    return out


# ----------------------------------------------------------------------
# canonical interpolation


def interpolate(mesh, analytic_field, space, apply_bc=True, npts=8):
    """Interpolate a pointwise vector field into the edge or face space.

    Edge DOFs are Gauss line integrals of the tangential component; face
    DOFs tensor-Gauss integrals of the normal flux.  With ``apply_bc`` the
    constrained DOFs are dropped (forced to zero); otherwise the full
    coefficient vector is returned.
    """
    if space not in (SpaceKind.EDGE, SpaceKind.FACE):
        raise SpaceError("interpolation targets the edge or face space")
    g, w = gauss_rule(npts)
    h = mesh.spacings
    coords = [mesh.node_coords(a) for a in range(3)]
    lo = [mesh.extents[a][0] for a in range(3)]

    def axis_points(axis, interval=True):
        # quadrature abscissae along one axis for every interval or node
        if interval:
            n = mesh.resolution[axis]
            return lo[axis] + h[axis] * (np.arange(n)[:, None] + g[None, :])
        return coords[axis]

    blocks = []
    if space is SpaceKind.EDGE:
        for axis, kind in enumerate(EDGE_KINDS):
            shape = mesh.kind_shape(kind)
            trans = [a for a in range(3) if a != axis]
            pts_axis = axis_points(axis)  # (n, npts)
            A3, A2, A1 = np.meshgrid(
                np.arange(shape[2]), np.arange(shape[1]), np.arange(shape[0]),
                indexing="ij",
            )
            idx = (A1.ravel(), A2.ravel(), A3.ravel())
            n_ent = len(idx[0])
            pts = np.empty((n_ent, npts, 3))
            pts[:, :, axis] = pts_axis[idx[axis]]
            for a in trans:
                pts[:, :, a] = coords[a][idx[a]][:, None]
            f = np.asarray(analytic_field(pts.reshape(-1, 3))).reshape(n_ent, npts, 3)
            dof = h[axis] * np.einsum("eq,q->e", f[:, :, axis], w)
            blocks.append(dof)
    else:
        for axis, kind in enumerate(FACE_KINDS):
            shape = mesh.kind_shape(kind)
            trans = [a for a in range(3) if a != axis]
            A3, A2, A1 = np.meshgrid(
                np.arange(shape[2]), np.arange(shape[1]), np.arange(shape[0]),
                indexing="ij",
            )
            idx = (A1.ravel(), A2.ravel(), A3.ravel())
            n_ent = len(idx[0])
            p1 = axis_points(trans[0])[idx[trans[0]]]  # (n_ent, npts)
            p2 = axis_points(trans[1])[idx[trans[1]]]
            pts = np.empty((n_ent, npts, npts, 3))
            pts[:, :, :, axis] = coords[axis][idx[axis]][:, None, None]
            pts[:, :, :, trans[0]] = p1[:, :, None]
            pts[:, :, :, trans[1]] = p2[:, None, :]
            f = np.asarray(analytic_field(pts.reshape(-1, 3)))
            f = f.reshape(n_ent, npts, npts, 3)
            dof = (
                h[trans[0]]
                * h[trans[1]]
                * np.einsum("eab,a,b->e", f[:, :, :, axis], w, w)
            )
            blocks.append(dof)

    full = np.concatenate(blocks)
    if not apply_bc:
        return FieldVec(space, full)
    mask = mesh.boundary_mask(space.value)
    return FieldVec(space, full[~mask])


def interpolate_nodal(mesh, analytic_scalar):
    """Point values of a scalar at every lattice node (full numbering)."""
    coords = [mesh.node_coords(a) for a in range(3)]
    zz, yy, xx = np.meshgrid(coords[2], coords[1], coords[0], indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    return np.asarray(analytic_scalar(pts))


def assemble_mass_quadrature(mesh, space, npts=3):
    """Mass matrix assembled cell-by-cell with tensor Gauss quadrature.

    Independent oracle for the closed-form Kronecker assembly; full-space
    numbering, edge/face spaces only.
    """
    tables = CellBasisTables(mesh, npts=npts)
    if space is SpaceKind.EDGE:
        cells, basis, n = tables.edge_cells, tables.edge_basis, mesh.n_edges
    elif space is SpaceKind.FACE:
        cells, basis, n = tables.face_cells, tables.face_basis, mesh.n_faces
    else:
        raise SpaceError("quadrature oracle covers edge and face spaces")
    eye = np.broadcast_to(
        np.eye(3), (tables.n_cells, len(tables.weights), 3, 3)
    )
    local = tables.local_bilinear(basis, basis, eye)
    ident = np.arange(n, dtype=np.int64)
    pattern = BilinearPattern(cells, cells, ident, ident, (n, n))
    return pattern.assemble(local)


def assemble_mixed_mass_quadrature(mesh, npts=3):
    """Edge x face pairing via tensor Gauss quadrature (oracle path)."""
    tables = CellBasisTables(mesh, npts=npts)
    eye = np.broadcast_to(np.eye(3), (tables.n_cells, len(tables.weights), 3, 3))
    local = tables.local_bilinear(tables.edge_basis, tables.face_basis, eye)
    ident_e = np.arange(mesh.n_edges, dtype=np.int64)
    ident_f = np.arange(mesh.n_faces, dtype=np.int64)
    pattern = BilinearPattern(
        tables.edge_cells, tables.face_cells, ident_e, ident_f,
        (mesh.n_edges, mesh.n_faces),
    )
    return pattern.assemble(local)


# ----------------------------------------------------------------------
# verification


@dataclass
class ComplexReport:
    """Structured outcome of the exactness checks."""

    curl_grad_max: float
    div_curl_max: float
    harmonic_dim: int
    expected_harmonic_dim: int
    dense_checked: bool
    rank_checks: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures


def verify_complex(cx: DeRhamComplex, dense_limit=500):
    """Check D o D = 0 and, on small meshes, kernel/range dimensions
    against the topology via a dense rank oracle."""
    failures = []
    cg = cx.curl @ cx.grad
    dc = cx.div @ cx.curl
    curl_grad_max = float(abs(cg).max()) if cg.nnz else 0.0
    div_curl_max = float(abs(dc).max()) if dc.nnz else 0.0
    if curl_grad_max != 0.0:
        failures.append(f"curl@grad has nonzero entry {curl_grad_max}")
    if div_curl_max != 0.0:
        failures.append(f"div@curl has nonzero entry {div_curl_max}")

    expected_h = 1 if cx.mesh.periodic_z else 0
    if cx.harmonic_dim != expected_h:
        failures.append(
            f"harmonic_dim {cx.harmonic_dim} != expected {expected_h}"
        )

    total = sum(cx.dims.values())
    rank_checks = {}
    dense_checked = total <= dense_limit
    if dense_checked:
        d = cx.dims
        rk_grad = np.linalg.matrix_rank(cx.grad.toarray()) if d[SpaceKind.NODE] else 0
        rk_curl = np.linalg.matrix_rank(cx.curl.toarray()) if cx.curl.nnz else 0
        rk_div = np.linalg.matrix_rank(cx.div.toarray()) if cx.div.nnz else 0
        checks = [
            ("grad_injective", rk_grad, d[SpaceKind.NODE]),
            ("curl_kernel_is_grad_range", d[SpaceKind.EDGE] - rk_curl, rk_grad),
            ("div_onto_mean_zero", rk_div, d[SpaceKind.CELL] - 1),
            ("face_harmonic_dim", d[SpaceKind.FACE] - rk_div - rk_curl, expected_h),
        ]
        for name, got, expect in checks:
            rank_checks[name] = (int(got), int(expect))
            if got != expect:
                failures.append(f"{name}: got {got}, expected {expect}")

    return ComplexReport(
        curl_grad_max=curl_grad_max,
        div_curl_max=div_curl_max,
        harmonic_dim=cx.harmonic_dim,
        expected_harmonic_dim=expected_h,
        dense_checked=dense_checked,
        rank_checks=rank_checks,
        failures=failures,
    )
