"""Structured axis-aligned hexahedral box meshes with optional z-periodicity.

Entity enumeration is lexicographic with x fastest.  Edges are oriented along
their +axis and faces carry the +axis normal, so incidence-based differential
operators built on this mesh need no per-entity sign bookkeeping.  Under
``periodic_z`` the top vertex/edge/face layer is identified with the bottom
one and z lattice indices are taken modulo ``nz``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VERTEX_KIND = "vertex"
EDGE_KINDS = ("edge_x", "edge_y", "edge_z")
FACE_KINDS = ("face_x", "face_y", "face_z")
CELL_KIND = "cell"
ALL_KINDS = (VERTEX_KIND,) + EDGE_KINDS + FACE_KINDS + (CELL_KIND,)

_KIND_DIM = {VERTEX_KIND: 0, CELL_KIND: 3}
_KIND_DIM.update({k: 1 for k in EDGE_KINDS})
_KIND_DIM.update({k: 2 for k in FACE_KINDS})


class MeshError(ValueError):
    """Invalid mesh construction parameters."""


@dataclass(frozen=True)
class EntityId:
    """A mesh entity addressed by its kind and lattice index triple."""

    kind: str
    ijk: tuple[int, int, int]


def _ravel(ijk, shape):
    i, j, k = ijk
    return int(i + shape[0] * (j + shape[1] * k))


def _unravel(index, shape):
    i = index % shape[0]
    rest = index // shape[0]
    return (int(i), int(rest % shape[1]), int(rest // shape[1]))


class BoxMesh:
    """Uniform axis-aligned hexahedral grid on a box.

    Parameters
    ----------
    extents : three (lo, hi) pairs
        Physical extent of the box along x, y, z.
    resolution : (nx, ny, nz)
        Number of cells along each axis.
    periodic_z : bool
        Identify the z = zmax layer with z = zmin.
    """

    def __init__(self, extents, resolution, periodic_z=False):
        extents = tuple((float(lo), float(hi)) for lo, hi in extents)
        resolution = tuple(int(n) for n in resolution)
        if len(extents) != 3 or len(resolution) != 3:
            raise MeshError("extents and resolution must have three entries")
        for axis_name, (lo, hi), n in zip("xyz", extents, resolution):
            if n < 1:
                raise MeshError(f"resolution along {axis_name} must be >= 1, got {n}")
            if not hi > lo:
                raise MeshError(f"degenerate extent along {axis_name}: ({lo}, {hi})")
        if periodic_z and resolution[2] < 2:
            raise MeshError("periodic_z requires nz >= 2")

        self.extents = extents
        self.resolution = resolution
        self.periodic_z = bool(periodic_z)
        self.spacings = tuple(
            (hi - lo) / n for (lo, hi), n in zip(extents, resolution)
        )

    # ------------------------------------------------------------------
    # counts and shapes

    @property
    def nx(self):
        return self.resolution[0]

    @property
    def ny(self):
        return self.resolution[1]

    @property
    def nz(self):
        return self.resolution[2]

    @property
    def node_counts(self):
        """Number of distinct lattice nodes per axis (z collapses if periodic)."""
        nx, ny, nz = self.resolution
        return (nx + 1, ny + 1, nz if self.periodic_z else nz + 1)

    def kind_shape(self, kind):
        """Lattice index ranges (x, y, z) for entities of ``kind``."""
        nx, ny, nz = self.resolution
        Nx, Ny, Nz = self.node_counts
        shapes = {
            VERTEX_KIND: (Nx, Ny, Nz),
            "edge_x": (nx, Ny, Nz),
            "edge_y": (Nx, ny, Nz),
            "edge_z": (Nx, Ny, nz),
            "face_x": (Nx, ny, nz),
            "face_y": (nx, Ny, nz),
            "face_z": (nx, ny, Nz),
            CELL_KIND: (nx, ny, nz),
        }
        try:
            return shapes[kind]
        except KeyError:
            raise MeshError(f"unknown entity kind {kind!r}") from None

    def count(self, kind):
        return int(np.prod(self.kind_shape(kind)))

    def entity_counts(self):
        """Per-kind entity counts."""
        return {kind: self.count(kind) for kind in ALL_KINDS}

    @property
    def n_vertices(self):
        return self.count(VERTEX_KIND)

    @property
    def n_edges(self):
        return sum(self.count(k) for k in EDGE_KINDS)

    @property
    def n_faces(self):
        return sum(self.count(k) for k in FACE_KINDS)

    @property
    def n_cells(self):
        return self.count(CELL_KIND)

    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces - self.n_cells

    # ------------------------------------------------------------------
    # entity numbering

    def index_of(self, entity):
        """Global index of an entity within its dimension's numbering.

        Edges are numbered with all x-edges first, then y, then z; faces
        likewise.  Within one kind the ordering is lexicographic, x fastest.
        Under periodic_z the z index is wrapped modulo the identified range.
        """
        kind = entity.kind
        shape = self.kind_shape(kind)
        i, j, k = entity.ijk
        if self.periodic_z:
            k = k % shape[2]
        if not (0 <= i < shape[0] and 0 <= j < shape[1] and 0 <= k < shape[2]):
            raise MeshError(f"entity index {entity.ijk} out of range for {kind}")
        offset = 0
        group = EDGE_KINDS if kind in EDGE_KINDS else FACE_KINDS if kind in FACE_KINDS else ()
        for other in group:
            if other == kind:
                break
            offset += self.count(other)
        return offset + _ravel((i, j, k), shape)

    def entity_of(self, dim, index):
        """Inverse of :meth:`index_of` for the given entity dimension."""
        if dim == 0:
            kinds = (VERTEX_KIND,)
        elif dim == 1:
            kinds = EDGE_KINDS
        elif dim == 2:
            kinds = FACE_KINDS
        elif dim == 3:
            kinds = (CELL_KIND,)
        else:
            raise MeshError(f"invalid entity dimension {dim}")
        remaining = int(index)
        for kind in kinds:
            n = self.count(kind)
            if remaining < n:
                return EntityId(kind, _unravel(remaining, self.kind_shape(kind)))
            remaining -= n
        raise MeshError(f"entity index {index} out of range for dimension {dim}")

    # ------------------------------------------------------------------
    # geometry

    def node_coords(self, axis):
        """Physical coordinates of the lattice nodes along one axis."""
        lo, _ = self.extents[axis]
        h = self.spacings[axis]
        return lo + h * np.arange(self.node_counts[axis])

    def cell_centers(self):
        """(n_cells, 3) array of cell-center coordinates, x fastest."""
        axes = []
        for axis in range(3):
            lo, _ = self.extents[axis]
            h = self.spacings[axis]
            axes.append(lo + h * (np.arange(self.resolution[axis]) + 0.5))
        zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    # ------------------------------------------------------------------
    # boundary classification

    def _axis_boundary(self, idx, axis, node_like=True):
        """True where a node-like lattice index sits on a physical boundary plane."""
        if axis == 2 and self.periodic_z:
            return np.zeros_like(idx, dtype=bool)
        n = self.node_counts[axis] if node_like else self.resolution[axis]
        return (idx == 0) | (idx == n - 1)

    def _kind_boundary_mask(self, kind):
        shape = self.kind_shape(kind)
        kk, jj, ii = np.meshgrid(
            np.arange(shape[2]), np.arange(shape[1]), np.arange(shape[0]),
            indexing="ij",
        )
        ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
        on_x = self._axis_boundary(ii, 0)
        on_y = self._axis_boundary(jj, 1)
        on_z = self._axis_boundary(kk, 2)
        if kind == VERTEX_KIND:
            return on_x | on_y | on_z
        if kind == "edge_x":
            return on_y | on_z
        if kind == "edge_y":
            return on_x | on_z
        if kind == "edge_z":
            return on_x | on_y
        if kind == "face_x":
            return on_x
        if kind == "face_y":
            return on_y
        if kind == "face_z":
            return on_z
        if kind == CELL_KIND:
            return np.zeros(len(ii), dtype=bool)
        raise MeshError(f"unknown entity kind {kind!r}")

    def boundary_mask(self, space):
        """Boolean mask of constrained DOFs for one of the four DOF spaces.

        ``space`` is one of ``"node"``, ``"edge"``, ``"face"``, ``"cell"``.
        A DOF is masked exactly when its entity is geometrically contained in
        the essential-BC part of the boundary; under periodic_z only the four
        side planes carry essential conditions.
        """
        if space == "node":
            return self._kind_boundary_mask(VERTEX_KIND)
        if space == "edge":
            return np.concatenate([self._kind_boundary_mask(k) for k in EDGE_KINDS])
        if space == "face":
            return np.concatenate([self._kind_boundary_mask(k) for k in FACE_KINDS])
        if space == "cell":
            return np.zeros(self.n_cells, dtype=bool)
        raise MeshError(f"unknown DOF space {space!r}")

    def normal_plane_vertex_mask(self, axis):
        """Vertices lying on the two boundary planes normal to ``axis``.

        Used for constraining a single vector component of a continuous
        nodal field; empty in z when the mesh is z-periodic.
        """
        shape = self.kind_shape(VERTEX_KIND)
        kk, jj, ii = np.meshgrid(
            np.arange(shape[2]), np.arange(shape[1]), np.arange(shape[0]),
            indexing="ij",
        )
        idx = (ii, jj, kk)[axis].ravel()
        return self._axis_boundary(idx, axis)

    # ------------------------------------------------------------------

    def descriptor(self):
        """Plain-data description used for checkpoint compatibility checks."""
        return {
            "extents": [list(e) for e in self.extents],
            "resolution": list(self.resolution),
            "periodic_z": self.periodic_z,
        }

    def __repr__(self):
        per = ", periodic_z" if self.periodic_z else ""
        return (
            f"BoxMesh({self.extents}, {self.resolution[0]}x"
            f"{self.resolution[1]}x{self.resolution[2]}{per})"
        )


def build_box_mesh(extents, resolution, periodic_z=False):
    """Construct a :class:`BoxMesh`; raises :class:`MeshError` on bad input."""
    return BoxMesh(extents, resolution, periodic_z=periodic_z)
