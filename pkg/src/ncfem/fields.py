"""Discrete fields on a :class:`~ncfem.mesh.Mesh`.

All fields expose ``values_at(bary)`` returning ``(T, Q, *shape)`` values
at barycentric points, which is what the error norms consume. Fields that
K_h can post-process also provide ``edge_midpoint_values()``: the value of
the restriction to each triangle at its three edge midpoints,
``(T, 3, *shape)``.
"""

import numpy as np

from .elements import HHJBasis, MorleyBasis, RT0Basis

# barycentric coordinates of the midpoints of local edges 0, 1, 2
EDGE_MIDPOINTS_BARY = 0.5 * (np.ones((3, 3)) - np.eye(3))


def mesh_basis(mesh, kind):
    """Per-mesh cached bases with the mesh's global edge orientation."""
    cache = mesh.__dict__.setdefault("_basis_cache", {})
    if kind not in cache:
        if kind == "morley":
            cache[kind] = MorleyBasis(mesh.coords, mesh.tri_edge_sign)
        elif kind == "rt0":
            cache[kind] = RT0Basis(mesh.coords, mesh.tri_edge_sign)
        elif kind == "hhj":
            cache[kind] = HHJBasis(mesh.coords)
        else:
            raise ValueError(kind)
    return cache[kind]


class P0Field:
    """One value (scalar, vector or matrix) per triangle."""

    def __init__(self, mesh, values):
        self.mesh = mesh
        self.values = np.asarray(values, dtype=float)
        if len(self.values) != mesh.num_triangles:
            raise ValueError("need one value per triangle")

    @property
    def value_shape(self):
        return self.values.shape[1:]

    def values_at(self, bary):
        bary = np.atleast_2d(bary)
        v = self.values[:, None]
        return np.broadcast_to(v, (len(self.values), len(bary)) + self.value_shape)

    def edge_midpoint_values(self):
        return self.values_at(EDGE_MIDPOINTS_BARY)

    def __sub__(self, other):
        return P0Field(self.mesh, self.values - other.values)


class P1Field:
    """Continuous piecewise linear function given by vertex values."""

    def __init__(self, mesh, vertex_values):
        self.mesh = mesh
        self.vertex_values = np.asarray(vertex_values, dtype=float)

    def values_at(self, bary):
        local = self.vertex_values[self.mesh.triangles]
        return np.einsum("qk,tk->tq", np.atleast_2d(bary), local)

    def gradient(self):
        local = self.vertex_values[self.mesh.triangles]
        return P0Field(self.mesh, np.einsum("tk,tkd->td", local, self.mesh.bary_gradients))


class CRFunction:
    """Crouzeix-Raviart function: one edge mean per edge (zero on the boundary)."""

    def __init__(self, mesh, dofs):
        self.mesh = mesh
        self.dofs = np.asarray(dofs, dtype=float)
        if len(self.dofs) != mesh.num_edges:
            raise ValueError("need one DOF per edge")

    def local_dofs(self):
        return self.dofs[self.mesh.tri_edges]

    def values_at(self, bary):
        shapes = 1.0 - 2.0 * np.atleast_2d(bary)
        return np.einsum("qk,tk->tq", shapes, self.local_dofs())

    def gradient(self):
        """Piecewise gradient as a vector :class:`P0Field`."""
        g = -2.0 * np.einsum("tk,tkd->td", self.local_dofs(), self.mesh.bary_gradients)
        return P0Field(self.mesh, g)


class MidpointField:
    """Piecewise linear field fixed by one value per edge midpoint.

    This is the image of K_h: vector values give ``(W_CR)^2``, symmetric
    matrix values ``(W_CR)^4_s``.
    """

    def __init__(self, mesh, values):
        self.mesh = mesh
        self.values = np.asarray(values, dtype=float)

    @property
    def value_shape(self):
        return self.values.shape[1:]

    def values_at(self, bary):
        shapes = 1.0 - 2.0 * np.atleast_2d(bary)
        local = self.values[self.mesh.tri_edges]
        return np.einsum("qk,tk...->tq...", shapes, local)

    def edge_midpoint_values(self):
        return self.values[self.mesh.tri_edges]


class RTField:
    """Lowest-order Raviart-Thomas field: signed normal flux per edge."""

    def __init__(self, mesh, dofs):
        self.mesh = mesh
        self.dofs = np.asarray(dofs, dtype=float)
        if len(self.dofs) != mesh.num_edges:
            raise ValueError("need one DOF per edge")

    @property
    def basis(self):
        return mesh_basis(self.mesh, "rt0")

    def values_at(self, bary):
        shapes = self.basis.values(bary)  # (T, Q, 3, 2)
        return np.einsum("tqkd,tk->tqd", shapes, self.dofs[self.mesh.tri_edges])

    def edge_midpoint_values(self):
        return self.values_at(EDGE_MIDPOINTS_BARY)

    def divergence(self):
        """Elementwise (constant) divergence, shape ``(T,)``."""
        return np.einsum("tk,tk->t", self.basis.divergence, self.dofs[self.mesh.tri_edges])


class MorleyFunction:
    """Morley function: vertex values plus signed edge normal-derivative means."""

    def __init__(self, mesh, vertex_values, edge_dofs):
        self.mesh = mesh
        self.vertex_values = np.asarray(vertex_values, dtype=float)
        self.edge_dofs = np.asarray(edge_dofs, dtype=float)

    @property
    def basis(self):
        return mesh_basis(self.mesh, "morley")

    def local_dofs(self):
        return np.concatenate([self.vertex_values[self.mesh.triangles],
                               self.edge_dofs[self.mesh.tri_edges]], axis=1)

    def values_at(self, bary):
        return np.einsum("tqi,ti->tq", self.basis.values(bary), self.local_dofs())

    def gradients_at(self, bary):
        return np.einsum("tqid,ti->tqd", self.basis.gradients(bary), self.local_dofs())

    def hessian(self):
        """Piecewise constant Hessian as a matrix :class:`P0Field`."""
        return P0Field(self.mesh, np.einsum("tiab,ti->tab", self.basis.hessians,
                                            self.local_dofs()))


class HHJField:
    """HHJ field: one normal-normal moment per edge, constant matrices per triangle."""

    def __init__(self, mesh, dofs):
        self.mesh = mesh
        self.dofs = np.asarray(dofs, dtype=float)

    def matrices(self):
        return mesh_basis(self.mesh, "hhj").from_dofs(self.dofs[self.mesh.tri_edges])

    def as_p0(self):
        return P0Field(self.mesh, self.matrices())

    def values_at(self, bary):
        return self.as_p0().values_at(bary)

    def edge_midpoint_values(self):
        return self.as_p0().edge_midpoint_values()
