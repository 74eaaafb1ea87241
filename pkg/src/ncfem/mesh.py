"""Uniform triangulations with edge topology and parallelogram pairing.

Conventions
-----------
* Triangle ``t`` has counterclockwise vertices ``triangles[t]``; local edge
  ``k`` is opposite local vertex ``k`` and its global index is
  ``tri_edges[t, k]``.
* ``edges[e]`` holds the sorted vertex pair; ``edge_tris[e]`` the adjacent
  triangles in increasing order, ``-1`` in the second slot on the boundary.
* The global unit normal of an edge is the outward normal of its
  lower-indexed triangle, so it points from the lower to the higher triangle
  and outward on the boundary. ``tri_edge_sign[t, k]`` is ``+1`` when that
  global normal agrees with the outward normal of ``t``.
"""

from functools import cached_property
from typing import NamedTuple

import numpy as np

from .elements import barycentric_gradients, signed_areas

GEOM_TOL = 1e-12

_R3 = np.sqrt(3.0) / 2.0

# (s, t) -> A (s, t) + b maps the unit square onto the plate parallelogram.
# Both maps fix the domain; they differ in which diagonal of the
# parallelogram the square's cell diagonals become.
PARALLELOGRAM_MAPS = {
    # cells cut along their short diagonal: 30-60-90 triangles
    "short": (np.array([[1.5, -2.0], [_R3, 0.0]]), np.array([2.0, 0.0])),
    # cells cut along their long diagonal: obtuse triangles
    "long": (np.array([[2.0, 1.5], [0.0, _R3]]), np.zeros(2)),
}
PARALLELOGRAM_MAP, PARALLELOGRAM_SHIFT = PARALLELOGRAM_MAPS["short"]


class UnsupportedMeshError(ValueError):
    """The mesh lacks structure needed by an operation (e.g. K_h stencils)."""


class BoundaryPartner(NamedTuple):
    """Extrapolation stencil of one boundary edge.

    ``triangle`` is the partner forming a parallelogram with the boundary
    edge's triangle, ``center`` the parallelogram center (midpoint of
    ``shared_edge``), ``reflected`` the point ``2 * center - P`` which is the
    midpoint of the interior edge ``interior_edge``.
    """

    triangle: int
    center: np.ndarray
    reflected: np.ndarray
    interior_edge: int
    shared_edge: int


class UniformityReport(NamedTuple):
    passed: bool
    defect: float


class Mesh:
    """Conforming triangulation of a polygon.

    Parameters
    ----------
    vertices : (V, 2) array
    triangles : (T, 3) int array, counterclockwise
    n : int, optional
        Subdivision count for structured meshes (0 when unknown).
    domain : str, optional
        Domain tag, ``"square"`` or ``"parallelogram"`` for the built-ins.
    """

    def __init__(self, vertices, triangles, n=0, domain="custom"):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.n = int(n)
        self.domain = domain

        if not np.all(np.isfinite(self.vertices)):
            raise ValueError("vertex coordinates must be finite")
        if np.any(self.signed_areas <= 0.0):
            raise ValueError("triangles must be counterclockwise and nondegenerate")

        self._build_edges()

    # ------------------------------------------------------------------
    # topology
    def _build_edges(self):
        T = len(self.triangles)
        tri = self.triangles
        local = np.stack([tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]], axis=1)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        self.edges = edges
        self.tri_edges = inverse.reshape(T, 3)

        owner = np.repeat(np.arange(T), 3)
        edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
        # owners are visited in increasing triangle order
        order = np.argsort(inverse, kind="stable")
        sorted_e = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_e[1:] != sorted_e[:-1]
        edge_tris[sorted_e[first], 0] = owner[order][first]
        edge_tris[sorted_e[~first], 1] = owner[order][~first]
        counts = np.bincount(inverse, minlength=len(edges))
        if np.any(counts > 2):
            raise ValueError("non-manifold edge in triangulation")
        self.edge_tris = edge_tris
        self.is_boundary = edge_tris[:, 1] < 0

        self.tri_edge_sign = np.where(
            edge_tris[self.tri_edges, 0] == np.arange(T)[:, None], 1.0, -1.0)

        # global normal from the owner triangle's local orientation
        first_tri = edge_tris[:, 0]
        k_local = np.argmax(self.tri_edges[first_tri] == np.arange(len(edges))[:, None], axis=1)
        a = tri[first_tri, (k_local + 1) % 3]
        b = tri[first_tri, (k_local + 2) % 3]
        d = self.vertices[b] - self.vertices[a]
        self.edge_lengths = np.hypot(d[:, 0], d[:, 1])
        self.edge_normals = np.stack([d[:, 1], -d[:, 0]], axis=1) / self.edge_lengths[:, None]
        self.edge_midpoints = 0.5 * (self.vertices[self.edges[:, 0]]
                                     + self.vertices[self.edges[:, 1]])

    # ------------------------------------------------------------------
    # geometry
    @cached_property
    def coords(self):
        """Vertex coordinates per triangle, ``(T, 3, 2)``."""
        return self.vertices[self.triangles]

    @cached_property
    def signed_areas(self):
        return signed_areas(self.coords)

    @property
    def areas(self):
        return self.signed_areas

    @cached_property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def h(self):
        """Largest triangle diameter (the longest edge)."""
        return float(self.edge_lengths.max())

    @cached_property
    def bary_gradients(self):
        """Gradients of the barycentric coordinates, shape ``(T, 3, 2)``."""
        return barycentric_gradients(self.coords)

    @cached_property
    def tri_outward_normals(self):
        """Outward unit normals of each local edge, shape ``(T, 3, 2)``."""
        return self.tri_edge_sign[..., None] * self.edge_normals[self.tri_edges]

    @cached_property
    def boundary_vertices(self):
        mask = np.zeros(len(self.vertices), dtype=bool)
        mask[self.edges[self.is_boundary].ravel()] = True
        return mask

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def num_edges(self):
        return len(self.edges)

    def physical_points(self, bary):
        """Map barycentric points ``(Q, 3)`` into every triangle: ``(T, Q, 2)``."""
        return np.einsum("qk,tkd->tqd", bary, self.vertices[self.triangles])

    def opposite_vertices(self, e):
        """Vertices of the adjacent triangles that are not on edge ``e``."""
        out = []
        for t in self.edge_tris[e]:
            if t < 0:
                continue
            k = int(np.flatnonzero(self.tri_edges[t] == e)[0])
            out.append(int(self.triangles[t, k]))
        return out

    # ------------------------------------------------------------------
    # K_h boundary stencils
    @cached_property
    def boundary_extrapolation(self):
        """Map boundary edge index -> :class:`BoundaryPartner`."""
        if self.n == 1:
            raise UnsupportedMeshError("boundary extrapolation needs n >= 2")
        return {int(e): self._find_partner(int(e))
                for e in np.flatnonzero(self.is_boundary)}

    def _find_partner(self, e):
        K = int(self.edge_tris[e, 0])
        P = self.edge_midpoints[e]
        tol = GEOM_TOL * self.h
        for k in range(3):
            shared = int(self.tri_edges[K, k])
            if self.is_boundary[shared]:
                continue
            Kt = int(self.edge_tris[shared].sum() - K)
            a = self.triangles[K, k]
            kt = int(np.flatnonzero(self.tri_edges[Kt] == shared)[0])
            b = self.triangles[Kt, kt]
            p, q = self.edges[shared]
            defect = self.vertices[a] + self.vertices[b] - self.vertices[p] - self.vertices[q]
            if np.abs(defect).max() > tol:
                continue
            center = self.edge_midpoints[shared]
            reflected = 2.0 * center - P
            for cand in self.tri_edges[Kt]:
                if self.is_boundary[cand]:
                    continue
                if np.abs(self.edge_midpoints[cand] - reflected).max() <= tol:
                    return BoundaryPartner(Kt, center, reflected, int(cand), shared)
        raise UnsupportedMeshError(f"no parallelogram partner for boundary edge {e}")

    def to_text(self):
        """Plain-text dump: ``v x1 x2`` lines then ``t i j k`` lines."""
        lines = [f"v {x:.17g} {y:.17g}" for x, y in self.vertices]
        lines += [f"t {i} {j} {k}" for i, j, k in self.triangles]
        return "\n".join(lines) + "\n"


def _unit_square_connectivity(n):
    s = np.linspace(0.0, 1.0, n + 1)
    S, T = np.meshgrid(s, s)  # row j holds t = s[j]
    pts = np.stack([S.ravel(), T.ravel()], axis=1)
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    p00 = i + (n + 1) * j
    p10 = p00 + 1
    p01 = p00 + n + 1
    p11 = p01 + 1
    # local vertex 0 sits opposite the diagonal p00-p11 in both triangles
    lower = np.stack([p10, p11, p00], axis=1)
    upper = np.stack([p01, p00, p11], axis=1)
    tris = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return pts, tris


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"subdivision count must be a positive integer, got {n!r}")
    return int(n)


def build_uniform_square_mesh(n):
    """n x n cells on (0,1)^2, each cut by its lower-left/upper-right diagonal."""
    n = _check_n(n)
    pts, tris = _unit_square_connectivity(n)
    return Mesh(pts, tris, n=n, domain="square")


def build_uniform_parallelogram_mesh(n, diagonal="short"):
    """Affine image of the square mesh on the plate domain.

    Corners are (0,0), (2,0), (7/2, sqrt(3)/2) and (3/2, sqrt(3)/2).

    Parameters
    ----------
    n : int
        Cells per side.
    diagonal : {"short", "long"}
        Which diagonal of each parallelogram cell is drawn. ``"short"``
        gives right triangles with sides 1, sqrt(3), 2 (times 1/n) and is
        the triangulation behind the reference plate errors; ``"long"``
        gives obtuse triangles.
    """
    n = _check_n(n)
    try:
        A, b = PARALLELOGRAM_MAPS[diagonal]
    except KeyError:
        raise ValueError(f"diagonal must be 'short' or 'long', got {diagonal!r}") from None
    pts, tris = _unit_square_connectivity(n)
    return Mesh(pts @ A.T + b, tris, n=n, domain="parallelogram")


def verify_uniformity(mesh):
    """Check that every interior edge's two triangles form a parallelogram."""
    interior = np.flatnonzero(~mesh.is_boundary)
    if len(interior) == 0:
        return UniformityReport(True, 0.0)
    t0, t1 = mesh.edge_tris[interior].T
    k0 = np.argmax(mesh.tri_edges[t0] == interior[:, None], axis=1)
    k1 = np.argmax(mesh.tri_edges[t1] == interior[:, None], axis=1)
    a = mesh.vertices[mesh.triangles[t0, k0]]
    b = mesh.vertices[mesh.triangles[t1, k1]]
    p = mesh.vertices[mesh.edges[interior, 0]]
    q = mesh.vertices[mesh.edges[interior, 1]]
    defect = float(np.linalg.norm(a + b - p - q, axis=1).max())
    return UniformityReport(defect <= GEOM_TOL * mesh.h, defect)


def boundary_partner(mesh, boundary_edge):
    """Parallelogram extrapolation stencil for ``boundary_edge``."""
    if not mesh.is_boundary[boundary_edge]:
        raise ValueError(f"edge {boundary_edge} is not a boundary edge")
    return mesh.boundary_extrapolation[int(boundary_edge)]
