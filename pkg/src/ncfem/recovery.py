"""The K_h post-processing operator and the RT / HHJ interpolants."""

from dataclasses import dataclass, field

import numpy as np

from .elements import HHJBasis
from .fields import HHJField, MidpointField, RTField
from .mesh import UnsupportedMeshError
from .norms import l2_error
from .quadrature import edge_quadrature

INTERP_DEGREE = 6


def _stencils(mesh):
    """Arrays (boundary edge, shared edge, reflected interior edge)."""
    cache = mesh.__dict__.setdefault("_basis_cache", {})
    if "kh_stencil" not in cache:
        bp = mesh.boundary_extrapolation
        keys = np.fromiter(bp.keys(), dtype=np.int64, count=len(bp))
        shared = np.array([bp[int(e)].shared_edge for e in keys], dtype=np.int64)
        refl = np.array([bp[int(e)].interior_edge for e in keys], dtype=np.int64)
        cache["kh_stencil"] = (keys, shared, refl)
    return cache["kh_stencil"]


def k_h(field, mesh=None):
    """Post-process a piecewise field into a :class:`MidpointField`.

    ``field`` is either an object with ``edge_midpoint_values()`` (returning
    the per-triangle restriction's values at each local edge midpoint,
    ``(T, 3, *shape)``) or an array of piecewise constant values
    ``(T, *shape)``.

    Interior edges receive the average of the two one-sided values. A
    boundary edge with midpoint ``P`` gets ``2 K_h(N_c) - K_h(P~)`` using the
    parallelogram stencil of the mesh; both right-hand values are interior
    averages, so interior edges are filled first.
    """
    if hasattr(field, "edge_midpoint_values"):
        mesh = field.mesh if mesh is None else mesh
        local = np.asarray(field.edge_midpoint_values())
    else:
        if mesh is None:
            raise ValueError("a mesh is required for raw arrays")
        vals = np.asarray(field, dtype=float)
        local = np.broadcast_to(vals[:, None], (len(vals), 3) + vals.shape[1:])
    if mesh.n == 1:
        raise UnsupportedMeshError("K_h needs n >= 2 (no extrapolation stencil on n = 1)")

    shape = local.shape[2:]
    flat = local.reshape(mesh.num_triangles * 3, -1)
    edges = mesh.tri_edges.ravel()
    sums = np.zeros((mesh.num_edges, flat.shape[1]))
    np.add.at(sums, edges, flat)
    counts = np.bincount(edges, minlength=mesh.num_edges)
    values = sums / counts[:, None]

    bnd, shared, refl = _stencils(mesh)
    values[bnd] = 2.0 * values[shared] - values[refl]
    return MidpointField(mesh, values.reshape((mesh.num_edges,) + shape))


def pi_rt(q, mesh, degree=INTERP_DEGREE):
    """RT0 interpolant: flux of ``q`` through every edge with its global normal."""
    rule = edge_quadrature(degree)
    p0 = mesh.vertices[mesh.edges[:, 0]]
    p1 = mesh.vertices[mesh.edges[:, 1]]
    x = p0[:, None] + rule.points[None, :, None] * (p1 - p0)[:, None]
    vals = np.asarray(q(x))  # (E, Q, 2)
    mean = np.einsum("eqd,q->ed", vals, rule.weights)
    return RTField(mesh, mesh.edge_lengths * np.einsum("ed,ed->e", mean, mesh.edge_normals))


def pi_hhj(tau, mesh, degree=INTERP_DEGREE):
    """HHJ interpolant: edge means of ``ν^T τ ν``."""
    rule = edge_quadrature(degree)
    p0 = mesh.vertices[mesh.edges[:, 0]]
    p1 = mesh.vertices[mesh.edges[:, 1]]
    x = p0[:, None] + rule.points[None, :, None] * (p1 - p0)[:, None]
    vals = np.asarray(tau(x))  # (E, Q, 2, 2)
    mean = np.einsum("eqab,q->eab", vals, rule.weights)
    nu = mesh.edge_normals
    return HHJField(mesh, np.einsum("ea,eab,eb->e", nu, mean, nu))


def pi_hhj_local(coords, tau, degree=INTERP_DEGREE):
    """Per-triangle ``Π_HHJ τ`` matrices for a triangle stack ``(T, 3, 2)``.

    Works on isolated triangles (no mesh), e.g. one parallelogram pair.
    """
    basis = HHJBasis(coords)
    return basis.from_dofs(basis.dofs(tau, degree))


@dataclass
class RateReport:
    levels: list
    errors: list
    rates: list = field(default_factory=list)

    def __post_init__(self):
        if not self.rates:
            self.rates = observed_rates(self.errors)


def observed_rates(errors):
    """``log2(e_{i-1} / e_i)`` for consecutive levels (n doubling)."""
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return list(np.log2(e[:-1] / e[1:]))


def recovery_order_probe(q, levels, mesh_builder, kind="vector", degree=6):
    """Measure ``‖q - K_h Π q‖`` across ``levels``.

    ``kind`` selects ``Π_RT`` (``"vector"``) or ``Π_HHJ`` (``"matrix"``).
    """
    errors = []
    for n in levels:
        mesh = mesh_builder(n)
        interp = pi_rt(q, mesh) if kind == "vector" else pi_hhj(q, mesh)
        errors.append(l2_error(q, k_h(interp), mesh, degree))
    return RateReport(list(levels), errors)
