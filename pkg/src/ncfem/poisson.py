"""Crouzeix-Raviart and lowest-order Raviart-Thomas solvers for -Δu = f, u = 0 on ∂Ω.

Callables such as ``f`` take points of shape ``(..., 2)`` and return values
of shape ``(...)``.
"""

from dataclasses import dataclass

import numpy as np

from .elements import integrate_triangles
from .fields import CRFunction, P0Field, RTField, mesh_basis
from .quadrature import triangle_quadrature
from .sparse import DEFAULT_TOL, assemble, assemble_rect, assemble_vector, solve_saddle, solve_spd

BESSEL_J11 = 3.8317
RHS_DEGREE = 6


def interior_numbering(mask):
    """Map entities to unknown indices; ``-1`` where ``mask`` is False."""
    index = np.full(len(mask), -1, dtype=np.int64)
    index[mask] = np.arange(int(mask.sum()))
    return index


def project_p0(f, mesh, degree=RHS_DEGREE):
    """Elementwise mean ``(1/|K|) ∫_K f``."""
    return P0Field(mesh, integrate_triangles(mesh.coords, f, degree) / mesh.areas)


def cr_stiffness(mesh):
    G = mesh.bary_gradients
    return 4.0 * np.einsum("tid,tjd,t->tij", G, G, mesh.areas)


def cr_load(mesh, f, rhs_mode="exact", degree=RHS_DEGREE):
    """Element load vectors ``(T, 3)`` for ``(f, v)`` or ``(Π₀f, v)``."""
    if rhs_mode == "exact":
        rule = triangle_quadrature(degree)
        x = mesh.physical_points(rule.points)
        fx = np.asarray(f(x))
        shapes = 1.0 - 2.0 * rule.points  # (Q, 3)
        return np.einsum("tq,qk,q,t->tk", fx, shapes, rule.weights, 2.0 * mesh.areas)
    if rhs_mode == "projected":
        fK = project_p0(f, mesh, degree).values
        # each CR shape has mean 1/3 over the triangle
        return np.repeat((fK * mesh.areas / 3.0)[:, None], 3, axis=1)
    raise ValueError(f"unknown rhs_mode {rhs_mode!r}")


def solve_cr(mesh, f, rhs_mode="exact", tol=DEFAULT_TOL, method="direct"):
    """Crouzeix-Raviart Galerkin solve.

    Parameters
    ----------
    mesh : Mesh
    f : callable
        Right-hand side.
    rhs_mode : {"exact", "projected"}
        ``"exact"`` tests against ``(f, v)``; ``"projected"`` against
        ``(Π₀f, v)``, the variant equivalent to the RT0 mixed method.

    Returns
    -------
    CRFunction
        With the solver's :class:`~ncfem.sparse.SolveReport` attached as
        ``.report``.
    """
    numbering = interior_numbering(~mesh.is_boundary)
    ndof = int((~mesh.is_boundary).sum())
    dofmap = numbering[mesh.tri_edges]
    A = assemble(cr_stiffness(mesh), dofmap, ndof)
    b = assemble_vector(cr_load(mesh, f, rhs_mode), dofmap, ndof)
    dofs = np.zeros(mesh.num_edges)
    if ndof and np.any(b):
        x, report = solve_spd(A, b, tol, method)
        dofs[~mesh.is_boundary] = x
    else:
        report = None
    u = CRFunction(mesh, dofs)
    u.report = report
    return u


def rt_mass(mesh):
    rule = triangle_quadrature(2)
    basis = mesh_basis(mesh, "rt0")
    psi = basis.values(rule.points)  # (T, Q, 3, 2)
    return np.einsum("tqid,tqjd,q,t->tij", psi, psi, rule.weights, 2.0 * mesh.areas)


def rt_divergence_block(mesh):
    """``B[K, e] = ∫_K div ψ_e``, i.e. the sign of ``e``'s normal seen from ``K``."""
    local = mesh.tri_edge_sign[:, None, :]
    rows = np.arange(mesh.num_triangles)[:, None]
    return assemble_rect(local, rows, mesh.tri_edges,
                         (mesh.num_triangles, mesh.num_edges))


def solve_rt_mixed(mesh, f, tol=DEFAULT_TOL):
    """RT0 x P0 mixed solve.

    Returns ``(sigma, u)`` as an :class:`RTField` and a scalar
    :class:`P0Field`; the saddle-point report is attached to ``sigma``.
    """
    A = assemble(rt_mass(mesh), mesh.tri_edges, mesh.num_edges)
    B = rt_divergence_block(mesh)
    g = -integrate_triangles(mesh.coords, f, RHS_DEGREE)
    if not np.any(g):
        sigma = RTField(mesh, np.zeros(mesh.num_edges))
        sigma.report = None
        return sigma, P0Field(mesh, np.zeros(mesh.num_triangles))
    s, u, report = solve_saddle(A, B, np.zeros(mesh.num_edges), g, tol)
    sigma = RTField(mesh, s)
    sigma.report = report
    return sigma, P0Field(mesh, u)


def marini_local_fluxes(ubar, f, mesh):
    """Fluxes of ``∇ū|_K - (f_K/2)(x - Mid(K))`` through each local edge, ``(T, 3)``."""
    grad = ubar.gradient().values
    fK = project_p0(f, mesh).values
    nu = mesh.edge_normals[mesh.tri_edges]  # global normals, (T, 3, 2)
    mid = mesh.edge_midpoints[mesh.tri_edges]
    # (x - Mid) . nu is constant along a straight edge
    offset = np.einsum("tkd,tkd->tk", mid - mesh.centroids[:, None], nu)
    normal_grad = np.einsum("td,tkd->tk", grad, nu)
    return mesh.edge_lengths[mesh.tri_edges] * (normal_grad - 0.5 * fK[:, None] * offset)


def marini_reconstruction(ubar, f, mesh):
    """RT0 field from the Π₀-modified CR solution.

    Interior edges see one flux from each neighbour; the reconstruction takes
    the owner's value and records the largest disagreement in
    ``.conformity_defect`` (zero up to round-off when ``ubar`` solves the
    projected system).
    """
    local = marini_local_fluxes(ubar, f, mesh)
    dofs = np.zeros(mesh.num_edges)
    owner = mesh.tri_edge_sign > 0
    dofs[mesh.tri_edges[owner]] = local[owner]
    other = np.zeros(mesh.num_edges)
    other[mesh.tri_edges[~owner]] = local[~owner]
    interior = ~mesh.is_boundary
    sigma = RTField(mesh, dofs)
    sigma.conformity_defect = (float(np.abs(dofs - other)[interior].max())
                               if interior.any() else 0.0)
    return sigma


@dataclass
class PerturbationReport:
    difference: float
    bound: float
    h: float

    @property
    def passed(self):
        return self.difference <= self.bound


def broken_l2_norm(mesh, p0_values):
    """L2 norm of a piecewise constant scalar/vector/matrix field."""
    v = np.asarray(p0_values).reshape(mesh.num_triangles, -1)
    return float(np.sqrt(np.sum(mesh.areas * np.sum(v * v, axis=1))))


def cr_perturbation_check(mesh, f, f_h1_seminorm, tol=DEFAULT_TOL):
    """Compare ``‖∇_NC(u_CR - ū_CR)‖`` with ``h² |f|₁ / j₁₁²``."""
    u = solve_cr(mesh, f, "exact", tol)
    ubar = solve_cr(mesh, f, "projected", tol)
    diff = broken_l2_norm(mesh, u.gradient().values - ubar.gradient().values)
    bound = mesh.h ** 2 / BESSEL_J11 ** 2 * f_h1_seminorm
    return PerturbationReport(diff, bound, mesh.h)
