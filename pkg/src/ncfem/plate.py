"""Morley and Hellan-Herrmann-Johnson solvers for the clamped plate Δ²u = f.

Morley unknowns are numbered interior vertices first, then interior edges;
boundary vertex values and boundary normal-derivative means are zero.
"""

from dataclasses import dataclass

import numpy as np

from .elements import integrate_triangles
from .fields import HHJField, MorleyFunction, P1Field, mesh_basis
from .norms import l2_error
from .poisson import broken_l2_norm, interior_numbering
from .quadrature import triangle_quadrature
from .sparse import DEFAULT_TOL, assemble, assemble_rect, assemble_vector, solve_saddle, solve_spd

RHS_DEGREE = 6
CONFORMITY_TOL = 1e-10


class ConformityError(ValueError):
    """Normal-normal moments of a Hessian field disagree across an edge."""


def morley_numbering(mesh):
    """Local-to-global DOF map ``(T, 6)`` and the number of unknowns."""
    vnum = interior_numbering(~mesh.boundary_vertices)
    enum = interior_numbering(~mesh.is_boundary)
    nv = int((~mesh.boundary_vertices).sum())
    enum[enum >= 0] += nv
    dofmap = np.concatenate([vnum[mesh.triangles], enum[mesh.tri_edges]], axis=1)
    return dofmap, nv + int((~mesh.is_boundary).sum())


def morley_stiffness(mesh):
    H = mesh_basis(mesh, "morley").hessians
    return np.einsum("tiab,tjab,t->tij", H, H, mesh.areas)


def p1_load(mesh, f, degree=RHS_DEGREE):
    """``(f, λ_i)`` per triangle, shape ``(T, 3)``."""
    rule = triangle_quadrature(degree)
    fx = np.asarray(f(mesh.physical_points(rule.points)))
    return np.einsum("tq,qk,q,t->tk", fx, rule.points, rule.weights, 2.0 * mesh.areas)


def morley_load(mesh, f, rhs_mode="exact", degree=RHS_DEGREE):
    if rhs_mode == "exact":
        rule = triangle_quadrature(degree)
        fx = np.asarray(f(mesh.physical_points(rule.points)))
        phi = mesh_basis(mesh, "morley").values(rule.points)
        return np.einsum("tq,tqi,q,t->ti", fx, phi, rule.weights, 2.0 * mesh.areas)
    if rhs_mode == "vertex_interpolated":
        # Π_D maps vertex shapes to the hat functions and edge shapes to zero
        load = np.zeros((mesh.num_triangles, 6))
        load[:, :3] = p1_load(mesh, f, degree)
        return load
    raise ValueError(f"unknown rhs_mode {rhs_mode!r}")


def solve_morley(mesh, f, rhs_mode="exact", tol=DEFAULT_TOL, method="direct"):
    """Morley Galerkin solve with ``(f, v)`` or ``(f, Π_D v)`` on the right.

    The solver report is attached to the result as ``.report``.
    """
    dofmap, ndof = morley_numbering(mesh)
    A = assemble(morley_stiffness(mesh), dofmap, ndof)
    b = assemble_vector(morley_load(mesh, f, rhs_mode), dofmap, ndof)
    x = np.zeros(ndof)
    report = None
    if ndof and np.any(b):
        x, report = solve_spd(A, b, tol, method)
    nv = int((~mesh.boundary_vertices).sum())
    vertex_values = np.zeros(mesh.num_vertices)
    vertex_values[~mesh.boundary_vertices] = x[:nv]
    edge_dofs = np.zeros(mesh.num_edges)
    edge_dofs[~mesh.is_boundary] = x[nv:]
    u = MorleyFunction(mesh, vertex_values, edge_dofs)
    u.report = report
    return u


def pi_D(v, mesh):
    """Continuous P1 interpolant at the vertices, zero on the boundary.

    ``v`` is a :class:`MorleyFunction` or a callable of points.
    """
    if isinstance(v, MorleyFunction):
        values = v.vertex_values.copy()
    else:
        values = np.asarray(v(mesh.vertices), dtype=float).copy()
    values[mesh.boundary_vertices] = 0.0
    return P1Field(mesh, values)


def hhj_mass(mesh):
    tau = mesh_basis(mesh, "hhj").matrices
    return np.einsum("tiab,tjab,t->tij", tau, tau, mesh.areas)


def hhj_coupling_local(mesh):
    """``∫_{∂K} M_νν(τ_k) ∂λ_j/∂ν ds`` per triangle, shape ``(T, 3 vertices, 3 edges)``.

    Only edge ``k`` carries a nonzero normal-normal moment of ``τ_k`` (equal to 1).
    """
    lengths = mesh.edge_lengths[mesh.tri_edges]
    dn = np.einsum("tjd,tkd->tjk", mesh.bary_gradients, mesh.tri_outward_normals)
    return dn * lengths[:, None, :]


def hhj_coupling(mesh):
    vnum = interior_numbering(~mesh.boundary_vertices)
    nv = int((~mesh.boundary_vertices).sum())
    return assemble_rect(hhj_coupling_local(mesh), vnum[mesh.triangles], mesh.tri_edges,
                         (nv, mesh.num_edges))


def solve_hhj_direct(mesh, f, tol=DEFAULT_TOL):
    """First-order HHJ mixed solve; returns ``(HHJField, P1Field)``."""
    A = assemble(hhj_mass(mesh), mesh.tri_edges, mesh.num_edges)
    B = hhj_coupling(mesh)
    vnum = interior_numbering(~mesh.boundary_vertices)
    nv = B.shape[0]
    g = -assemble_vector(p1_load(mesh, f), vnum[mesh.triangles], nv)
    u = np.zeros(mesh.num_vertices)
    if not np.any(g):
        sigma = HHJField(mesh, np.zeros(mesh.num_edges))
        sigma.report = None
        return sigma, P1Field(mesh, u)
    s, x, report = solve_saddle(A, B, np.zeros(mesh.num_edges), g, tol)
    u[~mesh.boundary_vertices] = x
    sigma = HHJField(mesh, s)
    sigma.report = report
    return sigma, P1Field(mesh, u)


def edge_nn_moments(mesh, matrices):
    """``ν_e^T M ν_e`` seen from each triangle's local edges, ``(T, 3)``."""
    nu = mesh.edge_normals[mesh.tri_edges]
    return np.einsum("tka,tab,tkb->tk", nu, matrices, nu)


def hhj_from_morley(ubar, mesh=None, tol=CONFORMITY_TOL):
    """HHJ pair ``(∇²_NC ū, Π_D ū)`` from the modified Morley solution.

    Raises :class:`ConformityError` when the normal-normal moments of the
    broken Hessian jump across an interior edge by more than ``tol``
    (relative to the largest moment), which means ``ubar`` did not come from
    the vertex-interpolated right-hand side.
    """
    mesh = ubar.mesh if mesh is None else mesh
    H = ubar.hessian().values
    local = edge_nn_moments(mesh, H)
    owner = mesh.tri_edge_sign > 0
    dofs = np.zeros(mesh.num_edges)
    dofs[mesh.tri_edges[owner]] = local[owner]
    other = dofs.copy()
    other[mesh.tri_edges[~owner]] = local[~owner]
    scale = max(1.0, float(np.abs(local).max(initial=0.0)))
    defect = float(np.abs(dofs - other).max(initial=0.0)) / scale
    if defect > tol:
        raise ConformityError(f"M_nn jump {defect:.3e} exceeds {tol:.1e}")
    sigma = HHJField(mesh, dofs)
    sigma.conformity_defect = defect
    return sigma, pi_D(ubar, mesh)


@dataclass
class PlatePerturbationReport:
    difference: float
    h: float
    f_l2_norm: float

    @property
    def ratio(self):
        """``‖∇²_NC(u_M - ū_M)‖ / (h² ‖f‖)``."""
        return self.difference / (self.h ** 2 * self.f_l2_norm)


def plate_perturbation_check(mesh, f, f_l2_norm, tol=DEFAULT_TOL):
    """Size of ``∇²_NC(u_M - ū_M)`` against ``h² ‖f‖``."""
    u = solve_morley(mesh, f, "exact", tol)
    ubar = solve_morley(mesh, f, "vertex_interpolated", tol)
    diff = broken_l2_norm(mesh, u.hessian().values - ubar.hessian().values)
    return PlatePerturbationReport(diff, mesh.h, f_l2_norm)


def hhj_orthogonality(mesh, f, hessian_exact, degree=6):
    """Return ``((σ_HHJ - σ, σ_HHJ - Π_HHJ σ), ‖σ_HHJ - Π_HHJ σ‖²)``.

    The first number vanishes under exact integration; with quadrature it is
    small relative to the second.
    """
    from .recovery import pi_hhj

    sigma_h, _ = solve_hhj_direct(mesh, f)
    Sh = sigma_h.matrices()
    Pi = pi_hhj(hessian_exact, mesh).matrices()
    inner = integrate_triangles(
        mesh.coords,
        lambda x: np.einsum("tqab,tab->tq", Sh[:, None] - hessian_exact(x), Sh - Pi),
        degree).sum()
    return float(inner), broken_l2_norm(mesh, Sh - Pi) ** 2


def hessian_error(mesh, hessian_exact, u, degree=6):
    """``‖∇²u - ∇²_NC u_M‖`` (Frobenius, off-diagonals counted twice)."""
    return l2_error(hessian_exact, u.hessian(), mesh, degree)
