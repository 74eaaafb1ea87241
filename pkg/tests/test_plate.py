import numpy as np
import pytest
import scipy.sparse as sp

from ncfem.fields import MorleyFunction
from ncfem.mesh import build_uniform_parallelogram_mesh, build_uniform_square_mesh
from ncfem.plate import (ConformityError, hhj_coupling, hhj_from_morley, hhj_orthogonality,
                         hessian_error, morley_load, morley_numbering, morley_stiffness,
                         pi_D, plate_perturbation_check, solve_hhj_direct, solve_morley)
from ncfem.sparse import assemble


def one(x):
    return np.ones(np.shape(x)[:-1])


def zero(x):
    return np.zeros(np.shape(x)[:-1])


def _monomials(p):
    x, y = p
    return np.array([1.0, x, y, x * x, x * y, y * y])


def _monomial_grads(p):
    x, y = p
    return np.array([[0, 0], [1, 0], [0, 1], [2 * x, 0], [y, x], [0, 2 * y]], dtype=float)


MONOMIAL_HESS = np.zeros((6, 2, 2))
MONOMIAL_HESS[3, 0, 0] = 2.0
MONOMIAL_HESS[4, 0, 1] = MONOMIAL_HESS[4, 1, 0] = 1.0
MONOMIAL_HESS[5, 1, 1] = 2.0


def dense_morley_oracle(mesh):
    """Loop assembly with f = 1 and shapes from the 6x6 monomial DOF system."""
    nv, ne = mesh.num_vertices, mesh.num_edges
    N = nv + ne
    A = np.zeros((N, N))
    b = np.zeros(N)
    for t, tri in enumerate(mesh.triangles):
        P = mesh.vertices[tri]
        edges = mesh.tri_edges[t]
        rows = [_monomials(P[k]) for k in range(3)]
        for k, e in enumerate(edges):
            mid = 0.5 * (P[(k + 1) % 3] + P[(k + 2) % 3])
            rows.append(_monomial_grads(mid) @ mesh.edge_normals[e])
        coef = np.linalg.inv(np.array(rows))  # column i: shape i in the monomial basis
        H = np.einsum("mi,mab->iab", coef, MONOMIAL_HESS)
        area = 0.5 * abs(np.linalg.det(np.array([P[1] - P[0], P[2] - P[0]])))
        mids = [0.5 * (P[(k + 1) % 3] + P[(k + 2) % 3]) for k in range(3)]
        integral = area / 3 * sum(_monomials(m) for m in mids) @ coef
        dofs = np.concatenate([tri, nv + edges])
        A[np.ix_(dofs, dofs)] += area * np.einsum("iab,jab->ij", H, H)
        b[dofs] += integral
    free = np.concatenate([~mesh.boundary_vertices, ~mesh.is_boundary])
    x = np.zeros(N)
    x[free] = np.linalg.solve(A[np.ix_(free, free)], b[free])
    return x[:nv], x[nv:]


def test_zero_rhs():
    mesh = build_uniform_parallelogram_mesh(4)
    u = solve_morley(mesh, zero)
    assert not u.vertex_values.any() and not u.edge_dofs.any()
    sigma, w = solve_hhj_direct(mesh, zero)
    assert not sigma.dofs.any() and not w.vertex_values.any()


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("domain", ["square", "parallelogram"])
def test_morley_matches_dense_oracle(n, domain):
    build = build_uniform_square_mesh if domain == "square" else build_uniform_parallelogram_mesh
    mesh = build(n)
    u = solve_morley(mesh, one)
    v_ref, e_ref = dense_morley_oracle(mesh)
    assert np.allclose(u.vertex_values, v_ref, atol=1e-13)
    assert np.allclose(u.edge_dofs, e_ref, atol=1e-13)


def test_table_value_n4(plate_problem):
    mesh = plate_problem.mesh(4)
    u = solve_morley(mesh, plate_problem.f)
    assert hessian_error(mesh, plate_problem.hess, u, 3) == pytest.approx(1.2599, rel=2e-2)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_stiffness_is_spd(n):
    mesh = build_uniform_parallelogram_mesh(n)
    dofmap, ndof = morley_numbering(mesh)
    K = assemble(morley_stiffness(mesh), dofmap, ndof).toarray()
    assert np.allclose(K, K.T, atol=1e-12)
    assert np.linalg.eigvalsh(K).min() > 0


def test_pi_D_examples():
    mesh = build_uniform_square_mesh(2)
    p = pi_D(lambda x: 1.0 + x[..., 0] + 2 * x[..., 1], mesh)
    interior = ~mesh.boundary_vertices
    assert np.allclose(p.vertex_values[interior], 1.0 + 0.5 + 1.0)
    assert not p.vertex_values[mesh.boundary_vertices].any()
    u = MorleyFunction(mesh, np.arange(mesh.num_vertices, dtype=float), np.ones(mesh.num_edges))
    q = pi_D(u, mesh)
    assert np.array_equal(q.vertex_values[interior], u.vertex_values[interior])


def test_vertex_interpolated_load_constant_f():
    # (1, Π_D φ) is the hat integral |K|/3 for vertex shapes and 0 for edge shapes
    mesh = build_uniform_parallelogram_mesh(3)
    load = morley_load(mesh, one, "vertex_interpolated")
    assert np.allclose(load[:, :3], mesh.areas[:, None] / 3, atol=1e-15)
    assert not load[:, 3:].any()


def test_unknown_rhs_mode():
    with pytest.raises(ValueError):
        morley_load(build_uniform_square_mesh(2), one, "bogus")


def test_rhs_quadrature_degree_converged(plate_problem):
    # f has degree 4, so degrees 6 and 8 integrate the quadratic-times-f load exactly
    mesh = plate_problem.mesh(4)
    a = morley_load(mesh, plate_problem.f, degree=6)
    b = morley_load(mesh, plate_problem.f, degree=8)
    assert np.abs(a - b).max() <= 1e-13 * np.abs(b).max()


def test_coupling_matches_edge_loop():
    mesh = build_uniform_parallelogram_mesh(2)
    B = hhj_coupling(mesh).toarray()
    interior_v = np.flatnonzero(~mesh.boundary_vertices)
    ref = np.zeros((len(interior_v), mesh.num_edges))
    for e, (a, b) in enumerate(mesh.edges):
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        length = np.linalg.norm(pb - pa)
        for t in mesh.edge_tris[e]:
            if t < 0:
                continue
            tri = mesh.triangles[t]
            P = mesh.vertices[tri]
            opp = P[[v not in (a, b) for v in tri]][0]
            tangent = (pb - pa) / length
            normal = np.array([tangent[1], -tangent[0]])
            if normal @ (opp - pa) > 0:
                normal = -normal
            grads = np.linalg.solve(np.column_stack([np.ones(3), P]), np.eye(3))[1:].T
            for j, v in enumerate(tri):
                if not mesh.boundary_vertices[v]:
                    row = np.searchsorted(interior_v, v)
                    ref[row, e] += length * grads[j] @ normal
    assert np.allclose(B, ref, atol=1e-13)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_hhj_direct_equals_morley_path(plate_problem, n):
    mesh = plate_problem.mesh(n)
    ubar = solve_morley(mesh, plate_problem.f, "vertex_interpolated")
    s_m, u_m = hhj_from_morley(ubar)
    s_d, u_d = solve_hhj_direct(mesh, plate_problem.f)
    scale = np.abs(s_d.dofs).max()
    assert np.abs(s_m.dofs - s_d.dofs).max() <= 1e-9 * scale
    assert np.abs(u_m.vertex_values - u_d.vertex_values).max() <= 1e-9
    assert s_m.conformity_defect <= 1e-10


def test_plain_morley_is_not_hhj_conforming(plate_problem):
    u = solve_morley(plate_problem.mesh(4), plate_problem.f, "exact")
    with pytest.raises(ConformityError):
        hhj_from_morley(u)


@pytest.mark.parametrize("n", [8, 16])
def test_hhj_galerkin_orthogonality(plate_problem, n):
    inner, norm2 = hhj_orthogonality(plate_problem.mesh(n), plate_problem.f, plate_problem.hess)
    assert abs(inner) <= 1e-3 * norm2


def test_plate_perturbation_decays(plate_problem):
    gaps = [plate_perturbation_check(plate_problem.mesh(n), plate_problem.f,
                                     plate_problem.f_l2_norm).difference for n in (4, 8, 16)]
    rates = np.log2(np.array(gaps[:-1]) / np.array(gaps[1:]))
    assert rates.min() >= 1.9


def test_perturbation_ratio_property():
    from ncfem.plate import PlatePerturbationReport
    assert PlatePerturbationReport(0.5, 0.5, 2.0).ratio == pytest.approx(1.0)


def test_solve_reports_attached(plate_problem):
    u = solve_morley(plate_problem.mesh(4), plate_problem.f)
    assert u.report.converged and u.report.residual <= 1e-12
    assert sp.issparse(hhj_coupling(plate_problem.mesh(2)))
