import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncfem.mesh import build_uniform_parallelogram_mesh, build_uniform_square_mesh
from ncfem.norms import l2_error
from ncfem.poisson import (BESSEL_J11, cr_perturbation_check, marini_reconstruction,
                           project_p0, solve_cr, solve_rt_mixed)
from ncfem.recovery import k_h


def one(x):
    return np.ones(np.shape(x)[:-1])


def dense_cr_oracle(mesh, fconst):
    """Loop assembly with shapes found by solving the midpoint interpolation system."""
    A = np.zeros((mesh.num_edges, mesh.num_edges))
    b = np.zeros(mesh.num_edges)
    for t, tri in enumerate(mesh.triangles):
        P = mesh.vertices[tri]
        mids = np.array([(P[(k + 1) % 3] + P[(k + 2) % 3]) / 2 for k in range(3)])
        V = np.column_stack([np.ones(3), mids])
        coef = np.linalg.solve(V, np.eye(3))  # column k: shape with value 1 at mids[k]
        grads = coef[1:].T
        area = 0.5 * abs(np.linalg.det(np.array([P[1] - P[0], P[2] - P[0]])))
        edges = mesh.tri_edges[t]
        for i in range(3):
            b[edges[i]] += fconst * area / 3
            for j in range(3):
                A[edges[i], edges[j]] += area * grads[i] @ grads[j]
    free = ~mesh.is_boundary
    x = np.zeros(mesh.num_edges)
    x[free] = np.linalg.solve(A[np.ix_(free, free)], b[free])
    return x


def test_project_p0_constants_and_linear():
    mesh = build_uniform_square_mesh(3)
    assert np.allclose(project_p0(one, mesh).values, 1.0)
    px = project_p0(lambda x: x[..., 0], mesh).values
    assert np.allclose(px, mesh.centroids[:, 0], atol=1e-14)


def test_zero_rhs_gives_zero():
    mesh = build_uniform_square_mesh(4)
    u = solve_cr(mesh, lambda x: np.zeros(np.shape(x)[:-1]))
    assert not u.dofs.any()
    sigma, up = solve_rt_mixed(mesh, lambda x: np.zeros(np.shape(x)[:-1]))
    assert not sigma.dofs.any() and not up.values.any()


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("domain", ["square", "parallelogram"])
def test_cr_matches_dense_oracle(n, domain):
    build = build_uniform_square_mesh if domain == "square" else build_uniform_parallelogram_mesh
    mesh = build(n)
    u = solve_cr(mesh, one)
    assert np.allclose(u.dofs, dense_cr_oracle(mesh, 1.0), atol=1e-13)


def test_n1_diagonal_value():
    # one unknown: the diagonal edge; each half contributes stiffness 4 and load 1/6
    mesh = build_uniform_square_mesh(1)
    u = solve_cr(mesh, one)
    interior = ~mesh.is_boundary
    assert interior.sum() == 1
    assert u.dofs[interior][0] == pytest.approx(1.0 / 24.0, abs=1e-15)


def test_projected_equals_exact_for_constant_f():
    mesh = build_uniform_square_mesh(4)
    a = solve_cr(mesh, one, "exact")
    b = solve_cr(mesh, one, "projected")
    assert np.allclose(a.dofs, b.dofs, atol=1e-14)


def test_unknown_rhs_mode():
    with pytest.raises(ValueError):
        solve_cr(build_uniform_square_mesh(2), one, "bogus")


def test_table_value_n4(sine):
    mesh = sine.mesh(4)
    u = solve_cr(mesh, sine.f)
    g = u.gradient()
    assert l2_error(sine.grad, g, mesh, 3) == pytest.approx(6.4104e-01, rel=1e-2)
    assert l2_error(sine.grad, k_h(g), mesh, 3) == pytest.approx(2.2880e-01, rel=2e-2)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_marini_equals_mixed(sine, n):
    mesh = sine.mesh(n)
    ubar = solve_cr(mesh, sine.f, "projected")
    marini = marini_reconstruction(ubar, sine.f, mesh)
    direct, _ = solve_rt_mixed(mesh, sine.f)
    assert np.abs(marini.dofs - direct.dofs).max() <= 1e-8
    assert marini.conformity_defect <= 1e-10
    fK = project_p0(sine.f, mesh).values
    assert np.abs(marini.divergence() + fK).max() <= 1e-11
    assert np.abs(direct.divergence() + fK).max() <= 1e-11


def test_marini_unmodified_solution_is_not_conforming(sine):
    mesh = sine.mesh(4)
    u = solve_cr(mesh, sine.f, "exact")
    assert marini_reconstruction(u, sine.f, mesh).conformity_defect > 1e-8


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4]))
def test_marini_random_polynomial_rhs(seed, n):
    c = np.random.default_rng(seed).standard_normal(6)

    def f(x):
        x1, x2 = x[..., 0], x[..., 1]
        return c[0] + c[1] * x1 + c[2] * x2 + c[3] * x1 * x2 + c[4] * x1 ** 2 + c[5] * x2 ** 2

    mesh = build_uniform_square_mesh(n)
    marini = marini_reconstruction(solve_cr(mesh, f, "projected"), f, mesh)
    direct, _ = solve_rt_mixed(mesh, f)
    assert np.abs(marini.dofs - direct.dofs).max() <= 1e-10


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_perturbation_bound(sine, n):
    rep = cr_perturbation_check(sine.mesh(n), sine.f, sine.f_h1_seminorm)
    assert rep.passed
    assert rep.bound == pytest.approx(rep.h ** 2 / BESSEL_J11 ** 2 * np.sqrt(2) * np.pi ** 3)
