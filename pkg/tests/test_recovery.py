import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncfem.elements import integrate_triangles
from ncfem.fields import P0Field
from ncfem.mesh import (UnsupportedMeshError, build_uniform_parallelogram_mesh,
                        build_uniform_square_mesh)
from ncfem.recovery import k_h, observed_rates, pi_hhj, pi_rt, recovery_order_probe
from ncfem.study import parallelogram_mean_defects, random_sym_p1

BUILDERS = {"square": build_uniform_square_mesh, "parallelogram": build_uniform_parallelogram_mesh}


@pytest.mark.parametrize("domain", BUILDERS)
def test_constant_fields_reproduced(domain):
    mesh = BUILDERS[domain](4)
    v = k_h(np.tile([1.5, -2.0], (mesh.num_triangles, 1)), mesh)
    assert np.allclose(v.values, [1.5, -2.0], atol=1e-14)
    M = np.array([[1.0, 0.3], [0.3, -2.0]])
    m = k_h(np.broadcast_to(M, (mesh.num_triangles, 2, 2)), mesh)
    assert np.allclose(m.values, M, atol=1e-14)


def test_interior_edge_average():
    mesh = build_uniform_square_mesh(2)
    vals = np.zeros((mesh.num_triangles, 2))
    e = np.flatnonzero(~mesh.is_boundary)[0]
    t0, t1 = mesh.edge_tris[e]
    vals[t0] = [1.0, 0.0]
    vals[t1] = [0.0, 1.0]
    assert np.allclose(k_h(vals, mesh).values[e], [0.5, 0.5])


def test_boundary_extrapolation_stencil():
    mesh = build_uniform_square_mesh(4)
    rng = np.random.default_rng(1)
    vals = rng.standard_normal(mesh.num_triangles)
    out = k_h(vals, mesh).values
    for e, partner in mesh.boundary_extrapolation.items():
        expected = 2 * out[partner.shared_edge] - out[partner.interior_edge]
        assert out[e] == pytest.approx(expected, abs=1e-14)
        assert not mesh.is_boundary[partner.shared_edge]
        assert not mesh.is_boundary[partner.interior_edge]


def test_n1_rejected():
    mesh = build_uniform_square_mesh(1)
    with pytest.raises(UnsupportedMeshError):
        k_h(np.zeros((mesh.num_triangles, 2)), mesh)


def test_raw_array_needs_mesh():
    with pytest.raises(ValueError):
        k_h(np.zeros((8, 2)))


def test_field_input_equals_raw_input():
    mesh = build_uniform_parallelogram_mesh(4)
    vals = np.random.default_rng(3).standard_normal((mesh.num_triangles, 2, 2))
    assert np.allclose(k_h(P0Field(mesh, vals)).values, k_h(vals, mesh).values)


def _affine_vec(A, c):
    return lambda x: np.asarray(x) @ A.T + c


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(BUILDERS)), st.sampled_from([2, 4, 8]))
def test_affine_vector_reproduced(seed, domain, n):
    rng = np.random.default_rng(seed)
    q = _affine_vec(rng.standard_normal((2, 2)), rng.standard_normal(2))
    mesh = BUILDERS[domain](n)
    err = recovery_order_probe(q, [n], BUILDERS[domain], "vector").errors[0]
    assert err <= 1e-12
    # the midpoint values are the exact point values
    assert np.allclose(k_h(pi_rt(q, mesh)).values, q(mesh.edge_midpoints), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(BUILDERS)), st.sampled_from([2, 4, 8]))
def test_affine_matrix_reproduced(seed, domain, n):
    r, _ = random_sym_p1(np.random.default_rng(seed))
    mesh = BUILDERS[domain](n)
    assert np.allclose(k_h(pi_hhj(r, mesh)).values, r(mesh.edge_midpoints), atol=1e-12)


def test_pi_rt_constant_and_x():
    mesh = build_uniform_square_mesh(3)
    c = np.array([0.7, -1.1])
    f = pi_rt(lambda x: np.broadcast_to(c, np.shape(x)), mesh)
    assert np.allclose(f.values_at(np.full((1, 3), 1 / 3))[:, 0], c, atol=1e-14)
    g = pi_rt(lambda x: np.asarray(x), mesh)
    bary = np.array([[0.2, 0.3, 0.5]])
    pts = mesh.physical_points(bary)[:, 0]
    assert np.allclose(g.values_at(bary)[:, 0], pts, atol=1e-14)
    assert np.allclose(g.divergence(), 2.0, atol=1e-13)


def test_pi_hhj_constant():
    mesh = build_uniform_parallelogram_mesh(3)
    M = np.array([[2.0, -0.5], [-0.5, 1.0]])
    f = pi_hhj(lambda x: np.broadcast_to(M, np.shape(x)[:-1] + (2, 2)), mesh)
    assert np.allclose(f.matrices(), M, atol=1e-13)


def test_pi_rt_flux_against_fine_midpoint_rule():
    mesh = build_uniform_square_mesh(2)

    def q(x):
        x = np.asarray(x)
        return np.stack([np.sin(x[..., 0]) * x[..., 1], np.exp(x[..., 0] * x[..., 1])], axis=-1)

    dofs = pi_rt(q, mesh).dofs
    s = (np.arange(4000) + 0.5) / 4000
    for e, (a, b) in enumerate(mesh.edges):
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        pts = pa + s[:, None] * (pb - pa)
        ref = np.linalg.norm(pb - pa) * np.mean(q(pts) @ mesh.edge_normals[e])
        assert dofs[e] == pytest.approx(ref, abs=1e-7)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_parallelogram_zero_mean(n):
    mesh = build_uniform_parallelogram_mesh(n)
    rng = np.random.default_rng(n)
    for _ in range(20):
        r, C = random_sym_p1(rng)
        d, area = parallelogram_mean_defects(mesh, r)
        assert (d / area).max() <= 1e-13 * max(1.0, np.abs(C).max())


def test_single_triangle_mean_is_not_zero():
    # the cancellation needs the pair; one triangle alone keeps a defect
    from ncfem.recovery import pi_hhj_local
    mesh = build_uniform_parallelogram_mesh(2)
    r, _ = random_sym_p1(np.random.default_rng(0))
    Pi = pi_hhj_local(mesh.coords, r)
    local = integrate_triangles(mesh.coords, lambda x: r(x) - Pi[:, None], 6)
    assert np.abs(local).max() > 1e-6


def test_observed_rates():
    assert observed_rates([1.0, 0.25, 0.0625]) == pytest.approx([2.0, 2.0])
    assert observed_rates([3.0]) == []


def test_recovery_rates_smooth(sine, plate_problem):
    levels = [8, 16, 32, 64]
    rv = recovery_order_probe(sine.grad, levels, build_uniform_square_mesh, "vector")
    rm = recovery_order_probe(plate_problem.hess, levels, build_uniform_parallelogram_mesh, "matrix")
    assert abs(rv.rates[-1] - 2.0) <= 0.1
    assert abs(rm.rates[-1] - 2.0) <= 0.1
