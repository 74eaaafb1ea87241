"""Local bases and degree-of-freedom functionals.

Every basis is built for a whole stack of triangles at once: ``coords`` has
shape ``(T, 3, 2)`` (counterclockwise vertices) and local edge ``k`` is
opposite local vertex ``k``. Edge-based DOFs use per-triangle ``signs``
(``+1`` where the global edge normal is the outward one), so neighbouring
triangles share a single signed DOF.
"""

import numpy as np

from .quadrature import edge_quadrature, triangle_quadrature

# Voigt-like packing of symmetric 2x2 matrices: (t11, t12, t22)
_SYM_UNIT = np.array([
    [[1.0, 0.0], [0.0, 0.0]],
    [[0.0, 1.0], [1.0, 0.0]],
    [[0.0, 0.0], [0.0, 1.0]],
])


def _as_stack(coords):
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 2:
        coords = coords[None]
    if coords.shape[1:] != (3, 2):
        raise ValueError("coords must have shape (T, 3, 2)")
    return coords


def _as_signs(signs, T):
    if signs is None:
        return np.ones((T, 3))
    return np.broadcast_to(np.asarray(signs, dtype=float), (T, 3))


def signed_areas(coords):
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def barycentric_gradients(coords):
    """Gradients of the three barycentric coordinates, ``(T, 3, 2)``."""
    e = np.roll(coords, 1, axis=1) - np.roll(coords, -1, axis=1)  # p[k+2] - p[k+1]
    rot = np.stack([-e[..., 1], e[..., 0]], axis=-1)
    return rot / (2.0 * signed_areas(coords)[:, None, None])


def outward_normals(coords):
    """Outward unit normals of the local edges, ``(T, 3, 2)``."""
    d = np.roll(coords, 1, axis=1) - np.roll(coords, -1, axis=1)
    n = np.stack([d[..., 1], -d[..., 0]], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def edge_lengths(coords):
    d = np.roll(coords, 1, axis=1) - np.roll(coords, -1, axis=1)
    return np.linalg.norm(d, axis=-1)


def edge_midpoints(coords):
    return 0.5 * (np.roll(coords, 1, axis=1) + np.roll(coords, -1, axis=1))


def to_physical(coords, bary):
    """Barycentric points ``(Q, 3)`` -> physical points ``(T, Q, 2)``."""
    return np.einsum("qk,tkd->tqd", bary, coords)


def edge_barycentric(k, s):
    """Barycentric coordinates of parameter ``s`` along local edge ``k``.

    The edge runs from local vertex ``k+1`` (s=0) to ``k+2`` (s=1).
    """
    s = np.asarray(s, dtype=float)
    bary = np.zeros(s.shape + (3,))
    bary[..., (k + 1) % 3] = 1.0 - s
    bary[..., (k + 2) % 3] = s
    return bary


def edge_means(coords, func, degree=6):
    """Mean of ``func(x)`` over each local edge, shape ``(T, 3, ...)``.

    ``func`` maps points ``(..., 2)`` to values ``(..., *vshape)``.
    """
    rule = edge_quadrature(degree)
    out = []
    for k in range(3):
        x = to_physical(coords, edge_barycentric(k, rule.points))
        vals = np.asarray(func(x))
        out.append(np.einsum("tq...,q->t...", vals, rule.weights))
    return np.stack(out, axis=1)


def integrate_triangles(coords, func, degree=6):
    """Per-triangle integrals of ``func(x)``, shape ``(T, ...)``."""
    rule = triangle_quadrature(degree)
    x = to_physical(coords, rule.points)
    vals = np.asarray(func(x))
    scale = 2.0 * signed_areas(coords)
    return np.einsum("tq...,q,t->t...", vals, rule.weights, scale)


class CRBasis:
    """Crouzeix-Raviart shapes ``1 - 2 lambda_i``; DOF ``i`` is the mean over edge ``i``."""

    kind = "CR"

    def __init__(self, coords):
        self.coords = _as_stack(coords)
        self.grads = -2.0 * barycentric_gradients(self.coords)

    def values(self, bary):
        bary = np.atleast_2d(bary)
        return np.broadcast_to(1.0 - 2.0 * bary, (len(self.coords),) + bary.shape)

    def gradients(self, bary=None):
        return self.grads

    def dofs(self, func, degree=6):
        return edge_means(self.coords, func, degree)


class P1Basis:
    """Nodal P1 shapes (barycentric coordinates)."""

    kind = "P1"

    def __init__(self, coords):
        self.coords = _as_stack(coords)
        self.grads = barycentric_gradients(self.coords)

    def values(self, bary):
        bary = np.atleast_2d(bary)
        return np.broadcast_to(bary, (len(self.coords),) + bary.shape)

    def gradients(self, bary=None):
        return self.grads

    def dofs(self, func):
        return np.asarray(func(self.coords))


class P0Basis:
    kind = "P0"

    def __init__(self, coords):
        self.coords = _as_stack(coords)

    def values(self, bary):
        bary = np.atleast_2d(bary)
        return np.ones((len(self.coords), len(bary), 1))

    def dofs(self, func, degree=6):
        return (integrate_triangles(self.coords, func, degree)
                / signed_areas(self.coords))[:, None]


def _monomials(xi):
    x, y = xi[..., 0], xi[..., 1]
    one = np.ones_like(x)
    return np.stack([one, x, y, x * x, x * y, y * y], axis=-1)


def _monomial_gradients(xi):
    x, y = xi[..., 0], xi[..., 1]
    z, one = np.zeros_like(x), np.ones_like(x)
    gx = np.stack([z, one, z, 2 * x, y, z], axis=-1)
    gy = np.stack([z, z, one, z, x, 2 * y], axis=-1)
    return np.stack([gx, gy], axis=-1)


_MONOMIAL_HESSIANS = np.zeros((6, 2, 2))
_MONOMIAL_HESSIANS[3] = [[2, 0], [0, 0]]
_MONOMIAL_HESSIANS[4] = [[0, 1], [1, 0]]
_MONOMIAL_HESSIANS[5] = [[0, 0], [0, 2]]


class MorleyBasis:
    """Morley shapes on each triangle.

    DOFs 0-2 are the vertex values, DOFs 3-5 the means of the signed normal
    derivative over edges 0-2. The P2 monomials are taken in coordinates
    centred at the centroid and scaled by the diameter to keep the 6x6 DOF
    system well conditioned.
    """

    kind = "Morley"

    def __init__(self, coords, signs=None):
        self.coords = _as_stack(coords)
        T = len(self.coords)
        self.signs = _as_signs(signs, T)
        self.center = self.coords.mean(axis=1)
        self.scale = edge_lengths(self.coords).max(axis=1)
        self.normals = self.signs[..., None] * outward_normals(self.coords)

        dof = np.empty((T, 6, 6))
        dof[:, :3] = _monomials(self._xi(self.coords))
        g = _monomial_gradients(self._xi(edge_midpoints(self.coords)))
        dof[:, 3:] = np.einsum("tkmd,tkd->tkm", g, self.normals) / self.scale[:, None, None]
        self.dof_matrix = dof
        self.coeffs = np.linalg.inv(dof)  # column i holds shape i

        self.hessians = np.einsum("tmi,mab->tiab", self.coeffs, _MONOMIAL_HESSIANS)
        self.hessians /= (self.scale ** 2)[:, None, None, None]

    def _xi(self, x):
        shape = (len(self.coords),) + (1,) * (x.ndim - 2) + (2,)
        return (x - self.center.reshape(shape)) / self.scale.reshape(shape[:-1] + (1,))

    def values_at(self, x):
        """Shape values at physical points ``(T, Q, 2)`` -> ``(T, Q, 6)``."""
        return np.einsum("tqm,tmi->tqi", _monomials(self._xi(x)), self.coeffs)

    def gradients_at(self, x):
        g = _monomial_gradients(self._xi(x))
        return np.einsum("tqmd,tmi->tqid", g, self.coeffs) / self.scale[:, None, None, None]

    def values(self, bary):
        return self.values_at(to_physical(self.coords, np.atleast_2d(bary)))

    def gradients(self, bary):
        return self.gradients_at(to_physical(self.coords, np.atleast_2d(bary)))

    def dofs(self, func, grad, degree=6):
        """Apply the six DOF functionals to a function and its gradient."""
        vals = np.asarray(func(self.coords))
        dn = edge_means(self.coords, grad, degree)
        return np.concatenate([vals, np.einsum("tkd,tkd->tk", dn, self.normals)], axis=1)


class RT0Basis:
    """Lowest-order Raviart-Thomas shapes ``s_i (x - a_i) / (2|K|)``.

    ``a_i`` is the vertex opposite edge ``i``; DOF ``i`` is the flux
    ``int_{e_i} q . nu_i ds`` through edge ``i`` with the signed normal.
    """

    kind = "RT0"

    def __init__(self, coords, signs=None):
        self.coords = _as_stack(coords)
        self.signs = _as_signs(signs, len(self.coords))
        self.area = signed_areas(self.coords)
        self.normals = self.signs[..., None] * outward_normals(self.coords)
        self.divergence = self.signs / self.area[:, None]

    def values_at(self, x):
        """Values at physical points ``(T, Q, 2)`` -> ``(T, Q, 3, 2)``."""
        diff = x[:, :, None, :] - self.coords[:, None, :, :]
        return diff * (self.signs / (2.0 * self.area[:, None]))[:, None, :, None]

    def values(self, bary):
        return self.values_at(to_physical(self.coords, np.atleast_2d(bary)))

    def dofs(self, func, degree=6):
        means = edge_means(self.coords, func, degree)
        return np.einsum("tkd,tkd->tk", means, self.normals) * edge_lengths(self.coords)


def nn_rows(normals):
    """Rows mapping packed ``(t11, t12, t22)`` to ``n^T tau n``."""
    n1, n2 = normals[..., 0], normals[..., 1]
    return np.stack([n1 * n1, 2.0 * n1 * n2, n2 * n2], axis=-1)


def unpack_sym(packed):
    return np.einsum("...m,mab->...ab", packed, _SYM_UNIT)


class HHJBasis:
    """Constant symmetric matrices dual to the edge normal-normal moments.

    DOF ``i`` is ``M_nn(tau) = nu_i^T tau nu_i`` on edge ``i`` (independent
    of the normal's sign).
    """

    kind = "HHJ"
    COND_LIMIT = 1e12

    def __init__(self, coords):
        self.coords = _as_stack(coords)
        self.normals = outward_normals(self.coords)
        rows = nn_rows(self.normals)
        if np.any(np.linalg.cond(rows) > self.COND_LIMIT):
            raise np.linalg.LinAlgError("near-singular HHJ DOF system")
        self.dof_matrix = rows
        self.coeffs = np.linalg.inv(rows)  # column i: packed shape i
        self.matrices = unpack_sym(np.swapaxes(self.coeffs, 1, 2))  # (T, 3, 2, 2)

    def values(self, bary):
        bary = np.atleast_2d(bary)
        return np.broadcast_to(self.matrices[:, None],
                               (len(self.coords), len(bary), 3, 2, 2))

    def dofs(self, func, degree=6):
        """Edge means of ``nu^T tau nu`` for a matrix callable ``tau(x)``."""
        means = edge_means(self.coords, func, degree)
        return np.einsum("tka,tkab,tkb->tk", self.normals, means, self.normals)

    def from_dofs(self, dofs):
        """Per-triangle matrices ``(T, 2, 2)`` from edge DOFs ``(T, 3)``."""
        return np.einsum("tk,tkab->tab", dofs, self.matrices)


def cr_basis(coords):
    return CRBasis(coords)


def p1_basis(coords):
    return P1Basis(coords)


def morley_basis(coords, signs=None):
    return MorleyBasis(coords, signs)


def rt0_basis(coords, signs=None):
    return RT0Basis(coords, signs)


def hhj_basis(coords):
    return HHJBasis(coords)
