"""Broken L2 error norms by element quadrature."""

import numpy as np

from .quadrature import triangle_quadrature

ERROR_DEGREE = 6


def l2_error(exact, discrete, mesh, degree=ERROR_DEGREE):
    """``sqrt(sum_K ∫_K |exact - discrete|^2)``.

    ``exact`` is a callable of points ``(..., 2)`` or ``None`` (meaning
    zero); ``discrete`` is any field with ``values_at(bary)``. Matrix values
    use the full Frobenius product, so off-diagonal entries count twice.
    """
    rule = triangle_quadrature(degree)
    dvals = np.asarray(discrete.values_at(rule.points))
    if exact is None:
        diff = dvals
    else:
        evals = np.asarray(exact(mesh.physical_points(rule.points)))
        if evals.shape != dvals.shape:
            raise ValueError(f"value shape mismatch: exact {evals.shape[2:]} "
                             f"vs discrete {dvals.shape[2:]}")
        diff = evals - dvals
    sq = (diff * diff).reshape(diff.shape[0], diff.shape[1], -1).sum(axis=2)
    return float(np.sqrt(np.einsum("tq,q,t->", sq, rule.weights, 2.0 * mesh.areas)))
