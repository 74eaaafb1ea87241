"""Symmetric triangle rules and Gauss-Legendre edge rules.

Triangle rules are stored in barycentric form with weights summing to the
reference area 1/2; scale by ``2|K|`` to integrate over a physical triangle.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self):
        return len(self.weights)


def _s21(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _s111(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


# (orbit generator args, barycentric weight) pairs; weights sum to 1
_ORBITS = {
    2: [(("s21", 1.0 / 6.0), 1.0 / 3.0)],
    # Strang-Fix 4-point rule; the negative centroid weight is intended
    3: [
        (("s3",), -27.0 / 48.0),
        (("s21", 0.2), 25.0 / 48.0),
    ],
    4: [
        (("s21", 0.09157621350977074346), 0.10995174365532186764),
        (("s21", 0.44594849091596488632), 0.22338158967801146570),
    ],
    6: [
        (("s21", 0.06308901449150222834), 0.050844906370206816921),
        (("s21", 0.24928674517091042129), 0.11678627572637936603),
        (("s111", 0.053145049844816947353, 0.31035245103378440542),
         0.082851075618373575194),
    ],
    8: [
        (("s3",), 0.14431560767778716825),
        (("s21", 0.45929258829272315603), 0.095091634267284624794),
        (("s21", 0.17056930775176020662), 0.10321737053471825028),
        (("s21", 0.050547228317030975458), 0.032458497623198080311),
        (("s111", 0.0083947774099576053372, 0.26311282963463811342),
         0.027230314174434994265),
    ],
}


def _build(degree):
    pts, wts = [], []
    for (kind, *args), w in _ORBITS[degree]:
        if kind == "s3":
            orbit = [(1 / 3, 1 / 3, 1 / 3)]
        elif kind == "s21":
            orbit = _s21(*args)
        else:
            orbit = _s111(*args)
        pts += orbit
        wts += [w] * len(orbit)
    return QuadratureRule(np.array(pts), 0.5 * np.array(wts), degree)


_CACHE = {}


def triangle_quadrature(degree):
    """Return a symmetric triangle rule exact for polynomials of ``degree``.

    Supported degrees are 2, 3, 4, 6 and 8. Points are barycentric
    coordinates (shape ``(q, 3)``), weights sum to 1/2.
    """
    if degree not in _ORBITS:
        raise ValueError(f"unsupported triangle quadrature degree {degree}; "
                         f"choose from {sorted(_ORBITS)}")
    if degree not in _CACHE:
        _CACHE[degree] = _build(degree)
    return _CACHE[degree]


def edge_quadrature(degree):
    """Gauss-Legendre rule on [0, 1] exact for ``degree``; weights sum to 1."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    npts = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(npts)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, 2 * npts - 1)
