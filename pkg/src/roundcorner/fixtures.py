"""Built-in example surfaces: corner types, the self-intersecting patch and friends."""

from __future__ import annotations

import numpy as np

from .corner import corner_knot_factors
from .spline import CORNERS, CornerJet, KnotVector, TensorSurface, corner_map, local_surface, monomial_to_bezier

# Shared quadratic jet: t = e_x, lambda = mu = 1, limit normal e_z, r = (0.5, 1.5, 0).
_XI10 = np.array([1.0, 0.0, 0.0])
_XI01 = np.array([-1.0, 0.0, 0.0])
_XI11 = np.array([0.3, 0.5, 0.4])
_XI20 = np.array([0.2, 1.0, -0.4])

# s = xi02 + xi11 chooses the case.
_S_BY_CASE = {
    "rounded_quadratic": np.array([0.2, 2.0, 0.0]),
    "discont_opposite": np.array([0.2, -2.0, 0.0]),
    "discont_independent": np.array([0.2, 2.0, 1.0]),
    "degenerate": np.array([0.7, 0.0, 0.0]),
}

TAYLOR_H = 0.5


def taylor_patch(jet: CornerJet, H: float = TAYLOR_H) -> TensorSurface:
    """Biquadratic Bezier form of the quadratic Taylor polynomial of ``jet`` on [0, H]^2."""
    C = np.zeros((3, 3, 3))
    C[0, 0] = jet.xi00
    C[1, 0] = jet.xi10
    C[0, 1] = jet.xi01
    C[2, 0] = jet.xi20 / 2
    C[1, 1] = jet.xi11
    C[0, 2] = jet.xi02 / 2
    return monomial_to_bezier(C, ((0.0, H), (0.0, H)))


def case_jet(name: str) -> CornerJet:
    s = _S_BY_CASE[name]
    return CornerJet(np.zeros(3), _XI10, _XI01, _XI20, _XI11, s - _XI11)


def self_intersect() -> TensorSurface:
    """(Re z^7-like, its u<->v mirror, u^10 + v^10) on [0, 1]^2 in Bezier form."""
    C = np.zeros((11, 11, 3))
    for (j, k), c in {(7, 0): 1, (5, 2): -21, (3, 4): 35, (1, 6): -7}.items():
        C[j, k, 0] = c
        C[k, j, 1] = c
    C[10, 0, 2] = 1.0
    C[0, 10, 2] = 1.0
    return monomial_to_bezier(C)


def rounded_bezier() -> TensorSurface:
    """Biquadratic Bezier patch meeting the control-point conditions at (0, 0), lifted away from it."""
    net = np.array(
        [
            [[0, 0, 0], [-1, 0, 0], [-1, 1, 0]],
            [[1, 0, 0], [0, 1, 0], [-1, 2, 2.0]],
            [[1, 1, 0], [1, 2, 2.0], [0, 2.5, 4.0]],
        ],
        dtype=float,
    )
    return TensorSurface.bezier(net)


def plane() -> TensorSurface:
    g = np.linspace(0.0, 1.0, 3)
    net = np.stack([*np.meshgrid(g, g, indexing="ij"), np.zeros((3, 3))], -1)
    return TensorSurface.bezier(net)


def random_knots(rng: np.random.Generator, degree: int) -> KnotVector:
    """Clamped knots with 1-3 random spans on a random interval."""
    a = rng.uniform(-1.0, 1.0)
    b = a + rng.uniform(0.5, 2.0)
    inner = np.sort(rng.uniform(a, b, rng.integers(0, 3)))
    return KnotVector(degree, np.r_[[a] * (degree + 1), inner, [b] * (degree + 1)])


def random_rounded_surface(
    rng: np.random.Generator, degrees: tuple[int, int] | None = None, corner: str | None = None
) -> tuple[TensorSurface, str, float, np.ndarray]:
    """Random spline whose control net satisfies the rounded-corner conditions at ``corner``.

    The corner points are placed on a line with a random weight, and the two
    second-row points are solved for so that r* and s* land in a random plane
    through that line on the same side of it.

    Returns
    -------
    surface, corner, alpha1, unit plane normal
    """
    n1, n2 = degrees if degrees is not None else rng.integers(2, 5, size=2)
    corner = corner if corner is not None else CORNERS[rng.integers(4)]
    ku, kv = random_knots(rng, int(n1)), random_knots(rng, int(n2))
    s = TensorSurface(ku, kv, rng.standard_normal((ku.size, kv.size, 3)))
    loc = local_surface(s, corner)
    m = corner_map(s, corner)
    a1, a2, b1, b2 = corner_knot_factors(loc)
    p = loc.net.copy()

    t = rng.standard_normal(3)
    t /= np.linalg.norm(t)
    n = np.cross(t, rng.standard_normal(3))
    n /= np.linalg.norm(n)
    c = np.cross(n, t)
    alpha1 = rng.uniform(0.15, 0.85)
    alpha2 = 1.0 - alpha1
    length = rng.uniform(0.5, 2.0)
    p[1, 0] = p[0, 0] + alpha2 * length * t
    p[0, 1] = p[0, 0] - alpha1 * length * t
    side = rng.choice([-1.0, 1.0])
    r = rng.standard_normal() * t + side * rng.uniform(0.2, 2.0) * c
    q = rng.standard_normal() * t + side * rng.uniform(0.2, 2.0) * c
    d11 = p[1, 1] - p[0, 0]
    p[2, 0] = p[0, 0] + (r - loc.degrees[0] * a2 * alpha2 * d11) / ((loc.degrees[0] - 1) * a1 * alpha1)
    p[0, 2] = p[0, 0] + (q - loc.degrees[1] * b2 * alpha1 * d11) / ((loc.degrees[1] - 1) * b1 * alpha2)

    net = s.net.copy()
    for i, j in ((1, 0), (0, 1), (2, 0), (0, 2)):
        net[m.index(i, j)] = p[i, j]
    return s.with_net(net), corner, float(alpha1), n


FIXTURES = {
    "self_intersect": self_intersect,
    "rounded_quadratic": lambda: taylor_patch(case_jet("rounded_quadratic")),
    "discont_independent": lambda: taylor_patch(case_jet("discont_independent")),
    "discont_opposite": lambda: taylor_patch(case_jet("discont_opposite")),
    "degenerate": lambda: taylor_patch(case_jet("degenerate")),
    "rounded_bezier": rounded_bezier,
    "plane": plane,
}


def make_fixture(name: str) -> TensorSurface:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
