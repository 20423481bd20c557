"""Clamped B-spline bases, tensor-product surfaces and corner jets.

Basis evaluation follows the usual triangular recurrence with derivatives
(Piegl & Tiller, A2.2/A2.3). Spans are right-continuous, except at the
upper end of the domain where the last non-empty span is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

CORNERS = ("u0v0", "u1v0", "u1v1", "u0v1")


class DomainError(ValueError):
    """Parameter outside the knot range."""


@dataclass(frozen=True)
class KnotVector:
    """Clamped knot vector of a given degree."""

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=float).copy()
        t.setflags(write=False)
        object.__setattr__(self, "knots", t)
        p = int(self.degree)
        object.__setattr__(self, "degree", p)
        if p < 1:
            raise ValueError("degree must be >= 1")
        if t.ndim != 1 or t.size < 2 * p + 2:
            raise ValueError(f"need at least {2 * p + 2} knots for degree {p}")
        if not np.all(np.isfinite(t)):
            raise ValueError("knots must be finite")
        if np.any(np.diff(t) < 0):
            raise ValueError("knots must be nondecreasing")
        if t[0] == t[-1]:
            raise ValueError("knot range is empty")
        if np.any(t[: p + 1] != t[0]) or np.any(t[-p - 1 :] != t[-1]):
            raise ValueError("knot vector is not clamped (boundary multiplicity degree+1)")
        if t[p + 1] == t[0] or t[-p - 2] == t[-1]:
            raise ValueError("boundary knot multiplicity exceeds degree+1")
        _, counts = np.unique(t[p + 1 : -p - 1], return_counts=True)
        if counts.size and counts.max() > p:
            raise ValueError("interior knot multiplicity exceeds degree")

    @classmethod
    def uniform(cls, degree: int, n_spans: int, start: float = 0.0, end: float = 1.0):
        inner = np.linspace(start, end, n_spans + 1)
        return cls(degree, np.r_[[start] * degree, inner, [end] * degree])

    @property
    def size(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.knots)

    def reversed(self) -> "KnotVector":
        """Knot vector of the reparametrization u -> end - u, shifted to start at 0."""
        return KnotVector(self.degree, self.knots[-1] - self.knots[::-1])

    def shifted(self) -> "KnotVector":
        return KnotVector(self.degree, self.knots - self.knots[0])

    def find_span(self, u: float) -> int:
        t, p = self.knots, self.degree
        a, b = t[0], t[-1]
        slack = 1e-13 * max(1.0, abs(a), abs(b))
        if not (a - slack <= u <= b + slack):
            raise DomainError(f"parameter {u!r} outside knot range [{a}, {b}]")
        n = self.size - 1
        if u >= t[n + 1]:
            return n
        if u <= a:
            return p
        return int(np.searchsorted(t, u, side="right")) - 1


def basis_derivatives(kv: KnotVector, u: float, n: int) -> tuple[int, np.ndarray]:
    """All derivatives up to order ``n`` of the nonzero basis functions at ``u``.

    Returns the span index ``i`` and an array ``D`` of shape ``(n + 1, p + 1)``
    where ``D[k, j]`` is the k-th derivative of basis function ``i - p + j``.
    Derivatives beyond the degree are zero.
    """
    p, t = kv.degree, kv.knots
    i = kv.find_span(u)
    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = u - t[i + 1 - j]
        right[j] = t[i + j] - u
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((n + 1, p + 1))
    ders[0] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, min(n, p) + 1):
            d = 0.0
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    r = p
    for k in range(1, min(n, p) + 1):
        ders[k] *= r
        r *= p - k
    return i, ders


def basis_eval(kv: KnotVector, u: float, order: int = 0) -> tuple[int, np.ndarray]:
    """Values of the ``order``-th derivative of the ``p + 1`` basis functions nonzero at ``u``.

    Returns ``(first, values)`` where ``values[j]`` belongs to basis function
    ``first + j``.
    """
    if order < 0 or order > kv.degree:
        raise ValueError(f"derivative order {order} not in [0, {kv.degree}]")
    i, ders = basis_derivatives(kv, u, order)
    return i - kv.degree, ders[order]


def collocation_matrix(kv: KnotVector, us, order: int = 0) -> np.ndarray:
    """Dense matrix ``M[a, j] = b_j^{(order)}(us[a])``."""
    us = np.atleast_1d(np.asarray(us, dtype=float))
    M = np.zeros((us.size, kv.size))
    p = kv.degree
    for a, u in enumerate(us):
        i, ders = basis_derivatives(kv, u, order)
        if order <= p:
            M[a, i - p : i + 1] = ders[order]
    return M


def gauss_nodes(kv: KnotVector, points_per_span: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on every non-empty knot span."""
    if points_per_span < 1:
        raise ValueError("points_per_span must be >= 1")
    x, w = np.polynomial.legendre.leggauss(points_per_span)
    bp = kv.breakpoints
    a, b = bp[:-1], bp[1:]
    nodes = (0.5 * (b - a))[:, None] * x[None, :] + (0.5 * (a + b))[:, None]
    weights = (0.5 * (b - a))[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


@dataclass(frozen=True)
class TensorSurface:
    """Polynomial tensor-product B-spline surface in R^3.

    ``net[j, k]`` is the control point of ``b^u_j(u) b^v_k(v)``.
    """

    ku: KnotVector
    kv: KnotVector
    net: np.ndarray

    def __post_init__(self):
        net = np.array(self.net, dtype=float)
        if net.ndim != 3 or net.shape[2] != 3:
            raise ValueError("control net must have shape (N1, N2, 3)")
        if net.shape[:2] != (self.ku.size, self.kv.size):
            raise ValueError(
                f"control net is {net.shape[0]}x{net.shape[1]} but knot vectors "
                f"require {self.ku.size}x{self.kv.size}"
            )
        if not np.all(np.isfinite(net)):
            raise ValueError("control points must be finite")
        net.setflags(write=False)
        object.__setattr__(self, "net", net)

    @classmethod
    def bezier(cls, net, domain=((0.0, 1.0), (0.0, 1.0))) -> "TensorSurface":
        net = np.asarray(net, dtype=float)
        (a, b), (c, d) = domain
        n1, n2 = net.shape[0] - 1, net.shape[1] - 1
        return cls(
            KnotVector(n1, [a] * (n1 + 1) + [b] * (n1 + 1)),
            KnotVector(n2, [c] * (n2 + 1) + [d] * (n2 + 1)),
            net,
        )

    @property
    def degrees(self) -> tuple[int, int]:
        return self.ku.degree, self.kv.degree

    @property
    def domain(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return self.ku.domain, self.kv.domain

    @property
    def diameter(self) -> float:
        pts = self.net.reshape(-1, 3)
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    def with_net(self, net) -> "TensorSurface":
        return TensorSurface(self.ku, self.kv, net)

    def derivative(self, u: float, v: float, ju: int = 0, jv: int = 0) -> np.ndarray:
        """Partial derivative d^(ju+jv) x / du^ju dv^jv at (u, v)."""
        pu, pv = self.degrees
        if ju < 0 or jv < 0:
            raise ValueError("derivative orders must be nonnegative")
        if ju > pu or jv > pv:
            return np.zeros(3)
        iu, du = basis_derivatives(self.ku, u, ju)
        iv, dv = basis_derivatives(self.kv, v, jv)
        block = self.net[iu - pu : iu + 1, iv - pv : iv + 1]
        return np.einsum("j,k,jkc->c", du[ju], dv[jv], block)

    def __call__(self, u: float, v: float) -> np.ndarray:
        return self.derivative(u, v)

    def derivatives(self, u: float, v: float, order: int = 2) -> dict[tuple[int, int], np.ndarray]:
        """All partials with ju + jv <= order, keyed by (ju, jv)."""
        pu, pv = self.degrees
        iu, du = basis_derivatives(self.ku, u, order)
        iv, dv = basis_derivatives(self.kv, v, order)
        block = self.net[iu - pu : iu + 1, iv - pv : iv + 1]
        tmp = np.einsum("aj,jkc->akc", du, block)
        out = {}
        for a in range(order + 1):
            for b in range(order + 1 - a):
                out[(a, b)] = np.einsum("k,kc->c", dv[b], tmp[a])
        return out

    def grid(self, us, vs, ju: int = 0, jv: int = 0) -> np.ndarray:
        """Evaluate a partial derivative on the tensor grid ``us x vs``; shape (len(us), len(vs), 3)."""
        Bu = collocation_matrix(self.ku, us, ju) if ju <= self.ku.degree else None
        Bv = collocation_matrix(self.kv, vs, jv) if jv <= self.kv.degree else None
        if Bu is None or Bv is None:
            return np.zeros((np.size(us), np.size(vs), 3))
        return np.einsum("aj,jkc,bk->abc", Bu, self.net, Bv)

    def transformed(self, A, b=None) -> "TensorSurface":
        """Apply the affine map x -> A x + b to the control net."""
        A = np.asarray(A, dtype=float)
        b = np.zeros(3) if b is None else np.asarray(b, dtype=float)
        return self.with_net(self.net @ A.T + b)


@dataclass(frozen=True)
class CornerMap:
    """Orientation-preserving local coordinates (s, t) at a domain corner.

    The corner sits at local (0, 0), both local parameters increase into the
    domain, and ``(u, v) = origin + jacobian @ (s, t)`` with ``det jacobian = +1``.
    """

    corner: str
    origin: tuple[float, float]
    jacobian: np.ndarray
    shape: tuple[int, int]

    def to_global(self, s: float, t: float) -> tuple[float, float]:
        uv = np.asarray(self.origin) + self.jacobian @ np.array([s, t], dtype=float)
        return float(uv[0]), float(uv[1])

    def index(self, i: int, j: int) -> tuple[int, int]:
        """Global control index of local control index (i, j)."""
        n1, n2 = self.shape
        return {
            "u0v0": (i, j),
            "u1v0": (n1 - 1 - j, i),
            "u1v1": (n1 - 1 - i, n2 - 1 - j),
            "u0v1": (j, n2 - 1 - i),
        }[self.corner]


def corner_map(s: TensorSurface, corner: str) -> CornerMap:
    if corner not in CORNERS:
        raise ValueError(f"unknown corner {corner!r}; expected one of {CORNERS}")
    (a, b), (c, d) = s.domain
    origin, jac = {
        "u0v0": ((a, c), [[1, 0], [0, 1]]),
        "u1v0": ((b, c), [[0, -1], [1, 0]]),
        "u1v1": ((b, d), [[-1, 0], [0, -1]]),
        "u0v1": ((a, d), [[0, 1], [-1, 0]]),
    }[corner]
    return CornerMap(corner, origin, np.array(jac, dtype=float), s.net.shape[:2])


def local_surface(s: TensorSurface, corner: str) -> TensorSurface:
    """The same surface reparametrized so that ``corner`` is the local origin."""
    m = corner_map(s, corner)
    ku, kv, net = s.ku, s.kv, s.net
    if corner == "u0v0":
        return TensorSurface(ku.shifted(), kv.shifted(), net)
    if corner == "u1v0":
        return TensorSurface(kv.shifted(), ku.reversed(), net[::-1, :].transpose(1, 0, 2))
    if corner == "u1v1":
        return TensorSurface(ku.reversed(), kv.reversed(), net[::-1, ::-1])
    assert m.corner == "u0v1"
    return TensorSurface(kv.reversed(), ku.shifted(), net[:, ::-1].transpose(1, 0, 2))


JET_KEYS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


@dataclass(frozen=True)
class CornerJet:
    """Taylor data xi_{j,k} (j + k <= 2) at a corner in its local frame."""

    xi00: np.ndarray
    xi10: np.ndarray
    xi01: np.ndarray
    xi20: np.ndarray
    xi11: np.ndarray
    xi02: np.ndarray
    corner: str = "u0v0"
    jacobian: np.ndarray = field(default_factory=lambda: np.eye(2))
    scale: float | None = None

    def __post_init__(self):
        for name in ("xi00", "xi10", "xi01", "xi20", "xi11", "xi02"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if vec.shape != (3,) or not np.all(np.isfinite(vec)):
                raise ValueError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, vec)
        if self.scale is None:
            vals = [self.xi10, self.xi01, self.xi20, self.xi11, self.xi02]
            object.__setattr__(self, "scale", float(max(np.linalg.norm(x) for x in vals)))

    def __getitem__(self, key: tuple[int, int]) -> np.ndarray:
        return getattr(self, f"xi{key[0]}{key[1]}")

    def as_dict(self) -> dict[tuple[int, int], np.ndarray]:
        return {k: self[k] for k in JET_KEYS}

    def transformed(self, A, b=None) -> "CornerJet":
        """Jet of the surface after the affine map x -> A x + b."""
        A = np.asarray(A, dtype=float)
        b = np.zeros(3) if b is None else np.asarray(b, dtype=float)
        vals = {f"xi{j}{k}": A @ self[(j, k)] for j, k in JET_KEYS}
        vals["xi00"] = vals["xi00"] + b
        return CornerJet(**vals, corner=self.corner, jacobian=self.jacobian)

    def swapped(self) -> "CornerJet":
        """Jet with the roles of the two local parameters exchanged."""
        return CornerJet(
            self.xi00, self.xi01, self.xi10, self.xi02, self.xi11, self.xi20,
            corner=self.corner, jacobian=self.jacobian[:, ::-1], scale=self.scale,
        )


def _jet_from_derivatives(s: TensorSurface, m: CornerMap) -> dict[tuple[int, int], np.ndarray]:
    u, v = m.origin
    d = s.derivatives(u, v, 2)
    # Local directions are signed coordinate axes: d/ds = J[0,0] d/du + J[1,0] d/dv, etc.
    J = m.jacobian
    out = {}
    for j, k in JET_KEYS:
        acc = np.zeros(3)
        # Expand (J00 du + J10 dv)^j (J01 du + J11 dv)^k.
        for a in range(j + 1):
            for b in range(k + 1):
                coef = (
                    comb(j, a) * comb(k, b)
                    * J[0, 0] ** a * J[1, 0] ** (j - a)
                    * J[0, 1] ** b * J[1, 1] ** (k - b)
                )
                if coef:
                    acc = acc + coef * d[(a + b, j - a + k - b)]
        out[(j, k)] = acc
    return out


def _jet_from_control_points(loc: TensorSurface) -> dict[tuple[int, int], np.ndarray]:
    p = loc.net
    n1, n2 = loc.degrees
    T1, T2 = loc.ku.knots, loc.kv.knots
    a1, a2 = T1[n1 + 1], T1[n1 + 2]
    b1, b2 = T2[n2 + 1], T2[n2 + 2]
    return {
        (0, 0): p[0, 0].copy(),
        (1, 0): n1 / a1 * (p[1, 0] - p[0, 0]),
        (0, 1): n2 / b1 * (p[0, 1] - p[0, 0]),
        (2, 0): n1 * (n1 - 1) / a1 * ((p[2, 0] - p[1, 0]) / a2 - (p[1, 0] - p[0, 0]) / a1),
        (1, 1): n1 * n2 / (a1 * b1) * (p[1, 1] - p[1, 0] - p[0, 1] + p[0, 0]),
        (0, 2): n2 * (n2 - 1) / b1 * ((p[0, 2] - p[0, 1]) / b2 - (p[0, 1] - p[0, 0]) / b1),
    }


def corner_jet(s: TensorSurface, corner: str = "u0v0", check: bool = True) -> CornerJet:
    """Second-order Taylor jet of ``s`` at ``corner`` in the local corner frame.

    The jet is evaluated by differentiating the surface and, when ``check`` is
    set, compared with the closed-form control-point expressions; a mismatch
    beyond relative 1e-10 raises ``ArithmeticError``.
    """
    if min(s.degrees) < 2:
        raise ValueError("corner jets require degrees >= 2")
    m = corner_map(s, corner)
    jet = _jet_from_derivatives(s, m)
    if check:
        ref = _jet_from_control_points(local_surface(s, corner))
        for key in JET_KEYS:
            scale = max(np.linalg.norm(ref[key]), np.linalg.norm(jet[key]), s.diameter, 1e-300)
            if np.linalg.norm(ref[key] - jet[key]) > 1e-10 * scale:
                raise ArithmeticError(f"jet paths disagree at xi{key}: {jet[key]} vs {ref[key]}")
    return CornerJet(
        *(jet[k] for k in JET_KEYS), corner=corner, jacobian=m.jacobian, scale=s.diameter
    )


def quadrature_grid(s: TensorSurface, points_per_span: int) -> np.ndarray:
    """Tensor Gauss-Legendre rule over the knot-span rectangles.

    Returns an array of rows ``(u, v, weight)``.
    """
    uq, uw = gauss_nodes(s.ku, points_per_span)
    vq, vw = gauss_nodes(s.kv, points_per_span)
    U, V = np.meshgrid(uq, vq, indexing="ij")
    W = np.outer(uw, vw)
    return np.column_stack([U.ravel(), V.ravel(), W.ravel()])


def monomial_to_bezier(coeffs, domain=((0.0, 1.0), (0.0, 1.0))) -> TensorSurface:
    """Bezier patch of the polynomial sum_{j,k} coeffs[j, k] u^j v^k on ``domain``.

    ``coeffs`` has shape (n1 + 1, n2 + 1, 3).
    """
    C = np.asarray(coeffs, dtype=float)
    (a, b), (c, d) = domain
    n1, n2 = C.shape[0] - 1, C.shape[1] - 1
    # Substitute u = a + (b - a) x, v = c + (d - c) y, then convert power -> Bernstein on [0, 1].
    Su = _affine_power_matrix(n1, a, b - a)
    Sv = _affine_power_matrix(n2, c, d - c)
    Cxy = np.einsum("ij,jkc,lk->ilc", Su, C, Sv)
    Mu, Mv = _power_to_bernstein(n1), _power_to_bernstein(n2)
    net = np.einsum("ij,jkc,lk->ilc", Mu, Cxy, Mv)
    return TensorSurface.bezier(net, domain)


def _affine_power_matrix(n: int, shift: float, scale: float) -> np.ndarray:
    # (shift + scale x)^j = sum_i S[i, j] x^i
    S = np.zeros((n + 1, n + 1))
    for j in range(n + 1):
        for i in range(j + 1):
            S[i, j] = comb(j, i) * scale**i * shift ** (j - i)
    return S


def _power_to_bernstein(n: int) -> np.ndarray:
    M = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(i + 1):
            M[i, j] = comb(i, j) / comb(n, j)
    return M
