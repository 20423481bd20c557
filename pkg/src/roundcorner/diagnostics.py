"""Numerical probes of normal continuity, curvature and single-sheetedness near corners.

Corner probes work on the locally reparametrized surface (corner at the
origin, orientation preserved), so normals and curvatures agree with the
original parametrization.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from .corner import CornerFrame, CornerKind, classify_corner, corner_frame
from .spline import TensorSurface, corner_jet, local_surface

DEFAULT_ALPHAS = np.logspace(-1, -7, 25)


class DegeneratePointError(ArithmeticError):
    """The surface normal is undefined at the requested parameter."""


def normal_vector(s, u: float, v: float) -> np.ndarray:
    """Unit normal ``x_u x x_v / |x_u x x_v|``."""
    xu, xv = s.derivative(u, v, 1, 0), s.derivative(u, v, 0, 1)
    cr = np.cross(xu, xv)
    norm = np.linalg.norm(cr)
    if norm <= 1e-14 * np.linalg.norm(xu) * np.linalg.norm(xv) or norm == 0.0:
        raise DegeneratePointError(f"x_u and x_v are parallel at ({u}, {v})")
    return cr / norm


def angle_between(a, b) -> np.ndarray:
    """Angle between vectors along the last axis (atan2 form, accurate near 0 and pi)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    cr = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cr, np.sum(a * b, axis=-1))


@dataclass
class FundamentalForms:
    G: np.ndarray
    B: np.ndarray
    S: np.ndarray
    kappa1: float
    kappa2: float


def _curvatures(xu, xv, xuu, xuv, xvv):
    """Vectorized principal curvatures and area element from partials (..., 3)."""
    cr = np.cross(xu, xv)
    area = np.linalg.norm(cr, axis=-1)
    nu = cr / area[..., None]
    E, F, G = (xu * xu).sum(-1), (xu * xv).sum(-1), (xv * xv).sum(-1)
    L, M, N = (xuu * nu).sum(-1), (xuv * nu).sum(-1), (xvv * nu).sum(-1)
    # Eigenvalues of the symmetrized shape operator C^-1 B C^-T with G = C C^T;
    # the hypot form of the discriminant stays accurate at umbilics.
    c11 = np.sqrt(E)
    c21 = F / c11
    c22 = area / c11  # det G == area**2 without the cancellation
    m11, m22 = 1.0 / c11, 1.0 / c22
    m21 = -c21 * m11 * m22
    a11 = m11 * m11 * L
    a12 = m11 * (m21 * L + m22 * M)
    a22 = m21 * m21 * L + 2 * m21 * m22 * M + m22 * m22 * N
    mean = 0.5 * (a11 + a22)
    root = np.hypot(0.5 * (a11 - a22), a12)
    return mean + root, mean - root, area


def fundamental_forms(s, u: float, v: float) -> FundamentalForms:
    """First and second fundamental forms, shape operator and principal curvatures.

    ``s`` is anything with ``derivative(u, v, ju, jv)``.
    """
    d = {(a, b): s.derivative(u, v, a, b) for a, b in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))}
    xu, xv = d[1, 0], d[0, 1]
    G = np.array([[xu @ xu, xu @ xv], [xu @ xv, xv @ xv]])
    cr = np.cross(xu, xv)
    area = np.linalg.norm(cr)
    if area <= 1e-14 * np.sqrt(G[0, 0] * G[1, 1]) or area == 0.0:
        raise DegeneratePointError(f"singular first fundamental form at ({u}, {v})")
    nu = cr / area
    B = np.array([[d[2, 0] @ nu, d[1, 1] @ nu], [d[1, 1] @ nu, d[0, 2] @ nu]])
    adj = np.array([[G[1, 1], -G[0, 1]], [-G[0, 1], G[0, 0]]])
    S = adj @ B / area**2
    k1, k2, _ = _curvatures(xu, xv, d[2, 0], d[1, 1], d[0, 2])
    return FundamentalForms(G, B, S, float(k1), float(k2))


def fit_rate(parameters, values, discard: int = 2) -> float:
    """Least-squares slope of log(value) against log(parameter).

    The ``discard`` largest parameters are dropped as preasymptotic.
    """
    p = np.asarray(parameters, dtype=float)
    y = np.asarray(values, dtype=float)
    order = np.argsort(p)[::-1][discard:]
    p, y = p[order], y[order]
    ok = y > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(p[ok]), np.log(y[ok]), 1)[0])


@dataclass
class ProbeSeries:
    parameters: np.ndarray
    values: np.ndarray
    fitted_rate: float

    def __post_init__(self):
        p = np.asarray(self.parameters, dtype=float)
        if np.any(p <= 0) or np.any(np.diff(p) >= 0):
            raise ValueError("probe parameters must be positive and strictly decreasing")

    @classmethod
    def build(cls, parameters, values, discard: int = 2) -> "ProbeSeries":
        p = np.asarray(parameters, dtype=float)
        v = np.asarray(values, dtype=float)
        return cls(p, v, fit_rate(p, v, discard))

    def to_dict(self) -> dict:
        return {
            "parameters": self.parameters.tolist(),
            "values": self.values.tolist(),
            "fitted_rate": self.fitted_rate,
        }


def _alphas(alphas) -> np.ndarray:
    a = DEFAULT_ALPHAS if alphas is None else np.asarray(alphas, dtype=float)
    return np.sort(a)[::-1]


def _rounded_frame(s: TensorSurface, corner: str) -> CornerFrame:
    cls = classify_corner(corner_jet(s, corner))
    if cls.kind is not CornerKind.ROUNDED:
        raise ValueError(f"corner {corner} is {cls.kind.value}, not Rounded")
    return cls.frame


def normal_convergence_probe(
    s: TensorSurface, corner: str = "u0v0", direction=(1.0, 1.0), alphas=None
) -> ProbeSeries:
    """Angles between the normal at local ``alpha * direction`` and the limit normal."""
    frame = _rounded_frame(s, corner)
    loc = local_surface(s, corner)
    d = np.asarray(direction, dtype=float)
    a = _alphas(alphas)
    vals = [float(angle_between(normal_vector(loc, *(x * d)), frame.n)) for x in a]
    return ProbeSeries.build(a, vals)


def axis_normal_limits(s: TensorSurface, corner: str = "u0v0", alphas=None) -> ProbeSeries:
    """Angle between the normals at local (alpha, 0) and (0, alpha)."""
    loc = local_surface(s, corner)
    a = _alphas(alphas)
    vals = [
        float(angle_between(normal_vector(loc, x, 0.0), normal_vector(loc, 0.0, x))) for x in a
    ]
    return ProbeSeries.build(a, vals)


def cross_norm_asymptotics(
    s: TensorSurface, corner: str = "u0v0", alphas=None, direction=(1.0, 1.0)
) -> ProbeSeries:
    """Ratio |x_u x x_v| / (rho u + sigma v) along a ray; fitted rate is that of |ratio - 1|."""
    frame = _rounded_frame(s, corner)
    loc = local_surface(s, corner)
    d = np.asarray(direction, dtype=float)
    a = _alphas(alphas)
    ratios = []
    for x in a:
        u, v = x * d
        cr = np.cross(loc.derivative(u, v, 1, 0), loc.derivative(u, v, 0, 1))
        ratios.append(np.linalg.norm(cr) / (frame.rho * u + frame.sigma * v))
    ratios = np.array(ratios)
    return ProbeSeries(a, ratios, fit_rate(a, np.abs(ratios - 1.0)))


def diagonal_curvature_scale(s: TensorSurface, corner: str = "u0v0", alphas=None) -> ProbeSeries:
    """max(|kappa_1|, |kappa_2|) * alpha at local (alpha, alpha)."""
    loc = local_surface(s, corner)
    a = _alphas(alphas)
    vals = []
    for x in a:
        ff = fundamental_forms(loc, x, x)
        vals.append(max(abs(ff.kappa1), abs(ff.kappa2)) * x)
    return ProbeSeries.build(a, vals)


def _graded_breaks(eps: float, H: float, knots: np.ndarray, ratio: float = 2.0) -> np.ndarray:
    pts = [eps]
    while pts[-1] * ratio < H:
        pts.append(pts[-1] * ratio)
    pts.append(H)
    inner = knots[(knots > eps) & (knots < H)]
    return np.unique(np.concatenate([pts, inner]))


def _graded_rule(breaks: np.ndarray, q: int):
    x, w = np.polynomial.legendre.leggauss(q)
    a, b = breaks[:-1], breaks[1:]
    nodes = (0.5 * (b - a))[:, None] * x + (0.5 * (a + b))[:, None]
    weights = (0.5 * (b - a))[:, None] * w
    return nodes.ravel(), weights.ravel()


def curvature_integral(
    s: TensorSurface, p: float, eps: float, corner: str = "u0v0", H: float | None = None, q: int = 4
) -> float:
    """Integral of |kappa_1|^p + |kappa_2|^p over the cut square [eps, H]^2 at a corner.

    Cells are graded geometrically (ratio 2) toward the corner with a
    ``q``-point Gauss rule per cell and direction.
    """
    if p < 1 or eps <= 0:
        raise ValueError("need p >= 1 and eps > 0")
    loc = local_surface(s, corner)
    if H is None:
        H = min(loc.ku.knots[loc.ku.degree + 1], loc.kv.knots[loc.kv.degree + 1])
    if eps >= H:
        raise ValueError("eps must be smaller than H")
    us, uw = _graded_rule(_graded_breaks(eps, H, loc.ku.knots), q)
    vs, vw = _graded_rule(_graded_breaks(eps, H, loc.kv.knots), q)
    D = {k: loc.grid(us, vs, *k) for k in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))}
    k1, k2, area = _curvatures(D[1, 0], D[0, 1], D[2, 0], D[1, 1], D[0, 2])
    if not np.all(area > 0):
        raise DegeneratePointError("singular point inside the cut domain")
    f = (np.abs(k1) ** p + np.abs(k2) ** p) * area
    # Fixed-order reduction keeps sums reproducible.
    return float(uw @ f @ vw)


@dataclass
class InjectivityWitness:
    eta0: np.ndarray
    eta1: np.ndarray
    distance: float

    @property
    def separation(self) -> float:
        return float(np.linalg.norm(self.eta0 - self.eta1))

    def to_dict(self) -> dict:
        return {
            "eta0": self.eta0.tolist(), "eta1": self.eta1.tolist(),
            "projected_distance": self.distance, "parameter_separation": self.separation,
        }


def estimate_corner_normal(s: TensorSurface, corner: str = "u0v0", d: float = 1e-3) -> np.ndarray:
    """Limit normal from the frame when available, else the normal at local (d, d)."""
    try:
        return corner_frame(corner_jet(s, corner)).n
    except (ValueError, ArithmeticError):
        loc = local_surface(s, corner)
        H = min(loc.ku.domain[1], loc.kv.domain[1])
        return normal_vector(loc, d * H, d * H)


def injectivity_probe(
    s: TensorSurface,
    corner: str = "u0v0",
    grid_density: int = 101,
    H: float | None = None,
    normal=None,
    max_candidates: int = 40,
    tol: float = 1e-9,
):
    """Search for two parameters with the same projection onto the tangent plane.

    The projection plane is orthogonal to ``normal`` (default: the limit normal
    of the corner or an estimate of it). Returns an ``InjectivityWitness`` or
    ``None``; ``None`` only means no witness was found at this resolution.
    """
    loc = local_surface(s, corner)
    if H is None:
        H = min(loc.ku.domain[1], loc.kv.domain[1])
    n = estimate_corner_normal(s, corner) if normal is None else np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    e1 = np.cross(n, [1.0, 0.0, 0.0])
    if np.linalg.norm(e1) < 0.5:
        e1 = np.cross(n, [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    basis = np.stack([e1, e2])
    origin = loc.derivative(0.0, 0.0)

    def proj(uv):
        return basis @ (loc.derivative(uv[0], uv[1]) - origin)

    g = np.linspace(0.0, H, grid_density)
    step = g[1] - g[0]
    P = np.einsum("ic,abc->abi", basis, loc.grid(g, g) - origin)
    # Local resolution: largest image spacing to the grid neighbours.
    du = np.linalg.norm(np.diff(P, axis=0), axis=-1)
    dv = np.linalg.norm(np.diff(P, axis=1), axis=-1)
    res = np.zeros(P.shape[:2])
    res[:-1] = np.maximum(res[:-1], du)
    res[1:] = np.maximum(res[1:], du)
    res[:, :-1] = np.maximum(res[:, :-1], dv)
    res[:, 1:] = np.maximum(res[:, 1:], dv)
    pts = P.reshape(-1, 2)
    radius = 1.5 * res.ravel()
    ij = np.stack(np.meshgrid(np.arange(grid_density), np.arange(grid_density), indexing="ij"), -1).reshape(-1, 2)
    tree = cKDTree(pts)
    min_sep = 10 * step
    cands = []
    for a, nbrs in enumerate(tree.query_ball_point(pts, radius)):
        for b in nbrs:
            if b <= a:
                continue
            sep = np.linalg.norm(ij[a] - ij[b]) * step
            if sep >= min_sep:
                score = np.linalg.norm(pts[a] - pts[b]) / max(radius[a], 1e-300)
                cands.append((score, a, b))
    cands.sort()
    tried = 0
    for _, a, b in cands:
        if tried >= max_candidates:
            break
        tried += 1
        x0 = np.concatenate([ij[a] * step, ij[b] * step])
        res_ls = least_squares(
            lambda z: proj(z[:2]) - proj(z[2:]), x0, bounds=(0.0, H), xtol=1e-15, ftol=1e-15, gtol=1e-15
        )
        z = res_ls.x
        dist = float(np.linalg.norm(proj(z[:2]) - proj(z[2:])))
        if dist <= tol and np.linalg.norm(z[:2] - z[2:]) >= min_sep:
            return InjectivityWitness(z[:2], z[2:], dist)
    return None


FIELD_COLUMNS = ("u", "v", "x", "y", "z", "nu_x", "nu_y", "nu_z", "kappa1", "kappa2", "isophote")


def sample_fields(s: TensorSurface, n_u: int = 41, n_v: int = 41, direction=(0.0, 0.0, 1.0)):
    """Rows of position, normal, principal curvatures and isophote value <nu, d>.

    Singular samples get NaN normals/curvatures; their parameters are returned
    separately as warnings.
    """
    (a, b), (c, d) = s.domain
    us, vs = np.linspace(a, b, n_u), np.linspace(c, d, n_v)
    X = s.grid(us, vs)
    D = {k: s.grid(us, vs, *k) for k in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))}
    cr = np.cross(D[1, 0], D[0, 1])
    area = np.linalg.norm(cr, axis=-1)
    scale = np.linalg.norm(D[1, 0], axis=-1) * np.linalg.norm(D[0, 1], axis=-1)
    singular = (area <= 1e-14 * scale) | (area == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        nu = cr / area[..., None]
        k1, k2, _ = _curvatures(D[1, 0], D[0, 1], D[2, 0], D[1, 1], D[0, 2])
    nu[singular] = np.nan
    k1 = np.where(singular, np.nan, k1)
    k2 = np.where(singular, np.nan, k2)
    dvec = np.asarray(direction, dtype=float)
    dvec = dvec / np.linalg.norm(dvec)
    iso = nu @ dvec
    rows, warnings = [], []
    for i, u in enumerate(us):
        for j, v in enumerate(vs):
            if singular[i, j]:
                warnings.append((float(u), float(v)))
            rows.append((u, v, *X[i, j], *nu[i, j], k1[i, j], k2[i, j], iso[i, j]))
    return rows, warnings


def fields_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELD_COLUMNS)
    for row in rows:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()
