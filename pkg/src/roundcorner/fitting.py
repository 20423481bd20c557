"""L2 projection onto spline spaces with optional rounded-corner constraints.

Unknowns are the control points flattened in C order over ``(j, k, coord)``,
so the Gram matrix of the vector-valued problem is ``kron(Gu, Gv, I3)``.
Constraints enter through Lagrange multipliers in a dense symmetric
indefinite KKT system.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .corner import (
    DEFAULT_TOL,
    SplineCornerReport,
    Tolerances,
    corner_knot_factors,
    spline_corner_conditions,
)
from .spline import (
    CORNERS,
    KnotVector,
    TensorSurface,
    collocation_matrix,
    corner_map,
    gauss_nodes,
    local_surface,
)

log = logging.getLogger(__name__)

Target = Callable[[np.ndarray, np.ndarray], np.ndarray]


class FitError(ArithmeticError):
    pass


@dataclass(frozen=True)
class CornerConstraintSpec:
    corner: str
    normal: np.ndarray
    alpha1: float = 0.5

    def __post_init__(self):
        if self.corner not in CORNERS:
            raise ValueError(f"unknown corner {self.corner!r}")
        n = np.asarray(self.normal, dtype=float)
        if n.shape != (3,) or not np.isfinite(n).all():
            raise ValueError("normal must be a finite 3-vector")
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("normal must have unit length")
        object.__setattr__(self, "normal", n)
        if not 0.0 < self.alpha1 < 1.0:
            raise ValueError("alpha1 must lie in (0, 1)")

    @property
    def alpha2(self) -> float:
        return 1.0 - self.alpha1


@dataclass
class FitProblem:
    ku: KnotVector
    kv: KnotVector
    target: Target
    constraints: list[CornerConstraintSpec] = field(default_factory=list)
    quad_points: int | None = None
    two_step: bool = False

    def __post_init__(self):
        if self.quad_points is None:
            self.quad_points = max(self.ku.degree, self.kv.degree) + 2
        if self.quad_points < max(self.ku.degree, self.kv.degree) + 1:
            raise ValueError("quadrature needs at least degree+1 points per span")
        if self.constraints and min(self.ku.size, self.kv.size) < 3:
            raise ValueError("corner constraints need at least 3 control points per direction")

    @property
    def shape(self) -> tuple[int, int]:
        return self.ku.size, self.kv.size


@dataclass
class L2System:
    """Gram factors and moments of an L2 projection."""

    gu: np.ndarray
    gv: np.ndarray
    moments: np.ndarray  # (N1, N2, 3)

    @property
    def gram(self) -> np.ndarray:
        """Gram matrix over the flattened (j, k, coord) unknowns."""
        return np.kron(np.kron(self.gu, self.gv), np.eye(3))

    @property
    def rhs(self) -> np.ndarray:
        return self.moments.reshape(-1)


def _sample_target(target: Target, us, vs) -> np.ndarray:
    U, V = np.meshgrid(us, vs, indexing="ij")
    Y = np.asarray(target(U, V), dtype=float)
    if Y.shape != U.shape + (3,):
        raise ValueError("target must map parameter arrays of shape S to values of shape S + (3,)")
    return Y


def gram_1d(kv: KnotVector, q: int) -> np.ndarray:
    x, w = gauss_nodes(kv, q)
    B = collocation_matrix(kv, x)
    return B.T @ (w[:, None] * B)


def assemble_l2(problem: FitProblem) -> L2System:
    q = problem.quad_points
    uq, uw = gauss_nodes(problem.ku, q)
    vq, vw = gauss_nodes(problem.kv, q)
    Bu = collocation_matrix(problem.ku, uq)
    Bv = collocation_matrix(problem.kv, vq)
    Y = _sample_target(problem.target, uq, vq)
    gu = Bu.T @ (uw[:, None] * Bu)
    gv = Bv.T @ (vw[:, None] * Bv)
    moments = np.einsum("aj,a,abc,b,bk->jkc", Bu, uw, Y, vw, Bv)
    return L2System(gu, gv, moments)


def _flat(shape: tuple[int, int], j: int, k: int) -> int:
    return (j * shape[1] + k) * 3


def local_knots(ku: KnotVector, kv: KnotVector, corner: str) -> tuple[KnotVector, KnotVector]:
    dummy = TensorSurface(ku, kv, np.zeros((ku.size, kv.size, 3)))
    loc = local_surface(dummy, corner)
    return loc.ku, loc.kv


def corner_constraint_rows(
    spec: CornerConstraintSpec, ku: KnotVector, kv: KnotVector
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Six linear rows ``C x = d`` enforcing a rounded corner with prescribed normal.

    Rows 0-2: p00 - alpha1 p10 - alpha2 p01 = 0 (componentwise).
    Rows 3-5: <t*, n> = <r*, n> = <s*, n> = 0.
    """
    shape = (ku.size, kv.size)
    m = corner_map(TensorSurface(ku, kv, np.zeros(shape + (3,))), spec.corner)
    lu, lv = local_knots(ku, kv, spec.corner)
    n1, n2 = lu.degree, lv.degree
    a1, a2 = lu.knots[n1 + 1], lu.knots[n1 + 2]
    b1, b2 = lv.knots[n2 + 1], lv.knots[n2 + 2]
    al1, al2 = spec.alpha1, spec.alpha2
    n = spec.normal

    def col(i, j):
        return _flat(shape, *m.index(i, j))

    C = np.zeros((6, shape[0] * shape[1] * 3))
    for c in range(3):
        C[c, col(0, 0) + c] = 1.0
        C[c, col(1, 0) + c] = -al1
        C[c, col(0, 1) + c] = -al2
    C[3, col(1, 0) : col(1, 0) + 3] += n
    C[3, col(0, 1) : col(0, 1) + 3] -= n
    A, B = (n1 - 1) * a1 * al1, n1 * a2 * al2
    C[4, col(2, 0) : col(2, 0) + 3] += A * n
    C[4, col(1, 1) : col(1, 1) + 3] += B * n
    C[4, col(0, 0) : col(0, 0) + 3] -= (A + B) * n
    A, B = (n2 - 1) * b1 * al2, n2 * b2 * al1
    C[5, col(0, 2) : col(0, 2) + 3] += A * n
    C[5, col(1, 1) : col(1, 1) + 3] += B * n
    C[5, col(0, 0) : col(0, 0) + 3] -= (A + B) * n
    labels = [f"{spec.corner}:anti_{x}" for x in "xyz"] + [
        f"{spec.corner}:t_n", f"{spec.corner}:r_n", f"{spec.corner}:s_n"
    ]
    return C, np.zeros(6), labels


@dataclass
class KKTSolution:
    x: np.ndarray
    multipliers: np.ndarray
    kkt_residual: float
    constraint_residual: float
    dropped: list[int]


def _independent_rows(C: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    if C.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, R, piv = scipy.linalg.qr(C.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rtol * max(diag[0], 1e-300)))
    return np.sort(piv[:rank])


def solve_kkt(gram, moments, C=None, d=None) -> KKTSolution:
    """Minimize ``x^T G x / 2 - m^T x`` subject to ``C x = d``.

    Linearly dependent constraint rows are dropped with a warning; the returned
    multiplier vector has zeros in their places.
    """
    G = np.asarray(gram, dtype=float)
    m = np.asarray(moments, dtype=float).reshape(-1)
    n = m.size
    if C is None or np.size(C) == 0:
        C = np.zeros((0, n))
        d = np.zeros(0)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = np.zeros(C.shape[0]) if d is None else np.asarray(d, dtype=float).reshape(-1)
    keep = _independent_rows(C)
    dropped = sorted(set(range(C.shape[0])) - set(keep.tolist()))
    if dropped:
        warnings.warn(f"dropping {len(dropped)} linearly dependent constraint rows", stacklevel=2)
    Ck, dk = C[keep], d[keep]
    k = Ck.shape[0]
    if k == 0:
        try:
            x = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), m)
        except np.linalg.LinAlgError as exc:
            raise FitError("Gram matrix is not positive definite") from exc
        lam_k = np.zeros(0)
    else:
        K = np.zeros((n + k, n + k))
        K[:n, :n] = G
        K[:n, n:] = Ck.T
        K[n:, :n] = Ck
        rhs = np.concatenate([m, dk])
        try:
            sol = scipy.linalg.solve(K, rhs, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            raise FitError("singular KKT system") from exc
        x, lam_k = sol[:n], sol[n:]
    lam = np.zeros(C.shape[0])
    lam[keep] = lam_k
    scale = max(np.abs(m).max(initial=0.0), np.abs(G).max(initial=0.0) * np.abs(x).max(initial=0.0), 1e-300)
    kkt = float(np.abs(G @ x + Ck.T @ lam_k - m).max(initial=0.0) / scale)
    cres = float(np.abs(C @ x - d).max(initial=0.0))
    if not np.all(np.isfinite(x)):
        raise FitError("non-finite solution")
    return KKTSolution(x, lam, kkt, cres, dropped)


def _tensor_solve(sys: L2System) -> np.ndarray:
    cu = scipy.linalg.cho_factor(sys.gu)
    cv = scipy.linalg.cho_factor(sys.gv)
    X = scipy.linalg.cho_solve(cu, sys.moments.reshape(sys.gu.shape[0], -1))
    X = X.reshape(sys.moments.shape)
    X = np.moveaxis(X, 1, 0).reshape(sys.gv.shape[0], -1)
    X = scipy.linalg.cho_solve(cv, X).reshape(sys.moments.shape[1], sys.moments.shape[0], 3)
    return np.moveaxis(X, 0, 1)


@dataclass
class FitReport:
    surface: TensorSurface
    l2_residual: float
    max_error: float
    constraint_residual: float
    kkt_residual: float
    corner_reports: dict[str, SplineCornerReport] = field(default_factory=dict)

    @property
    def onesided(self) -> dict[str, bool]:
        return {c: r.onesided for c, r in self.corner_reports.items()}

    def to_dict(self) -> dict:
        return {
            "l2_residual": self.l2_residual,
            "max_error": self.max_error,
            "constraint_residual": self.constraint_residual,
            "kkt_residual": self.kkt_residual,
            "corners": {c: r.to_dict() for c, r in self.corner_reports.items()},
        }


def _all_rows(problem: FitProblem):
    n = problem.shape[0] * problem.shape[1] * 3
    Cs, ds = [np.zeros((0, n))], [np.zeros(0)]
    for spec in problem.constraints:
        C, d, _ = corner_constraint_rows(spec, problem.ku, problem.kv)
        Cs.append(C)
        ds.append(d)
    return np.vstack(Cs), np.concatenate(ds)


def _boundary_mask(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
    return mask


def _boundary_system(problem: FitProblem):
    """Sum of the four 1D L2 edge problems over the boundary control points."""
    ku, kv = problem.ku, problem.kv
    N1, N2 = problem.shape
    q = problem.quad_points
    G = np.zeros((N1 * N2, N1 * N2))
    M = np.zeros((N1 * N2, 3))
    idx = np.arange(N1 * N2).reshape(N1, N2)
    (a, b), (c, d) = ku.domain, kv.domain
    for knots, fixed, along_u in ((ku, c, True), (ku, d, True), (kv, a, False), (kv, b, False)):
        x, w = gauss_nodes(knots, q)
        B = collocation_matrix(knots, x)
        if along_u:
            Y = _sample_target(problem.target, x, [fixed])[:, 0]
            ids = idx[:, 0] if fixed == c else idx[:, -1]
        else:
            Y = _sample_target(problem.target, [fixed], x)[0]
            ids = idx[0, :] if fixed == a else idx[-1, :]
        G[np.ix_(ids, ids)] += B.T @ (w[:, None] * B)
        M[ids] += B.T @ (w[:, None] * Y)
    return G, M


def _expand(cols_points: np.ndarray) -> np.ndarray:
    return (3 * cols_points[:, None] + np.arange(3)[None, :]).ravel()


def fit_surface(problem: FitProblem, tol: Tolerances = DEFAULT_TOL, samples: int | None = None) -> FitReport:
    """L2-project ``problem.target`` and report errors and corner conditions."""
    N1, N2 = problem.shape
    sys = assemble_l2(problem)
    C, d = _all_rows(problem)
    if not problem.two_step:
        if C.shape[0] == 0:
            net = _tensor_solve(sys)
            kkt = float("nan")
        else:
            sol = solve_kkt(sys.gram, sys.rhs, C, d)
            net = sol.x.reshape(N1, N2, 3)
            kkt = sol.kkt_residual
    else:
        net, kkt = _two_step(problem, sys, C, d)
    surface = TensorSurface(problem.ku, problem.kv, net)
    cres = float(np.abs(C @ net.reshape(-1) - d).max(initial=0.0))
    reports = {spec.corner: spline_corner_conditions(surface, spec.corner, tol) for spec in problem.constraints}
    for corner, rep in reports.items():
        if not rep.onesided:
            log.warning("onesidedness violated at corner %s after fit", corner)
    l2 = l2_error(surface, problem.target, problem.quad_points)
    return FitReport(surface, l2, max_error(surface, problem.target, samples), cres, kkt, reports)


def _two_step(problem: FitProblem, sys: L2System, C: np.ndarray, d: np.ndarray):
    N1, N2 = problem.shape
    bmask = _boundary_mask((N1, N2)).ravel()
    bpts = np.flatnonzero(bmask)
    ipts = np.flatnonzero(~bmask)
    bcols, icols = _expand(bpts), _expand(ipts)

    # Combinations of rows free of interior unknowns constrain the boundary step;
    # e.g. <r*, n> and <s*, n> both pin <p11, n>, so their p11-free combination
    # is a condition on boundary control points alone.
    Ci_all = C[:, icols]
    W = scipy.linalg.null_space(Ci_all.T) if C.shape[0] else np.zeros((0, 0))
    Cb = (W.T @ C)[:, bcols]
    db = W.T @ d
    Gb1, Mb1 = _boundary_system(problem)
    Gb = np.kron(Gb1[np.ix_(bpts, bpts)], np.eye(3))
    Mb = Mb1[bpts].reshape(-1)
    sol_b = solve_kkt(Gb, Mb, Cb, db)
    x = np.zeros(N1 * N2 * 3)
    x[bcols] = sol_b.x

    G = sys.gram
    Gi = G[np.ix_(icols, icols)]
    Mi = sys.rhs[icols] - G[np.ix_(icols, bcols)] @ x[bcols]
    di = d - C[:, bcols] @ x[bcols]
    # Remaining rows are consistent by construction; drop the redundant ones quietly.
    keep = _independent_rows(Ci_all)
    Ci, di = Ci_all[keep], di[keep]
    sol_i = solve_kkt(Gi, Mi, Ci, di)
    x[icols] = sol_i.x
    return x.reshape(N1, N2, 3), max(sol_b.kkt_residual, sol_i.kkt_residual)


def l2_error(surface: TensorSurface, target: Target, q: int | None = None) -> float:
    q = q or max(surface.degrees) + 2
    uq, uw = gauss_nodes(surface.ku, q)
    vq, vw = gauss_nodes(surface.kv, q)
    diff = surface.grid(uq, vq) - _sample_target(target, uq, vq)
    return float(np.sqrt(np.einsum("a,b,abc->", uw, vw, diff**2)))


def sample_params(kv: KnotVector, samples: int | None) -> np.ndarray:
    """Uniform samples containing every breakpoint; at least ``samples`` points."""
    bp = kv.breakpoints
    per = max(8, int(np.ceil((samples or 201) / (bp.size - 1))))
    pts = [np.linspace(a, b, per, endpoint=False) for a, b in zip(bp[:-1], bp[1:])]
    return np.concatenate(pts + [bp[-1:]])


def max_error(surface: TensorSurface, target: Target, samples: int | None = None) -> float:
    """Max distance between surface and target over a dense parameter grid."""
    us = sample_params(surface.ku, samples)
    vs = sample_params(surface.kv, samples)
    diff = surface.grid(us, vs) - _sample_target(target, us, vs)
    return float(np.linalg.norm(diff, axis=-1).max())
