"""Rounded-corner frames, corner classification and control-point conditions."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .spline import CornerJet, TensorSurface, local_surface


class CornerKind(str, enum.Enum):
    REGULAR = "Regular"
    ROUNDED = "Rounded"
    DISCONTINUOUS_INDEPENDENT = "DiscontinuousIndependent"
    DISCONTINUOUS_OPPOSITE = "DiscontinuousOpposite"
    DEGENERATE = "Degenerate"
    NOT_ANTIPARALLEL = "NotAntiparallel"


class NotAntiparallelError(ValueError):
    pass


class NormalUndefinedError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Decision thresholds; all residuals are scale-free."""

    angle: float = 1e-7
    norm: float = 1e-12
    coplanar: float = 1e-8
    degenerate: float = 1e-10
    segment: float = 1e-8


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class CornerFrame:
    t: np.ndarray
    lam: float
    mu: float
    r: np.ndarray
    s: np.ndarray
    n: np.ndarray
    c: np.ndarray
    rho: float
    sigma: float

    def to_dict(self) -> dict:
        return {
            "t": self.t.tolist(), "lambda": self.lam, "mu": self.mu,
            "r": self.r.tolist(), "s": self.s.tolist(), "n": self.n.tolist(),
            "c": self.c.tolist(), "rho": self.rho, "sigma": self.sigma,
        }


@dataclass
class CornerClassification:
    kind: CornerKind
    antiparallel_angle: float
    coplanarity: float = float("nan")
    quadruple: float = float("nan")
    frame: CornerFrame | None = None

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.value,
            "antiparallel_angle": self.antiparallel_angle,
            "coplanarity_residual": self.coplanarity,
            "quadruple_product": self.quadruple,
        }
        if self.frame is not None:
            out["frame"] = self.frame.to_dict()
        return out


def _angle(a: np.ndarray, b: np.ndarray) -> float:
    # atan2 form stays accurate for nearly (anti)parallel vectors.
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b)))


def _antiparallel_angle(jet: CornerJet) -> float:
    return _angle(jet.xi10, -jet.xi01)


def _check_antiparallel(jet: CornerJet, tol: Tolerances) -> float:
    floor = tol.norm * max(jet.scale, 1e-300)
    l10, l01 = np.linalg.norm(jet.xi10), np.linalg.norm(jet.xi01)
    if l10 <= floor or l01 <= floor:
        raise NotAntiparallelError("vanishing first partial derivative")
    theta = _antiparallel_angle(jet)
    if theta > tol.angle:
        raise NotAntiparallelError(f"first partials are {theta:.3e} rad from antiparallel")
    return theta


def _rs(jet: CornerJet, t: np.ndarray, lam: float, mu: float):
    r = mu * jet.xi20 + lam * jet.xi11
    s = lam * jet.xi02 + mu * jet.xi11
    return r, s


def corner_frame(jet: CornerJet, tol: Tolerances = DEFAULT_TOL) -> CornerFrame:
    """Limit tangent, normal and cross vector of an antiparallel corner.

    Raises ``NotAntiparallelError`` when the first partials are not antiparallel
    and ``NormalUndefinedError`` when ``t x r`` vanishes.
    """
    _check_antiparallel(jet, tol)
    lam = float(np.linalg.norm(jet.xi10))
    mu = float(np.linalg.norm(jet.xi01))
    t = jet.xi10 / lam
    r, s = _rs(jet, t, lam, mu)
    txr = np.cross(t, r)
    norm = np.linalg.norm(txr)
    if norm <= tol.norm * max(np.linalg.norm(r), np.linalg.norm(s), 1e-300) or norm == 0.0:
        raise NormalUndefinedError("t x r vanishes; limit normal not constructible")
    n = txr / norm
    c = np.cross(n, t)
    return CornerFrame(t, lam, mu, r, s, n, c, float(c @ r), float(c @ s))


def classify_corner(jet: CornerJet, tol: Tolerances = DEFAULT_TOL) -> CornerClassification:
    """Classify a corner from its jet.

    Regular corners have linearly independent first partials. Antiparallel
    corners are split by the coplanarity residual ``|det[r, s, t]| / (|r||s|)``
    and the sign of ``<t x r, t x s>``; a quadruple product within the
    degenerate band is reported as ``Degenerate`` without a smoothness claim.
    """
    floor = tol.norm * max(jet.scale, 1e-300)
    if np.linalg.norm(jet.xi10) <= floor or np.linalg.norm(jet.xi01) <= floor:
        return CornerClassification(CornerKind.NOT_ANTIPARALLEL, float("nan"))
    theta = _antiparallel_angle(jet)
    if theta > tol.angle:
        if np.pi - theta <= tol.angle:
            return CornerClassification(CornerKind.NOT_ANTIPARALLEL, theta)
        return CornerClassification(CornerKind.REGULAR, theta)

    lam = float(np.linalg.norm(jet.xi10))
    mu = float(np.linalg.norm(jet.xi01))
    t = jet.xi10 / lam
    r, s = _rs(jet, t, lam, mu)
    rs = np.linalg.norm(r) * np.linalg.norm(s)
    det = float(np.dot(np.cross(r, s), t))
    quad = float(np.dot(np.cross(t, r), np.cross(t, s)))
    cop = abs(det) / rs if rs > 0 else 0.0
    try:
        frame = corner_frame(jet, tol)
    except NormalUndefinedError:
        frame = None

    if rs > 0 and abs(det) > tol.coplanar * rs:
        kind = CornerKind.DISCONTINUOUS_INDEPENDENT
    elif rs > 0 and quad > tol.degenerate * rs:
        kind = CornerKind.ROUNDED
    elif rs > 0 and quad < -tol.degenerate * rs:
        kind = CornerKind.DISCONTINUOUS_OPPOSITE
    else:
        kind = CornerKind.DEGENERATE
    return CornerClassification(kind, theta, cop, quad, frame)


@dataclass
class SplineCornerReport:
    alpha1: float
    alpha2: float
    r_star: np.ndarray
    s_star: np.ndarray
    t_star: np.ndarray
    antiparallel: bool
    coplanar: bool
    onesided: bool
    segment_residual: float
    coplanarity_residual: float
    quadruple: float
    reasons: list[str] = field(default_factory=list)

    @property
    def rounded(self) -> bool:
        return bool(self.antiparallel and self.coplanar and self.onesided)

    def to_dict(self) -> dict:
        return {
            "alpha1": self.alpha1, "alpha2": self.alpha2,
            "r_star": self.r_star.tolist(), "s_star": self.s_star.tolist(),
            "t_star": self.t_star.tolist(),
            "antiparallel": bool(self.antiparallel), "coplanar": bool(self.coplanar),
            "onesided": bool(self.onesided), "all_conditions": bool(self.rounded),
            "segment_residual": float(self.segment_residual),
            "coplanarity_residual": float(self.coplanarity_residual),
            "quadruple_product": float(self.quadruple),
            "reasons": list(self.reasons),
        }


def corner_knot_factors(loc: TensorSurface) -> tuple[float, float, float, float]:
    """First two nonzero knots (tau^1_1, tau^1_2, tau^2_1, tau^2_2) of a local surface."""
    n1, n2 = loc.degrees
    T1, T2 = loc.ku.knots, loc.kv.knots
    return T1[n1 + 1], T1[n1 + 2], T2[n2 + 1], T2[n2 + 2]


def star_vectors(p: np.ndarray, degrees, taus, alpha1: float):
    """r*, s*, t* of a local control net for the given weights."""
    n1, n2 = degrees
    a1, a2, b1, b2 = taus
    alpha2 = 1.0 - alpha1
    r = (n1 - 1) * a1 * alpha1 * (p[2, 0] - p[0, 0]) + n1 * a2 * alpha2 * (p[1, 1] - p[0, 0])
    s = (n2 - 1) * b1 * alpha2 * (p[0, 2] - p[0, 0]) + n2 * b2 * alpha1 * (p[1, 1] - p[0, 0])
    t = p[1, 0] - p[0, 1]
    return r, s, t


def spline_corner_conditions(
    s: TensorSurface, corner: str = "u0v0", tol: Tolerances = DEFAULT_TOL
) -> SplineCornerReport:
    """Check the control-point conditions for a rounded corner.

    The weight ``alpha1`` is recovered by projecting ``p00`` onto the line
    through ``p10`` and ``p01``. Failures are reported through the flags and
    ``reasons`` rather than raised.
    """
    loc = local_surface(s, corner)
    if min(loc.degrees) < 2:
        raise ValueError("control-point conditions require degrees >= 2")
    p = loc.net
    taus = corner_knot_factors(loc)
    t_star = p[1, 0] - p[0, 1]
    tt = float(t_star @ t_star)
    reasons = []
    if tt <= (tol.norm * max(s.diameter, 1e-300)) ** 2:
        nan = float("nan")
        z = np.zeros(3)
        return SplineCornerReport(nan, nan, z, z, t_star, False, False, False, nan, nan, nan,
                                  ["p10 coincides with p01 (t* = 0)"])
    alpha1 = float((p[0, 0] - p[0, 1]) @ t_star / tt)
    alpha2 = 1.0 - alpha1
    seg_res = float(np.linalg.norm(p[0, 0] - (alpha1 * p[1, 0] + alpha2 * p[0, 1])))
    anti = True
    if seg_res > tol.segment * np.sqrt(tt):
        anti = False
        reasons.append(f"p00 is {seg_res:.3e} off the segment [p10, p01]")
    if not 0.0 < alpha1 < 1.0:
        anti = False
        reasons.append(f"alpha1 = {alpha1:.6g} outside (0, 1)")
    r, sv, t = star_vectors(p, loc.degrees, taus, alpha1)
    scale = np.linalg.norm(r) * np.linalg.norm(sv) * np.sqrt(tt)
    det = float(np.dot(np.cross(r, sv), t))
    cop_res = abs(det) / scale if scale > 0 else 0.0
    coplanar = cop_res <= tol.coplanar
    if not coplanar:
        reasons.append(f"r*, s*, t* span R^3 (scaled det {cop_res:.3e})")
    quad = float(np.dot(np.cross(t, r), np.cross(t, sv)))
    onesided = scale > 0 and quad > tol.degenerate * scale * np.sqrt(tt)
    if not onesided:
        reasons.append(f"<t* x r*, t* x s*> = {quad:.3e} is not positive")
    return SplineCornerReport(alpha1, alpha2, r, sv, t, anti, coplanar, onesided,
                              seg_res, cop_res, quad, reasons)


def limit_tangent_projection(frame: CornerFrame, point, origin) -> np.ndarray:
    """Coordinates in the (t, c) basis of the projection of ``point - origin`` onto the limit tangent plane."""
    d = np.asarray(point, dtype=float) - np.asarray(origin, dtype=float)
    d = d - frame.n * (d @ frame.n)
    return np.array([d @ frame.t, d @ frame.c])
