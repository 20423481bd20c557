"""Unit hemisphere over [-1, 1]^2 with four rounded corners, and the fitting experiment on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import DEFAULT_ALPHAS, ProbeSeries, angle_between
from .fitting import CornerConstraintSpec, FitProblem, FitReport, fit_surface
from .spline import KnotVector, TensorSurface, corner_map

CORNER_PARAMS = {"u0v0": (-1.0, -1.0), "u1v0": (1.0, -1.0), "u1v1": (1.0, 1.0), "u0v1": (-1.0, 1.0)}
SCHEMES = ("standard", "rcc")


def hemisphere_reference(u, v) -> np.ndarray:
    """Point on the unit upper hemisphere; vectorized over broadcastable ``u``, ``v``.

    Radial projection of ``(u sqrt(1 - v^2/2), v sqrt(1 - u^2/2), (1 - u^2)(1 - v^2))``.
    The boundary of the square goes to the equator, the corners to the points
    at 45 degrees, and the map is analytic on the closed square.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    F = np.stack(
        [u * np.sqrt(1 - 0.5 * v * v), v * np.sqrt(1 - 0.5 * u * u), (1 - u * u) * (1 - v * v)], -1
    )
    return F / np.linalg.norm(F, axis=-1, keepdims=True)


def corner_normal(corner: str) -> np.ndarray:
    """Exact sphere normal at the image of a domain corner."""
    y = hemisphere_reference(*CORNER_PARAMS[corner])
    return y / np.linalg.norm(y)


def hemisphere_space(degree: int, level: int) -> KnotVector:
    """Uniform clamped knots on [-1, 1] with spacing 2**-level."""
    if degree < 2 or level < 1:
        raise ValueError("need degree >= 2 and level >= 1")
    return KnotVector.uniform(degree, 2 ** (level + 1), -1.0, 1.0)


def hemisphere_problem(
    degree: int, level: int, scheme: str = "standard", two_step: bool = True,
    quad_points: int | None = None, alpha1: float = 0.5,
) -> FitProblem:
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    kv = hemisphere_space(degree, level)
    cons = []
    if scheme == "rcc":
        cons = [CornerConstraintSpec(c, corner_normal(c), alpha1) for c in CORNER_PARAMS]
    return FitProblem(kv, kv, hemisphere_reference, cons, quad_points, two_step)


def max_normal_angle(surface: TensorSurface, samples: int = 200) -> float:
    """Largest angle between fitted and exact normals over cell midpoints of a samples^2 grid."""
    (a, b), (c, d) = surface.domain
    us = a + (np.arange(samples) + 0.5) * (b - a) / samples
    vs = c + (np.arange(samples) + 0.5) * (d - c) / samples
    nu = np.cross(surface.grid(us, vs, 1, 0), surface.grid(us, vs, 0, 1))
    U, V = np.meshgrid(us, vs, indexing="ij")
    return float(angle_between(nu, hemisphere_reference(U, V)).max())


def diagonal_probe(surface: TensorSurface, corner: str = "u0v0", alphas=None) -> ProbeSeries:
    """Normal error against the exact sphere normal at local (alpha, alpha) from a corner."""
    a = np.sort(DEFAULT_ALPHAS if alphas is None else np.asarray(alphas, dtype=float))[::-1]
    m = corner_map(surface, corner)
    vals = []
    for x in a:
        u, v = m.to_global(x, x)
        nu = np.cross(surface.derivative(u, v, 1, 0), surface.derivative(u, v, 0, 1))
        vals.append(float(angle_between(nu, hemisphere_reference(u, v))))
    return ProbeSeries.build(a, vals)


@dataclass
class HemisphereRun:
    degree: int
    level: int
    scheme: str
    report: FitReport
    max_normal_angle: float
    probe: ProbeSeries

    def row(self) -> dict:
        return {
            "degree": self.degree, "level": self.level, "scheme": self.scheme,
            "max_error": self.report.max_error, "max_normal_angle": self.max_normal_angle,
            "l2_error": self.report.l2_residual,
            "constraint_residual": self.report.constraint_residual,
            "onesided": all(self.report.onesided.values()) if self.report.onesided else "",
        }


def run_hemisphere(degree: int, level: int, scheme: str, two_step: bool = True, alphas=None) -> HemisphereRun:
    rep = fit_surface(hemisphere_problem(degree, level, scheme, two_step))
    return HemisphereRun(
        degree, level, scheme, rep, max_normal_angle(rep.surface), diagonal_probe(rep.surface, alphas=alphas)
    )


def eoc(errors) -> list[float]:
    """Estimated orders of convergence between consecutive halvings of h."""
    e = np.asarray(errors, dtype=float)
    return [float("nan")] + [float(x) for x in np.log2(e[:-1] / e[1:])]
