"""Watertight multipatch models: rounded-corner detection and repair.

Repair refits the patch owning a corner with rounded-corner constraints
against its own geometry, then copies the new boundary control points onto
every adjacent patch so shared edges stay identical.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corner import (
    DEFAULT_TOL,
    CornerClassification,
    CornerKind,
    SplineCornerReport,
    Tolerances,
    classify_corner,
    spline_corner_conditions,
)
from .diagnostics import DegeneratePointError, normal_vector
from .fitting import CornerConstraintSpec, FitProblem, FitReport, fit_surface
from .spline import CORNERS, KnotVector, TensorSurface, corner_jet, local_surface

log = logging.getLogger(__name__)

EDGES = ("u0", "u1", "v0", "v1")
CORNER_EDGES = {"u0v0": ("u0", "v0"), "u1v0": ("u1", "v0"), "u1v1": ("u1", "v1"), "u0v1": ("u0", "v1")}
REPAIRABLE = {CornerKind.ROUNDED, CornerKind.DISCONTINUOUS_INDEPENDENT, CornerKind.DEGENERATE}


class EdgeIncompatibilityError(ValueError):
    pass


@dataclass(frozen=True)
class Adjacency:
    a: int
    edge_a: str
    b: int
    edge_b: str
    reversed: bool = False

    def __post_init__(self):
        for e in (self.edge_a, self.edge_b):
            if e not in EDGES:
                raise ValueError(f"unknown edge {e!r}; expected one of {EDGES}")

    def other(self, patch: int, edge: str) -> tuple[int, str] | None:
        if (self.a, self.edge_a) == (patch, edge):
            return self.b, self.edge_b
        if (self.b, self.edge_b) == (patch, edge):
            return self.a, self.edge_a
        return None


@dataclass
class MultipatchModel:
    patches: list[TensorSurface]
    adjacency: list[Adjacency] = field(default_factory=list)

    def __post_init__(self):
        for adj in self.adjacency:
            for i in (adj.a, adj.b):
                if not 0 <= i < len(self.patches):
                    raise ValueError(f"adjacency refers to missing patch {i}")

    def replace(self, index: int, patch: TensorSurface) -> "MultipatchModel":
        patches = list(self.patches)
        patches[index] = patch
        return MultipatchModel(patches, list(self.adjacency))


def edge_slice(edge: str):
    return {"u0": (0, slice(None)), "u1": (-1, slice(None)), "v0": (slice(None), 0), "v1": (slice(None), -1)}[edge]


def edge_points(s: TensorSurface, edge: str) -> np.ndarray:
    return s.net[edge_slice(edge)]


def edge_knots(s: TensorSurface, edge: str) -> KnotVector:
    """Knot vector running along ``edge``."""
    return s.kv if edge.startswith("u") else s.ku


def _normalized(kv: KnotVector, flip: bool) -> np.ndarray:
    t = kv.knots
    x = (t - t[0]) / (t[-1] - t[0])
    return 1.0 - x[::-1] if flip else x


def _check_edge(model: MultipatchModel, adj: Adjacency):
    A, B = model.patches[adj.a], model.patches[adj.b]
    ka, kb = edge_knots(A, adj.edge_a), edge_knots(B, adj.edge_b)
    pa, pb = edge_points(A, adj.edge_a), edge_points(B, adj.edge_b)
    if pa.shape != pb.shape or ka.degree != kb.degree:
        raise EdgeIncompatibilityError(
            f"edge incompatibility: patch {adj.a} edge {adj.edge_a} has {len(pa)} control points "
            f"of degree {ka.degree}, patch {adj.b} edge {adj.edge_b} has {len(pb)} of degree {kb.degree}"
        )
    if not np.allclose(_normalized(ka, False), _normalized(kb, adj.reversed), rtol=0, atol=1e-12):
        raise EdgeIncompatibilityError(
            f"edge incompatibility: knots differ between patch {adj.a} edge {adj.edge_a} "
            f"and patch {adj.b} edge {adj.edge_b}"
        )
    return pa, pb[::-1] if adj.reversed else pb


@dataclass
class WatertightReport:
    gaps: list[float]
    tol: float

    @property
    def passed(self) -> bool:
        return all(g <= self.tol for g in self.gaps)

    def to_dict(self) -> dict:
        return {"gaps": self.gaps, "max_gap": max(self.gaps, default=0.0), "tol": self.tol, "passed": self.passed}


def watertightness_check(model: MultipatchModel, tol: float = 1e-12) -> WatertightReport:
    """Max control-point gap along every shared edge."""
    gaps = []
    for adj in model.adjacency:
        pa, pb = _check_edge(model, adj)
        gaps.append(float(np.linalg.norm(pa - pb, axis=-1).max()))
    return WatertightReport(gaps, tol)


@dataclass
class CornerCandidate:
    patch: int
    corner: str
    classification: CornerClassification
    conditions: SplineCornerReport | None
    adjacencies: list[int]
    normal_source: str = "averaged"

    @property
    def repairable(self) -> bool:
        return self.classification.kind in REPAIRABLE

    @property
    def conforming(self) -> bool:
        return (
            self.classification.kind is CornerKind.ROUNDED
            and self.conditions is not None
            and self.conditions.rounded
        )

    @property
    def needs_repair(self) -> bool:
        return self.repairable and not self.conforming

    def to_dict(self) -> dict:
        return {
            "patch": self.patch,
            "corner": self.corner,
            "classification": self.classification.to_dict(),
            "conditions": None if self.conditions is None else self.conditions.to_dict(),
            "adjacencies": self.adjacencies,
            "repairable": self.repairable,
            "conforming": self.conforming,
            "normal_source": self.normal_source,
        }


@dataclass
class RepairPlan:
    candidates: list[CornerCandidate]

    def to_dict(self) -> dict:
        return {"candidates": [c.to_dict() for c in self.candidates]}


def corner_adjacencies(model: MultipatchModel, patch: int, corner: str) -> list[int]:
    edges = CORNER_EDGES[corner]
    return [
        i for i, adj in enumerate(model.adjacency)
        if any(adj.other(patch, e) is not None for e in edges)
    ]


def _analyze(s: TensorSurface, corner: str, tol: Tolerances):
    cls = classify_corner(corner_jet(s, corner), tol)
    cond = None
    if cls.kind not in (CornerKind.REGULAR, CornerKind.NOT_ANTIPARALLEL):
        cond = spline_corner_conditions(s, corner, tol)
    return cls, cond


def detect_rounded_corners(model: MultipatchModel, tol: Tolerances = DEFAULT_TOL) -> RepairPlan:
    """List every patch corner with antiparallel first partials, with its classification."""
    out = []
    for i, s in enumerate(model.patches):
        if min(s.degrees) < 2:
            continue
        for corner in CORNERS:
            cls, cond = _analyze(s, corner, tol)
            if cls.kind in (CornerKind.REGULAR, CornerKind.NOT_ANTIPARALLEL):
                continue
            out.append(CornerCandidate(i, corner, cls, cond, corner_adjacencies(model, i, corner)))
    return RepairPlan(out)


def default_corner_normal(s: TensorSurface, corner: str, d: float = 1e-3) -> np.ndarray:
    """Average of the normals at local d*(1, 1/2) and d*(1/2, 1), made orthogonal to the corner tangent."""
    loc = local_surface(s, corner)
    H = min(loc.ku.domain[1], loc.kv.domain[1])
    h = d * H
    acc = np.zeros(3)
    for st in ((h, 0.5 * h), (0.5 * h, h)):
        try:
            acc += normal_vector(loc, *st)
        except DegeneratePointError:
            continue
    t = loc.derivative(0, 0, 1, 0)
    t = t / np.linalg.norm(t)
    acc -= t * (acc @ t)
    norm = np.linalg.norm(acc)
    if norm == 0:
        raise DegeneratePointError(f"cannot estimate a normal at corner {corner}")
    return acc / norm


@dataclass
class RepairConfig:
    normal: np.ndarray | None = None
    alpha1: float | None = None
    two_step: bool = True
    quad_points: int | None = None
    tol: Tolerances = DEFAULT_TOL


@dataclass
class RepairResult:
    patch: int
    corner: str
    fit: FitReport
    updated_adjacencies: list[int]
    conflicts: list[str]

    def to_dict(self) -> dict:
        return {
            "patch": self.patch, "corner": self.corner, "fit": self.fit.to_dict(),
            "updated_adjacencies": self.updated_adjacencies, "conflicts": self.conflicts,
        }


def surface_target(s: TensorSurface):
    """Wrap a surface as a fit target on ``ij``-meshgrid parameter arrays."""

    def target(U, V):
        U, V = np.asarray(U, dtype=float), np.asarray(V, dtype=float)
        if U.ndim == 2 and np.all(U == U[:, :1]) and np.all(V == V[:1, :]):
            return s.grid(U[:, 0], V[0, :])
        flat = [s(u, v) for u, v in zip(U.ravel(), V.ravel())]
        return np.asarray(flat).reshape(U.shape + (3,))

    return target


def _constraint_for(s: TensorSurface, corner: str, cfg: RepairConfig, cls, cond) -> CornerConstraintSpec:
    if cls.kind is CornerKind.ROUNDED and cond is not None and cond.rounded:
        # Keep an already-conforming corner exactly as it is.
        alpha1 = cond.alpha1 if cfg.alpha1 is None else cfg.alpha1
        n = cls.frame.n if cfg.normal is None else cfg.normal
    else:
        alpha1 = 0.5 if cfg.alpha1 is None else cfg.alpha1
        n = default_corner_normal(s, corner) if cfg.normal is None else cfg.normal
    n = np.asarray(n, dtype=float)
    return CornerConstraintSpec(corner, n / np.linalg.norm(n), alpha1)


def _conforming_corners(model: MultipatchModel, tol: Tolerances) -> set[tuple[int, str]]:
    out = set()
    for i, s in enumerate(model.patches):
        if min(s.degrees) < 2:
            continue
        for corner in CORNERS:
            cls, cond = _analyze(s, corner, tol)
            if cls.kind is CornerKind.ROUNDED and cond is not None and cond.rounded:
                out.add((i, corner))
    return out


def repair_corner(
    model: MultipatchModel, candidate: CornerCandidate, config: RepairConfig | None = None
) -> tuple[MultipatchModel, RepairResult]:
    """Refit one corner with rounded-corner constraints and propagate its boundary."""
    cfg = config or RepairConfig()
    i, corner = candidate.patch, candidate.corner
    s = model.patches[i]
    for k in corner_adjacencies(model, i, corner):
        _check_edge(model, model.adjacency[k])
    before = _conforming_corners(model, cfg.tol)

    cls, cond = _analyze(s, corner, cfg.tol)
    specs = [_constraint_for(s, corner, cfg, cls, cond)]
    # Other corners of the same patch that already conform keep their constraints.
    for other in CORNERS:
        if other != corner and (i, other) in before:
            ocls, ocond = _analyze(s, other, cfg.tol)
            specs.append(_constraint_for(s, other, RepairConfig(tol=cfg.tol), ocls, ocond))
    problem = FitProblem(s.ku, s.kv, surface_target(s), specs, cfg.quad_points, cfg.two_step)
    fit = fit_surface(problem, cfg.tol)
    new = model.replace(i, fit.surface)

    updated = []
    for k, adj in enumerate(model.adjacency):
        for edge in EDGES:
            hit = adj.other(i, edge)
            if hit is None:
                continue
            j, edge_j = hit
            src = edge_points(new.patches[i], edge)
            src = src[::-1] if adj.reversed else src
            old = edge_points(new.patches[j], edge_j)
            if np.array_equal(src, old):
                continue
            net = new.patches[j].net.copy()
            net[edge_slice(edge_j)] = src
            new = new.replace(j, new.patches[j].with_net(net))
            updated.append(k)

    after = _conforming_corners(new, cfg.tol)
    conflicts = [f"patch {p} corner {c} no longer satisfies the rounded-corner conditions"
                 for p, c in sorted(before - after)]
    if (i, corner) not in after:
        conflicts.append(f"patch {i} corner {corner} does not satisfy the conditions after repair")
    for msg in conflicts:
        log.warning(msg)
    return new, RepairResult(i, corner, fit, sorted(set(updated)), conflicts)


def repair_model(
    model: MultipatchModel, plan: RepairPlan | None = None, config: RepairConfig | None = None
) -> tuple[MultipatchModel, list[RepairResult]]:
    """Repair every candidate that needs it, serially in plan order."""
    plan = plan or detect_rounded_corners(model, (config or RepairConfig()).tol)
    results = []
    for cand in plan.candidates:
        if not cand.needs_repair:
            continue
        model, res = repair_corner(model, cand, config)
        results.append(res)
    return model, results


def two_patch_model() -> MultipatchModel:
    """Patch 0 has an antiparallel but non-coplanar corner at (0, 0); patch 1 shares its v0 edge."""
    ku = KnotVector(3, [0, 0, 0, 0, 0.5, 1, 1, 1, 1])
    g = np.array([0.0, 1 / 6, 0.5, 5 / 6, 1.0])  # Greville abscissae
    J, K = np.meshgrid(g, g, indexing="ij")
    z = 0.3 * J * K
    z[:, 0] = [0.0, 0.0, 0.05, 0.1, 0.2]
    netA = np.stack([J - K, 2 * J * K, z], -1)
    A = TensorSurface(ku, ku, netA)
    edge = netA[:, 0]
    w = np.array([1.0, 0.5, 0.0])
    netB = np.stack([edge + np.array([0.0, -wk, 0.05 * wk]) for wk in w], axis=1)
    B = TensorSurface(ku, KnotVector(2, [0, 0, 0, 1, 1, 1]), netB)
    return MultipatchModel([A, B], [Adjacency(0, "v0", 1, "v1", False)])
