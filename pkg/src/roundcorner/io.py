"""JSON reading and writing for surfaces, multipatch models and fit configurations.

Malformed input raises :class:`InputError` whose message names the offending
field (or the line and column for JSON syntax errors).
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .fitting import CornerConstraintSpec, FitProblem
from .multipatch import EDGES, Adjacency, MultipatchModel
from .spline import CORNERS, KnotVector, TensorSurface

SCHEMA_VERSION = 1


class InputError(ValueError):
    """Invalid user input; maps to exit code 2 on the command line."""


def parse_json(text: str, source: str = "<input>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def read_json(path) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read file ({exc.strerror})") from None
    return parse_json(text, str(path))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _finite(obj):
    # JSON has no NaN/Infinity; emit null instead.
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def dumps(obj) -> str:
    """Deterministic JSON text with a trailing newline."""
    plain = json.loads(json.dumps(obj, default=_json_default))
    return json.dumps(_finite(plain), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _field(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise InputError(f"{where}: expected a JSON object")
    if key not in d:
        raise InputError(f"{where}: missing field '{key}'")
    return d[key]


def _int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputError(f"field '{name}': expected an integer, got {value!r}")
    return value


def _floats(value, name: str, ndim: int) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"field '{name}': expected numbers") from None
    if arr.ndim != ndim:
        raise InputError(f"field '{name}': expected a {ndim}-dimensional array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"field '{name}': contains non-finite values")
    return arr


def surface_from_dict(d: dict, where: str = "surface") -> TensorSurface:
    du = _int(_field(d, "degree_u", where), f"{where}.degree_u")
    dv = _int(_field(d, "degree_v", where), f"{where}.degree_v")
    tu = _floats(_field(d, "knots_u", where), f"{where}.knots_u", 1)
    tv = _floats(_field(d, "knots_v", where), f"{where}.knots_v", 1)
    net = _floats(_field(d, "control_points", where), f"{where}.control_points", 3)
    try:
        ku = KnotVector(du, tu)
    except ValueError as exc:
        raise InputError(f"field '{where}.knots_u': {exc}") from None
    try:
        kv = KnotVector(dv, tv)
    except ValueError as exc:
        raise InputError(f"field '{where}.knots_v': {exc}") from None
    try:
        return TensorSurface(ku, kv, net)
    except ValueError as exc:
        raise InputError(f"field '{where}.control_points': {exc}") from None


def surface_to_dict(s: TensorSurface) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "degree_u": s.ku.degree,
        "degree_v": s.kv.degree,
        "knots_u": s.ku.knots.tolist(),
        "knots_v": s.kv.knots.tolist(),
        "control_points": s.net.tolist(),
    }


def model_from_dict(d: dict) -> MultipatchModel:
    patches = _field(d, "patches", "model")
    if not isinstance(patches, list):
        raise InputError("field 'patches': expected a list")
    surfs = [surface_from_dict(p, f"patches[{i}]") for i, p in enumerate(patches)]
    adj = []
    for i, a in enumerate(d.get("adjacency", [])):
        where = f"adjacency[{i}]"
        rec = {k: _field(a, k, where) for k in ("a", "edge_a", "b", "edge_b", "reversed")}
        for k in ("a", "b"):
            idx = _int(rec[k], f"{where}.{k}")
            if not 0 <= idx < len(surfs):
                raise InputError(f"field '{where}.{k}': no patch with index {idx}")
        for k in ("edge_a", "edge_b"):
            if rec[k] not in EDGES:
                raise InputError(f"field '{where}.{k}': expected one of {list(EDGES)}, got {rec[k]!r}")
        if not isinstance(rec["reversed"], bool):
            raise InputError(f"field '{where}.reversed': expected true or false")
        adj.append(Adjacency(rec["a"], rec["edge_a"], rec["b"], rec["edge_b"], rec["reversed"]))
    return MultipatchModel(surfs, adj)


def model_to_dict(m: MultipatchModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "patches": [surface_to_dict(s) for s in m.patches],
        "adjacency": [
            {"a": a.a, "edge_a": a.edge_a, "b": a.b, "edge_b": a.edge_b, "reversed": a.reversed}
            for a in m.adjacency
        ],
    }


def read_surface(path) -> TensorSurface:
    return surface_from_dict(read_json(path), str(path))


def read_model(path) -> MultipatchModel:
    return model_from_dict(read_json(path))


def fit_config_from_dict(d: dict) -> dict:
    """Validated hemisphere fit configuration as keyword arguments.

    Returns ``degree``, ``level``, ``scheme``, ``two_step``, ``quad_points``
    and ``corners`` (a mapping corner id to ``(alpha1, normal or None)``).
    """
    out = {
        "degree": _int(_field(d, "degree", "config"), "degree"),
        "level": _int(_field(d, "level", "config"), "level"),
        "scheme": d.get("scheme", "standard"),
        "two_step": d.get("two_step", True),
        "quad_points": d.get("quad_points"),
        "corners": {},
    }
    if out["scheme"] not in ("standard", "rcc"):
        raise InputError(f"field 'scheme': expected 'standard' or 'rcc', got {out['scheme']!r}")
    if not isinstance(out["two_step"], bool):
        raise InputError("field 'two_step': expected true or false")
    if out["quad_points"] is not None:
        _int(out["quad_points"], "quad_points")
    for i, c in enumerate(d.get("corners", [])):
        cid = _field(c, "id", f"corners[{i}]")
        if cid not in CORNERS:
            raise InputError(f"field 'corners[{i}].id': expected one of {list(CORNERS)}, got {cid!r}")
        alpha1 = c.get("alpha1", 0.5)
        if not isinstance(alpha1, (int, float)) or not 0 < alpha1 < 1:
            raise InputError(f"field 'corners[{i}].alpha1': expected a number in (0, 1)")
        normal = c.get("normal")
        if normal is not None:
            normal = _floats(normal, f"corners[{i}].normal", 1)
            if normal.shape != (3,) or np.linalg.norm(normal) == 0:
                raise InputError(f"field 'corners[{i}].normal': expected a nonzero 3-vector")
            normal = normal / np.linalg.norm(normal)
        out["corners"][cid] = (float(alpha1), normal)
    return out


def hemisphere_problem_from_config(d: dict) -> FitProblem:
    from .hemisphere import corner_normal, hemisphere_problem

    cfg = fit_config_from_dict(d)
    prob = hemisphere_problem(cfg["degree"], cfg["level"], cfg["scheme"], cfg["two_step"], cfg["quad_points"])
    if cfg["scheme"] == "rcc" and cfg["corners"]:
        specs = []
        for spec in prob.constraints:
            alpha1, normal = cfg["corners"].get(spec.corner, (spec.alpha1, None))
            n = corner_normal(spec.corner) if normal is None else normal
            specs.append(CornerConstraintSpec(spec.corner, n, alpha1))
        prob = FitProblem(prob.ku, prob.kv, prob.target, specs, prob.quad_points, prob.two_step)
    return prob
