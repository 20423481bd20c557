"""Command-line front end: check, hemisphere, diagnose, repair, fixtures.

Exit codes: 0 success, 1 numerical failure or unresolved repair conflict,
2 invalid input. All outputs are deterministic; CSV files start with a
header row and JSON reports carry ``schema_version``.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .corner import CornerKind, classify_corner, spline_corner_conditions
from .fitting import FitError, fit_surface
from .fixtures import FIXTURES, make_fixture, random_rounded_surface
from .hemisphere import SCHEMES, diagonal_probe, eoc, hemisphere_problem, max_normal_angle
from .io import (
    SCHEMA_VERSION,
    InputError,
    dumps,
    hemisphere_problem_from_config,
    model_from_dict,
    model_to_dict,
    read_json,
    read_model,
    read_surface,
    surface_to_dict,
)
from .multipatch import (
    EdgeIncompatibilityError,
    RepairConfig,
    detect_rounded_corners,
    repair_corner,
    two_patch_model,
    watertightness_check,
)
from .spline import CORNERS, corner_jet

log = logging.getLogger("roundcorner")

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2
FIXTURE_PREFIX = "fixture:"


def _load_surface(ref: str):
    if ref.startswith(FIXTURE_PREFIX):
        try:
            return make_fixture(ref[len(FIXTURE_PREFIX):])
        except ValueError as exc:
            raise InputError(str(exc)) from None
    return read_surface(ref)


def _alphas(args) -> np.ndarray:
    lo, hi = args.probe_min, args.probe_max
    if not 0 < lo < hi:
        raise InputError("need 0 < --probe-min < --probe-max")
    count = int(round(4 * np.log10(hi / lo))) + 1
    return np.logspace(np.log10(hi), np.log10(lo), max(count, 3))


def _emit(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def corner_report(s, corner: str) -> dict:
    if min(s.degrees) < 2:
        raise InputError("corner analysis needs degrees >= 2 in both directions")
    cls = classify_corner(corner_jet(s, corner))
    out = {"corner": corner, "classification": cls.to_dict()}
    if cls.kind not in (CornerKind.REGULAR, CornerKind.NOT_ANTIPARALLEL):
        out["conditions"] = spline_corner_conditions(s, corner).to_dict()
    return out


def _load_patches(ref: str, patch: int | None) -> list[tuple[int | None, object]]:
    """Single surface, or the patches of a multipatch model file."""
    if not ref.startswith(FIXTURE_PREFIX):
        data = read_json(ref)
        if isinstance(data, dict) and "patches" in data:
            model = model_from_dict(data)
            if patch is None:
                return list(enumerate(model.patches))
            if not 0 <= patch < len(model.patches):
                raise InputError(f"--patch {patch}: model has {len(model.patches)} patches")
            return [(patch, model.patches[patch])]
    return [(None, _load_surface(ref))]


def cmd_check(args) -> int:
    corners = [args.corner] if args.corner else list(CORNERS)
    entries = []
    for idx, s in _load_patches(args.surface, args.patch):
        for c in corners:
            rep = corner_report(s, c)
            if idx is not None:
                rep["patch"] = idx
            entries.append(rep)
    report = {"schema_version": SCHEMA_VERSION, "surface": args.surface, "corners": entries}
    _emit(dumps(report), args.out)
    return EXIT_OK


def cmd_hemisphere(args) -> int:
    alphas = _alphas(args)
    schemes = SCHEMES if args.scheme == "both" else (args.scheme,)
    if args.config is not None:
        prob = hemisphere_problem_from_config(read_json(args.config))
        cells = [(prob.ku.degree, None, None, prob)]
    else:
        if min(args.degree) < 2 or min(args.levels) < 1:
            raise InputError("need --degree >= 2 and --levels >= 1")
        cells = [(n, l, sc, None) for sc in schemes for n in args.degree for l in sorted(args.levels)]

    table, probes, status = [], [], EXIT_OK
    for n, level, scheme, prob in cells:
        if prob is not None:
            level = int(round(np.log2(prob.ku.size - n))) - 1
            scheme = "rcc" if prob.constraints else "standard"
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = fit_surface(prob or hemisphere_problem(n, level, scheme))
            angle = max_normal_angle(rep.surface)
            probe = diagonal_probe(rep.surface, alphas=alphas)
            onesided = all(rep.onesided.values()) if rep.onesided else None
            table.append([scheme, n, level, rep.max_error, angle, rep.l2_residual,
                          rep.constraint_residual, onesided, "ok"])
            probes.append(((scheme, n, level), probe))
        except (FitError, ArithmeticError, np.linalg.LinAlgError) as exc:
            table.append([scheme, n, level, float("nan"), float("nan"), float("nan"),
                          float("nan"), None, f"error: {exc}"])
            status = EXIT_NUMERICAL

    rows = []
    for key in dict.fromkeys((r[0], r[1]) for r in table):
        grp = [r for r in table if (r[0], r[1]) == key]
        e_err, e_ang = eoc([r[3] for r in grp]), eoc([r[4] for r in grp])
        rows += [r[:8] + [a, b, r[8]] for r, a, b in zip(grp, e_err, e_ang)]
    header = ["scheme", "degree", "level", "max_error", "max_normal_angle", "l2_error",
              "constraint_residual", "onesided", "eoc_max_error", "eoc_max_normal_angle", "status"]
    conv = _csv(header, rows)
    probe_csv = _csv(
        ["scheme", "degree", "level", "alpha", "angle"],
        [[*k, float(a), float(v)] for k, p in probes for a, v in zip(p.parameters, p.values)],
    )
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": {"degrees": args.degree, "levels": args.levels, "scheme": args.scheme,
                   "probe_min": args.probe_min, "probe_max": args.probe_max, "seed": args.seed},
        "rows": [dict(zip(header, r)) for r in rows],
        "probe_rates": [{"scheme": k[0], "degree": k[1], "level": k[2], "rate": p.fitted_rate}
                        for k, p in probes],
    }
    if args.out is None:
        sys.stdout.write(conv)
    else:
        _emit(conv, args.out / "hemisphere_convergence.csv")
        _emit(probe_csv, args.out / "hemisphere_probes.csv")
        _emit(dumps(summary), args.out / "hemisphere_summary.json")
    return status


def _diagnose_corner(s, corner: str, alphas) -> dict:
    out = corner_report(s, corner)
    kind = CornerKind(out["classification"]["kind"])
    probes = {}
    if kind is CornerKind.ROUNDED:
        probes["normal_convergence"] = dg.normal_convergence_probe(s, corner, alphas=alphas).to_dict()
        probes["cross_norm_ratio"] = dg.cross_norm_asymptotics(s, corner, alphas=alphas).to_dict()
        probes["curvature_scale"] = dg.diagonal_curvature_scale(s, corner, alphas=alphas).to_dict()
    elif kind in (CornerKind.DISCONTINUOUS_OPPOSITE, CornerKind.DISCONTINUOUS_INDEPENDENT):
        probes["axis_normal_angle"] = dg.axis_normal_limits(s, corner, alphas=alphas).to_dict()
    out["probes"] = probes
    if kind is not CornerKind.REGULAR:
        w = dg.injectivity_probe(s, corner)
        out["injectivity_witness"] = None if w is None else w.to_dict()
    return out


def cmd_diagnose(args) -> int:
    s = _load_surface(args.surface)
    alphas = _alphas(args)
    corners = [args.corner] if args.corner else list(CORNERS)
    direction = np.asarray(args.direction, dtype=float)
    if np.linalg.norm(direction) == 0:
        raise InputError("--direction must be nonzero")
    rows, singular = dg.sample_fields(s, args.samples, args.samples, direction)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = {
            "schema_version": SCHEMA_VERSION,
            "surface": args.surface,
            "corners": [_diagnose_corner(s, c, alphas) for c in corners],
            "singular_samples": [list(p) for p in singular],
        }
    for u, v in singular:
        log.warning("singular sample at (%r, %r)", u, v)
    if args.out is None:
        sys.stdout.write(dumps(report))
    else:
        _emit(dg.fields_csv(rows), args.out / "fields.csv")
        _emit(dumps(report), args.out / "diagnostics.json")
    return EXIT_OK


def cmd_repair(args) -> int:
    model = read_model(args.model)
    cfg = RepairConfig(two_step=not args.single_step)
    before_gaps = watertightness_check(model).to_dict()
    plan = detect_rounded_corners(model)
    results, conflicts = [], []
    for cand in plan.candidates:
        if not cand.needs_repair:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model, res = repair_corner(model, cand, cfg)
        results.append(res.to_dict())
        conflicts += res.conflicts
    after_plan = detect_rounded_corners(model)
    report = {
        "schema_version": SCHEMA_VERSION,
        "before": {"watertightness": before_gaps, "candidates": plan.to_dict()["candidates"]},
        "repairs": results,
        "after": {"watertightness": watertightness_check(model).to_dict(),
                  "candidates": after_plan.to_dict()["candidates"]},
        "conflicts": conflicts,
        "written": bool(args.out is not None and (not conflicts or args.force)),
    }
    if report["written"]:
        _emit(dumps(model_to_dict(model)), args.out)
    _emit(dumps(report), args.report)
    for msg in conflicts:
        print(f"conflict: {msg}", file=sys.stderr)
    return EXIT_NUMERICAL if conflicts else EXIT_OK


def cmd_fixtures(args) -> int:
    out = args.out or Path(".")
    for name in sorted(FIXTURES):
        _emit(dumps(surface_to_dict(make_fixture(name))), out / f"{name}.json")
    _emit(dumps(model_to_dict(two_patch_model())), out / "two_patch_model.json")
    rng = np.random.default_rng(args.seed)
    s, corner, alpha1, n = random_rounded_surface(rng)
    rec = surface_to_dict(s)
    rec["rounded_corner"] = {"corner": corner, "alpha1": alpha1, "normal": n.tolist(), "seed": args.seed}
    _emit(dumps(rec), out / "random_rounded.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="roundcorner", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, probes=False):
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--seed", type=int, default=0)
        if probes:
            p.add_argument("--probe-min", type=float, default=1e-7)
            p.add_argument("--probe-max", type=float, default=1e-1)

    p = sub.add_parser("check", help="classify corners and check control-point conditions")
    p.add_argument("surface", help=f"surface or multipatch JSON file, or {FIXTURE_PREFIX}NAME")
    p.add_argument("--corner", choices=CORNERS)
    p.add_argument("--patch", type=int, help="patch index when checking a multipatch file")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("hemisphere", help="hemisphere convergence sweep")
    p.add_argument("--degree", type=int, nargs="+", default=[2, 3])
    p.add_argument("--levels", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--scheme", choices=(*SCHEMES, "both"), default="both")
    p.add_argument("--config", type=Path, help="fit configuration JSON for a single run")
    common(p, probes=True)
    p.set_defaults(func=cmd_hemisphere)

    p = sub.add_parser("diagnose", help="sampled fields and corner probes")
    p.add_argument("surface", help=f"surface JSON file or {FIXTURE_PREFIX}NAME")
    p.add_argument("--corner", choices=CORNERS)
    p.add_argument("--samples", type=int, default=41)
    p.add_argument("--direction", type=float, nargs=3, default=[0.0, 0.0, 1.0])
    common(p, probes=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("repair", help="detect and repair rounded corners in a multipatch model")
    p.add_argument("model")
    p.add_argument("--report", type=Path, default=None, help="report file (default stdout)")
    p.add_argument("--force", action="store_true", help="write the model even with conflicts")
    p.add_argument("--single-step", action="store_true", help="fit in one step instead of two")
    common(p)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("fixtures", help="write the built-in fixtures as JSON")
    common(p)
    p.set_defaults(func=cmd_fixtures)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, EdgeIncompatibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FitError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
