"""Command-line shell over the library pipeline.

Every subcommand reads a JSON map description, runs one operation, and
prints a JSON run report to stdout.  Reports carry no wall-clock data and
all floats are printed through one formatter, so identical invocations
produce identical bytes.

Exit codes: 0 on success, 2 on input or processing errors, 3 when
``--strict`` is set and the mathematical answer is negative (a certificate
was not granted, maps compared "no"/"unknown", a search came back empty, or
a seed stayed unresolved).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .algebra import Polynomial, normalize
from .errors import NewtonDynError
from .graphs import (
    DEFAULT_TRACE,
    comb_equivalent,
    export_graph_text,
    faces,
    pull_back,
    trace_delta0,
)
from .kneading import kneading_sequence, kneading_text
from .newton_map import (
    INFINITY,
    NewtonMap,
    build,
    critical_set,
    fixed_point_data,
    head_verify,
    is_infinity,
)
from .orbits import (
    DEEP_BUDGET,
    DEFAULT_BUDGET,
    AttractingCycle,
    ConvergedToRoot,
    LandsOnInfinity,
    OrbitBudget,
    Unresolved,
    certify_hyperbolic,
    classify,
)
from .render import (
    UNRESOLVED_CODE,
    Viewport,
    default_palette,
    render_basins,
    render_tau,
    write_ppm,
)
from .search import default_search_config, find_hyperbolic_near, params_of


class _InputError(Exception):
    pass


# -- deterministic JSON ------------------------------------------------------


def _fmt_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        return "null"
    return format(x, ".17g")


def _emit(o, parts: list, pad: str) -> None:
    if o is None:
        parts.append("null")
    elif o is True:
        parts.append("true")
    elif o is False:
        parts.append("false")
    elif isinstance(o, str):
        parts.append(json.dumps(o))
    elif is_infinity(o):
        parts.append('"inf"')
    elif isinstance(o, (int, np.integer)):
        parts.append(str(int(o)))
    elif isinstance(o, (float, np.floating)):
        parts.append(_fmt_float(float(o)))
    elif isinstance(o, complex):
        parts.append(f"[{_fmt_float(o.real)}, {_fmt_float(o.imag)}]")
    elif isinstance(o, dict):
        if not o:
            parts.append("{}")
            return
        parts.append("{")
        inner = pad + "  "
        for k, (key, val) in enumerate(o.items()):
            parts.append(("\n" if k == 0 else ",\n") + inner + json.dumps(str(key)) + ": ")
            _emit(val, parts, inner)
        parts.append("\n" + pad + "}")
    elif isinstance(o, (list, tuple)):
        if len(o) == 0:
            parts.append("[]")
            return
        parts.append("[")
        inner = pad + "  "
        for k, val in enumerate(o):
            parts.append(("\n" if k == 0 else ",\n") + inner)
            _emit(val, parts, inner)
        parts.append("\n" + pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(o).__name__}")


def report_text(report: dict) -> str:
    parts: list[str] = []
    _emit(report, parts, "")
    return "".join(parts)


# -- input parsing -----------------------------------------------------------


def _num(x) -> complex:
    if isinstance(x, bool):
        raise _InputError("numbers must be reals or [re, im] pairs")
    if isinstance(x, (int, float)):
        return complex(float(x), 0.0)
    if (
        isinstance(x, list)
        and len(x) == 2
        and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in x)
    ):
        return complex(float(x[0]), float(x[1]))
    raise _InputError("numbers must be reals or [re, im] pairs")


def load_map_spec(path: str) -> tuple[NewtonMap, dict]:
    """Build a Newton map from a JSON file with "coeffs" or "roots"."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise _InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _InputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise _InputError(f"{path} must hold a JSON object")
    has_c, has_r = "coeffs" in data, "roots" in data
    if has_c == has_r:
        raise _InputError("give exactly one of \"coeffs\" and \"roots\"")
    if has_c:
        coeffs = [_num(c) for c in data["coeffs"]]
        if len(coeffs) < 2:
            raise _InputError("coeffs must span at least degree 1")
        p = Polynomial(tuple(coeffs))
    else:
        root_list = [_num(r) for r in data["roots"]]
        if not root_list:
            raise _InputError("roots list is empty")
        acc = [complex(1.0, 0.0)]
        for r in root_list:
            acc = [complex(0)] + acc
            for k in range(len(acc) - 1):
                acc[k] -= r * acc[k + 1]
        p = Polynomial(tuple(acc))
    if data.get("normalize"):
        p, _ = normalize(p)
    try:
        return build(p), data
    except NewtonDynError as exc:
        raise _InputError(f"{path}: {exc}") from exc


def _parse_complex(text: str) -> complex:
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise _InputError(f"expected re or re,im but got {text!r}")


def _parse_pixels(text: str) -> tuple[int, int]:
    parts = text.split(",")
    try:
        if len(parts) == 1:
            n = int(parts[0])
            return n, n
        if len(parts) == 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise _InputError(f"expected N or X,Y pixel counts but got {text!r}")


def _parse_box(text: str) -> list[tuple[float, float]]:
    out = []
    for axis in text.split(","):
        ends = axis.split(":")
        try:
            if len(ends) == 1:
                v = float(ends[0])
                out.append((v, v))
                continue
            if len(ends) == 2:
                out.append((float(ends[0]), float(ends[1])))
                continue
        except ValueError:
            pass
        raise _InputError(f"box axes look like lo:hi, got {axis!r}")
    return out


def _parse_resolution(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise _InputError(f"resolution must be integers, got {text!r}")


# -- config plumbing ---------------------------------------------------------


def _budget_of(args) -> tuple[OrbitBudget, str]:
    name = args.profile
    b = DEEP_BUDGET if name == "deep" else DEFAULT_BUDGET
    if args.budget_iter is not None:
        if args.budget_iter < 1:
            raise _InputError("--budget-iter must be >= 1")
        b = replace(b, max_iter=args.budget_iter)
    if args.eps_root is not None:
        if args.eps_root <= 0:
            raise _InputError("--eps-root must be positive")
        b = replace(b, eps_root=args.eps_root)
    return b, name


def _budget_dict(b: OrbitBudget) -> dict:
    return {
        "max_iter": b.max_iter,
        "eps_root": b.eps_root,
        "eps_cycle": b.eps_cycle,
        "contraction_margin": b.contraction_margin,
        "chart_radius": b.chart_radius,
    }


def _config_dict(args, b: OrbitBudget, name: str) -> dict:
    return {
        "profile": name,
        "budget": _budget_dict(b),
        "threads": args.threads,
        "strict": bool(args.strict),
    }


def _envelope(command: str, inputs: dict, config: dict, results) -> dict:
    return {
        "command": command,
        "version": __version__,
        "inputs": inputs,
        "config": config,
        "results": results,
        "timings": None,
    }


def _verdict_dict(v) -> dict:
    if isinstance(v, ConvergedToRoot):
        return {
            "kind": "converged_to_root",
            "root_index": v.root_index,
            "hitting_time": v.hitting_time,
        }
    if isinstance(v, AttractingCycle):
        return {
            "kind": "attracting_cycle",
            "period": v.period,
            "representative": v.representative,
            "multiplier": v.multiplier,
            "hitting_time": v.hitting_time,
        }
    if isinstance(v, LandsOnInfinity):
        return {"kind": "lands_on_infinity", "step": v.step}
    if isinstance(v, Unresolved):
        return {"kind": "unresolved", "reason": v.reason}
    raise TypeError(f"unknown verdict {v!r}")


def _critical_dict(cp) -> dict:
    return {
        "location": cp.location,
        "local_degree": cp.local_degree,
        "kind": cp.kind,
        "root_index": cp.root_index,
    }


def _histogram(codes: np.ndarray) -> dict:
    values, counts = np.unique(codes, return_counts=True)
    return {str(int(v)): int(c) for v, c in zip(values, counts)}


# -- subcommands -------------------------------------------------------------


def _cmd_info(args) -> tuple[dict, int]:
    f, spec = load_map_spec(args.file)
    b, name = _budget_of(args)
    head = head_verify(f)
    results = {
        "deg_p": f.p.degree,
        "distinct_roots": f.degree,
        "roots": [
            {"location": loc, "multiplicity": m} for loc, m in f.roots.roots
        ],
        "fixed_points": [
            {"location": d.location, "multiplier": d.multiplier}
            for d in fixed_point_data(f)
        ],
        "criticals": [_critical_dict(cp) for cp in critical_set(f)],
        "head_check": {
            "ok": head.ok,
            "n_vector": list(head.n_vector),
            "messages": list(head.messages),
        },
    }
    inputs = {"file": args.file, "spec": spec}
    return _envelope("info", inputs, _config_dict(args, b, name), results), 0


def _cmd_classify(args) -> tuple[dict, int]:
    f, spec = load_map_spec(args.file)
    b, name = _budget_of(args)
    seed = _parse_complex(args.seed)
    verdict = classify(f, seed, b)
    results = {"seed": seed, "verdict": _verdict_dict(verdict)}
    code = 3 if args.strict and isinstance(verdict, Unresolved) else 0
    inputs = {"file": args.file, "spec": spec, "seed": seed}
    return _envelope("classify", inputs, _config_dict(args, b, name), results), code


def _cmd_kneading(args) -> tuple[dict, int]:
    f, spec = load_map_spec(args.file)
    b, name = _budget_of(args)
    if args.length < 1:
        raise _InputError("--len must be >= 1")
    k = kneading_sequence(f, args.length, b)
    results = {
        "text": kneading_text(k),
        "length": k.length,
        "rows": [
            [_symbol_name(s) for s in row] for row in k.symbols
        ],
        "periodic": list(k.periodic),
    }
    inputs = {"file": args.file, "spec": spec, "len": args.length}
    return _envelope("kneading", inputs, _config_dict(args, b, name), results), 0


def _symbol_name(s) -> str:
    from .kneading import CriticalHit, InfinityMarker

    if isinstance(s, InfinityMarker):
        return "inf"
    if isinstance(s, CriticalHit):
        return f"{s.index}*"
    return str(s.index)


def _cmd_certify(args) -> tuple[dict, int]:
    f, spec = load_map_spec(args.file)
    b, name = _budget_of(args)
    cert = certify_hyperbolic(f, b)
    results = {
        "status": cert.status,
        "tau": cert.tau,
        "tau_target": 2 * f.degree - 2,
        "per_critical": [
            {**_critical_dict(cp), "orbit": _verdict_dict(v)}
            for cp, v in cert.per_critical
        ],
    }
    code = 3 if args.strict and not cert.is_certified else 0
    inputs = {"file": args.file, "spec": spec}
    return _envelope("certify", inputs, _config_dict(args, b, name), results), code


def _cmd_graph(args) -> tuple[dict, int]:
    f, spec = load_map_spec(args.file)
    b, name = _budget_of(args)
    if args.level < 0:
        raise _InputError("--level must be >= 0")
    g = trace_delta0(f, DEFAULT_TRACE)
    for _ in range(args.level):
        g = pull_back(f, g, DEFAULT_TRACE)
    text = export_graph_text(g)
    out_path = args.out
    if out_path:
        try:
            with open(out_path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise _InputError(f"cannot write {out_path}: {exc}") from exc
    results = {
        "level": g.level,
        "vertices": len(g.vertices),
        "edges": len(g.edges),
        "faces": len(faces(g)),
        "out": out_path,
        "export": None if out_path else text,
    }
    inputs = {"file": args.file, "spec": spec, "level": args.level}
    return _envelope("graph", inputs, _config_dict(args, b, name), results), 0


def _cmd_compare(args) -> tuple[dict, int]:
    fa, spec_a = load_map_spec(args.file_a)
    fb, spec_b = load_map_spec(args.file_b)
    b, name = _budget_of(args)
    if args.level < 0:
        raise _InputError("--level must be >= 0")
    verdict = comb_equivalent(fa, fb, args.level, b)
    results = {"verdict": verdict, "level": args.level}
    code = 3 if args.strict and verdict != "yes" else 0
    inputs = {
        "file_a": args.file_a,
        "spec_a": spec_a,
        "file_b": args.file_b,
        "spec_b": spec_b,
        "level": args.level,
    }
    return _envelope("compare", inputs, _config_dict(args, b, name), results), code


def _cmd_approx_hyperbolic(args) -> tuple[dict, int]:
    f, spec = load_map_spec(args.file)
    b, name = _budget_of(args)
    try:
        pp = params_of(f)
    except ValueError as exc:
        raise _InputError(str(exc)) from exc
    cfg = default_search_config(budget=b)
    res = find_hyperbolic_near(pp, cfg)
    found = None
    if res.found is not None:
        found = {
            "parameters": list(res.found.point.a),
            "degree": res.found.point.d,
            "distance": res.found.distance,
            "samples_tried": res.found.samples_tried,
            "certificate": {
                "status": res.found.certificate.status,
                "tau": res.found.certificate.tau,
            },
        }
    results = {
        "center": {"parameters": list(pp.a), "degree": pp.d},
        "found": found,
        "trace": [
            {
                "radius": t.radius,
                "evaluated": t.evaluated,
                "certified": t.certified,
                "rejected_membership": t.rejected_membership,
                "discriminant_failures": t.discriminant_failures,
            }
            for t in res.trace
        ],
    }
    code = 3 if args.strict and found is None else 0
    config = _config_dict(args, b, name)
    config["search"] = {
        "radii": list(cfg.radii),
        "samples_per_radius": cfg.samples_per_radius,
        "require_Y": cfg.require_Y,
        "rng_seed": cfg.rng_seed,
    }
    inputs = {"file": args.file, "spec": spec}
    return _envelope("approx-hyperbolic", inputs, config, results), code


def _cmd_tau_map(args) -> tuple[dict, int]:
    b, name = _budget_of(args)
    box = _parse_box(args.box)
    res = _parse_resolution(args.resolution)
    resolution: Sequence[int] | int = res if len(res) > 1 else res[0]
    try:
        img = render_tau(args.degree, box, resolution, b)
    except ValueError as exc:
        raise _InputError(str(exc)) from exc
    if args.out:
        write_ppm(img, default_palette(img, shade_by_time=False), args.out)
    results = {
        "degree": args.degree,
        "box": [list(axis) for axis in box],
        "resolution": res,
        "counts": _histogram(img.codes),
        "grid": img.codes.tolist(),
        "out": args.out,
    }
    inputs = {"degree": args.degree, "box": args.box, "resolution": args.resolution}
    return _envelope("tau-map", inputs, _config_dict(args, b, name), results), 0


def _cmd_render(args) -> tuple[dict, int]:
    f, spec = load_map_spec(args.file)
    b, name = _budget_of(args)
    px, py = _parse_pixels(args.pixels)
    try:
        vp = Viewport(
            center=_parse_complex(args.center),
            width=args.width,
            pixels_x=px,
            pixels_y=py,
        )
    except ValueError as exc:
        raise _InputError(str(exc)) from exc
    img = render_basins(f, vp, b, threads=args.threads)
    if args.out:
        write_ppm(img, default_palette(img), args.out)
    results = {
        "viewport": {
            "center": vp.center,
            "width": vp.width,
            "pixels_x": vp.pixels_x,
            "pixels_y": vp.pixels_y,
        },
        "n_roots": img.n_roots,
        "cycle_periods": list(img.cycle_periods),
        "cycle_representatives": list(img.cycle_reps),
        "counts": _histogram(img.codes),
        "unresolved_fraction": float(np.mean(img.codes == UNRESOLVED_CODE)),
        "out": args.out,
    }
    inputs = {
        "file": args.file,
        "spec": spec,
        "center": args.center,
        "width": args.width,
        "pixels": args.pixels,
    }
    return _envelope("render", inputs, _config_dict(args, b, name), results), 0


# -- driver ------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--profile", choices=("desk", "deep"), default="desk",
                        help="budget preset (default desk)")
    shared.add_argument("--budget-iter", type=int, default=None,
                        help="override the iteration cap")
    shared.add_argument("--eps-root", type=float, default=None,
                        help="override the root-capture radius")
    shared.add_argument("--strict", action="store_true",
                        help="exit 3 on negative mathematical outcomes")
    shared.add_argument("--out", default=None,
                        help="artifact path (image, graph export, report copy)")
    shared.add_argument("--threads", type=int, default=None,
                        help="worker count; NEWTON_DYN_THREADS else 1 when unset")

    parser = argparse.ArgumentParser(
        prog="newton-dyn",
        description="Dynamical invariants of Newton maps",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("info", parents=[shared],
                       help="fixed points, multipliers, critical set")
    p.add_argument("file")
    p.set_defaults(handler=_cmd_info)

    p = sub.add_parser("classify", parents=[shared],
                       help="orbit classification of one seed")
    p.add_argument("file")
    p.add_argument("--seed", required=True, help="re,im starting point")
    p.set_defaults(handler=_cmd_classify)

    p = sub.add_parser("kneading", parents=[shared],
                       help="itineraries of the free real critical orbits")
    p.add_argument("file")
    p.add_argument("--len", dest="length", type=int, required=True,
                   help="symbols per critical point")
    p.set_defaults(handler=_cmd_kneading)

    p = sub.add_parser("certify", parents=[shared],
                       help="hyperbolicity certificate from critical orbits")
    p.add_argument("file")
    p.set_defaults(handler=_cmd_certify)

    p = sub.add_parser("graph", parents=[shared],
                       help="trace the basin-ray graph and pull it back")
    p.add_argument("file")
    p.add_argument("--level", type=int, default=0)
    p.set_defaults(handler=_cmd_graph)

    p = sub.add_parser("compare", parents=[shared],
                       help="combinatorial equivalence of two maps")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.add_argument("--level", type=int, default=1)
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("approx-hyperbolic", parents=[shared],
                       help="search nearby parameters for a certified map")
    p.add_argument("file")
    p.set_defaults(handler=_cmd_approx_hyperbolic)

    p = sub.add_parser("tau-map", parents=[shared],
                       help="basin-critical census over a parameter box")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--box", required=True,
                   help="comma-joined lo:hi intervals, one per coordinate")
    p.add_argument("--resolution", required=True,
                   help="nodes per axis, comma-joined or a single count")
    p.set_defaults(handler=_cmd_tau_map)

    p = sub.add_parser("render", parents=[shared],
                       help="rasterize basins to a PPM image")
    p.add_argument("file")
    p.add_argument("--center", default="0,0", help="re,im viewport center")
    p.add_argument("--width", type=float, default=4.0)
    p.add_argument("--pixels", default="64,64", help="X,Y or a single count")
    p.set_defaults(handler=_cmd_render)

    return parser


_REPORT_TO_OUT = ("info", "classify", "kneading", "certify", "compare",
                  "approx-hyperbolic")


def run(argv: Sequence[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        code = exc.code
        return int(code) if isinstance(code, int) else (0 if code is None else 2)
    try:
        report, code = args.handler(args)
        text = report_text(report)
        if args.out and args.cmd in _REPORT_TO_OUT:
            try:
                with open(args.out, "w") as fh:
                    fh.write(text + "\n")
            except OSError as exc:
                raise _InputError(f"cannot write {args.out}: {exc}") from exc
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NewtonDynError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(text)
    return code


def main() -> None:
    sys.exit(run(sys.argv[1:]))
