"""Command-line front end.

Subcommands: classify, flower, fatou, escape, resolve, curve, oracle.
Numeric flags can also come from PETALLAB_-prefixed environment
variables (explicit flags win).  Exit codes: 0 ok, 2 domain or
classification failure, 3 I/O or parse failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .errors import InputFormatError, PetallabError
from .flows import closed_form_flow, truncated_flow_germ
from .germs import FORM_OTHER, PolyMapGerm, classify_form, normalize
from .io_formats import (
    build_manifest,
    scale_escape_times,
    write_csv,
    write_json,
    write_manifest,
    write_orbit_csv,
    write_pgm,
)
from .sectors import DomainSpec, KIND_V, PetalParams
from . import dynamics as dyn
from .curve import graph_transform_curve
from .resolution import ExactVectorField, classify_biholo_points, resolve


def _env(name: str):
    return os.environ.get(f"PETALLAB_{name.upper().replace('-', '_')}")


def _opt(parser, flag: str, type_, default, help_: str):
    env = _env(flag.lstrip("-"))
    if env is not None:
        default = type_(env)
    parser.add_argument(flag, type=type_, default=default, help=help_)


def _parse_complex(s: str) -> complex:
    s = s.strip()
    if "," in s:
        re_s, im_s = s.split(",", 1)
        return complex(float(re_s), float(im_s))
    return complex(s.replace(" ", ""))


def _parse_point(s: str):
    parts = s.split(":")
    if len(parts) != 2:
        raise InputFormatError(f"point must look like 're,im:re,im', got {s!r}")
    return (_parse_complex(parts[0]), _parse_complex(parts[1]))


def _parse_grid(s: str):
    w, h = s.lower().split("x")
    return int(w), int(h)


def _load_germ(source: str) -> PolyMapGerm:
    text = source.strip()
    if text.startswith("[") or text.startswith("{"):
        try:
            return PolyMapGerm.from_obj(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"inline germ is not valid JSON: {exc}") from exc
    return PolyMapGerm.load(source)


def _germ_petal(F, gamma=None):
    sig = classify_form(F)
    if sig.form == FORM_OTHER:
        raise PetallabError("germ matches neither the corner nor the noncorner template")
    G, change, petal = normalize(F, sig)
    if petal is None:
        raise PetallabError("the attracting condition fails: no petal data")
    if gamma is not None:
        petal = PetalParams.from_normalized(petal.M, petal.N, petal.a, petal.b,
                                            gamma=gamma)
    return G, sig, change, petal


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_classify(args) -> int:
    F = _load_germ(args.germ)
    sig = classify_form(F)
    report = {
        "form": sig.form,
        "M": sig.M, "N": sig.N,
        "a": [sig.a.real, sig.a.imag],
        "b": [sig.b.real, sig.b.imag],
        "c": [sig.c.real, sig.c.imag],
        "attracting_condition": sig.satisfies_attracting_condition,
        "saddle_condition": sig.satisfies_repelling_condition,
        "resonant": sig.resonant,
    }
    if sig.form == FORM_OTHER:
        trivial = (F.fx - F.fx.monomial(1, 0, F.fx.coeff(1, 0))).is_zero and \
                  (F.fy - F.fy.monomial(0, 1, F.fy.coeff(0, 1))).is_zero
        msg = ("not tangent-to-identity-with-nontrivial-jet" if trivial
               else "template mismatch: neither corner nor noncorner form")
        print(json.dumps({**report, "error": msg}, indent=1))
        print(msg, file=sys.stderr)
        return 2
    G, change, petal = normalize(F, sig)[0:3]
    report["normalization"] = {
        "alpha": [change.alpha.real, change.alpha.imag],
        "beta": [change.beta.real, change.beta.imag],
    }
    if petal is not None:
        report["petal"] = {
            "d": petal.d, "m": petal.m, "n": petal.n,
            "p": petal.p, "q": petal.q, "gamma": petal.gamma,
            "lambda": [petal.lam.real, petal.lam.imag],
            "a": [petal.a.real, petal.a.imag],
            "b": [petal.b.real, petal.b.imag],
        }
    manifest = build_manifest("classify", {"order": F.truncation_order},
                              germ_source=args.germ)
    report["manifest"] = manifest["hash"]
    text = json.dumps(report, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    print(f"form={sig.form} M={sig.M} N={sig.N} a={sig.a:.6g} b={sig.b:.6g}")
    return 0


def _slice_points(cells, mode, fix):
    if mode == "diag":
        return cells, cells.copy()
    if mode == "x":
        return cells, np.full_like(cells, fix)
    if mode == "y":
        return np.full_like(cells, fix), cells
    raise InputFormatError(f"unknown slice mode {mode!r}")


def _window_grid(window, grid):
    try:
        x0, x1, y0, y1 = (float(v) for v in window.split(":"))
    except ValueError as exc:
        raise InputFormatError("window must be 'x0:x1:y0:y1'") from exc
    w, h = grid
    re = np.linspace(x0, x1, w)
    im = np.linspace(y0, y1, h)
    return re[None, :] + 1j * im[:, None]


def cmd_flower(args) -> int:
    F = _load_germ(args.germ)
    G, sig, change, petal = _germ_petal(F, args.gamma)
    rng = np.random.default_rng(args.seed)
    report = dyn.petal_cover_check(G, petal, args.epsilon, args.theta,
                                   args.delta, args.samples, rng)
    params = {"epsilon": args.epsilon, "theta": args.theta, "delta_prime": args.delta,
              "samples": args.samples, "grid": args.grid, "window": args.window,
              "gamma": petal.gamma, "order": F.truncation_order}
    manifest = build_manifest("flower", params, seed=args.seed, germ_source=args.germ)
    out = {
        "manifest": manifest["hash"],
        "petal": report.params,
        "total": report.total, "fixed": report.fixed,
        "covered": report.covered, "uncovered": report.uncovered,
        "counts": report.counts,
        "uncovered_examples": [[p[0].real, p[0].imag, p[1].real, p[1].imag]
                               for p in report.uncovered_examples],
    }
    if args.out:
        cells = _window_grid(args.window, _parse_grid(args.grid))
        xs, ys = _slice_points(cells, args.slice, _parse_complex(args.fix))
        codes = np.zeros(cells.shape, dtype=np.uint8)
        specs = []
        for k in range(petal.d):
            pk = petal.with_k(k)
            base = DomainSpec(petal=pk, epsilon=args.epsilon, theta=args.theta,
                              delta=args.delta, delta_prime=args.delta,
                              kind="D-ext")
            specs.append((60 + k * 10, base))
            specs.append((160 + k * 10, base.with_kind("D-ext-rep")))
        assigned = np.zeros(cells.shape, dtype=bool)
        from .sectors import domain_membership_arrays
        for gray, sp in specs:
            mem = domain_membership_arrays(xs, ys, sp) & ~assigned
            codes[mem] = gray
            assigned |= mem
        codes[~assigned] = 255
        fixed_mask = (xs == 0) | ((ys == 0) if petal.n >= 1 else np.zeros_like(assigned))
        codes[fixed_mask] = 0
        write_pgm(args.out + ".pgm", codes, manifest["hash"])
        write_json(args.out + ".json", out)
        write_manifest(args.out + ".manifest.json", manifest)
    print(json.dumps(out, indent=1))
    return 0 if report.uncovered == 0 else 2


def _read_points_file(path):
    pts = []
    with open(path) as fh:
        text = fh.read().strip()
    if text.startswith("["):
        for row in json.loads(text):
            pts.append((complex(row[0], row[1]), complex(row[2], row[3])))
        return pts
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("re_"):
            continue
        vals = [float(v) for v in line.split(",")]
        pts.append((complex(vals[0], vals[1]), complex(vals[2], vals[3])))
    return pts


def cmd_fatou(args) -> int:
    F = _load_germ(args.germ)
    G, sig, change, petal = _germ_petal(F, args.gamma)
    spec = DomainSpec(petal=petal, epsilon=args.epsilon, theta=args.theta,
                      r=args.r, kind=KIND_V)
    pts = _read_points_file(args.points)
    params = {"epsilon": args.epsilon, "theta": args.theta, "r": args.r,
              "gamma": petal.gamma, "tol": args.tol, "order": F.truncation_order}
    manifest = build_manifest("fatou", params, germ_source=args.germ)
    rows = []
    worst = 0.0
    for (x, y) in pts:
        try:
            cv = dyn.fatou_chart(G, spec, (x, y), tol=args.tol)
            x1, y1 = G.apply(x, y)
            cv1 = dyn.fatou_chart(G, spec, (x1, y1), tol=args.tol)
            resid = abs(cv1.beta - cv.beta - 1.0) + abs(cv1.w - cv.w)
            worst = max(worst, resid)
            rows.append((x.real, x.imag, y.real, y.imag, cv.z.real, cv.z.imag,
                         cv.w.real, cv.w.imag, cv.beta.real, cv.beta.imag,
                         resid, "ok"))
        except PetallabError as exc:
            rows.append((x.real, x.imag, y.real, y.imag) + (math.nan,) * 7
                        + (type(exc).__name__,))
    header = ["re_x", "im_x", "re_y", "im_y", "re_z", "im_z", "re_w", "im_w",
              "re_beta", "im_beta", "conj_residual", "status"]
    if args.out:
        write_csv(args.out, header, rows, manifest["hash"])
        write_manifest(args.out + ".manifest.json", manifest)
    ok_rows = sum(1 for r in rows if r[-1] == "ok")
    print(f"fatou: {ok_rows}/{len(rows)} points, worst conjugacy residual {worst:.3e}")
    return 0 if ok_rows else 2


def _escape_worker(payload):
    germ_obj, sig_data, box_data, pts, max_steps = payload
    F = PolyMapGerm.from_obj(germ_obj)
    from .germs import FormSignature

    sig = FormSignature(**sig_data)
    box = dyn.EscapeBox(**box_data)
    out = []
    for (x, y) in pts:
        v = dyn.escape_analysis(F, sig, box, (x, y), max_steps=max_steps)
        if v.on_fixed_set:
            out.append(-2)
        elif v.escaped:
            out.append(v.j)
        else:
            out.append(-1)
    return out


def cmd_escape(args) -> int:
    F = _load_germ(args.germ)
    sig = classify_form(F)
    box = dyn.EscapeBox(epsilon=args.epsilon, delta=args.delta)
    cells = _window_grid(args.window, _parse_grid(args.grid))
    xs, ys = _slice_points(cells, args.slice, _parse_complex(args.fix))
    params = {"epsilon": args.epsilon, "delta": args.delta, "window": args.window,
              "grid": args.grid, "slice": args.slice, "max_steps": args.max_steps,
              "order": F.truncation_order}
    manifest = build_manifest("escape", params, seed=args.seed, germ_source=args.germ)
    h, w = cells.shape
    times = np.empty((h, w), dtype=np.int64)
    sig_data = {"form": sig.form, "M": sig.M, "N": sig.N, "a": sig.a, "b": sig.b,
                "c": sig.c,
                "satisfies_attracting_condition": sig.satisfies_attracting_condition,
                "satisfies_repelling_condition": sig.satisfies_repelling_condition}
    box_data = {"epsilon": box.epsilon, "delta": box.delta}
    payloads = [(F.to_obj(), sig_data, box_data,
                 [(xs[i, j], ys[i, j]) for j in range(w)], args.max_steps)
                for i in range(h)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for i, row in enumerate(pool.map(_escape_worker, payloads)):
                times[i, :] = row
    else:
        for i, payload in enumerate(payloads):
            times[i, :] = _escape_worker(payload)
    esc = times >= 0
    stats = {
        "manifest": manifest["hash"],
        "escaped": int(np.count_nonzero(esc)),
        "bounded": int(np.count_nonzero(times == -1)),
        "fixed": int(np.count_nonzero(times == -2)),
        "max_j": int(times[esc].max()) if np.any(esc) else None,
        "mean_j": float(times[esc].mean()) if np.any(esc) else None,
        "grid": [w, h], "window": args.window, "slice": args.slice,
        "encoding": "0=fixed, 255=bounded, 1..254=log-scaled escape step",
    }
    if args.out:
        write_pgm(args.out + ".pgm", scale_escape_times(times), manifest["hash"])
        write_json(args.out + ".json", stats)
        write_manifest(args.out + ".manifest.json", manifest)
    print(json.dumps(stats, indent=1))
    return 0


def _load_field(source: str) -> ExactVectorField:
    with open(source) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"field file is not valid JSON: {exc}") from exc
    if isinstance(obj, dict) and "components" in obj:
        obj = obj["components"]
    comps = {}
    for entry in obj:
        name = entry.get("component")
        if name not in ("dx", "dy"):
            raise InputFormatError("field components must be tagged 'dx' and 'dy'")
        coeffs = {}
        for row in entry["monomials"]:
            i, j, nr, dr, ni, di = row
            from fractions import Fraction

            from .gaussrat import GaussianRational
            coeffs[(int(i), int(j))] = GaussianRational(
                Fraction(int(nr), int(dr)), Fraction(int(ni), int(di)))
        comps[name] = coeffs
    if "dx" not in comps or "dy" not in comps:
        raise InputFormatError("field file needs 'dx' and 'dy' components")
    return ExactVectorField.from_coeff_maps(comps["dx"], comps["dy"])


def cmd_resolve(args) -> int:
    params = {"order": args.order, "depth": args.depth}
    if args.field:
        X = _load_field(args.field)
        manifest = build_manifest("resolve", params, germ_source=args.field)
        tree = resolve(X, max_depth=args.depth)
        summary = {"manifest": manifest["hash"], "depth": tree.depth,
                   "leaf_counts": tree.classified_counts()}
    else:
        F = _load_germ(args.germ)
        manifest = build_manifest("resolve", params, germ_source=args.germ)
        cls = classify_biholo_points(F, order=args.order, max_depth=args.depth)
        tree = cls.tree
        summary = {"manifest": manifest["hash"], "depth": tree.depth,
                   "leaf_counts": tree.classified_counts(),
                   "model_counts": cls.model_counts(),
                   "divisor_in_singular_locus": cls.divisor_in_singular_locus,
                   "points": [p.tag.to_json_obj() for p in cls.points]}
    obj = tree.to_json_obj()
    obj["manifest"] = manifest["hash"]
    obj["summary"] = summary
    if args.out:
        write_json(args.out + ".json", obj)
        with open(args.out + ".dot", "w") as fh:
            fh.write(f"// manifest {manifest['hash']}\n")
            fh.write(tree.to_dot() + "\n")
        write_manifest(args.out + ".manifest.json", manifest)
    print(json.dumps(summary, indent=1))
    return 0


def cmd_curve(args) -> int:
    F = _load_germ(args.germ)
    sig = classify_form(F)
    G, change, _petal = normalize(F, sig)
    from .sectors import ATTRACTING_EXTENDED, SectorSpec

    sector = SectorSpec(epsilon=args.epsilon, theta=args.theta,
                        d=classify_form(G).M, kind=ATTRACTING_EXTENDED,
                        component_index=args.k)
    w, h = _parse_grid(args.grid)
    curve = graph_transform_curve(G, sector, grid=(w, h), tol=args.tol)
    params = {"epsilon": args.epsilon, "theta": args.theta, "k": args.k,
              "grid": args.grid, "tol": args.tol, "order": F.truncation_order}
    manifest = build_manifest("curve", params, germ_source=args.germ)
    summary = {"manifest": manifest["hash"], "residual": curve.residual,
               "bound_constant": curve.bound_constant, "sweeps": curve.sweeps,
               "interp_error": curve.interp_error}
    if args.out:
        write_csv(args.out, ["re_x", "im_x", "re_u", "im_u", "residual"],
                  curve.export_rows(), manifest["hash"])
        write_manifest(args.out + ".manifest.json", manifest)
    print(json.dumps(summary, indent=1))
    return 0


def cmd_oracle(args) -> int:
    M, N = args.M, args.N
    a, b = _parse_complex(args.a), _parse_complex(args.b)
    x0, y0 = _parse_point(args.point)
    params = {"M": M, "N": N, "a": args.a, "b": args.b, "point": args.point,
              "t": args.t, "steps": args.steps, "order": args.order}
    manifest = build_manifest("oracle", params)
    xt, yt = closed_form_flow(M, N, a, b, (x0, y0), args.t)
    out = {"manifest": manifest["hash"],
           "flow": [[xt.real, xt.imag], [yt.real, yt.imag]]}
    if args.steps:
        F = truncated_flow_germ(M, N, a, b, order=args.order)
        trace = dyn.iterate(F, (x0, y0), max_steps=args.steps,
                            powers=(M // math.gcd(M, N) if N else 1,
                                    N // math.gcd(M, N) if N else 0,
                                    math.gcd(M, N) if N else M))
        dev = 0.0
        for j in range(1, trace.steps + 1):
            fx, fy = closed_form_flow(M, N, a, b, (x0, y0), j)
            scale = max(abs(fx), abs(fy), 1e-300)
            dev = max(dev, max(abs(trace.xs[j] - fx), abs(trace.ys[j] - fy)) / scale)
        out["steps"] = trace.steps
        out["max_relative_deviation"] = dev
        out["exit_reason"] = trace.exit_reason
        if args.out:
            write_orbit_csv(args.out, trace, manifest["hash"])
            write_manifest(args.out + ".manifest.json", manifest)
    print(json.dumps(out, indent=1))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="petallab",
                                 description="petal domains, Fatou coordinates and "
                                             "blow-up resolution in (C^2, 0)")
    ap.add_argument("--version", action="version", version=f"petallab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def germ_opt(p, required=True):
        p.add_argument("--germ", required=required and _env("GERM") is None,
                       default=_env("GERM"), help="germ JSON file or inline JSON")

    p = sub.add_parser("classify", help="template classification of a germ")
    germ_opt(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("flower", help="petal coverage check and raster")
    germ_opt(p)
    _opt(p, "--epsilon", float, 1e-2, "sector size parameter")
    _opt(p, "--theta", float, math.pi / 6, "sector half-opening")
    _opt(p, "--gamma", float, None, "petal exponent gamma (default: derived)")
    _opt(p, "--delta", float, 0.05, "delta-prime bound on |x|, |y|")
    _opt(p, "--samples", int, 10000, "sample count")
    p.add_argument("--grid", default="256x256")
    p.add_argument("--window", default="-0.12:0.12:-0.12:0.12")
    p.add_argument("--slice", default="diag", choices=("diag", "x", "y"))
    p.add_argument("--fix", default="0,0")
    _opt(p, "--seed", int, 0, "RNG seed")
    p.add_argument("--out", default=None, help="output prefix")
    p.set_defaults(func=cmd_flower)

    p = sub.add_parser("fatou", help="Fatou chart values and conjugacy residuals")
    germ_opt(p)
    p.add_argument("--points", required=True, help="points file (CSV or JSON)")
    _opt(p, "--epsilon", float, 1 / 32, "chart parameter: |z| > 1/epsilon")
    _opt(p, "--theta", float, math.pi / 6, "chart parameter: |arg z| < theta")
    _opt(p, "--r", float, 0.7, "chart parameter r in (0, 1)")
    _opt(p, "--gamma", float, None, "petal exponent gamma (default: derived)")
    _opt(p, "--tol", float, dyn.DEFAULT_BETA_TOL, "beta error tolerance")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fatou)

    p = sub.add_parser("escape", help="escape-time raster over a slice")
    germ_opt(p)
    _opt(p, "--epsilon", float, 0.05, "box bound on |x^m y^n|")
    _opt(p, "--delta", float, 0.2, "box bound on |x| and |y|")
    _opt(p, "--max-steps", int, 100000, "iteration budget per cell")
    p.add_argument("--grid", default="128x128")
    p.add_argument("--window", default="-0.15:0.15:-0.15:0.15")
    p.add_argument("--slice", default="diag", choices=("diag", "x", "y"))
    p.add_argument("--fix", default="0.05,0")
    _opt(p, "--jobs", int, 1, "worker processes")
    _opt(p, "--seed", int, 0, "RNG seed (manifest only)")
    p.add_argument("--out", default=None, help="output prefix")
    p.set_defaults(func=cmd_escape)

    p = sub.add_parser("resolve", help="blow-up resolution tree (germ or field)")
    germ_opt(p, required=False)
    p.add_argument("--field", default=None, help="exact vector field JSON file")
    _opt(p, "--order", int, None, "truncation order for log F")
    _opt(p, "--depth", int, 12, "depth cap")
    p.add_argument("--out", default=None, help="output prefix")
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("curve", help="parabolic curve by graph transform")
    germ_opt(p)
    _opt(p, "--epsilon", float, 0.1, "sector size")
    _opt(p, "--theta", float, math.pi / 4, "sector half-opening")
    p.add_argument("--k", type=int, default=0, help="petal index")
    p.add_argument("--grid", default="64x33")
    _opt(p, "--tol", float, 1e-12, "Newton defect tolerance")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("oracle", help="closed-form flow vs iterated truncation")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--a", required=True, help="complex 're,im'")
    p.add_argument("--b", required=True, help="complex 're,im'")
    p.add_argument("--point", required=True, help="'re,im:re,im'")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=0,
                   help="also iterate the truncated flow this many steps")
    _opt(p, "--order", int, 10, "truncation order of the flow germ")
    p.add_argument("--out", default=None, help="orbit CSV path")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputFormatError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except PetallabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
