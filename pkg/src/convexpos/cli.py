"""Command-line front end: ``convexpos {analyze,asymptotic,montecarlo,exact,pcp}``.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 cost guard exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import mc
from .asymptotics import SHAPES, barany_proxy, build_model, exact_reference
from .errors import ConvexPosError, EmptyInput
from .geom import Polygon, load_polygon
from .limitshape import LimitShape

log = logging.getLogger("convexpos")

DEFAULT_TABLE_N = (10, 20, 50, 100, 200, 400)
SEED_ENV = "CONVEXPOS_SEED"


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


# ------------------------------------------------------------------- reports


def analysis_report(polygon: Polygon, ns=DEFAULT_TABLE_N, model=None) -> dict:
    if model is None:
        model = build_model(polygon)
    dom = model.dom
    sol = dom.solution
    log_p = model.log_prob(np.asarray(ns, dtype=float))
    return {
        "polygon": {
            "vertices": _floats(polygon.vertices),
            "kappa": polygon.kappa,
            "area": polygon.area,
            "r": _floats(polygon.r),
            "theta": _floats(polygon.theta),
        },
        "ps_solution": {
            "f": _floats(sol.f),
            "w": _floats(sol.w),
            "g": _floats(sol.g),
            "residual_inf": sol.residual_inf,
            "iterations": sol.iterations,
        },
        "dom": {
            "I_star": list(dom.I_star),
            "K_T": _floats(dom.K_T.vertices),
            "tangency_set": list(dom.tangency_set),
            "m": dom.m,
            "ap_star": dom.ap_star,
            "tangency_points": _floats(dom.limit_shape.points),
            "n_candidates": dom.n_candidates,
            "n_accepted": dom.n_accepted,
        },
        "asymptotic": {
            "m_rates": _floats(model.m_rates),
            "d_K": model.d_K,
            "C_K": model.C_K,
            "sigma_inv": _floats(model.sigma_inv),
            "d_K_componentwise": model.d_K_componentwise,
            "sigma_inv_componentwise": _floats(model.sigma_inv_componentwise),
            "barany_limit": model.barany_limit(),
        },
        "table": [
            {"n": int(n), "log_P": float(lp), "proxy": float(barany_proxy(lp, n))}
            for n, lp in zip(ns, np.atleast_1d(log_p))
        ],
    }


# ----------------------------------------------------------------------- SVG


def _viewport(points: np.ndarray, margin: float = 0.05):
    lo, hi = points.min(axis=0), points.max(axis=0)
    pad = margin * (hi - lo).max()
    lo, hi = lo - pad, hi + pad
    return lo, hi


def _num(x) -> str:
    return repr(float(x))


def _xy(p, lo, hi) -> str:
    # SVG y grows downwards; flip inside the box
    return f"{_num(p[0] - lo[0])},{_num(hi[1] - p[1])}"


def _poly_path(verts, lo, hi) -> str:
    return "M " + " L ".join(_xy(v, lo, hi) for v in verts) + " Z"


def _arc_path(shape: LimitShape, lo, hi) -> str:
    parts = ["M " + _xy(shape.arcs[0].start, lo, hi)]
    for arc in shape.arcs:
        parts.append(f"Q {_xy(arc.control, lo, hi)} {_xy(arc.end, lo, hi)}")
    return " ".join(parts) + " Z"


def _svg(lo, hi, body: list[str]) -> str:
    w, h = (float(d) for d in hi - lo)
    return "\n".join([
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="0 0 {w!r} {h!r}" '
        f'width="600" height="{600 * h / w:.1f}">',
        *body,
        "</svg>",
        "",
    ])


def analysis_svg(polygon: Polygon, report_dom) -> str:
    k_t = report_dom.K_T
    lo, hi = _viewport(k_t.vertices)
    sw = 0.004 * float((hi - lo).max())
    rad = 2.5 * sw
    body = [
        f'<path d="{_poly_path(k_t.vertices, lo, hi)}" fill="none" stroke="gray" '
        f'stroke-width="{sw!r}" stroke-dasharray="{4 * sw!r},{3 * sw!r}"/>',
        f'<path d="{_poly_path(polygon.vertices, lo, hi)}" fill="none" stroke="black" stroke-width="{sw!r}"/>',
        f'<path d="{_arc_path(report_dom.limit_shape, lo, hi)}" fill="none" stroke="blue" stroke-width="{sw!r}"/>',
    ]
    for p in report_dom.limit_shape.points:
        x, y = _xy(p, lo, hi).split(",")
        body.append(f'<circle cx="{x}" cy="{y}" r="{rad!r}" fill="red"/>')
    return _svg(lo, hi, body)


def pcp_svg(polygon: Polygon, points: np.ndarray, data: mc.PCPData) -> str:
    lo, hi = _viewport(polygon.vertices)
    sw = 0.004 * float((hi - lo).max())
    rad = 2.0 * sw
    pcp_verts, _ = mc.pcp_by_clipping(polygon, data.ell)
    body = [f'<path d="{_poly_path(polygon.vertices, lo, hi)}" fill="none" stroke="black" stroke-width="{sw!r}"/>']
    if len(pcp_verts) >= 2:
        body.append(f'<path d="{_poly_path(pcp_verts, lo, hi)}" fill="none" stroke="blue" stroke-width="{sw!r}"/>')
    for j, i in enumerate(data.contact_idx):
        z = points[i]
        foot = z - data.ell[j] * polygon.normals[j]
        body.append(f'<path d="M {_xy(z, lo, hi)} L {_xy(foot, lo, hi)}" stroke="red" stroke-width="{sw!r}"/>')
    contacts = set(int(i) for i in data.contact_idx)
    for i, z in enumerate(points):
        x, y = _xy(z, lo, hi).split(",")
        colour = "red" if i in contacts else "black"
        body.append(f'<circle cx="{x}" cy="{y}" r="{rad!r}" fill="{colour}"/>')
    return _svg(lo, hi, body)


# ------------------------------------------------------------------ commands


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_analyze(args) -> int:
    polygon = load_polygon(args.polygon)
    model = build_model(polygon)
    _emit(json.dumps(analysis_report(polygon, args.n, model), indent=2) + "\n", args.out)
    if args.svg:
        Path(args.svg).write_text(analysis_svg(polygon, model.dom))
    return 0


def cmd_asymptotic(args) -> int:
    polygon = load_polygon(args.polygon)
    if any(n < 3 for n in args.n):
        raise ValueError("n values must be >= 3")
    model = build_model(polygon)
    rows = []
    for n in args.n:
        lp = model.log_prob(n)
        rows.append([n, repr(lp), repr(float(barany_proxy(lp, n)))])
    _emit(_csv_text(["n", "log_P", "proxy"], rows), args.out)
    return 0


def cmd_montecarlo(args) -> int:
    rows = []
    for n in args.n:
        if args.estimator == "bipointed":
            est = [mc.estimate_bipointed(n, args.trials, args.seed, args.workers)]
        else:
            if args.polygon is None:
                raise ValueError(f"estimator {args.estimator!r} needs a polygon file")
            polygon = load_polygon(args.polygon)
            if args.estimator == "convex":
                est = [mc.estimate_convex_probability(polygon, n, args.trials, args.seed, args.workers)]
            else:
                p, pt, _ = mc.estimate_full_sided(polygon, n, args.trials, args.seed, args.workers)
                est = [p, pt]
        rows.extend(e.csv_row() for e in est)
    _emit(_csv_text(mc.CSV_HEADER, rows), args.out)
    return 0


def cmd_exact(args) -> int:
    log_value, frac = exact_reference(args.shape, args.n)
    if frac is not None and not args.log:
        print(f"{frac.numerator}/{frac.denominator}")
    else:
        print(repr(log_value))
    return 0


def read_points(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            try:
                x, y = (float(v) for v in row[:2])
            except ValueError:
                if lineno == 0:
                    continue  # header
                raise
            rows.append((x, y))
    if not rows:
        raise EmptyInput(f"no points in {path}")
    return np.array(rows)


def cmd_pcp(args) -> int:
    polygon = load_polygon(args.polygon)
    points = read_points(args.points)
    data = mc.compute_pcp(polygon, points)
    report = {
        "ell": _floats(data.ell),
        "c": _floats(data.c),
        "c_formula": _floats(data.c_formula),
        "contact_idx": data.contact_idx.tolist(),
        "b": _floats(data.b),
        "s": None if data.s is None else data.s.tolist(),
        "full_sided": data.full_sided,
    }
    if data.s is None:
        report["note"] = "points are not in convex position; size-vector omitted"
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    if args.svg:
        Path(args.svg).write_text(pcp_svg(polygon, points, data))
    return 0


# ---------------------------------------------------------------------- main


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="convexpos", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="limit shape, AP* and asymptotic constants of a polygon")
    p.add_argument("polygon")
    p.add_argument("--n", type=int, nargs="+", default=list(DEFAULT_TABLE_N))
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--svg", help="write a figure of K, K_T and the limit shape")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("asymptotic", help="CSV table of the log-asymptote")
    p.add_argument("polygon")
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_asymptotic)

    p = sub.add_parser("montecarlo", help="Monte Carlo estimates as CSV rows")
    p.add_argument("polygon", nargs="?")
    p.add_argument("--estimator", choices=("convex", "full_sided", "bipointed"), default="convex")
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("exact", help="exact probability for the reference shapes")
    p.add_argument("--shape", choices=SHAPES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--log", action="store_true", help="print the natural log even when small")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("pcp", help="parallel containing polygon of a point set")
    p.add_argument("polygon")
    p.add_argument("points", help='CSV file of "x,y" rows')
    p.add_argument("--out")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_pcp)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if getattr(args, "seed", 0) is None:
        args.seed = _default_seed()
    try:
        return args.func(args)
    except ConvexPosError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
