"""Command-line surface.

Subcommands: alpha-c, flow-check, simulate, tree, nested, grow, divfield,
catalog. Every run is reproducible from its flags and seed; CSV outputs
have fixed headers; SVG plots are generated directly. Exit codes: 0 pass,
1 check failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import divfield as DF
from . import generator as GEN
from . import growing as GR
from . import measures as ME
from . import simulate as SIM
from . import svg as SVG
from . import tree as TR
from .errors import ConfigurationError, SupportError

SEED_ENV = "SSMTREE_SEED"


@dataclass
class RunConfig:
    """Parsed invocation; reproducible from its serialized form plus seed."""

    command: str
    options: dict = field(default_factory=dict)

    def serialize(self):
        return json.dumps({"command": self.command, "options": self.options}, sort_keys=True)


def _default_seed():
    return int(os.environ.get(SEED_ENV, "0"))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _family_for_key(key, measure=None, alpha=None):
    if key in ("magic-mass", "magic-height", "brownian-closed-form"):
        return GR.family_for(key)
    if key == "binary-conservative-numeric":
        return GR.family_for(key, measure=measure, alpha=alpha)
    if key == "stable-ll-ode":
        return GR.family_for("generator-ode", generator=GEN.stable_ll_generator())
    raise ConfigurationError(f"unknown family key {key!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_alpha_c(args):
    if args.curve:
        lo, hi, step = (float(v) for v in args.curve.split("=", 1)[-1].split(":"))
        gammas = np.arange(lo, hi + 1e-12, step)
        rows = []
        for g, ac, argmax in GEN.alpha_c_curve(gammas):
            rows.append((f"{g:.6f}", f"{ac:.6f}", f"{argmax:.6f}"))
        out = args.out or "alpha_c_curve.csv"
        _write_csv(out, ["gamma", "alpha_c", "argmax_s"], rows)
        print(f"wrote {out} ({len(rows)} rows)")
        return 0
    measure = ME.get_measure(args.measure)
    ac = GEN.alpha_critical(measure)
    print(f"{ac:.6f}")
    return 0


def cmd_flow_check(args):
    measure = ME.get_measure(args.measure)
    alpha = args.alpha
    family = _family_for_key(args.family, measure=measure, alpha=alpha)
    xs = [float(v) for v in args.xs.split(",")]
    thresholds = [float(v) for v in args.thresholds.split(",")]
    rng = np.random.default_rng(args.seed)
    rows = []
    ok = True
    for x in xs:
        qp = GR.check_quasi_preservation(family, measure, alpha, x, thresholds)
        rows.append([family.kind, measure.key, alpha, x, "quasi-preservation",
                     f"{qp.max_relative_error:.3e}", qp.passed])
        ok &= qp.passed
    mono = GR.check_monotone(family, measure, sorted(set(xs + [1.0])), args.samples, rng)
    rows.append([family.kind, measure.key, alpha, max(xs), "monotone",
                 f"{max(-mono.worst_margin, 0.0):.3e}", mono.passed])
    ok &= mono.passed
    out = args.out or "flow_check.csv"
    _write_csv(out, ["family", "measure", "alpha", "x", "check", "max_error", "pass"], rows)
    for r in rows:
        print(",".join(str(v) for v in r))
    return 0 if ok else 1


def cmd_simulate(args):
    quad = ME.get_quadruplet(args.quad, alpha=args.alpha)
    family = _family_for_key(args.family, measure=quad.measure, alpha=quad.alpha)
    xs = [float(v) for v in args.xs.split(",")]
    cutoffs = SIM.Cutoffs(args.cutoff)
    flow = SIM.simulate_coupled(quad, family, xs, cutoffs, seed=args.seed,
                                backend=args.backend, step=args.step)
    base = args.out or "simulate"
    series = []
    atom_rows = []
    for x in flow.xs:
        p = flow.paths[x]
        ts = np.linspace(0, p.z, 400)
        pts = [(float(t), p.value(t)) for t in ts]
        series.append(pts)
        _write_csv(f"{base}_path_{x:g}.csv", ["time", "value"], [(f"{t:.8g}", f"{v:.8g}") for t, v in pts])
        for (t, kids), pre in zip(p.atoms, p.pre_values):
            for v in kids:
                atom_rows.append((f"{t:.8g}", f"{pre:.8g}", f"{v:.8g}", f"{x:g}"))
    _write_csv(f"{base}_atoms.csv", ["time", "parent_pre", "child_value", "path_x"], atom_rows)
    if args.plot:
        with open(f"{base}.svg", "w") as fh:
            fh.write(SVG.polyline_svg(series, title=f"coupled decorations ({args.quad})"))
    audit = SIM.monotonicity_audit(flow)
    print(f"paths: {len(flow.xs)}  audit violations: {audit.violations}  worst margin: {audit.worst_margin:.3e}")
    return 0 if audit.passed else 1


def cmd_tree(args):
    quad = ME.get_quadruplet(args.quad, alpha=args.alpha)
    family = _family_for_key(args.family, measure=quad.measure, alpha=quad.alpha)
    tree = TR.build_tree(quad, family, args.x, args.cutoff, args.depth_cap, seed=args.seed)
    out = args.out or "tree.json"
    TR.save_tree(tree, out)
    st = TR.tree_stats(tree)
    print(f"branches {st.branch_count}  total length {st.total_length:.4f}  height {st.height:.4f}  "
          f"tips {st.tip_count}  truncated {tree.truncated}")
    print(f"wrote {out}")
    return 0


def cmd_nested(args):
    quad = ME.get_quadruplet(args.quad, alpha=args.alpha)
    family = _family_for_key(args.family, measure=quad.measure, alpha=quad.alpha)
    xs = [float(v) for v in args.xs.split(",")]
    fam = TR.build_nested(quad, family, xs, args.cutoff, args.depth_cap, seed=args.seed)
    base = args.out or "nested"
    rows = []
    for lo_i in range(len(xs) - 1):
        d = TR.hypograph_distance_nested(fam, xs[lo_i], xs[-1], mesh=args.mesh)
        rows.append((f"{xs[lo_i]:g}", f"{xs[-1]:g}", f"{d:.6f}"))
    _write_csv(f"{base}_distances.csv", ["x_lo", "x_hi", "hypograph_distance"], rows)
    if args.plot:
        for x in xs:
            tree = fam.trees[x]
            series = []
            for lab in tree.present_labels():
                br = tree.branches[lab]
                p = br.paths[x]
                d0 = tree.root_distance(lab)
                ts = np.linspace(0, p.z, 40)
                series.append([(d0 + float(t), p.value(t)) for t in ts])
            with open(f"{base}_hypograph_{x:g}.svg", "w") as fh:
                fh.write(SVG.hypograph_svg(series, title=f"decoration vs depth at x={x:g}"))
    for r in rows:
        print(",".join(r))
    print(f"wrote {base}_distances.csv")
    return 0


def cmd_grow(args):
    quad = ME.get_quadruplet(args.quad, alpha=args.alpha)
    family = _family_for_key(args.family, measure=quad.measure, alpha=quad.alpha)
    fam = TR.build_nested(quad, family, [args.x_from], args.cutoff, args.depth_cap,
                          seed=args.seed, headroom=max(args.x_to / args.x_from, 1.0))
    grown = TR.grow_step(fam, args.x_to, fresh_seed=args.fresh_seed)
    out = args.out or "grown_tree.json"
    TR.save_tree(grown, out)
    st = TR.tree_stats(grown)
    print(f"grew {args.x_from:g} -> {args.x_to:g}: branches {st.branch_count}  "
          f"total length {st.total_length:.4f}  height {st.height:.4f}")
    print(f"wrote {out}")
    return 0


def cmd_divfield(args):
    grid = DF.SimplexGrid(n=args.n, margin=args.margin, alpha=args.alpha)
    V = DF.solve_characteristics(grid, args.alpha)
    fields = [V]
    if args.bump:
        cx, cy, rad, h = (float(v) for v in args.bump.split(","))
        W = DF.bump_perturbation(V, grid, DF.Bump(cx, cy, rad, h))
        fields.append(W)
    base = args.out or "divfield"
    ok = True
    for fld in fields:
        rep = DF.inequality_grid(fld, grid)
        print(f"{fld.name}: inequality margin {rep.worst_margin:.5f}  violations {rep.violations}")
        ok &= rep.passed
        _write_csv(f"{base}_{fld.name}.csv", ["x", "y", "u", "vx", "vy"],
                   [(f"{x:.6f}", f"{y:.6f}", f"{u:.6g}", f"{vx:.6g}", f"{vy:.6g}")
                    for x, y, u, vx, vy in zip(grid.x, grid.y, fld.u, fld.vx, fld.vy)])
        if args.plot:
            idx = np.arange(0, len(grid.x), max(len(grid.x) // 900, 1))
            with open(f"{base}_{fld.name}.svg", "w") as fh:
                fh.write(SVG.quiver_svg(list(zip(grid.x[idx], grid.y[idx])),
                                        list(zip(fld.vx[idx], fld.vy[idx])),
                                        title=f"field {fld.name}"))
    return 0 if ok else 1


def cmd_catalog(args):
    rows = []
    for key in ME.catalog_keys():
        m = ME.get_measure(key)
        try:
            ac = f"{GEN.alpha_critical(m):.6f}"
        except ConfigurationError:
            ac = "n/a"
        bound = f"{ME.y1_moment_bound(m):.6f}"
        try:
            q = ME.get_quadruplet(key)
            cert = f"kappa({q.gamma0:g}) = {ME.cumulant(q, q.gamma0):.3g}"
        except ConfigurationError as e:
            cert = f"n/a ({str(e).split(' -- ')[-1][:48]})"
        rows.append((key, ac, bound, cert))
    widths = [max(len(r[i]) for r in rows + [("key", "alpha_c", "y1_bound", "subcriticality")])
              for i in range(4)]
    print("  ".join(h.ljust(w) for h, w in zip(("key", "alpha_c", "y1_bound", "subcriticality"), widths)))
    for r in rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(r, widths)))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="ssmtree",
                                description="growing couplings of self-similar Markov trees")
    p.add_argument("--config", help="key = value file with default options")
    p.add_argument("--threads", type=int, default=0,
                   help="worker processes for Monte Carlo commands (0 = auto)")
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("alpha-c", help="critical self-similarity exponent")
    pa.add_argument("--measure", help="catalog key, e.g. gamma-binary:2.5")
    pa.add_argument("--curve", help="gamma=lo:hi:step sweep, CSV output")
    pa.add_argument("--out")
    pa.set_defaults(fn=cmd_alpha_c)

    pf = sub.add_parser("flow-check", help="growing-condition checks for a family/measure pair")
    pf.add_argument("--family", required=True)
    pf.add_argument("--measure", required=True)
    pf.add_argument("--alpha", type=float, required=True)
    pf.add_argument("--xs", default="0.5")
    pf.add_argument("--thresholds", default="0.05,0.1,0.2,0.4")
    pf.add_argument("--samples", type=int, default=400)
    pf.add_argument("--seed", type=int, default=_default_seed())
    pf.add_argument("--out")
    pf.set_defaults(fn=cmd_flow_check)

    ps = sub.add_parser("simulate", help="coupled decoration-reproduction paths")
    ps.add_argument("--quad", required=True)
    ps.add_argument("--family", default="brownian-closed-form")
    ps.add_argument("--alpha", type=float)
    ps.add_argument("--xs", default="0.25,0.5,1")
    ps.add_argument("--cutoff", type=float, default=1e-3)
    ps.add_argument("--seed", type=int, default=_default_seed())
    ps.add_argument("--horizon", type=float, default=None)
    ps.add_argument("--backend", default="pure-jump", choices=["pure-jump", "euler"])
    ps.add_argument("--step", type=float, default=1e-4)
    ps.add_argument("--plot", action="store_true")
    ps.add_argument("--out")
    ps.set_defaults(fn=cmd_simulate)

    pt = sub.add_parser("tree", help="build one decorated tree")
    pt.add_argument("--quad", required=True)
    pt.add_argument("--family", default="brownian-closed-form")
    pt.add_argument("--alpha", type=float)
    pt.add_argument("--x", type=float, default=1.0)
    pt.add_argument("--cutoff", type=float, default=1e-3)
    pt.add_argument("--depth-cap", type=int, default=30)
    pt.add_argument("--seed", type=int, default=_default_seed())
    pt.add_argument("--out")
    pt.set_defaults(fn=cmd_tree)

    pn = sub.add_parser("nested", help="nested family with hypograph distances")
    pn.add_argument("--quad", required=True)
    pn.add_argument("--family", default="brownian-closed-form")
    pn.add_argument("--alpha", type=float)
    pn.add_argument("--xs", default="0.3,0.6,1.0")
    pn.add_argument("--cutoff", type=float, default=1e-3)
    pn.add_argument("--mesh", type=float, default=0.02)
    pn.add_argument("--depth-cap", type=int, default=30)
    pn.add_argument("--seed", type=int, default=_default_seed())
    pn.add_argument("--plot", action="store_true")
    pn.add_argument("--out")
    pn.set_defaults(fn=cmd_nested)

    pg = sub.add_parser("grow", help="Markov-forward grow step")
    pg.add_argument("--quad", required=True)
    pg.add_argument("--family", default="brownian-closed-form")
    pg.add_argument("--alpha", type=float)
    pg.add_argument("--x-from", type=float, required=True)
    pg.add_argument("--x-to", type=float, required=True)
    pg.add_argument("--cutoff", type=float, default=1e-3)
    pg.add_argument("--depth-cap", type=int, default=30)
    pg.add_argument("--seed", type=int, default=_default_seed())
    pg.add_argument("--fresh-seed", type=int, default=None)
    pg.add_argument("--out")
    pg.set_defaults(fn=cmd_grow)

    pd = sub.add_parser("divfield", help="transport-PDE counter-example fields")
    pd.add_argument("--alpha", type=float, default=0.25)
    pd.add_argument("--n", type=int, default=200)
    pd.add_argument("--margin", type=float, default=1e-3)
    pd.add_argument("--bump", help="cx,cy,R,h")
    pd.add_argument("--plot", action="store_true")
    pd.add_argument("--out")
    pd.set_defaults(fn=cmd_divfield)

    pc = sub.add_parser("catalog", help="list catalog entries with exponents and certificates")
    pc.set_defaults(fn=cmd_catalog)
    return p


def apply_config_file(args, parser):
    kv = ME.parse_kv_file(args.config)
    for k, v in kv.items():
        k = k.replace("-", "_")
        if hasattr(args, k) and getattr(args, k) in (None, parser.get_default(k)):
            cur = getattr(args, k)
            typ = type(cur) if cur is not None else str
            setattr(args, k, typ(v) if typ is not bool else v.lower() in ("1", "true", "yes"))
    return args


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "fresh_seed", None) is None and args.command == "grow":
            args.fresh_seed = (args.seed or 0) + 1
        if args.config:
            args = apply_config_file(args, parser)
        config = RunConfig(args.command, {k: v for k, v in vars(args).items()
                                          if k not in ("fn", "config")})
        _ = config.serialize()
        return args.fn(args)
    except (ConfigurationError, SupportError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
