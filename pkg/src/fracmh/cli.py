"""Command-line entry point: ``fracmh <subcommand> ...`` (see ``--help``)."""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys

import numpy as np

from . import constants as K
from . import harness as H
from .geometry import ShapeSpec, load_shape_config, rasterize


def _floats(text):
    return [float(x) for x in str(text).replace(",", " ").split()]


def _ms(cn):
    return K.MSConfig("user", cn) if cn is not None else K.default_ms()


def _writer(path):
    fh = open(path, "w", newline="") if path else sys.stdout
    return fh, csv.writer(fh)


def _run_config(path):
    """Optional ``[run]`` section: ``h``, ``s``, ``shapes`` (``;``-separated specs),
    ``cn``, ``sigma``, ``k``."""
    if not path:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise SystemExit(f"cannot read config {path}")
    return dict(cp["run"]) if "run" in cp else {}


def _shape_arg(args):
    if getattr(args, "config", None) and not args.shape:
        return load_shape_config(args.config)
    if not args.shape:
        raise SystemExit("a --shape (or --config with a [shape] section) is required")
    return ShapeSpec.parse(args.shape)


def cmd_constants(args) -> int:
    ms = _ms(args.cn)
    lam = K.lambda1_unit_disk()
    fh, w = _writer(args.out)
    w.writerow(K.ConstantsProfile.CSV_COLUMNS)
    for s in _floats(args.s):
        if not 0.5 < s < 1:
            print(f"skipping s={s}: the chain needs 1/2 < s < 1", file=sys.stderr)
            continue
        w.writerow(K.profile(s, ms, lam).row())
    if args.out:
        fh.close()
    if ms.note:
        print(ms.note, file=sys.stderr)
    return 0


def cmd_torus(args) -> int:
    from .torus import poincare_margin, random_trig_poly
    fh, w = _writer(args.out)
    w.writerow(["s", "degree", "seeds", "worst_margin", "failures", "passed"])
    bad = 0
    for s in _floats(args.s):
        worst, fails = math.inf, 0
        for seed in range(args.seeds):
            wfun = random_trig_poly(np.random.default_rng(seed), args.degree, vanish_at=0.0)
            m = poincare_margin(wfun, s, 0.0)
            worst = min(worst, m)
            fails += m < -1e-9
        bad += fails
        w.writerow([s, args.degree, args.seeds, worst, fails, fails == 0])
    if args.out:
        fh.close()
    return int(bad > 0)


def cmd_eigen(args) -> int:
    from .spectral import lambda1_local, lambda1_s
    spec = _shape_arg(args)
    mask = rasterize(spec, args.h)
    if args.s == "local":
        est = lambda1_local(mask)
    else:
        est = lambda1_s(mask, float(args.s))
    print(f"lambda={float(est.lam)!r} residual={est.residual:.3e} nodes={est.nodes}")
    if args.dump_mode:
        nx, ny = mask.shape
        grid = np.zeros((nx + 1, ny + 1))
        grid[est.node_ij[:, 0], est.node_ij[:, 1]] = est.vector
        np.savetxt(args.dump_mode, grid.T[::-1], fmt="%.10e",
                   header=f"h={float(mask.h)!r} origin={mask.origin[0]!r},{mask.origin[1]!r} rows top-down")
    return 0


def cmd_cover(args) -> int:
    from .covering import build_covering, class_overlaps, color_covering, coverage_gaps
    mask = rasterize(_shape_arg(args), args.h)
    cov = color_covering(build_covering(mask))
    fh, w = _writer(args.out)
    w.writerow(["x", "y", "radius", "color"])
    for row in cov.rows():
        w.writerow(row)
    if args.out:
        fh.close()
    gaps, over = len(coverage_gaps(cov)), len(class_overlaps(cov))
    print(f"disks={cov.size} classes={cov.n_classes} gaps={gaps} overlaps={over}", file=sys.stderr)
    return int(gaps > 0 or over > 0)


def cmd_extension(args) -> int:
    from .extension import extension_bound_ratios, random_smooth_field
    fh, w = _writer(args.out)
    w.writerow(["seed", "s", "R", "seminorm_ratio", "seminorm_bound", "l2_ratio", "l2_bound", "ok"])
    bad = 0
    for seed in range(args.seeds):
        u = random_smooth_field(np.random.default_rng(seed), 1.0, args.spacing)
        for s in _floats(args.s):
            b = extension_bound_ratios(u, args.R, s)
            bad += not b.ok
            w.writerow([seed, s, args.R, b.seminorm_ratio, b.seminorm_bound, b.l2_ratio, b.l2_bound, b.ok])
    if args.out:
        fh.close()
    return int(bad > 0)


def _emit(rows, out) -> int:
    if out:
        H.write_rows(rows, out)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(H.ReportRow.FIELDS)
        for r in rows:
            w.writerow([getattr(r, f) for f in H.ReportRow.FIELDS])
    bad = H.hard_failures(rows)
    for r in bad:
        print(f"FAIL {r.experiment} {r.shape} s={r.s} margin={r.margin:.3g}", file=sys.stderr)
    return int(bool(bad))


def _common(args):
    cfg = _run_config(args.config)
    h = float(cfg.get("h", args.h))
    s_list = _floats(cfg["s"]) if "s" in cfg else _floats(args.s)
    cn = float(cfg["cn"]) if "cn" in cfg else args.cn
    shapes = None
    if "shapes" in cfg:
        shapes = [ShapeSpec.parse(t) for t in cfg["shapes"].split(";") if t.strip()]
    elif getattr(args, "shape", None):
        shapes = [ShapeSpec.parse(t) for t in args.shape]
    return cfg, h, s_list, _ms(cn), shapes


def cmd_sweep(args) -> int:
    cfg, h, s_list, ms, shapes = _common(args)
    shapes = shapes or list(H.default_zoo().values())
    mh_s = [s for s in s_list if 0.5 < s < 1]
    lab = H.Lab()
    rows = H.run_makai_hayman(shapes, mh_s, h, ms, lab=lab)
    rows += H.run_density(shapes, mh_s, h, float(cfg.get("sigma", args.sigma)), lab=lab)
    return _emit(rows, args.out)


def cmd_counterexample(args) -> int:
    cfg, h, s_list, ms, _ = _common(args)
    ks = [int(k) for k in _floats(cfg.get("k", args.k))]
    return _emit(H.run_counterexample(ks, s_list, h, ms), args.out)


def _per_shape(args, fn) -> int:
    cfg, h, s_list, ms, shapes = _common(args)
    shapes = shapes or [ShapeSpec("disk", radius=1.0), ShapeSpec("square", side=2.0)]
    lab = H.Lab()
    rows = []
    for shape in shapes:
        for s in s_list:
            rows += fn(shape, s, ms, h=h, lab=lab)
    return _emit(rows, args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracmh", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("constants", help="constant chain as CSV")
    c.add_argument("--s", default="0.55 0.6 0.75 0.9")
    c.add_argument("--cn", type=float, default=None, help="Maz'ya-Shaposhnikova C_N (default: empirical)")
    c.add_argument("--out")
    c.set_defaults(fn=cmd_constants)

    c = sub.add_parser("torus-check", help="periodic Poincare inequality on random polynomials")
    c.add_argument("--s", default="0.55 0.75 0.9")
    c.add_argument("--degree", type=int, default=8)
    c.add_argument("--seeds", type=int, default=100)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_torus)

    c = sub.add_parser("eigen", help="first eigenvalue of one shape")
    c.add_argument("--shape")
    c.add_argument("--config")
    c.add_argument("--s", default="0.75", help="order in (0, 1) or 'local'")
    c.add_argument("--h", type=float, default=1 / 32)
    c.add_argument("--dump-mode")
    c.set_defaults(fn=cmd_eigen)

    c = sub.add_parser("cover", help="boundary-disk covering as CSV")
    c.add_argument("--shape")
    c.add_argument("--config")
    c.add_argument("--h", type=float, default=1 / 32)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_cover)

    c = sub.add_parser("extension-check", help="Kelvin extension bound ratios")
    c.add_argument("--R", type=float, default=math.sqrt(2))
    c.add_argument("--s", default="0.6 0.75 0.9")
    c.add_argument("--seeds", type=int, default=20)
    c.add_argument("--spacing", type=float, default=0.05)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_extension)

    for name, fn, helptext in (("sweep", cmd_sweep, "Makai-Hayman and density bounds on a shape list"),
                               ("counterexample", cmd_counterexample, "cracked squares"),
                               ("cheeger", lambda a: _per_shape(a, H.run_cheeger), "Cheeger chains"),
                               ("compare", lambda a: _per_shape(a, H.run_comparison),
                                "fractional vs local eigenvalue")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--out", help="report path (.csv or .json); stdout CSV if omitted")
        c.add_argument("--config", help="INI file with a [run] section")
        c.add_argument("--h", type=float, default=1 / 32)
        c.add_argument("--s", default="0.55 0.75 0.9" if name != "counterexample" else "0.5 0.75")
        c.add_argument("--cn", type=float, default=None)
        if name in ("sweep", "cheeger", "compare"):
            c.add_argument("--shape", action="append", help="shape spec, repeatable")
        if name == "sweep":
            c.add_argument("--sigma", type=float, default=2.0)
        if name == "counterexample":
            c.add_argument("--k", default="2 3 4")
        c.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
