"""Command-line front end.

Subcommands: ``spectrum``, ``sweep``, ``semiclassical``, ``classify`` and
``scaling``. Exit status is 0 on success, 1 on a configuration error and
2 when at least one grid point failed (its error is kept in the output).
"""

import argparse
import csv
import logging
import os
import sys

import numpy as np

from .liouvillian import liouvillian
from .model import ModelSpec, rescale
from .semiclassical import (branch_table, classify_transition, detect_multistability,
                            fixed_points, write_branch_csv)
from .spectra import SolverError, model_spectra
from .sweep import (ConfigError, adaptive_cutoff, load_config, parse_sectors, run_sweep,
                    scaling_series, write_outputs, _label)
from .symmetry import sector_decomposition

EXIT_OK, EXIT_CONFIG, EXIT_FAILURES = 0, 1, 2


def _overrides(args):
    out = {}
    for key in ("cutoff", "sectors", "n_eigs", "threads"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    if getattr(args, "out", None):
        out["out"] = args.out
    return out


def _load(args):
    if not args.config:
        raise ConfigError("--config is required")
    return load_config(args.config, _overrides(args))


def _out_dir(args, config):
    out = args.out or config.out_dir
    if not out:
        raise ConfigError("no output directory; pass --out or set 'out' in the config")
    os.makedirs(out, exist_ok=True)
    return out


def _pick(value, grid):
    if value is None:
        return grid[0]
    return float(value)


def cmd_spectrum(args):
    config = _load(args)
    drive = _pick(args.drive, config.drive_grid)
    scale = _pick(args.scale, config.l_grid)
    spec = rescale(config.model.replace(g_n=drive), scale)
    if config.cutoff == "adaptive":
        n_c = adaptive_cutoff(spec, config.population_sectors or None,
                              max_cutoff=config.max_cutoff)
    else:
        n_c = config.cutoff
    spec = spec.replace(n_c=n_c)
    sup = liouvillian(spec)
    dec = sector_decomposition(sup, spec.n, spec.symmetry_kind, with_blocks=False)
    print(f"model: n={spec.n} symmetry={spec.symmetry_kind} G={drive!r} L={scale!r} "
          f"n_c={n_c} liouville_dim={sup.dim} sectors={len(dec)}")
    sectors = args.sectors and parse_sectors(args.sectors) or dec.labels()
    try:
        spectra = model_spectra(spec, sectors, config.n_eigs, config.dense_threshold)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURES
    out = args.out or config.out_dir
    if out:
        os.makedirs(out, exist_ok=True)
    for lab in dec.labels():
        dim = len(dec.indices(dec.find(lab)))
        line = f"sector {_label(lab)} dim={dim}"
        if lab in spectra:
            ss = spectra[lab]
            vals = " ".join(f"{v.real:.10g}{v.imag:+.10g}j" for v in ss.eigenvalues)
            line += (f" method={ss.method} max_residual={ss.residuals.max():.3g}"
                     f" null={ss.null_multiplicity} eigenvalues=[{vals}]")
            if out:
                path = os.path.join(out, f"spectrum_{_label(lab).replace(':', '_')}.csv")
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["index", "re", "im", "residual"])
                    for i, (v, r) in enumerate(zip(ss.eigenvalues, ss.residuals)):
                        w.writerow([i, repr(float(v.real)), repr(float(v.imag)),
                                    repr(float(r))])
        print(line)
    return EXIT_OK


def cmd_sweep(args):
    config = _load(args)
    out = _out_dir(args, config)
    records = run_sweep(config)
    write_outputs(config, records, out)
    failed = [r for r in records if not r.ok]
    print(f"points: {len(records)} failed: {len(failed)} out: {out}")
    for r in failed:
        print(f"failed G={r.drive!r} L={r.scale_l!r}: {r.error}", file=sys.stderr)
    return EXIT_FAILURES if failed else EXIT_OK


def cmd_semiclassical(args):
    config = _load(args)
    out = _out_dir(args, config)
    model = config.model
    lo, hi, count = config.density_range
    dens = np.geomspace(lo, hi, count)
    write_branch_csv(branch_table(model, dens), os.path.join(out, "branch.csv"))
    with open(os.path.join(out, "fixed_points.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["G", "N", "theta", "stability", "classification"])
        for g in config.drive_grid:
            sols = fixed_points(model, g)
            for p in sols.points:
                w.writerow([repr(g), repr(p.density), repr(p.theta), p.stability,
                            sols.classification])
    report = classify_transition(model)
    multi = detect_multistability(model, (lo, hi))
    text = report.as_text()
    text += "extrema: " + ", ".join(f"{k}@N={x!r}" for x, k in multi.extrema) + "\n"
    text += f"descartes_bound: {multi.descartes_bound}\n"
    text += f"multistable: {multi.multistable}\n"
    with open(os.path.join(out, "classification.txt"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_classify(args):
    if args.config:
        model = load_config(args.config).model
    else:
        if args.n is None or args.u is None:
            raise ConfigError("classify needs --config or both --n and --u")
        try:
            u = [float(x) for x in args.u.split(",")]
            model = ModelSpec(args.n, u, 0.0, args.gamma, args.eta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    sys.stdout.write(classify_transition(model).as_text())
    return EXIT_OK


def cmd_scaling(args):
    config = _load(args)
    sector = parse_sectors(args.sector)[0] if args.sector else config.sectors[0]
    drive = _pick(args.drive, config.drive_grid)
    series = scaling_series(config, sector, args.which, drive)
    out = args.out or config.out_dir
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "scaling.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["L", "re_lambda"])
            for l, v in series.points:
                w.writerow([repr(l), repr(v)])
    for l, v in series.points:
        print(f"L={l!r} re_lambda={v!r}")
    if series.slope is None:
        print("fit: omitted (fewer than 3 tail points)")
    else:
        print(f"fit: slope={series.slope!r} intercept={series.intercept!r} "
              f"r2={series.r2!r} range={series.fit_range}")
    for l, err in series.errors:
        print(f"failed L={l!r}: {err}", file=sys.stderr)
    return EXIT_FAILURES if series.errors else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="kerrdpt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="flat key = value config file")
        if out:
            p.add_argument("--out", help="output directory")
        p.add_argument("--sectors", help="comma list, e.g. 0,1 or 0:0,0:1")
        p.add_argument("--n-eigs", dest="n_eigs", type=int)
        p.add_argument("--cutoff", help="'adaptive' or an integer Fock cutoff")
        p.add_argument("--threads", type=int)

    p = sub.add_parser("spectrum", help="sector report for one model point")
    common(p)
    p.add_argument("--drive", type=float, help="G (config units); default first grid value")
    p.add_argument("--scale", type=float, help="L; default first grid value")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep", help="run the (G, L) grid")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("semiclassical", help="branch tables and classification")
    common(p)
    p.set_defaults(func=cmd_semiclassical)

    p = sub.add_parser("classify", help="transition-order verdict for a model")
    p.add_argument("--config")
    p.add_argument("--n", type=int)
    p.add_argument("--u", help="comma list U_1,U_2,...")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--eta", type=float, default=0.0)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("scaling", help="eigenvalue against L at fixed drive")
    common(p)
    p.add_argument("--sector", help="sector label, e.g. 0 or 0:1")
    p.add_argument("--which", type=int, default=1, help="eigenvalue index in the sector")
    p.add_argument("--drive", type=float, help="G on the drive grid; default first value")
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
