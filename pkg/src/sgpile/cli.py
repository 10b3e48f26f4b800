"""Command-line interface.

Every run is reproducible from its flag set: outputs land in a directory
named `<command>-<hash>` derived from the normalized configuration, and a
machine-readable summary line is printed to stdout.  A flat key=value
config file can pre-set any flag; explicit flags win.

Exit codes: 0 success, 1 usage error, 2 capacity exceeded, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import CapacityError, UsageError, VerificationError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CAPACITY = 2
EXIT_VERIFY = 3


def _parser():
    p = argparse.ArgumentParser(prog="sgpile", add_help=True)
    p.add_argument("--config", help="key=value file with default flags")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        q = sub.add_parser(name, **kw)
        q.add_argument("--out", default="runs", help="output root directory")
        q.add_argument("--format", default="json,csv",
                       help="comma list of outputs: json,csv,png,svg")
        q.add_argument("--seed", type=int, default=0)
        return q

    q = add("build", help="construct a gasket graph and export its edges")
    q.add_argument("--level", type=int, required=True)
    q.add_argument("--sided", choices=("one", "two"), default="one")

    q = add("sandpile", help="single-source sandpile growth")
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--engine", choices=("naive", "hier"), default="naive")
    q.add_argument("--render", action="store_true",
                   help="also write a PNG of the stable configuration")
    q.add_argument("--scale", type=int, default=6)

    q = add("rotor", help="rotor-router aggregation")
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--mechanism", choices=("cw", "ccw", "random"),
                   default="cw")
    q.add_argument("--positions", choices=("zero", "random"), default="zero")

    q = add("divisible", help="divisible sandpile")
    q.add_argument("--m", type=str, required=True,
                   help="mass (integer or rational like 17/2)")
    q.add_argument("--arithmetic", choices=("exact", "float"),
                   default="exact")

    q = add("idla", help="IDLA ensemble statistics")
    q.add_argument("--n", type=int, required=True, help="target radius")
    q.add_argument("--runs", type=int, default=100)
    q.add_argument("--poisson", action="store_true")

    q = add("table", help="radial jump table (measured, with predictions)")
    q.add_argument("--nmax", type=int, default=4)
    q.add_argument("--csv", action="store_true", help="(kept for symmetry)")

    q = add("gfunc", help="sample the log-periodic scaling profile")
    q.add_argument("--samples", type=int, default=300)
    q.add_argument("--depth", type=int, default=40)

    q = add("bounds", help="volume-based growth bounds along a mass grid")
    q.add_argument("--mmax", type=int, default=2000)
    q.add_argument("--step", type=int, default=7)

    q = add("verify", help="identity / toppling verification suites")
    q.add_argument("--suite", choices=("identities", "toppling", "tiles"),
                   default="identities")
    q.add_argument("--nmax", type=int, default=3)

    q = add("render", help="render a tile or a grown cluster")
    q.add_argument("--tile", choices=("e", "e_o", "M", "zeta"))
    q.add_argument("--level", type=int)
    q.add_argument("--m", type=int)
    q.add_argument("--scale", type=int, default=6)
    return p


def _apply_config_file(argv, path):
    """Prepend file-provided key=value pairs as defaults (flags override)."""
    pairs = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"bad config line: {line!r}")
        k, v = line.split("=", 1)
        pairs.append((k.strip(), v.strip()))
    # insert after the subcommand token so argparse treats them normally
    out = list(argv)
    for k, v in pairs:
        flag = f"--{k}"
        if flag in out:
            continue
        if v.lower() in ("true", "yes"):
            out.append(flag)
        else:
            out.extend([flag, v])
    return out


def _run_dir(args):
    skip = {"out", "config"}
    items = sorted((k, str(v)) for k, v in vars(args).items()
                   if k not in skip and v is not None)
    digest = hashlib.sha256(json.dumps(items).encode()).hexdigest()[:10]
    d = Path(args.out) / f"{args.command}-{digest}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _emit(args, rundir, summary, artifacts=()):
    summary = dict(summary)
    summary["command"] = args.command
    summary["artifacts"] = [str(a) for a in artifacts]
    (rundir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _formats(args):
    return {f.strip() for f in args.format.split(",") if f.strip()}


# -- command bodies ----------------------------------------------------------

def _cmd_build(args, rundir):
    from .gasket import build_gasket

    g = build_gasket(args.level, args.sided)
    path = rundir / "edges.csv"
    with open(path, "w") as fh:
        g.export_csv(fh)
    return _emit(args, rundir, {
        "level": args.level, "sided": args.sided,
        "vertices": g.n_vertices, "edges": g.n_edges,
    }, [path])


def _cmd_sandpile(args, rundir):
    from .growth import sandpile_growth
    from .render import config_to_csv, render_config

    out = sandpile_growth(args.m, engine=args.engine)
    arts = []
    fmts = _formats(args)
    if "csv" in fmts:
        path = rundir / "config.csv"
        view = out.graph.sinked_view("none")
        from .sandpile import SandpileConfig
        with open(path, "w") as fh:
            config_to_csv(SandpileConfig(view, out.final.chips), fh)
        arts.append(path)
    if args.render or "png" in fmts:
        img = render_config(out.final, scale=args.scale)
        path = rundir / "config.png"
        img.save(path)
        arts.append(path)
    return _emit(args, rundir, out.summary(), arts)


def _cmd_rotor(args, rundir):
    from .growth import RotorSystem, rotor_router
    from .gasket import build_gasket
    from .growth.sandpile_growth import host_level_for_mass

    host = build_gasket(max(host_level_for_mass(max(args.m, 4)), 4))
    rotors = RotorSystem.build(host, args.mechanism, seed=args.seed,
                               random_positions=args.positions == "random")
    out = rotor_router(args.m, rotors)
    return _emit(args, rundir, out.summary() | {
        "mechanism": args.mechanism, "positions": args.positions}, [])


def _cmd_divisible(args, rundir):
    from .growth import divisible_sandpile

    m = Fraction(args.m)
    out = divisible_sandpile(m if m.denominator > 1 else int(m),
                             arithmetic=args.arithmetic)
    summary = out.summary()
    summary["m"] = str(m)
    summary["n_m"] = out.extra["n_m"]
    return _emit(args, rundir, summary, [])


def _cmd_idla(args, rundir):
    from .growth import idla_ensemble
    from .render import plot_fluctuations

    ens = idla_ensemble(args.n, runs=args.runs, seed=args.seed,
                        poisson=args.poisson)
    arts = []
    fmts = _formats(args)
    if "csv" in fmts:
        path = rundir / "ensemble.csv"
        with open(path, "w") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "run", "out_radius", "in_radius",
                         "rescaled_dev"])
            for r in ens["records"]:
                wr.writerow([r["n"], r["run"], r["out_radius"],
                             r["in_radius"], f"{r['rescaled_dev']:.6f}"])
        arts.append(path)
    if "png" in fmts:
        path = rundir / "fluctuations.png"
        plot_fluctuations(ens["records"], path)
        arts.append(path)
    outs = [r["out_radius"] for r in ens["records"]]
    ins = [r["in_radius"] for r in ens["records"]]
    return _emit(args, rundir, {
        "n": args.n, "runs": args.runs, "m_target": ens["m_target"],
        "poisson": bool(args.poisson), "seed": args.seed,
        "max_out_radius": max(outs), "min_in_radius": min(ins),
    }, arts)


def _cmd_table(args, rundir):
    from .radial import jump_table, preperiodic_rows

    rows = preperiodic_rows() + jump_table(args.nmax)
    mismatches = [r for r in rows if r.get("match") is False]
    path = rundir / "jump_table.csv"
    with open(path, "w") as fh:
        wr = csv.writer(fh)
        last_n = None
        for r in rows:
            if r["n"] != last_n:
                wr.writerow([f"# block n={r['n']}"])
                wr.writerow(["m_over_3n", "m", "m_prime",
                             "m_minus_2m_prime", "delta_r"])
                last_n = r["n"]
            frac = Fraction(r["m"], 3 ** r["n"]) if r["n"] else Fraction(r["m"])
            wr.writerow([f"{frac.numerator}/{frac.denominator}"
                         if frac.denominator > 1 else str(frac.numerator),
                         r["m"], r["m_prime"], r["retained"], r["delta_r"]])
    summary = {"nmax": args.nmax, "rows": len(rows),
               "mismatches": len(mismatches)}
    code = _emit(args, rundir, summary, [path])
    return EXIT_VERIFY if mismatches else code


def _cmd_gfunc(args, rundir):
    from .radial import profile_value
    from .render import plot_gfunction

    xs, vals, bounds = [], [], []
    for k in range(args.samples):
        x = Fraction(1) + Fraction(2 * k, args.samples)
        v, b = profile_value(x, depth=args.depth)
        xs.append(float(x))
        vals.append(v)
        bounds.append(b)
    path = rundir / "gfunction.csv"
    with open(path, "w") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "g_value", "trunc_bound"])
        for x, v, b in zip(xs, vals, bounds):
            wr.writerow([f"{x:.9f}", f"{v:.12f}", f"{b:.3e}"])
    arts = [path]
    if "png" in _formats(args):
        p2 = rundir / "gfunction.png"
        plot_gfunction(xs, vals, p2)
        arts.append(p2)
    return _emit(args, rundir, {
        "samples": args.samples, "depth": args.depth,
        "min": min(vals), "max": max(vals),
    }, arts)


def _cmd_bounds(args, rundir):
    from .radial import growth_bounds

    rows = []
    ok = True
    for m in range(12, args.mmax + 1, args.step):
        b = growth_bounds(m)
        ok &= b["ok"]
        rows.append(b)
    path = rundir / "bounds.csv"
    with open(path, "w") as fh:
        wr = csv.writer(fh)
        wr.writerow(["m", "r", "lower_ratio", "upper_ratio", "rossin_min"])
        for b in rows:
            wr.writerow([b["m"], b["r"], f"{b['lower_ratio']:.6f}",
                         f"{b['upper_ratio']:.6f}", b["rossin_min"]])
    code = _emit(args, rundir, {"mmax": args.mmax, "checked": len(rows),
                                "all_ok": ok}, [path])
    return code if ok else EXIT_VERIFY


def _cmd_verify(args, rundir):
    from .sandpile import verify_toppling_identities

    if args.suite == "toppling" or args.suite == "identities":
        reports = [verify_toppling_identities(n, n_random=3, seed=args.seed)
                   for n in range(1, args.nmax + 1)]
        ok = all(r["ok"] for r in reports)
        path = rundir / "verify.json"
        path.write_text(json.dumps(reports, indent=2) + "\n")
        code = _emit(args, rundir, {"suite": args.suite, "nmax": args.nmax,
                                    "ok": ok}, [path])
        return code if ok else EXIT_VERIFY
    if args.suite == "tiles":
        import numpy as np
        from .sandpile import tile, tile_direct
        ok = True
        for kind in ("e", "M", "zeta", "e_o"):
            for n in range(1, args.nmax + 1):
                ok &= np.array_equal(tile(kind, n).chips,
                                     tile_direct(kind, n).chips)
        code = _emit(args, rundir, {"suite": "tiles", "nmax": args.nmax,
                                    "ok": ok}, [])
        return code if ok else EXIT_VERIFY
    raise UsageError(f"unknown suite {args.suite!r}")


def _cmd_render(args, rundir):
    from .render import render_config
    from .sandpile import tile
    from .growth import sandpile_growth

    if args.tile:
        if not args.level:
            raise UsageError("--tile needs --level")
        cfg = tile(args.tile, args.level)
        name = f"{args.tile}_{args.level}.png"
    elif args.m is not None:
        out = sandpile_growth(args.m)
        cfg = out.final
        name = f"sandpile_{args.m}.png"
    else:
        raise UsageError("render needs --tile/--level or --m")
    img = render_config(cfg, scale=args.scale)
    path = rundir / name
    img.save(path)
    return _emit(args, rundir, {"rendered": name, "scale": args.scale},
                 [path])


_COMMANDS = {
    "build": _cmd_build,
    "sandpile": _cmd_sandpile,
    "rotor": _cmd_rotor,
    "divisible": _cmd_divisible,
    "idla": _cmd_idla,
    "table": _cmd_table,
    "gfunc": _cmd_gfunc,
    "bounds": _cmd_bounds,
    "verify": _cmd_verify,
    "render": _cmd_render,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    # peel --config before parsing so file values become defaults
    if "--config" in argv:
        k = argv.index("--config")
        cfg_path = argv[k + 1]
        argv = argv[:k] + argv[k + 2:]
        try:
            argv = _apply_config_file(argv, cfg_path)
        except (OSError, UsageError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        rundir = _run_dir(args)
        return _COMMANDS[args.command](args, rundir)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
