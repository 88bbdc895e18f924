"""Command-line interface: ``eitomo {simulate,reconstruct,metrics,bench}``.

All file arguments are relative to ``--workdir``. Exit status is 0 on
success, 1 when inputs or configuration are invalid and 2 on a numerical
failure during computation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, NumericError, ResourceError, ShapeError
from .io import RunConfig, load_dataset, read_array, save_dataset, write_array

log = logging.getLogger("eitomo")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class UsageError(DomainError):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation failures, so they exit with 1 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _run_config(args) -> RunConfig:
    """Defaults, then ``--config`` file, then explicit flags."""
    base = RunConfig.load(Path(args.workdir) / args.config).to_dict() if args.config else RunConfig().to_dict()
    for key in base:
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    return RunConfig.from_dict(base)


def _add_config_flags(p: argparse.ArgumentParser, keys) -> None:
    types = {f: type(v) for f, v in RunConfig().to_dict().items()}
    types["threads"] = int
    for key in keys:
        t = types[key]
        kw = {"type": _bool if t is bool else t, "default": None, "metavar": key.upper()}
        p.add_argument("--" + key.replace("_", "-"), dest=key, **kw)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .simulate import make_dataset

    run = _run_config(args)
    ds = make_dataset(run.preset, run.seed, noise=run.noise, **run.simulation_overrides())
    path = save_dataset(ds, args.workdir, run)
    print(f"wrote {path}")
    return EXIT_OK


def _select_angles(scan, which: str):
    n = scan.geometry.n_angles
    if which == "all":
        return scan
    return scan.subset_angles(np.arange(0 if which == "even" else 1, n, 2))


def cmd_reconstruct(args) -> int:
    import time

    from .singleshot import reconstruct
    from .solver import SolverConfig, minimize

    run = _run_config(args)
    scan, index = load_dataset(args.workdir)
    scan = _select_angles(scan, args.angles)
    wd = Path(args.workdir)
    name = args.output or f"recon_{args.mode}" + ("" if args.angles == "all" else f"_{args.angles}")
    report = {"mode": args.mode, "angles": args.angles, "gamma": run.gamma, "dataset": str(wd / "dataset.json")}
    if args.mode == "singleshot":
        t0 = time.perf_counter()
        stats: dict = {}
        h = reconstruct(scan, run.gamma, stats=stats)
        report.update(iterations=0, wall_time=time.perf_counter() - t0, n_clamped=stats["n_clamped"], cost_history=[])
    else:
        cfg = SolverConfig(
            lam=run.lam, gamma=run.gamma, max_iters=run.max_iters, rel_tol=run.rel_tol,
            history_size=run.history_size, ring_enabled=run.ring_enabled, drift_enabled=run.drift_enabled,
            threads=run.threads,
        )
        res = minimize(scan, cfg)
        h = res.params.h
        write_array(res.params.m_o, wd / f"{name}_m_o", semantic="recovered mask drift m_o(theta)", units="um")
        if run.ring_enabled:
            write_array(res.params.m_r, wd / f"{name}_m_r", semantic="recovered ring offsets m_r(t)", units="um")
        report.update(
            iterations=res.n_iterations, evaluations=res.n_evaluations, wall_time=res.wall_time,
            converged=res.converged, message=res.message, lam=run.lam, ring_enabled=run.ring_enabled,
            drift_enabled=run.drift_enabled, final_cost=float(res.cost_history[-1]),
            cost_history=[float(c) for c in res.cost_history], diagnostics=res.diagnostics,
        )
        with (wd / f"{name}_cost.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "cost"])
            for i, c in enumerate(res.cost_history):
                w.writerow([i, repr(float(c))])
    write_array(h, wd / name, semantic=f"{args.mode} reconstruction h(y, x)", units="1/um")
    (wd / f"{name}_report.json").write_text(json.dumps(report, indent=2) + "\n")
    if args.plot:
        from .svgplot import heatmap

        heatmap(h, wd / f"{name}.svg", title=name)
    print(f"wrote {wd / (name + '.json')} ({report['iterations']} iterations, {report['wall_time']:.2f} s)")
    return EXIT_OK


def _parse_roi(text: str):
    from .metrics import Circle

    try:
        x, y, r = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"ROI {text!r} is not of the form X,Y,R") from None
    return Circle(x, y, r)


def cmd_metrics(args) -> int:
    from .metrics import Circle, central_crop, cnr, frc, resolution_from_frc, ring_score

    wd = Path(args.workdir)
    img = read_array(wd / args.image, np.float64)
    if args.roi:
        rois = {f"roi{i}": _parse_roi(t) for i, t in enumerate(args.roi)}
    else:
        index_path = wd / "dataset.json"
        regions = json.loads(index_path.read_text())["regions"] if index_path.exists() else {}
        rois = {k: Circle(v["x"], v["y"], v["radius"] * args.roi_frac) for k, v in regions.items()}
    if len(rois) < 2:
        raise UsageError("CNR needs at least two regions: pass --roi X,Y,R twice or use a dataset with regions")
    rows = [("ring_score", "", repr(ring_score(img)))]
    names = list(rois)
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            c = cnr(img, rois[names[i]], rois[names[j]])
            rows.append(("cnr", f"{names[i]}-{names[j]}", repr(c.value)))
    curve = None
    if args.frc_with:
        other = read_array(wd / args.frc_with, np.float64)
        curve = frc(central_crop(img, args.crop), central_crop(other, args.crop), sigma=args.sigma, pixel_size=args.pixel_size)
        for cut in args.cutoff:
            res = resolution_from_frc(curve, cut)
            rows.append(("resolution_px", f"{cut:g}", repr(res.pixels)))
            rows.append(("resolution_um", f"{cut:g}", repr(res.micrometers)))
            rows.append(("resolution_crossed", f"{cut:g}", str(res.crossed).lower()))
        rows += [("frc", repr(float(f)), repr(float(v))) for f, v in zip(curve.freq, curve.values)]
    out = wd / args.output
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "key", "value"])
        w.writerows(rows)
    if args.plot and curve is not None:
        from .svgplot import line_plot

        line_plot([("FRC", curve.freq, curve.values)], out.with_suffix(".svg"), title="Fourier ring correlation",
                  xlabel="frequency (cycles/pixel)", ylabel="FRC", hline=args.cutoff[0])
    print(f"wrote {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import parse_sizes, run_benchmark, write_csv

    sizes = parse_sizes(args.sizes)
    try:
        threads = [int(t) for t in args.threads_list.split(",")]
    except ValueError:
        raise UsageError(f"bad thread list {args.threads_list!r}") from None
    if any(t < 1 for t in threads):
        raise UsageError("thread counts must be >= 1")
    variants = args.variants.split(",")
    rows = run_benchmark(sizes, threads, variants, repeats=args.repeats, budget_bytes=int(args.budget_mb * 2**20))
    out = write_csv(rows, Path(args.workdir) / args.output)
    print(f"wrote {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eitomo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--workdir", default=".", help="directory all paths are relative to (default: .)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a granule scan and its flat field")
    s.add_argument("--config", help="JSON file with RunConfig fields")
    _add_config_flags(s, ["preset", "seed", "n_pixels", "n_angles", "span", "pixel_size", "z", "gamma",
                          "slope", "n_steps", "flat_counts", "noise"])
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", parents=[common], help="reconstruct a simulated dataset")
    r.add_argument("--mode", choices=["singleshot", "iterative"], required=True)
    r.add_argument("--config", help="JSON file with RunConfig fields")
    r.add_argument("--angles", choices=["all", "even", "odd"], default="all",
                   help="use all projections or every other one (for split-data FRC)")
    r.add_argument("--output", help="output array name (default recon_<mode>[_<angles>])")
    r.add_argument("--plot", action="store_true", help="also write an SVG image")
    _add_config_flags(r, ["gamma", "lam", "max_iters", "rel_tol", "history_size", "ring_enabled",
                          "drift_enabled", "threads"])
    r.set_defaults(func=cmd_reconstruct)

    m = sub.add_parser("metrics", parents=[common], help="FRC, CNR and ring score of a reconstruction")
    m.add_argument("--image", required=True, help="array name of the image")
    m.add_argument("--frc-with", help="second image for the FRC")
    m.add_argument("--roi", action="append", help="circular region X,Y,R in pixels (repeatable)")
    m.add_argument("--roi-frac", type=float, default=0.7, help="region radius as a fraction of the dataset disks")
    m.add_argument("--crop", type=float, default=0.64)
    m.add_argument("--sigma", type=float, default=2.0, help="FRC smoothing in frequency bins")
    m.add_argument("--cutoff", type=float, action="append", help="FRC threshold (repeatable, default 0.5)")
    m.add_argument("--pixel-size", type=float, default=50.0, help="micrometers per pixel")
    m.add_argument("--output", default="metrics.csv")
    m.add_argument("--plot", action="store_true", help="also write an SVG of the FRC curve")
    m.set_defaults(func=cmd_metrics)

    b = sub.add_parser("bench", parents=[common], help="time lookup-table and on-the-fly projectors")
    b.add_argument("--sizes", default="64x90,128x180,192x270", help="comma list of NxA (pixels x angles)")
    b.add_argument("--threads", dest="threads_list", default="1,4", help="comma list of thread counts")
    b.add_argument("--variants", default="lookup,onthefly")
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--budget-mb", type=float, default=2048.0, help="largest lookup table to build")
    b.add_argument("--output", default="bench.csv")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "cutoff", "unset") is None:
        args.cutoff = [0.5]
    try:
        wd = Path(args.workdir)
        if args.command != "simulate" and not wd.is_dir():
            raise UsageError(f"workdir {wd} does not exist")
        return args.func(args)
    except (NumericError, FloatingPointError) as exc:
        print(f"eitomo: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, ShapeError, ResourceError, FileNotFoundError, KeyError) as exc:
        print(f"eitomo: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
