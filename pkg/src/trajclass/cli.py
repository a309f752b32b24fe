"""
Command-line interface: ``trajclass {simulate,calibrate,classify,bench}``.

Results go to files; logs go to standard error. Exit codes: 0 success,
1 internal error, 2 bad command line, 3 invalid parameter or data,
4 malformed input file, 5 file system error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import SCENARIOS, BenchConfig
from .bench import run as run_bench
from .classify import MODES, classify_tracks
from .errors import ParameterError, TrajclassError
from .io import FilterPolicy, TableStore, apply_filters, emit_report, load_trajectories, save_null_table, write_trajectories
from .processes import RngSeed, Trajectory, simulate_mixture, simulate_paths, spec_from_dict
from .teststat import DEFAULT_N_INTERACTIVE, build_null_table, critical_values

logger = logging.getLogger("trajclass")

EXIT_IO = 5
REPORT_FORMATS = ("delimited", "table-text", "map-vector-graphic")


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _ints(text):
    return tuple(int(v) for v in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajclass", description="Classify 2-D particle trajectories by diffusion type.")
    parser.add_argument("--version", action="version", version=f"trajclass {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate trajectories to a delimited file")
    p.add_argument("--model", choices=("brownian", "drift", "ou", "fbm"), default="brownian")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--speed", type=float, help="drift speed along the diagonal")
    p.add_argument("--vx", type=float, default=0.0)
    p.add_argument("--vy", type=float, default=0.0)
    p.add_argument("--lam", type=float, default=0.5, help="OU mean-reversion rate")
    p.add_argument("--hurst", type=float, default=0.5)
    p.add_argument("--stationary", action="store_true", help="start OU tracks from the stationary law")
    p.add_argument("--n", type=int, default=30, help="increments per track")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--mixture", action="store_true", help="labelled benchmark collection with a truth column")
    p.add_argument("--m", type=int, default=200, help="collection size with --mixture")
    p.add_argument("--m0-frac", type=float, default=0.4, help="Brownian fraction with --mixture")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("calibrate", help="build and save null tables")
    p.add_argument("--n", type=_ints, required=True, help="comma-separated increment counts")
    p.add_argument("--N", type=int, default=DEFAULT_N_INTERACTIVE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("first", "second"), default="first")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--tables", type=Path, required=True, help="output directory")

    p = sub.add_parser("classify", help="classify the tracks of a delimited file")
    p.add_argument("input", type=Path)
    p.add_argument("--mode", choices=MODES, default="single")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--dt", type=float, help="frame interval; overrides the file header")
    p.add_argument("--tables", type=Path, help="directory caching null tables")
    p.add_argument("--N", type=int, default=DEFAULT_N_INTERACTIVE)
    p.add_argument("--seed", type=int, default=0, help="null-table seed")
    p.add_argument("--method", choices=("first", "second"), default="first")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--filter", action="store_true", help="apply the tracker-output filters")
    p.add_argument("--min-distinct", type=int, default=20)
    p.add_argument("--format", dest="formats", action="append", choices=REPORT_FORMATS,
                   help="report format (repeatable; default delimited and table-text)")
    p.add_argument("--map", action="store_true", help="also draw the classification map")
    p.add_argument("--out-dir", type=Path, default=Path("."))
    p.add_argument("--stem", default="report")

    p = sub.add_parser("bench", help="run a Monte Carlo benchmark scenario")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--fast", action="store_true", help="divide replicate counts by 100")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--table-seed", type=int, default=12345)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--n", type=int, help="increments (default 30; 1000 for donsker)")
    p.add_argument("--ns", type=_ints, default=(10, 30, 100), help="quantile-table lengths")
    p.add_argument("--power-ns", type=_ints, default=(10, 30, 50), help="power-single lengths")
    p.add_argument("--N", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--ms", type=_ints, default=(100, 200))
    p.add_argument("--m0-frac", type=float, default=0.4)
    p.add_argument("--m0-fracs", type=_floats, default=(0.0, 0.2, 0.4, 0.6, 0.8))
    p.add_argument("--drift-grid", type=_floats)
    p.add_argument("--ou-grid", type=_floats)
    p.add_argument("--fbm-grid", type=_floats)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", type=Path, default=Path("bench_out"))
    return parser


def cmd_simulate(args):
    if args.count < 0:
        raise ParameterError("count must be nonnegative")
    truth = None
    if args.mixture:
        m0 = int(round(args.m0_frac * args.m))
        trajs, truth = simulate_mixture(args.m, m0, args.n, args.dt, seed=RngSeed(args.seed))
    else:
        params = {"model": args.model, "sigma": args.sigma}
        if args.model == "drift":
            if args.speed is not None:
                params["speed"] = args.speed
            else:
                params["v"] = (args.vx, args.vy)
        elif args.model == "ou":
            params["lam"] = args.lam
        elif args.model == "fbm":
            params["hurst"] = args.hurst
        spec = spec_from_dict(params)
        trajs = []
        if args.count > 0:
            x0 = "stationary" if args.stationary else None
            paths = simulate_paths(spec, args.n, args.count, args.dt, x0=x0, rng=RngSeed(args.seed).generator())
            trajs = [Trajectory(p, dt=args.dt, track_id=i) for i, p in enumerate(paths)]
    write_trajectories(args.out, trajs, truth, dt=args.dt)
    logger.info("wrote %d tracks to %s", len(trajs), args.out)


def cmd_calibrate(args):
    for n in args.n:
        table = build_null_table(n, args.N, args.seed, args.method, workers=args.workers)
        store = TableStore(args.tables, args.N, args.seed, args.method)
        path = save_null_table(table, store.path_for(n, args.N, args.seed, table.method.value))
        lo, hi = critical_values(table, args.alpha)
        logger.info("n=%d: q(%g)=%.4f q(%g)=%.4f -> %s", n, args.alpha / 2, lo, 1 - args.alpha / 2, hi, path)


def cmd_classify(args):
    tracks = load_trajectories(args.input, dt=args.dt)
    trajs = tracks.trajectories
    skipped = list(tracks.skipped)
    if args.filter:
        trajs, dropped = apply_filters(trajs, FilterPolicy(min_distinct_positions=args.min_distinct))
        skipped += dropped
    for tid, reason in skipped:
        logger.info("track %r skipped: %s", tid, reason)
    store = TableStore(args.tables, args.N, args.seed, args.method, args.workers)
    rows = classify_tracks(trajs, args.mode, args.alpha, store)
    formats = list(args.formats or ("delimited", "table-text"))
    if args.map and "map-vector-graphic" not in formats:
        formats.append("map-vector-graphic")
    header = {"mode": args.mode, "alpha": args.alpha, "N": args.N, "seed": args.seed, "method": args.method,
              "input": args.input.name, "skipped": len(skipped)}
    written = emit_report(rows, args.out_dir, args.stem, formats, trajectories=trajs, truth=tracks.truth or None,
                          title=f"{args.input.name}: mode={args.mode} alpha={args.alpha}", extra_header=header)
    for fmt, path in written.items():
        logger.info("%s -> %s", fmt, path)


def cmd_bench(args):
    grid = {k: list(v) for k, v in (("drift", args.drift_grid), ("ou", args.ou_grid), ("fbm", args.fbm_grid)) if v}
    n = args.n if args.n is not None else (1000 if args.scenario == "donsker" else 30)
    cfg = BenchConfig(scenario=args.scenario, seed=args.seed, alpha=args.alpha, n=n, ns=args.ns,
                      power_ns=args.power_ns, m=args.m, ms=args.ms, m0_frac=args.m0_frac, m0_fracs=args.m0_fracs,
                      table_seed=args.table_seed, grid=grid, workers=args.workers)
    if args.scenario == "donsker":
        cfg.replicates = 10_000
    if args.fast:
        cfg = cfg.scaled(100)
    if args.N is not None:
        cfg.N = args.N
    if args.replicates is not None:
        cfg.replicates = args.replicates
    result = run_bench(cfg, args.out_dir)
    for name, path in result["files"].items():
        logger.info("%s -> %s", name, path)


COMMANDS = {"simulate": cmd_simulate, "calibrate": cmd_calibrate, "classify": cmd_classify, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logger.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        COMMANDS[args.command](args)
    except TrajclassError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except ValueError as exc:
        logger.error("%s", exc)
        return 3
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
