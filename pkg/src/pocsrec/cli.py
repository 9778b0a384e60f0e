"""Command-line interface: ``pocsrec <command> [options]``.

Commands
--------
encode       sample a seeded random band-limited input into an event CSV
reconstruct  rebuild a signal from an event CSV
experiment   run ``fig2`` or ``fig3`` and write CSVs plus a manifest
selftest     run the invariant suite (exit code 0 iff all checks pass)
emit-plots   write a matplotlib script next to the CSVs of a run
"""

import argparse
import sys
import time

import numpy as np

from ._csv import write_rows
from .baselines import frame_iterate, kaczmarz_iterate
from .encoders import (add_noise, integral_encode, integrate_and_fire_boundaries,
                       level_crossing_sample, point_sample, read_streams, write_streams)
from .experiments import (ExperimentConfig, emit_plot_script, load_config, random_instants,
                          run_fig2, run_fig3)
from .kernel_space import SamplingOperator
from .multichannel import MixingMatrix, mc_reconstruct
from .pocs import Problem, iterate
from .selftest import FAULTS, selftest
from .signal import Grid, random_bandlimited
from .sobolev import PointSampleSet, groch_iterate

RECON_METHODS = ("pocs", "grochenig", "frame", "kaczmarz_cyclic", "kaczmarz_random")


def _write_signal(path, x):
    write_rows(path, ["t", "value"], zip(x.grid.times, x.values))


def cmd_encode(args) -> int:
    g = Grid(args.period, args.G)
    x = random_bandlimited(args.seed, g)
    if args.kind == "if":
        b = integrate_and_fire_boundaries(x, args.threshold, args.bias)
        s = integral_encode(x, b)
        if args.snr_db is not None:
            s = add_noise(s, args.snr_db, args.seed + 1)
    elif args.kind == "level":
        if not args.levels:
            raise SystemExit("--levels is required for level-crossing sampling")
        s = level_crossing_sample(x, [float(v) for v in args.levels.split(",")])
        if args.snr_db is not None:
            s = add_noise(s, args.snr_db, args.seed + 1, reference_rms=x.rms())
    else:
        rng = np.random.default_rng(args.seed + 2)
        t = random_instants(rng, g.period, args.gap_low, args.gap_high)
        noise = None if args.snr_db is None else (args.snr_db, args.seed + 1)
        s = point_sample(x, t, noise=noise)
    write_streams(args.out, [s])
    if args.save_input:
        _write_signal(args.save_input, x)
    print(f"wrote {len(s)} samples to {args.out}")
    return 0


def cmd_reconstruct(args) -> int:
    g = Grid(args.period, args.G)
    streams = read_streams(args.streams)
    if not streams:
        raise SystemExit("no samples in the stream file")
    kind = streams[0].kind
    if args.mixing:
        X = mc_reconstruct(streams, MixingMatrix.from_csv(args.mixing), n_iters=args.max_iters,
                           grid=g)
        rows = [(ch, t, v) for ch in range(X.n_channels)
                for t, v in zip(g.times, X.values[ch])]
        write_rows(args.out, ["channel", "t", "value"], rows)
        print(f"wrote {X.n_channels} channels to {args.out}")
        return 0
    if len(streams) != 1:
        raise SystemExit("several channels need --mixing")
    s = streams[0]
    method = args.method or ("pocs" if kind == "integral" else "grochenig")
    if kind == "integral":
        if method != "pocs":
            raise SystemExit("integral samples are reconstructed with --method pocs")
        op = SamplingOperator(s.kernel_family(g))
        x, report, _ = iterate(Problem(op, s.values), "discrete_time", args.max_iters)
    else:
        ps = PointSampleSet(s.t, s.values, g.period)
        if method == "grochenig":
            x, report = groch_iterate(ps, n_iters=args.max_iters, grid=g)
        elif method == "frame":
            x, report = frame_iterate(ps, n_iters=args.max_iters, grid=g)
        elif method in ("kaczmarz_cyclic", "kaczmarz_random"):
            order = method.split("_")[1]
            x, report = kaczmarz_iterate(ps, n_sweeps=args.max_iters, order=order,
                                         seed=args.seed, grid=g)
        else:
            raise SystemExit(f"method {method!r} needs integral samples")
    _write_signal(args.out, x)
    if args.report:
        report.to_csv(args.report)
    print(f"{method}: {len(report.n) - 1} iterations ({report.stop_reason}), "
          f"final residual {report.residual[-1]:.3g}; wrote {args.out}")
    return 0


def _experiment_config(args) -> ExperimentConfig:
    overrides = load_config(args.config) if args.config else {}
    flags = {"seed": args.seed, "trials": args.trials, "snr_db": args.snr_db,
             "period": args.period, "output_dir": args.out, "max_iters": args.max_iters,
             "workers": args.workers}
    overrides.update({k: v for k, v in flags.items() if v is not None})
    overrides.pop("experiment", None)
    return ExperimentConfig.for_experiment(args.name, **overrides)


def cmd_experiment(args) -> int:
    config = _experiment_config(args)
    t0 = time.perf_counter()
    if args.name == "fig2":
        curves = run_fig2(config)
        for m, (l2, _) in curves.items():
            k = int(np.argmin(l2))
            print(f"{m:<16s} min MSE {10 * np.log10(l2[k]):7.2f} dB at n={k}")
    else:
        res = run_fig3(config)
        print(f"sampling ratio {res['ratio']:.4f} ({len(res['samples'])} crossings)")
        for (guess, n), (e2, es) in res["errors"].items():
            print(f"{guess:<10s} n={n:<4s} rel L2 {e2:.4f}  rel Sobolev {es:.4f}")
    print(f"wrote {config.output_dir} in {time.perf_counter() - t0:.1f}s")
    return 0


def cmd_selftest(args) -> int:
    t0 = time.perf_counter()
    results = selftest(faults=tuple(args.inject_fault or ()), verbose=True)
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed "
          f"in {time.perf_counter() - t0:.1f}s")
    return 0 if n_fail == 0 else 1


def cmd_emit_plots(args) -> int:
    try:
        path = emit_plot_script(args.run_dir)
    except FileNotFoundError as exc:
        print(exc, file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pocsrec", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="sample a random band-limited input")
    e.add_argument("--kind", choices=("if", "level", "point"), default="if")
    e.add_argument("--period", type=float, default=32.0)
    e.add_argument("--G", type=int, default=16, help="grid samples per unit time")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--threshold", type=float, default=0.9, help="integrate-and-fire threshold")
    e.add_argument("--bias", type=float, default=3.0, help="integrate-and-fire bias")
    e.add_argument("--levels", help="comma-separated crossing levels (use --levels=-0.5,0.5 for negatives)")
    e.add_argument("--gap-low", type=float, default=0.0)
    e.add_argument("--gap-high", type=float, default=0.5)
    e.add_argument("--snr-db", type=float)
    e.add_argument("--out", required=True, help="stream CSV to write")
    e.add_argument("--save-input", help="also write the input as t,value CSV")
    e.set_defaults(func=cmd_encode)

    r = sub.add_parser("reconstruct", help="rebuild a signal from samples")
    r.add_argument("--streams", required=True)
    r.add_argument("--period", type=float, required=True)
    r.add_argument("--G", type=int, default=16)
    r.add_argument("--method", choices=RECON_METHODS)
    r.add_argument("--mixing", help="mixing matrix CSV for multichannel streams")
    r.add_argument("--max-iters", type=int, default=2000)
    r.add_argument("--seed", type=int, default=0, help="randomized Kaczmarz seed")
    r.add_argument("--out", required=True, help="reconstruction CSV to write")
    r.add_argument("--report", help="convergence report CSV")
    r.set_defaults(func=cmd_reconstruct)

    x = sub.add_parser("experiment", help="run a seeded experiment")
    x.add_argument("name", choices=("fig2", "fig3"))
    x.add_argument("--config", help="key=value file; flags override it")
    x.add_argument("--seed", type=int)
    x.add_argument("--trials", type=int)
    x.add_argument("--snr-db", type=float)
    x.add_argument("--period", type=float)
    x.add_argument("--out", help="output directory")
    x.add_argument("--max-iters", type=int)
    x.add_argument("--workers", type=int)
    x.set_defaults(func=cmd_experiment)

    s = sub.add_parser("selftest", help="run the invariant suite")
    s.add_argument("--inject-fault", action="append", choices=FAULTS,
                   help="debug hook: deliberately break a component")
    s.set_defaults(func=cmd_selftest)

    m = sub.add_parser("emit-plots", help="write a plotting script for a run")
    m.add_argument("run_dir")
    m.set_defaults(func=cmd_emit_plots)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
