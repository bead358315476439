"""Command line interface: scenario generation, correlation scans,
channel estimation, pilot design and Monte Carlo sweeps.

Every subcommand takes --seed, writes CSV reports and optionally renders a
matplotlib figure next to them via --figure.  Exit code is 0 on success,
nonzero with a one-line diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .baseline import baseline_estimate
from .channel import (
    channel_response_matrix,
    generate_reflection_schedule,
    read_paths_csv,
    write_paths_csv,
)
from .config import SystemConfig
from .correlation import scan
from .pilots import CrossEntropyParams, cross_entropy_design, pilot_objective
from .simulate import generate_scenario, load_experiment_config, nmse, run_experiment
from .tsomp import estimate


def _add_system_flags(parser: argparse.ArgumentParser) -> None:
    d = SystemConfig()
    parser.add_argument("--m", type=int, default=d.M, help="IRS elements")
    parser.add_argument("--np", type=int, default=d.Np, dest="n_sub", help="OFDM subcarriers")
    parser.add_argument("--w", type=float, default=d.W, help="bandwidth, Hz")
    parser.add_argument("--fc", type=float, default=d.fc, help="carrier frequency, Hz")
    parser.add_argument("--ns", type=int, default=d.Ns, help="training OFDM symbols")
    parser.add_argument("--nd", type=int, default=d.Nd, help="angular grid size")
    parser.add_argument("--ntau", type=int, default=d.Ntau, help="delay grid size")
    parser.add_argument("--ttau", type=float, default=d.Ttau, help="maximum delay spread, s")
    parser.add_argument("--zeta", type=float, default=d.zeta, help="stop threshold")


def _system_config(args, np1=None) -> SystemConfig:
    return SystemConfig(M=args.m, Np=args.n_sub, W=args.w, fc=args.fc, Ns=args.ns,
                        Np1=np1 if np1 is not None else SystemConfig().Np1,
                        Nd=args.nd, Ntau=args.ntau, Ttau=args.ttau, zeta=args.zeta)


def _parse_int_list(text: str):
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_scenario(args) -> int:
    cfg = _system_config(args)
    paths = generate_scenario(cfg, args.l1, args.l2, seed=args.seed)
    write_paths_csv(paths, args.output)
    print(f"wrote {len(paths)} cascaded paths to {args.output}")
    return 0


def cmd_correlate(args) -> int:
    cfg = _system_config(args)
    paths = read_paths_csv(args.scenario)
    subcarriers = _parse_int_list(args.subcarriers)
    h_map = {n_p: channel_response_matrix(paths, cfg, subcarriers=[n_p])[0]
             for n_p in subcarriers}
    traces = scan(h_map, args.grid_size, cfg)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subcarrier", "x", "magnitude"])
        for tr in traces:
            for x, mag in zip(tr.grid, tr.magnitude):
                writer.writerow([tr.subcarrier_index, f"{x:.10g}", f"{mag:.10e}"])
    print(f"wrote {len(traces)} traces x {args.grid_size} points to {args.output}")
    if args.figure:
        from .plotting import save_correlation_figure
        save_correlation_figure(traces, args.figure)
        print(f"wrote figure {args.figure}")
    return 0


def cmd_estimate(args) -> int:
    pilots = _parse_int_list(args.pilots)
    cfg = _system_config(args, np1=len(pilots))
    paths = read_paths_csv(args.scenario)
    theta = generate_reflection_schedule(cfg, seed=args.seed)
    h_true = channel_response_matrix(paths, cfg)
    h_pilots = h_true[pilots]
    clean = theta.coeffs @ h_pilots.T
    y_bar = clean.T.reshape(-1)
    if args.noise_power > 0.0:
        rng = np.random.default_rng([args.seed, 1])
        noise = (rng.standard_normal(y_bar.shape) + 1j * rng.standard_normal(y_bar.shape))
        y_bar = y_bar + np.sqrt(args.noise_power / 2.0) * noise
    if args.method == "baseline":
        est = baseline_estimate(y_bar, theta, pilots, cfg)
    else:
        est = estimate(y_bar, theta, pilots, cfg)
    write_paths_csv(est.paths, args.out_paths)
    per_sub = [nmse(est.h_hat[i], h_true[i]) for i in range(cfg.Np)]
    with open(args.out_nmse, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subcarrier", "nmse"])
        for i, v in enumerate(per_sub):
            writer.writerow([i, f"{v:.10e}"])
    total = nmse(est.h_hat, h_true)
    print(f"method={args.method} recovered_paths={len(est.paths)} nmse_h={total:.6e}")
    print(f"wrote {args.out_paths} and {args.out_nmse}")
    if args.figure:
        from .plotting import save_subcarrier_nmse_figure
        save_subcarrier_nmse_figure(np.arange(cfg.Np), per_sub, args.figure,
                                    label=args.method)
        print(f"wrote figure {args.figure}")
    return 0


def cmd_design_pilots(args) -> int:
    cfg = _system_config(args, np1=args.np1)
    ce = CrossEntropyParams(Nc=args.nc, Ne=args.ne, Niter=args.niter, seed=args.seed,
                            elitism=not args.no_elitism)
    trace: list = []
    pilots = cross_entropy_design(cfg, ce, trace_out=trace)
    mu = pilot_objective(pilots, cfg)
    print("pilots:", ",".join(str(p) for p in pilots))
    print(f"objective: {mu:.10e}")
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "best_mu"])
            for i, v in enumerate(trace):
                writer.writerow([i, f"{v:.10e}"])
        print(f"wrote trace {args.trace}")
    if args.figure:
        from .plotting import save_design_trace_figure
        save_design_trace_figure(trace, args.figure)
        print(f"wrote figure {args.figure}")
    return 0


def cmd_sweep(args) -> int:
    ec = load_experiment_config(args.config)
    if args.seed is not None:
        from dataclasses import replace
        ec = replace(ec, seed=args.seed)
    rows = run_experiment(ec, csv_path=args.output)
    print(f"wrote {len(rows)} rows to {args.output}")
    if args.figure:
        from .plotting import save_sweep_figure
        save_sweep_figure(rows, args.figure, ec.sweep)
        print(f"wrote figure {args.figure}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamsquint",
        description="Wideband IRS-aided OFDM channel simulation and estimation "
                    "under beam squint.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="generate a random cascaded scenario CSV")
    _add_system_flags(p)
    p.add_argument("--l1", type=int, default=2, help="BS-IRS paths")
    p.add_argument("--l2", type=int, default=3, help="IRS-user paths")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="scenario CSV path")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("correlate", help="angular correlation scan of a scenario")
    _add_system_flags(p)
    p.add_argument("--scenario", required=True, help="scenario CSV path")
    p.add_argument("--subcarriers", default="30,60,90,120",
                   help="comma-separated subcarrier indices")
    p.add_argument("--grid-size", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="trace CSV path")
    p.add_argument("--figure", help="optional figure path (PNG)")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("estimate", help="estimate the cascaded channel of a scenario")
    _add_system_flags(p)
    p.add_argument("--scenario", required=True, help="scenario CSV path")
    p.add_argument("--pilots", required=True, help="comma-separated pilot indices")
    p.add_argument("--method", choices=("tsomp", "baseline"), default="tsomp")
    p.add_argument("--noise-power", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0, help="reflection-schedule seed")
    p.add_argument("--out-paths", required=True, help="recovered-path CSV")
    p.add_argument("--out-nmse", required=True, help="per-subcarrier NMSE CSV")
    p.add_argument("--figure", help="optional figure path (PNG)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("design-pilots", help="cross-entropy pilot placement")
    _add_system_flags(p)
    p.add_argument("--np1", type=int, default=6, help="number of pilots")
    p.add_argument("--nc", type=int, default=100, help="candidates per iteration")
    p.add_argument("--ne", type=int, default=20, help="elites per iteration")
    p.add_argument("--niter", type=int, default=20, help="iterations")
    p.add_argument("--no-elitism", action="store_true",
                   help="disable best-so-far re-injection")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="optional per-iteration objective CSV")
    p.add_argument("--figure", help="optional figure path (PNG)")
    p.set_defaults(func=cmd_design_pilots)

    p = sub.add_parser("sweep", help="Monte Carlo sweep from a key = value config file")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--output", required=True, help="metrics CSV path")
    p.add_argument("--figure", help="optional figure path (PNG)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
