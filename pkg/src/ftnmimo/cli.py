"""Command-line interface.

Subcommands: ``capacity``, ``sweep``, ``spectrum``, ``validate`` and
``channel gen|show``. Values from ``--config`` (``key = value`` lines) are
overridden by flags given on the command line. Exit status is 0 on success,
2 when ``validate`` reports a failed check and 1 on any error.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .capacity_freq import equal_power_capacity_spectral, fs_capacity_spectral
from .capacity_time import equal_power_capacity, flat_capacity, fs_capacity_time, fs_system
from .channel import as_fs, gen_flat, gen_fs, load_channel, save_channel
from .exceptions import FTNError
from .harness import ExperimentConfig, read_config_file, run_spectrum, run_sweep, run_validate

EXIT_OK, EXIT_ERROR, EXIT_INVALID = 0, 1, 2

# flag dest -> ExperimentConfig key
_EXPERIMENT_FLAGS = ("mode", "k", "l", "j", "snr_db", "delta", "beta", "t_symbol", "n", "grid",
                     "realizations", "seed", "engine", "fs_method", "workers", "out", "channel_file")


def _add_experiment_flags(p, mode_choices=("flat", "fs")):
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--mode", choices=mode_choices)
    p.add_argument("--k", type=int, help="receive antennas")
    p.add_argument("--l", type=int, help="transmit antennas")
    p.add_argument("--j", type=int, help="channel taps")
    p.add_argument("--snr-db", help="'start:stop:step', comma list or single value (SNR = P/noise)")
    p.add_argument("--delta", help="comma-separated acceleration factors")
    p.add_argument("--beta", type=float, help="roll-off factor")
    p.add_argument("--t-symbol", type=float, help="symbol period T")
    p.add_argument("--n", type=int, help="block length for the time-domain engine")
    p.add_argument("--grid", type=int, help="frequency grid size M")
    p.add_argument("--realizations", type=int, help="number of channel realizations R")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--engine", choices=("spectral", "time"), help="frequency-selective capacity engine")
    p.add_argument("--fs-method", choices=("weighted", "exact"), help="block solver for --engine time")
    p.add_argument("--workers", type=int, help="threads for realizations")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--channel-file", help="channel file to use instead of a seeded draw")


def _experiment(args, mode=None) -> ExperimentConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for name in _EXPERIMENT_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if mode is not None:
        values["mode"] = mode
    return ExperimentConfig.from_mapping(values)


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_capacity(args) -> int:
    cfg = _experiment(args)
    if cfg.channel_file:
        ch = as_fs(load_channel(cfg.channel_file))
    elif cfg.mode == "flat":
        ch = as_fs(gen_flat(cfg.K, cfg.L, cfg.seed, 0))
    else:
        ch = gen_fs(cfg.K, cfg.L, cfg.J, cfg.seed, 0)
    rows = []
    for d in cfg.deltas:
        pc = cfg.pulse(d)
        system = fs_system(ch, pc, cfg.N) if ch.J > 1 and cfg.engine == "time" else None
        for s in cfg.snr_db:
            P = 10.0 ** (s / 10.0)
            if ch.J == 1:
                rep = flat_capacity(ch.to_flat(), P, 1.0, pc)
                bits, eq = rep.bits_per_channel_use, equal_power_capacity_spectral(ch, P, 1.0, pc, cfg.M)
                extra = {"allocations": rep.allocations.tolist(), "eigenvalues": rep.eigenvalues.tolist()}
            elif cfg.engine == "time":
                rep = fs_capacity_time(ch, P, 1.0, pc, cfg.N, system=system, method=cfg.fs_method)
                bits, eq = rep.bits_per_channel_use, equal_power_capacity(ch, P, 1.0, pc, cfg.N, system=system)
                extra = {"N": cfg.N, "fs_method": cfg.fs_method, "degenerate": rep.metadata["degenerate"]}
            else:
                sol = fs_capacity_spectral(ch, P, 1.0, pc, cfg.M)
                bits, eq = sol.bits_per_channel_use, equal_power_capacity_spectral(ch, P, 1.0, pc, cfg.M)
                extra = {"M": cfg.M}
            rows.append({"snr_db": s, "delta": d, "beta": cfg.beta, "bits_per_channel_use": bits,
                         "bits_per_s_per_hz": bits / pc.bandwidth_factor,
                         "equal_power_bits_per_s_per_hz": eq / pc.bandwidth_factor, **extra})
    doc = {"K": ch.K, "L": ch.L, "J": ch.J, "engine": "closed-form" if ch.J == 1 else cfg.engine,
           "seed": cfg.seed, "channel_file": cfg.channel_file, "results": rows}
    _emit(json.dumps(doc, indent=2) + "\n", cfg.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _experiment(args)
    res = run_sweep(cfg)
    if not cfg.out:
        sys.stdout.write(res.to_csv())
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _experiment(args)
    _, text = run_spectrum(cfg)
    if not cfg.out:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_tols(items):
    tols = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"--tol expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        tols[k.strip()] = float(v)
    return tols


def cmd_validate(args) -> int:
    cfg = _experiment(args, mode="validate")
    report = run_validate(cfg, _parse_tols(args.tol))
    if not cfg.out:
        sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if report["passed"] else EXIT_INVALID


def cmd_channel_gen(args) -> int:
    if args.j == 1 and not args.fs:
        ch = gen_flat(args.k, args.l, args.seed, args.index)
    else:
        ch = gen_fs(args.k, args.l, args.j, args.seed, args.index)
    if args.out is None:
        raise ValueError("channel gen needs --out")
    save_channel(args.out, ch)
    return EXIT_OK


def cmd_channel_show(args) -> int:
    ch = load_channel(args.channel_file)
    lines = [f"K={ch.K} L={ch.L} J={ch.J}"]
    np.set_printoptions(precision=4, suppress=True)
    for j in range(ch.J):
        lines.append(f"tap {j}:")
        lines.append(str(ch.taps[j]))
    power = float(np.sum(np.abs(ch.taps) ** 2))
    lines.append(f"total tap power {power:.6g}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftnmimo", description="Capacity of MIMO faster-than-Nyquist signaling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="capacity of one channel over an SNR grid")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("sweep", help="Monte Carlo sweep averaged over channel realizations (CSV)")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectrum", help="eigenmodes and optimal spectra of one channel (CSV)")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("validate", help="run cross-checks and emit a JSON report")
    _add_experiment_flags(p, mode_choices=("validate",))
    p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a check threshold")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("channel", help="generate or inspect channel files")
    csub = p.add_subparsers(dest="channel_command", required=True)
    g = csub.add_parser("gen", help="draw a channel and write it to --out")
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--l", type=int, default=2)
    g.add_argument("--j", type=int, default=1)
    g.add_argument("--fs", action="store_true", help="use the tap variance 1/(L J) even for J = 1")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--index", type=int, default=0, help="realization index within the seed")
    g.add_argument("--out")
    g.set_defaults(func=cmd_channel_gen)
    s = csub.add_parser("show", help="print a channel file")
    s.add_argument("--channel-file", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_channel_show)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FTNError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
