"""Command-line entry point.

    sdrg run --model heisenberg --spin 1 --sites 200000 --realizations 1000 --alpha -0.8 --seed 42
    sdrg fit curve.csv --fit-window 16:8192
    sdrg trio-table --spin 1
    sdrg oracle --sites 10 --spin 0.5 --alpha -0.95 --realizations 100 --seed 1
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .engine import DecimationError
from .ensemble import (
    EnsembleConfig,
    FitError,
    RealizationError,
    crossing_slope,
    fit_log_scaling,
    geometric_lengths,
    run_ensemble,
    simulate,
)
from .entropy import BlockSpec
from .exact import SolverError, solve_trio, trio_table
from .oracle import compare, mean_abs_deviation
from .results import (
    build_summary,
    dumps_json,
    entropy_fit_record,
    fit_record,
    fmt,
    format_curve_csv,
    format_samples_csv,
    parse_curve_csv,
)
from .spin_model import Explicit, ModelKind, PowerLaw, SpinMagnitude, singlet_pair_entropy, trio_threshold

log = logging.getLogger("sdrg")


class UsageError(ValueError):
    pass


RUN_DEFAULTS = {
    "model": "heisenberg",
    "spin": 0.5,
    "sites": 200_000,
    "realizations": 1000,
    "alpha": -0.8,
    "couplings": None,
    "seed": None,
    "lengths": "16:10000:2",
    "placements": 4,
    "margin": None,
    "anchor": "interior",
    "fit_window": None,
    "workers": 1,
    "out_csv": None,
    "out_json": None,
    "samples_csv": None,
    "history_jsonl": None,
    "timing": False,
}


def parse_lengths(spec) -> list[int]:
    """'16:10000:2' (geometric, factor defaults to 2), '16,32,64', or a list."""
    if isinstance(spec, (list, tuple)):
        return [int(v) for v in spec]
    spec = str(spec)
    if ":" in spec:
        parts = [int(p) for p in spec.split(":")]
        if len(parts) not in (2, 3):
            raise UsageError(f"bad length spec {spec!r}")
        return geometric_lengths(*parts)
    return [int(p) for p in spec.split(",") if p.strip()]


def parse_window(spec) -> tuple[int, int] | None:
    if spec is None:
        return None
    if isinstance(spec, (list, tuple)):
        lo, hi = spec
    else:
        try:
            lo, hi = str(spec).split(":")
        except ValueError:
            raise UsageError(f"fit window must look like LO:HI, got {spec!r}") from None
    return int(lo), int(hi)


def parse_couplings(spec):
    if spec is None:
        return None
    if isinstance(spec, str):
        spec = [p for p in spec.split(",") if p.strip()]
    return tuple(float(v) for v in spec)


def load_config_file(path: str) -> dict:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = sorted(set(data) - set(RUN_DEFAULTS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return data


def resolve_run_options(args) -> dict:
    opts = dict(RUN_DEFAULTS)
    if args.config:
        opts.update(load_config_file(args.config))
    for key in RUN_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            opts[key] = val
    if opts["seed"] is None:
        raise UsageError("a seed is required (--seed or 'seed' in the config file)")
    return opts


def build_config(opts: dict) -> EnsembleConfig:
    couplings = parse_couplings(opts["couplings"])
    sites = int(opts["sites"])
    if couplings is not None:
        dist = Explicit(couplings)
        sites = len(couplings) + 1
    else:
        dist = PowerLaw(float(opts["alpha"]))
    return EnsembleConfig(
        model=ModelKind(opts["model"]),
        spin=SpinMagnitude.parse(opts["spin"]),
        n_sites=sites,
        n_realizations=int(opts["realizations"]),
        distribution=dist,
        master_seed=int(opts["seed"]),
        lengths=tuple(parse_lengths(opts["lengths"])),
        placements=int(opts["placements"]),
        margin=None if opts["margin"] is None else int(opts["margin"]),
        anchor=opts["anchor"],
        fit_window=parse_window(opts["fit_window"]),
    )


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    opts = resolve_run_options(args)
    config = build_config(opts)
    workers = int(opts["workers"])
    started = time.perf_counter()
    result = run_ensemble(config, workers=workers, keep_samples=bool(opts["samples_csv"]))
    wall = time.perf_counter() - started
    extra = {"wall_time_s": wall} if opts["timing"] else None
    summary = build_summary(result, extra)
    _emit(format_curve_csv(result.entropy, result.crossings), opts["out_csv"])
    _emit(dumps_json(summary), opts["out_json"])
    if opts["samples_csv"]:
        Path(opts["samples_csv"]).write_text(format_samples_csv(result, singlet_pair_entropy(config.spin)))
    if opts["history_jsonl"]:
        hist, _ = simulate(config, 0)
        with open(opts["history_jsonl"], "w") as fh:
            hist.write_jsonl(fh)
    log.info("c_R_est=%.4f (expected %.4f), trio fraction %.4f, %.1f s",
             summary["c_R_est"], summary["expected_c_R"], summary["trio_fraction"], wall)
    return 0


def cmd_fit(args) -> int:
    text = sys.stdin.read() if args.csv == "-" else Path(args.csv).read_text()
    entropy, crossings = parse_curve_csv(text)
    window = parse_window(args.fit_window) or (int(entropy.lengths.min()), int(entropy.lengths.max()))
    fit = fit_log_scaling(entropy, *window)
    cfit = crossing_slope(crossings, *window)
    record = {"fit": entropy_fit_record(fit), "c_R_est": fit.c_r_est, "crossing_fit": fit_record(cfit)}
    _emit(dumps_json(record), args.out_json)
    return 0


def default_ratio_grid(spin: SpinMagnitude, points: int = 20) -> list[float]:
    thr = trio_threshold(ModelKind.HEISENBERG, spin)
    grid = [1e-6]
    if thr < 1.0:
        grid += [thr + (1.0 - thr) * k / points for k in range(points + 1)]
    else:
        grid += [k / points for k in range(1, points + 1)]
    return grid


def cmd_trio_table(args) -> int:
    spin = SpinMagnitude.parse(args.spin)
    if spin.twice_s < 2:
        raise UsageError("trio tables need S >= 1")
    if args.ratios:
        ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
    elif args.grid:
        lo, hi, num = args.grid.split(":")
        ratios = list(np.linspace(float(lo), float(hi), int(num)))
    else:
        ratios = default_ratio_grid(spin)
    lines = ["S,j1_over_omega,S_eff_twice,c_L,c_R_trio,at_threshold"]
    for ratio in ratios:
        try:
            (r, sol, at_thr), = trio_table(spin, [ratio])
        except SolverError as exc:
            raise SolverError(f"trio solve failed at j1/omega={ratio!r}: {exc}") from exc
        lines.append(",".join([fmt(spin.value), fmt(r), str(sol.twice_s_eff), fmt(sol.c_left),
                               fmt(sol.c_right), "1" if at_thr else "0"]))
    _emit("\n".join(lines) + "\n", args.out_csv)
    return 0


def cmd_oracle(args) -> int:
    spin = SpinMagnitude.parse(args.spin)
    model = ModelKind(args.model)
    couplings = parse_couplings(args.couplings)
    if couplings is not None:
        dist = Explicit(couplings)
        n = len(couplings) + 1
    else:
        dist = PowerLaw(args.alpha)
        n = args.sites
    if args.block:
        start, length = (int(v) for v in args.block.split(":"))
        block = BlockSpec(start, length)
    else:
        block = BlockSpec(1, n // 2)
    rows = compare(model, spin, n, dist, args.realizations, args.seed, block)
    lines = ["realization,sdrg_entropy_bits,ed_entropy_bits,abs_diff_bits"]
    lines += [f"{row.realization},{fmt(row.sdrg_bits)},{fmt(row.ed_bits)},{fmt(row.abs_diff)}" for row in rows]
    _emit("\n".join(lines) + "\n", args.out_csv)
    summary = {
        "model": model.value, "spin": spin.value, "sites": n, "realizations": args.realizations,
        "seed": args.seed, "block": [block.start, block.length],
        "mean_abs_deviation_bits": mean_abs_deviation(rows),
    }
    if args.out_json:
        Path(args.out_json).write_text(dumps_json(summary))
    else:
        sys.stderr.write(dumps_json(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdrg", description="Strong-disorder RG entanglement of random spin-S chains")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr")

    run = sub.add_parser("run", parents=[common], help="disorder-averaged S(L) curve and fit")
    run.add_argument("--config", help="JSON file with run options (flags override it)")
    run.add_argument("--model", choices=[m.value for m in ModelKind])
    run.add_argument("--spin", help="0.5, 1, 1.5, ... or 1/2, 3/2")
    run.add_argument("--sites", type=int)
    run.add_argument("--realizations", type=int)
    run.add_argument("--alpha", type=float, help="P(J) ~ J**alpha on (0, 1]")
    run.add_argument("--couplings", help="explicit comma-separated couplings instead of --alpha")
    run.add_argument("--seed", type=int)
    run.add_argument("--lengths", help="START:STOP[:FACTOR] or comma list (default 16:10000:2)")
    run.add_argument("--placements", type=int)
    run.add_argument("--margin", type=int, help="default sites/20")
    run.add_argument("--anchor", choices=["interior", "edge"])
    run.add_argument("--fit-window", dest="fit_window", help="LO:HI (default 16:sites/20)")
    run.add_argument("--workers", type=int)
    run.add_argument("--out-csv", dest="out_csv")
    run.add_argument("--out-json", dest="out_json")
    run.add_argument("--samples-csv", dest="samples_csv", help="per-placement samples")
    run.add_argument("--history-jsonl", dest="history_jsonl", help="event log of realization 0")
    run.add_argument("--timing", action="store_true", default=None, help="add wall time to the summary")
    run.set_defaults(func=cmd_run)

    fit = sub.add_parser("fit", parents=[common], help="refit a curve CSV")
    fit.add_argument("csv", help="curve CSV written by 'run' ('-' for stdin)")
    fit.add_argument("--fit-window", dest="fit_window")
    fit.add_argument("--out-json", dest="out_json")
    fit.set_defaults(func=cmd_fit)

    trio = sub.add_parser("trio-table", parents=[common], help="trio projection coefficients as CSV")
    trio.add_argument("--spin", required=True)
    trio.add_argument("--ratios", help="comma-separated j1/omega values")
    trio.add_argument("--grid", help="LO:HI:NUM evenly spaced ratios")
    trio.add_argument("--out-csv", dest="out_csv")
    trio.set_defaults(func=cmd_trio_table)

    oracle = sub.add_parser("oracle", parents=[common], help="decimation vs exact ground-state entropy")
    oracle.add_argument("--sites", type=int, default=10)
    oracle.add_argument("--spin", default="0.5")
    oracle.add_argument("--model", choices=[m.value for m in ModelKind], default="heisenberg")
    oracle.add_argument("--alpha", type=float, default=-0.95)
    oracle.add_argument("--couplings")
    oracle.add_argument("--realizations", type=int, default=100)
    oracle.add_argument("--seed", type=int, required=True)
    oracle.add_argument("--block", help="START:LENGTH (default 1:sites/2)")
    oracle.add_argument("--out-csv", dest="out_csv")
    oracle.add_argument("--out-json", dest="out_json")
    oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, FitError) as exc:
        code, kind = 2, "invalid_input"
        err = exc
    except (RealizationError, DecimationError, SolverError) as exc:
        code, kind = 1, "computation_failed"
        err = exc
    except OSError as exc:
        code, kind = 1, "io_error"
        err = exc
    record = {"error": kind, "type": type(err).__name__, "message": str(err)}
    if isinstance(err, RealizationError):
        record.update(realization=err.realization, seed=err.seed)
    sys.stderr.write(json.dumps(record) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
