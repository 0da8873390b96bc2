"""Bit-stable CSV/JSON serialization of curves, fits and run summaries."""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .ensemble import (
    CROSSING_SLOPE,
    EnsembleConfig,
    EnsembleResult,
    FitResult,
    ScalingCurve,
    crossing_slope,
    expected_central_charge,
    fit_log_scaling,
)
from .spin_model import Explicit, PowerLaw

CURVE_COLUMNS = ["L", "mean_entropy_bits", "stderr_entropy_bits", "mean_crossings", "stderr_crossings",
                 "n_realizations"]
SAMPLE_COLUMNS = ["realization", "L", "start", "N_S", "entropy_bits"]


def fmt(x: float) -> str:
    """Shortest round-trip decimal form."""
    return repr(float(x))


def curve_rows(entropy: ScalingCurve, crossings: ScalingCurve):
    for k, L in enumerate(entropy.lengths):
        yield [str(int(L)), fmt(entropy.mean[k]), fmt(entropy.stderr[k]), fmt(crossings.mean[k]),
               fmt(crossings.stderr[k]), str(int(entropy.counts[k]))]


def format_curve_csv(entropy: ScalingCurve, crossings: ScalingCurve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_COLUMNS)
    writer.writerows(curve_rows(entropy, crossings))
    return buf.getvalue()


def parse_curve_csv(text: str) -> tuple[ScalingCurve, ScalingCurve]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("curve CSV is empty") from None
    if header != CURVE_COLUMNS:
        raise ValueError(f"curve CSV header must be {','.join(CURVE_COLUMNS)}, got {','.join(header)}")
    rows = [r for r in reader if r]
    if not rows:
        raise ValueError("curve CSV has no data rows")
    try:
        cols = list(zip(*rows))
        lengths = np.array([int(v) for v in cols[0]], np.int64)
        vals = [np.array([float(v) for v in c]) for c in cols[1:5]]
        counts = np.array([int(v) for v in cols[5]], np.int64)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"malformed curve CSV: {exc}") from exc
    if any(len(r) != len(CURVE_COLUMNS) for r in rows):
        raise ValueError("malformed curve CSV: wrong number of fields")
    return (ScalingCurve(lengths, vals[0], vals[1], counts), ScalingCurve(lengths, vals[2], vals[3], counts))


def format_samples_csv(result: EnsembleResult, pair_entropy: float) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SAMPLE_COLUMNS)
    for res in result.realizations:
        for i, L in enumerate(result.config.lengths):
            for a, n in zip(res.starts[i], res.crossings[i]):
                writer.writerow([res.index, L, int(a), int(n), fmt(int(n) * pair_entropy)])
    return buf.getvalue()


def config_record(config: EnsembleConfig) -> dict:
    dist = config.distribution
    if isinstance(dist, PowerLaw):
        drec = {"kind": "power_law", "alpha": dist.exponent}
    elif isinstance(dist, Explicit):
        drec = {"kind": "explicit", "couplings": list(dist.couplings)}
    else:
        raise TypeError(f"cannot serialize distribution {dist!r}")
    return {
        "model": config.model.value,
        "spin": config.spin.value,
        "sites": config.n_sites,
        "realizations": config.n_realizations,
        "distribution": drec,
        "seed": config.master_seed,
        "lengths": list(config.lengths),
        "placements": config.placements,
        "margin": config.margin,
        "anchor": config.anchor,
        "fit_window": list(config.fit_window),
    }


def fit_record(fit: FitResult) -> dict:
    return {
        "slope": fit.slope,
        "slope_stderr": fit.slope_stderr,
        "intercept": fit.intercept,
        "covariance": [list(row) for row in fit.covariance],
        "residual_rms": fit.residual_rms,
        "window": list(fit.window),
        "n_points": fit.n_points,
        "weighted": fit.weighted,
    }


def entropy_fit_record(fit: FitResult) -> dict:
    rec = fit_record(fit)
    rec["c_R_est"] = fit.c_r_est
    return rec


def build_summary(result: EnsembleResult, extra: dict | None = None) -> dict:
    config = result.config
    lo, hi = config.fit_window
    fit = fit_log_scaling(result.entropy, lo, hi)
    cfit = crossing_slope(result.crossings, lo, hi)
    expected = expected_central_charge(config.spin)
    summary = {
        "config": config_record(config),
        "fit": entropy_fit_record(fit),
        "c_R_est": fit.c_r_est,
        "expected_c_R": expected,
        "relative_deviation": (fit.c_r_est - expected) / expected,
        "crossing_fit": fit_record(cfit),
        "expected_crossing_slope": CROSSING_SLOPE,
        "crossing_relative_deviation": (cfit.slope - CROSSING_SLOPE) / CROSSING_SLOPE,
        "window_sensitivity": window_sensitivity(result.entropy, lo, hi),
        "n_events": result.n_events,
        "n_trio_events": result.n_trios,
        "trio_fraction": result.trio_fraction,
        "edge_trio_events": result.edge_trios,
        "omega_increases": result.omega_increases,
        "seed": config.master_seed,
    }
    if extra:
        summary.update(extra)
    return summary


def window_sensitivity(curve: ScalingCurve, lo: int, hi: int) -> list[dict]:
    """c_R estimates as the lower window edge steps through the first few lengths."""
    inside = [int(L) for L in curve.lengths if lo <= L <= hi]
    out = []
    for start in inside[:3]:
        try:
            fit = fit_log_scaling(curve, start, hi)
        except ValueError:
            break
        out.append({"window": [start, hi], "c_R_est": fit.c_r_est})
    return out


def dumps_json(record: dict) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, list):
            return [clean(x) for x in v]
        return v

    return json.dumps(clean(record), indent=2) + "\n"
