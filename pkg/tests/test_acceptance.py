"""Desk-scale acceptance gate.

Criteria 1-5 share one ensemble per model (100,000 sites, 300 realizations,
P(J) ~ J**-0.8, fit window [16, 4096]); the runs are cached per module.
"""

import math
import time

import numpy as np
import pytest

from reference import reference_decimate
from sdrg.cli import main
from sdrg.engine import ActiveChain, decimate
from sdrg.ensemble import (
    CROSSING_SLOPE,
    EnsembleConfig,
    crossing_slope,
    fit_log_scaling,
    geometric_lengths,
    full_scale_config,
    run_ensemble,
)
from sdrg.entropy import BlockSpec, crossing_count, crossing_entropy, side_of
from sdrg.exact import solve_trio
from sdrg.oracle import compare, mean_abs_deviation
from sdrg.spin_model import SPIN_HALF, SPIN_ONE, SPIN_THREE_HALVES, ModelKind, PowerLaw, trio_threshold

pytestmark = pytest.mark.acceptance

H, B = ModelKind.HEISENBERG, ModelKind.BIQUADRATIC
WINDOW = (16, 4096)
TOL = 0.10
MODELS = {
    "spin-1/2 heisenberg": (H, SPIN_HALF),
    "spin-1 heisenberg": (H, SPIN_ONE),
    "spin-3/2 heisenberg": (H, SPIN_THREE_HALVES),
    "spin-1 biquadratic": (B, SPIN_ONE),
}

_cache = {}


def ensemble(name):
    if name not in _cache:
        model, spin = MODELS[name]
        config = EnsembleConfig(model=model, spin=spin, n_sites=100_000, n_realizations=300,
                                distribution=PowerLaw(-0.8), master_seed=20240601,
                                lengths=tuple(geometric_lengths(16, 4096)), placements=4, fit_window=WINDOW)
        t0 = time.perf_counter()
        result = run_ensemble(config)
        _cache[name] = (result, fit_log_scaling(result.entropy, *WINDOW), crossing_slope(result.crossings, *WINDOW),
                        time.perf_counter() - t0)
    return _cache[name]


def check_central_charge(report, label, name):
    result, fit, _, secs = ensemble(name)
    expected = math.log(result.config.spin.dim)
    dev = (fit.c_r_est - expected) / expected
    ok = abs(dev) < TOL
    report(label, ok, f"{name} c_R_est={fit.c_r_est:.4f} +- {3 * fit.slope_stderr:.4f}, "
                      f"ln(2S+1)={expected:.4f}, deviation {dev:+.1%} ({secs:.0f} s)")
    assert ok


def test_criterion_1_spin_half_central_charge(report):
    check_central_charge(report, "criterion 1", "spin-1/2 heisenberg")


def test_criterion_2_spin_one_central_charge(report):
    check_central_charge(report, "criterion 2a", "spin-1 heisenberg")


def test_criterion_2_spin_one_trio_fraction(report):
    result = ensemble("spin-1 heisenberg")[0]
    frac = result.trio_fraction
    ok = frac < 0.05
    report("criterion 2b", ok, f"spin-1 trio events / all events = {frac:.4f} ({result.n_trios} of "
                               f"{result.n_events}), gate < 0.05")
    assert ok


def test_criterion_3_spin_three_halves_central_charge(report):
    check_central_charge(report, "criterion 3", "spin-3/2 heisenberg")


def test_criterion_4_biquadratic(report):
    check_central_charge(report, "criterion 4a", "spin-1 biquadratic")
    res_b, fit_b, _, _ = ensemble("spin-1 biquadratic")
    _, fit_h, _, _ = ensemble("spin-1 heisenberg")
    diff = abs(fit_b.slope - fit_h.slope)
    sigma = math.hypot(fit_b.slope_stderr, fit_h.slope_stderr)
    ok = diff <= 2 * sigma and res_b.n_trios == 0
    report("criterion 4b", ok, f"|slope_biquadratic - slope_heisenberg| = {diff:.4f}, 2 sigma = {2 * sigma:.4f}, "
                               f"biquadratic trios = {res_b.n_trios}")
    assert ok


def test_criterion_5_crossing_universality(report):
    worst = 0.0
    parts = []
    for name in MODELS:
        slope = ensemble(name)[2].slope
        dev = (slope - CROSSING_SLOPE) / CROSSING_SLOPE
        worst = max(worst, abs(dev))
        parts.append(f"{name} {slope:.4f} ({dev:+.1%})")
    ok = worst < TOL
    report("criterion 5", ok, f"<N_S> slopes vs ln2/3={CROSSING_SLOPE:.4f}: " + "; ".join(parts))
    assert ok


def test_criterion_6_exact_identities(report):
    rng = np.random.default_rng(6)
    checked = {"entropy": 0, "complement": 0, "partition": 0, "heap": 0}
    for spin in (SPIN_HALF, SPIN_ONE, SPIN_THREE_HALVES):
        for _ in range(40):
            n = 2 * int(rng.integers(2, 300))
            hist = decimate((1 - rng.random(n - 1)) ** 5, H, spin)
            flat = np.sort(hist.partner_flat)
            assert np.array_equal(flat, np.arange(1, n + 1)) and np.all(hist.partner_sizes % 2 == 1)
            checked["partition"] += 1
            for _ in range(10):
                a = int(rng.integers(1, n))
                L = int(rng.integers(1, n - a + 2))
                k = crossing_count(hist, BlockSpec(a, L))
                assert crossing_entropy(hist, BlockSpec(a, L)).entropy == k * math.log2(spin.dim)
                checked["entropy"] += 1
                if hist.n_trios == 0:
                    outer = [BlockSpec(1, a - 1), BlockSpec(a + L, n - a - L + 1)]
                    comp = sum(any(side_of(b, p) for b in outer) != any(side_of(b, q) for b in outer)
                               for p, q in hist.pairs())
                    assert comp == k
                    checked["complement"] += 1
    for _ in range(1000):
        n = 2 * int(rng.integers(1, 33))
        j = (1 - rng.random(n - 1)) ** 5
        chain = ActiveChain(j, H, SPIN_HALF)
        while chain.n_active:
            bonds = chain.bonds
            best = bonds[int(np.argmax([b.strength for b in bonds]))]
            got = chain.find_strongest_bond()
            assert (got.left, got.strength) == (best.left, best.strength)
            chain.step()
        assert decimate(j, H, SPIN_HALF).events == reference_decimate(j, H, SPIN_HALF)
        checked["heap"] += 1
    report("criterion 6", True, ", ".join(f"{k} {v}" for k, v in checked.items()) + " checks exact")


def test_criterion_7_oracle(report):
    t0 = time.perf_counter()
    rows = compare(H, SPIN_HALF, 10, PowerLaw(-0.95), 100, 1, BlockSpec(1, 5))
    mad = mean_abs_deviation(rows)
    secs = time.perf_counter() - t0
    ok = mad < 0.15 and secs < 60
    report("criterion 7", ok, f"mean |S_SDRG - S_ED| = {mad:.4f} bits over {len(rows)} chains of 10 sites "
                              f"({secs:.0f} s)")
    assert ok


def test_criterion_8_trio_solver(report):
    worst_res = 0.0
    for spin in (SPIN_ONE, SPIN_THREE_HALVES):
        thr = trio_threshold(H, spin)
        for r in thr + (1 - thr) * np.arange(1, 21) / 20:
            sol = solve_trio(spin, r)
            assert sol.twice_s_eff == spin.twice_s
            worst_res = max(worst_res, sol.residual)
    limits = [solve_trio(spin, 1e-8) for spin in (SPIN_ONE, SPIN_THREE_HALVES)]
    worst_lim = max(max(abs(s.c_left - 1), abs(s.c_right)) for s in limits)
    ok = worst_res < 1e-8 and worst_lim < 1e-6
    report("criterion 8", ok, f"40 trios keep S, max projection residual {worst_res:.1e}; "
                              f"j1/omega=1e-8 limit off by {worst_lim:.1e}")
    assert ok


def test_criterion_9_worker_determinism(report, tmp_path, capsys):
    config = full_scale_config(H, SPIN_ONE, 42)
    outputs = []
    t0 = time.perf_counter()
    for workers in (1, 8):
        csv_path, json_path = tmp_path / f"w{workers}.csv", tmp_path / f"w{workers}.json"
        code = main(["run", "--model", "heisenberg", "--spin", "1", "--sites", str(config.n_sites),
                     "--realizations", str(config.n_realizations), "--alpha", "-0.8", "--seed", "42",
                     "--workers", str(workers), "--out-csv", str(csv_path), "--out-json", str(json_path)])
        assert code == 0
        outputs.append((csv_path.read_bytes(), json_path.read_bytes()))
    capsys.readouterr()
    ok = outputs[0] == outputs[1]
    report("criterion 9", ok, f"200,000 sites x 1000 realizations, spin 1: 1 vs 8 workers byte-identical={ok} "
                              f"({time.perf_counter() - t0:.0f} s)")
    assert ok
