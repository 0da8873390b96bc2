"""Disorder-averaged entropy curves and the logarithmic scaling fit."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import DecimationError, DecimationHistory, init_chain
from .entropy import entropy_profile
from .spin_model import CouplingDistribution, Explicit, ModelKind, PowerLaw, SpinMagnitude, singlet_pair_entropy

log = logging.getLogger(__name__)

CROSSING_SLOPE = math.log(2) / 3


class FitError(ValueError):
    pass


class RealizationError(RuntimeError):
    def __init__(self, realization: int, seed: int, cause: Exception):
        self.realization = realization
        self.seed = seed
        super().__init__(f"realization {realization} (master seed {seed}) failed: {cause}")


def geometric_lengths(start: int, stop: int, factor: int = 2) -> list[int]:
    """start, start*factor, ... up to and including stop."""
    if start < 1 or factor < 2 or stop < start:
        raise ValueError(f"bad geometric length spec {start}:{stop}:{factor}")
    out = []
    L = start
    while L <= stop:
        out.append(L)
        L *= factor
    return out


@dataclass(frozen=True)
class EnsembleConfig:
    model: ModelKind
    spin: SpinMagnitude
    n_sites: int
    n_realizations: int
    distribution: CouplingDistribution
    master_seed: int
    lengths: tuple[int, ...]
    placements: int = 4
    margin: int | None = None  # None means n_sites // 20
    anchor: str = "interior"
    fit_window: tuple[int, int] | None = None  # None means (16, n_sites // 20)

    def __post_init__(self):
        self.model.check_spin(self.spin)
        if self.n_sites < 2 or self.n_sites % 2:
            raise ValueError(f"n_sites must be even and >= 2, got {self.n_sites}")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.placements < 1:
            raise ValueError("placements must be >= 1")
        lengths = tuple(int(L) for L in self.lengths)
        if not lengths or any(b <= a for a, b in zip(lengths, lengths[1:])) or lengths[0] < 1:
            raise ValueError(f"lengths must be positive and strictly increasing, got {lengths}")
        object.__setattr__(self, "lengths", lengths)
        if self.anchor not in ("interior", "edge"):
            raise ValueError(f"anchor must be 'interior' or 'edge', got {self.anchor!r}")
        if self.margin is None:
            object.__setattr__(self, "margin", self.n_sites // 20)
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        reach = lengths[-1] + (2 * self.margin if self.anchor == "interior" else 0)
        if reach > self.n_sites:
            raise ValueError(f"largest block {lengths[-1]} with margin {self.margin} does not fit {self.n_sites} sites")
        if self.fit_window is None:
            object.__setattr__(self, "fit_window", (16, max(16, self.n_sites // 20)))
        lo, hi = self.fit_window
        if lo > hi:
            raise ValueError(f"empty fit window {self.fit_window}")
        object.__setattr__(self, "fit_window", (int(lo), int(hi)))
        if isinstance(self.distribution, Explicit) and len(self.distribution.couplings) != self.n_sites - 1:
            raise ValueError("explicit couplings must number n_sites - 1")


def realization_rng(master_seed: int, realization: int) -> np.random.Generator:
    """Independent counter-based stream for one realization."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(realization,))
    return np.random.Generator(np.random.Philox(seq))


@dataclass
class RealizationResult:
    index: int
    starts: np.ndarray  # (n_lengths, placements)
    crossings: np.ndarray  # (n_lengths, placements)
    n_events: int
    n_trios: int
    edge_trios: int
    omega_increases: int


def simulate(config: EnsembleConfig, realization: int) -> tuple[DecimationHistory, np.random.Generator]:
    rng = realization_rng(config.master_seed, realization)
    chain = init_chain(config.n_sites, config.model, config.spin, config.distribution, rng)
    return chain.run_to_completion(), rng


def run_realization(config: EnsembleConfig, realization: int) -> RealizationResult:
    try:
        hist, rng = simulate(config, realization)
    except DecimationError as exc:
        raise RealizationError(realization, config.master_seed, exc) from exc
    starts, counts = entropy_profile(hist, config.lengths, config.placements, config.margin, rng, config.anchor)
    return RealizationResult(realization, starts, counts, len(hist), hist.n_trios, hist.edge_trios,
                             hist.omega_increases)


def _run_one(args):
    return run_realization(*args)


@dataclass(frozen=True)
class ScalingCurve:
    lengths: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_samples(cls, lengths, samples: np.ndarray) -> "ScalingCurve":
        """``samples`` is (realizations, lengths) of realization-level values."""
        r = samples.shape[0]
        mean = samples.mean(axis=0)
        if r > 1:
            stderr = samples.std(axis=0, ddof=1) / math.sqrt(r)
        else:
            stderr = np.zeros_like(mean)
        return cls(np.asarray(lengths, np.int64), mean, stderr, np.full(len(lengths), r, np.int64))

    def scaled(self, factor: float) -> "ScalingCurve":
        return ScalingCurve(self.lengths, self.mean * factor, self.stderr * factor, self.counts)


@dataclass
class EnsembleResult:
    config: EnsembleConfig
    entropy: ScalingCurve
    crossings: ScalingCurve
    n_events: int
    n_trios: int
    edge_trios: int
    omega_increases: int
    realizations: list[RealizationResult] = field(repr=False, default_factory=list)

    @property
    def trio_fraction(self) -> float:
        return self.n_trios / self.n_events if self.n_events else 0.0


def run_ensemble(config: EnsembleConfig, workers: int = 1, keep_samples: bool = False) -> EnsembleResult:
    """Run every realization and reduce them in realization order.

    The reduction only sees per-realization results sorted by index, so the
    output does not depend on ``workers``.
    """
    tasks = [(config, r) for r in range(config.n_realizations)]
    if workers <= 1:
        results = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(tasks) // (4 * workers))
            results = list(pool.map(_run_one, tasks, chunksize=chunk))
    results.sort(key=lambda res: res.index)

    per_real = np.array([res.crossings.mean(axis=1) for res in results])
    crossings = ScalingCurve.from_samples(config.lengths, per_real)
    entropy = crossings.scaled(singlet_pair_entropy(config.spin))
    out = EnsembleResult(
        config=config, entropy=entropy, crossings=crossings,
        n_events=sum(res.n_events for res in results),
        n_trios=sum(res.n_trios for res in results),
        edge_trios=sum(res.edge_trios for res in results),
        omega_increases=sum(res.omega_increases for res in results),
        realizations=results if keep_samples else [],
    )
    if out.omega_increases:
        log.warning("energy scale increased %d times across the ensemble", out.omega_increases)
    return out


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    covariance: tuple[tuple[float, float], tuple[float, float]]
    residual_rms: float
    window: tuple[int, int]
    n_points: int
    weighted: bool

    @property
    def slope_stderr(self) -> float:
        return math.sqrt(self.covariance[0][0])

    @property
    def c_r_est(self) -> float:
        return central_charge_from_slope(self.slope)


def central_charge_from_slope(slope_bits: float) -> float:
    """Effective central charge from the entropy slope in bits per log2 L.

    Entropy is measured in bits against log2 L while the central charge is a
    natural-log quantity, so S(L) = (c/3) log2 L + k with c = ln(2S+1) makes
    the slope itself c/3.
    """
    return 3.0 * slope_bits


def fit_log_scaling(curve: ScalingCurve, l_min: int, l_max: int) -> FitResult:
    """Weighted least squares of the curve against log2 L over [l_min, l_max]."""
    sel = (curve.lengths >= l_min) & (curve.lengths <= l_max)
    n = int(np.count_nonzero(sel))
    if n < 3:
        raise FitError(f"fit window [{l_min}, {l_max}] holds {n} points, need at least 3")
    x = np.log2(curve.lengths[sel].astype(float))
    y = curve.mean[sel]
    se = curve.stderr[sel]
    weighted = bool(np.all(se > 0))
    w = 1.0 / se ** 2 if weighted else np.ones(n)
    design = np.column_stack([x, np.ones(n)])
    sw = np.sqrt(w)
    coef, _, rank, _ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
    if rank < 2:
        raise FitError("singular normal equations: all lengths in the window coincide")
    resid = y - design @ coef
    normal = design.T @ (w[:, None] * design)
    cov = np.linalg.inv(normal)
    if not weighted:
        cov = cov * float(resid @ resid) / (n - 2)
    return FitResult(
        slope=float(coef[0]), intercept=float(coef[1]),
        covariance=((float(cov[0, 0]), float(cov[0, 1])), (float(cov[1, 0]), float(cov[1, 1]))),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        window=(int(l_min), int(l_max)), n_points=n, weighted=weighted,
    )


def crossing_slope(curve: ScalingCurve, l_min: int, l_max: int) -> FitResult:
    """Same fit applied to mean crossing counts; the slope should be ln2/3 for any S."""
    return fit_log_scaling(curve, l_min, l_max)


def expected_central_charge(spin: SpinMagnitude) -> float:
    return math.log(spin.dim)


def full_scale_config(model: ModelKind, spin: SpinMagnitude, master_seed: int, **overrides) -> EnsembleConfig:
    """Full-size run: 200,000 sites, 1000 realizations, P(J) ~ J**-0.8, blocks up to 8192."""
    params = dict(model=model, spin=spin, n_sites=200_000, n_realizations=1000,
                  distribution=PowerLaw(-0.8), master_seed=master_seed,
                  lengths=tuple(geometric_lengths(16, 10_000)))
    params.update(overrides)
    return EnsembleConfig(**params)
