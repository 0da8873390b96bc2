"""Decimation entropy against exact ground-state entropy on small chains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import init_chain
from .ensemble import realization_rng
from .entropy import BlockSpec, crossing_entropy
from .exact import DIMENSION_CAP, SolverError, ground_state_entropy
from .spin_model import CouplingDistribution, ModelKind, SpinMagnitude


@dataclass(frozen=True)
class OracleRow:
    realization: int
    sdrg_bits: float
    ed_bits: float

    @property
    def abs_diff(self) -> float:
        return abs(self.sdrg_bits - self.ed_bits)


def compare(model: ModelKind, spin: SpinMagnitude, n_sites: int, dist: CouplingDistribution,
            realizations: int, seed: int, block: BlockSpec | None = None) -> list[OracleRow]:
    """Per realization, the crossing entropy of ``block`` next to the exact one."""
    if spin.dim ** n_sites > DIMENSION_CAP:
        raise SolverError(f"{n_sites} sites of spin {spin} exceed the dimension cap {DIMENSION_CAP}")
    block = block or BlockSpec(1, n_sites // 2)
    block.check(n_sites)
    sites = range(block.start - 1, block.stop - 1)
    rows = []
    for r in range(realizations):
        chain = init_chain(n_sites, model, spin, dist, realization_rng(seed, r))
        couplings = chain.bond[: n_sites - 1].copy()
        hist = chain.run_to_completion()
        sdrg = crossing_entropy(hist, block).entropy
        ed = ground_state_entropy(model, spin, couplings, sites)
        rows.append(OracleRow(r, sdrg, ed))
    return rows


def mean_abs_deviation(rows) -> float:
    return float(np.mean([row.abs_diff for row in rows]))
