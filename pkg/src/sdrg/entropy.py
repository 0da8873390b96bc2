"""Block entanglement from a decimation history by counting boundary-crossing singlets.

A singlet partner that is an effective spin belongs to whichever side holds
the majority of its original sites; constituent sets always have odd size,
so the vote never ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import DecimationHistory
from .spin_model import SpinMagnitude, singlet_pair_entropy


@dataclass(frozen=True)
class BlockSpec:
    """Contiguous block [start, start + length) of original 1-based sites."""

    start: int
    length: int

    def check(self, n_sites: int) -> None:
        if self.length < 0 or self.start < 1 or self.start + self.length - 1 > n_sites:
            raise ValueError(f"block [{self.start}, {self.start + self.length}) does not fit {n_sites} sites")

    @property
    def stop(self) -> int:
        return self.start + self.length


@dataclass(frozen=True)
class CrossingTally:
    crossings: int
    entropy: float


def side_of(block: BlockSpec, constituents) -> bool:
    """True if a strict majority of ``constituents`` lies inside ``block``."""
    members = np.asarray(list(constituents))
    if members.size % 2 == 0:
        raise ValueError(f"majority vote needs an odd constituent count, got {members.size}")
    inside = np.count_nonzero((members >= block.start) & (members < block.stop))
    return 2 * inside > members.size


def crossing_count(history: DecimationHistory, block: BlockSpec) -> int:
    flat = history.partner_flat
    if flat.size == 0:
        return 0
    inside = ((flat >= block.start) & (flat < block.stop)).astype(np.int64)
    votes = np.add.reduceat(inside, history.partner_offsets)
    side = 2 * votes > history.partner_sizes
    return int(np.count_nonzero(side[0::2] != side[1::2]))


def crossing_entropy(history: DecimationHistory, block: BlockSpec,
                     spin: SpinMagnitude | None = None) -> CrossingTally:
    """Entropy in bits of ``block``: crossing singlets times log2(2S+1)."""
    block.check(history.n_sites)
    n = crossing_count(history, block)
    return CrossingTally(n, n * singlet_pair_entropy(spin or history.spin))


def block_starts(n_sites: int, length: int, margin: int, count: int, rng: np.random.Generator,
                 anchor: str = "interior") -> np.ndarray:
    """Start positions for ``count`` placements of a block of ``length`` sites.

    Interior blocks keep both ends at least ``margin`` sites from the chain
    ends; edge blocks all start at site 1.
    """
    if anchor == "edge":
        if length > n_sites:
            raise ValueError(f"block length {length} exceeds {n_sites} sites")
        return np.ones(count, np.int64)
    if anchor != "interior":
        raise ValueError(f"unknown block anchor {anchor!r}")
    lo = margin + 1
    hi = n_sites - margin - length + 1
    if length < 0 or margin < 0 or hi < lo:
        raise ValueError(f"block length {length} with margin {margin} does not fit {n_sites} sites")
    return rng.integers(lo, hi, size=count, endpoint=True)


def entropy_profile(history: DecimationHistory, lengths, placements: int, margin: int,
                    rng: np.random.Generator, anchor: str = "interior"):
    """Crossing counts for every (length, placement).

    Returns (starts, crossings), both shaped (len(lengths), placements);
    entropies are crossings * log2(2S+1).
    """
    lengths = [int(L) for L in lengths]
    starts = np.empty((len(lengths), placements), np.int64)
    counts = np.empty((len(lengths), placements), np.int64)
    for i, L in enumerate(lengths):
        starts[i] = block_starts(history.n_sites, L, margin, placements, rng, anchor)
        for j, a in enumerate(starts[i]):
            counts[i, j] = crossing_count(history, BlockSpec(int(a), L))
    return starts, counts
