"""Spin magnitudes, model kinds, coupling laws and the closed-form decimation rules."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


@dataclass(frozen=True, order=True)
class SpinMagnitude:
    """Spin S stored as the integer 2S so half-integers stay exact."""

    twice_s: int

    def __post_init__(self):
        if not isinstance(self.twice_s, (int, np.integer)) or isinstance(self.twice_s, bool):
            raise TypeError(f"twice_s must be an integer, got {self.twice_s!r}")
        if self.twice_s < 1:
            raise ValueError(f"twice_s must be >= 1, got {self.twice_s}")
        object.__setattr__(self, "twice_s", int(self.twice_s))

    @classmethod
    def parse(cls, value) -> "SpinMagnitude":
        """Accept 0.5, "1/2", "1.5", 3/2 as a Fraction, or an existing SpinMagnitude."""
        if isinstance(value, SpinMagnitude):
            return value
        frac = Fraction(str(value)) if isinstance(value, str) else Fraction(value).limit_denominator(2)
        twice = 2 * frac
        if twice.denominator != 1:
            raise ValueError(f"spin must be a multiple of 1/2, got {value!r}")
        return cls(int(twice))

    @property
    def value(self) -> float:
        return self.twice_s / 2

    @property
    def dim(self) -> int:
        """Local Hilbert-space dimension 2S+1."""
        return self.twice_s + 1

    @property
    def casimir(self) -> float:
        """S(S+1)."""
        return self.value * (self.value + 1)

    def __str__(self) -> str:
        return str(self.twice_s // 2) if self.twice_s % 2 == 0 else f"{self.twice_s}/2"


SPIN_HALF = SpinMagnitude(1)
SPIN_ONE = SpinMagnitude(2)
SPIN_THREE_HALVES = SpinMagnitude(3)


class ModelKind(str, enum.Enum):
    HEISENBERG = "heisenberg"
    BIQUADRATIC = "biquadratic"

    def check_spin(self, spin: SpinMagnitude) -> None:
        if self is ModelKind.BIQUADRATIC and spin.twice_s != 2:
            raise ValueError(f"the biquadratic chain is defined for S=1 only, got S={spin}")


class CouplingDistribution:
    """Base class for the random exchange law on (0, 1]."""

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class PowerLaw(CouplingDistribution):
    """P(J) proportional to J**exponent on (0, 1]; normalizable iff exponent > -1."""

    exponent: float

    def __post_init__(self):
        if not math.isfinite(self.exponent) or self.exponent <= -1.0:
            raise ValueError(f"power-law exponent must be > -1, got {self.exponent}")
        if self.exponent > 0.0:
            raise ValueError(f"power-law exponent must be <= 0, got {self.exponent}")

    def cdf(self, j):
        return np.asarray(j, dtype=float) ** (1.0 + self.exponent)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # 1 - U maps [0, 1) onto (0, 1]
        u = 1.0 - rng.random(size)
        return sample_coupling(self, u)


@dataclass(frozen=True)
class Explicit(CouplingDistribution):
    """A fixed coupling list, replayed verbatim (for tests and hand traces)."""

    couplings: tuple[float, ...] = field(default=())

    def __post_init__(self):
        vals = tuple(float(c) for c in self.couplings)
        for c in vals:
            if not (c > 0.0) or not math.isfinite(c):
                raise ValueError(f"couplings must be positive and finite, got {c}")
        object.__setattr__(self, "couplings", vals)

    def sample(self, rng: np.random.Generator | None, size: int) -> np.ndarray:
        if size != len(self.couplings):
            raise ValueError(f"explicit distribution holds {len(self.couplings)} couplings, {size} requested")
        return np.array(self.couplings, dtype=float)


def sample_coupling(dist: PowerLaw, u):
    """Inverse-CDF transform J = u**(1/(1+alpha)) for u in (0, 1]."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u > 1.0):
        raise ValueError("u must lie in (0, 1]")
    out = u ** (1.0 / (1.0 + dist.exponent))
    return float(out) if out.ndim == 0 else out


def singlet_pair_entropy(spin: SpinMagnitude) -> float:
    """Entropy in bits of one spin of a two-spin singlet: log2(2S+1)."""
    return math.log2(spin.dim)


def renormalization_factor(model: ModelKind, spin: SpinMagnitude) -> float:
    if model is ModelKind.HEISENBERG:
        return 2.0 / 3.0 * spin.casimir
    model.check_spin(spin)
    return 2.0 / 9.0


def renormalized_coupling(model: ModelKind, spin: SpinMagnitude, j_left: float, j_right: float,
                          omega: float) -> float:
    """Second-order coupling bridging a decimated singlet."""
    if not omega > 0.0:
        raise ValueError(f"omega must be positive, got {omega}")
    if not (j_left > 0.0 and j_right > 0.0):
        raise ValueError("neighbour couplings must be positive")
    return renormalization_factor(model, spin) * j_left * j_right / omega


def trio_threshold(model: ModelKind, spin: SpinMagnitude) -> float:
    """Ratio J1/Omega at or above which a trio is solved instead of a singlet.

    Values above 1 mean the trio branch is unreachable, since J1 <= Omega.
    """
    return 1.0 / renormalization_factor(model, spin)
