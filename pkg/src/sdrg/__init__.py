"""Strong-disorder renormalization of random antiferromagnetic spin-S chains.

Decimates the strongest bond (merging trios for S >= 1), counts singlets
crossing block boundaries, and fits the logarithmic growth of the block
entropy whose prefactor gives the effective central charge ln(2S+1).
"""

from .engine import ActiveChain, DecimationHistory, SingletEvent, TrioEvent, decimate, init_chain
from .ensemble import EnsembleConfig, FitResult, ScalingCurve, fit_log_scaling, run_ensemble
from .entropy import BlockSpec, crossing_entropy, side_of
from .spin_model import Explicit, ModelKind, PowerLaw, SpinMagnitude

__version__ = "0.1.0"

__all__ = [
    "ActiveChain", "BlockSpec", "DecimationHistory", "EnsembleConfig", "Explicit", "FitResult", "ModelKind",
    "PowerLaw", "ScalingCurve", "SingletEvent", "SpinMagnitude", "TrioEvent", "crossing_entropy", "decimate",
    "fit_log_scaling", "init_chain", "run_ensemble", "side_of",
]
