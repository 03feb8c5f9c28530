"""Counterfactual clocks: elementary protocol, unitary synthesis, two-state analysis,
ontic-model testing and the engineered continuous-time clock."""

from .protocol import ClockSpec, run_forward, verify_counterfactual_outcome
from .synth import SynthRequest, synth_um_general, um_nt1_canonical

__all__ = ["ClockSpec", "SynthRequest", "run_forward", "synth_um_general", "um_nt1_canonical", "verify_counterfactual_outcome"]
__version__ = "0.1.0"
