"""The elementary counterfactual clock: forward protocol and outcome certification."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .quantum import (
    E,
    PSI,
    Basis,
    BasisLabel,
    OutcomeDistribution,
    StateVector,
    UnitaryMatrix,
    ancilla,
    basis_projectors,
    clock_basis,
    hidden,
    make_state,
    measure,
    measurement_basis,
    tick,
)

DEF1_TOL = 1e-10
CONVENTIONS = ("ancilla", "primed")


@dataclass(frozen=True)
class ClockSpec:
    """Elementary clock configuration.

    ``um`` acts on the measurement basis (E, ticks, ancillas).  With the
    default ``"ancilla"`` convention the counterfactual outcomes are
    E, A_1..A_NT; with ``"primed"`` they are E, tau_0..tau_{NT-1}, which is
    how the bare table U_m' reads before the exchange permutation.
    """

    n_ticks: int
    m: int
    theta: float
    um: UnitaryMatrix
    convention: str = "ancilla"

    def __post_init__(self) -> None:
        if self.n_ticks < 1:
            raise ValueError("n_ticks must be positive")
        if self.m < self.n_ticks:
            raise ValueError(f"need at least n_ticks={self.n_ticks} ancillas, got m={self.m}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        if self.um.basis != measurement_basis(self.n_ticks, self.m):
            raise ValueError("U_m must act on the measurement basis of this spec")

    @property
    def c(self) -> float:
        return math.cos(self.theta)

    @property
    def s(self) -> float:
        return math.sin(self.theta)

    @cached_property
    def basis(self) -> Basis:
        return clock_basis(self.n_ticks, self.m)

    @cached_property
    def u0(self) -> UnitaryMatrix:
        """Rotation on span{E, psi}, identity elsewhere."""
        b = self.basis
        M = np.eye(len(b), dtype=complex)
        i, j = b.index_of(E), b.index_of(PSI)
        c, s = self.c, self.s
        M[i, i], M[j, i] = c, s
        M[i, j], M[j, j] = -s, c
        return UnitaryMatrix(M, b)

    @cached_property
    def um_full(self) -> np.ndarray:
        return self.um.embed(self.basis)

    def outcome_labels(self) -> list[BasisLabel]:
        """The N_T+1 counterfactual outcome kets, index k <-> time tau_k."""
        if self.convention == "ancilla":
            return [E] + [ancilla(k) for k in range(1, self.n_ticks + 1)]
        return [E] + [tick(k) for k in range(self.n_ticks)]

    def with_theta(self, theta: float) -> "ClockSpec":
        return ClockSpec(self.n_ticks, self.m, theta, self.um, self.convention)

    def a0(self, k: int) -> complex:
        """A_k^0 = <A_k|U_m|E>."""
        return self.um.element(self.outcome_labels()[k], E)

    def a1(self, k: int, l: int) -> complex:
        """A_k^1(tau_l) = <A_k|U_m|tau_l>."""
        return self.um.element(self.outcome_labels()[k], tick(l))


def evolution_matrix(spec: ClockSpec, l: int) -> np.ndarray:
    """U(tau_l) on the clock basis, as an isometry of the visible sector.

    E and the ancillas are stationary, psi -> tau_l and tau_j -> h(j, l).
    Hidden labels are never an input of the protocol; their columns are left
    zero so that feeding one in is caught by the norm check in
    :func:`evolve_elementary`.
    """
    if not 0 <= l <= spec.n_ticks:
        raise IndexError(f"elapsed index {l} outside 0..{spec.n_ticks}")
    b = spec.basis
    V = np.zeros((len(b), len(b)))
    V[b.index_of(E), b.index_of(E)] = 1.0
    for j in range(1, spec.m + 1):
        i = b.index_of(ancilla(j))
        V[i, i] = 1.0
    V[b.index_of(tick(l)), b.index_of(PSI)] = 1.0
    for j in range(spec.n_ticks + 1):
        V[b.index_of(hidden(j, l)), b.index_of(tick(j))] = 1.0
    return V


def evolve_elementary(psi: StateVector, l: int, spec: ClockSpec) -> StateVector:
    if psi.basis != spec.basis:
        psi = psi.embed(spec.basis)
    hid = [psi.amp(lab) for lab in spec.basis if lab.kind == "Hidden"]
    if any(abs(a) > 0 for a in hid):
        raise ValueError("input state has support on the hidden sector")
    V = evolution_matrix(spec, l)
    return StateVector(V @ psi.amplitudes, spec.basis, psi.normalized)


def final_state(spec: ClockSpec, l: int) -> StateVector:
    """U_m U(tau_l) U0 |E>."""
    psi = make_state([(E, 1.0)], spec.basis)
    psi = StateVector(spec.u0.matrix @ psi.amplitudes, spec.basis)
    psi = evolve_elementary(psi, l, spec)
    return StateVector(spec.um_full @ psi.amplitudes, spec.basis)


@dataclass(frozen=True)
class Interpretation:
    kind: str  # "AlwaysOff" or "Inconclusive"
    time_index: int | None = None

    def __str__(self) -> str:
        return f"AlwaysOff(tau{self.time_index})" if self.kind == "AlwaysOff" else "Inconclusive"


INCONCLUSIVE = Interpretation("Inconclusive")


@dataclass(frozen=True)
class ProtocolResult:
    distribution: OutcomeDistribution
    elapsed_index: int
    interpretation: dict


def verify_counterfactual_outcome(spec: ClockSpec, k: int) -> tuple[bool, dict[str, float]]:
    """Check both counterfactual conditions for outcome k.

    Returns the verdict and the two residuals: ``on_at_own_time`` is
    |A_k^1(tau_k)| and ``cancellation`` is max_{l != k} |A_k^1(tau_l) + (c/s) A_k^0|.
    """
    if not 0 <= k <= spec.n_ticks:
        raise IndexError(f"outcome index {k} outside 0..{spec.n_ticks}")
    if abs(spec.s) < 1e-12:
        raise ValueError("s = 0: the cancellation condition divides by s")
    r = spec.c / spec.s
    a0 = spec.a0(k)
    own = abs(spec.a1(k, k))
    canc = max((abs(spec.a1(k, l) + r * a0) for l in range(spec.n_ticks + 1) if l != k), default=0.0)
    ok = own <= DEF1_TOL and canc <= DEF1_TOL
    return ok, {"on_at_own_time": own, "cancellation": canc}


def counterfactual_probabilities(spec: ClockSpec) -> np.ndarray:
    """P_cf^(k) = |c A_k^0|^2 for k = 0..N_T."""
    return np.array([abs(spec.c * spec.a0(k)) ** 2 for k in range(spec.n_ticks + 1)])


def classify_outcome(outcome: BasisLabel | str, spec: ClockSpec) -> Interpretation:
    lab = outcome
    if isinstance(outcome, str):
        from .quantum import parse_label

        lab = parse_label(outcome)
    if lab not in spec.um.basis:
        raise KeyError(f"{outcome} is not a measurement outcome of this spec")
    labels = spec.outcome_labels()
    if lab not in labels or abs(spec.s) < 1e-12:
        return INCONCLUSIVE
    k = labels.index(lab)
    ok, _ = verify_counterfactual_outcome(spec, k)
    if ok and abs(spec.c * spec.a0(k)) ** 2 > 1e-15:
        return Interpretation("AlwaysOff", k)
    return INCONCLUSIVE


def run_forward(spec: ClockSpec, l: int) -> ProtocolResult:
    psi = final_state(spec, l)
    dist = measure(psi, basis_projectors(spec.um.basis))
    interp = {str(lab): classify_outcome(lab, spec) for lab in spec.um.basis}
    return ProtocolResult(dist, l, interp)
