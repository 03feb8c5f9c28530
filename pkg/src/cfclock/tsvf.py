"""Backward-in-time analysis of the counterfactual outcomes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .protocol import ClockSpec, final_state, verify_counterfactual_outcome
from .quantum import E, PSI, Projector, StateVector, tick

DENOM_TOL = 1e-14


@dataclass(frozen=True)
class TwoStateQuery:
    spec: ClockSpec
    postselect: int
    u: float

    def __post_init__(self) -> None:
        if not 0 <= self.postselect <= self.spec.n_ticks:
            raise IndexError(f"outcome index {self.postselect} outside 0..{self.spec.n_ticks}")
        if not 0.0 < self.u < 1.0:
            raise ValueError("intermediate time fraction must lie in (0, 1)")


def _require_counterfactual(spec: ClockSpec, k: int) -> None:
    ok, res = verify_counterfactual_outcome(spec, k)
    if not ok:
        raise ValueError(f"outcome {k} is not counterfactual (residuals {res})")


def backward_state(spec: ClockSpec, k: int) -> StateVector:
    """Coefficients of the bra <A_k| U_m in the measurement basis (unnormalized)."""
    _require_counterfactual(spec, k)
    b = spec.um.basis
    row = spec.um.matrix[b.index_of(spec.outcome_labels()[k]), :]
    return StateVector(row, b, normalized=False)


def pre_post_amplitude(spec: ClockSpec, k: int) -> complex:
    """<A_k| U_m U(tau_k) U0 |E>, computed by forward simulation."""
    return final_state(spec, k).amp(spec.outcome_labels()[k])


def amplitude_decomposition(spec: ClockSpec, k: int) -> tuple[complex, complex]:
    """Split the pre/post-selected amplitude into (off branch, on branch).

    The off part is c times the backward coefficient on <E|; the on part is s
    times the backward coefficient on <tau_k|, which vanishes for a
    counterfactual outcome.
    """
    back = backward_state(spec, k)
    return spec.c * back.amp(E), spec.s * back.amp(tick(k))


def _plane_rotation(spec: ClockSpec, k: int, frac: float) -> np.ndarray:
    """Rotation by frac * pi/2 taking psi towards tau_k; identity elsewhere."""
    b = spec.basis
    M = np.eye(len(b))
    i, j = b.index_of(PSI), b.index_of(tick(k))
    a = frac * math.pi / 2
    M[i, i], M[j, i] = math.cos(a), math.sin(a)
    M[i, j], M[j, j] = -math.sin(a), math.cos(a)
    return M


def intermediate_evolutions(spec: ClockSpec, k: int, u: float) -> tuple[np.ndarray, np.ndarray]:
    """U(t) and U(tau_k - t) for t = u tau_k.

    Their product sends psi to tau_k and leaves E and the ancillas fixed, which
    is all the Markov factorization has to reproduce here.
    """
    return _plane_rotation(spec, k, u), _plane_rotation(spec, k, 1.0 - u)


def _branch_projectors(spec: ClockSpec) -> tuple[np.ndarray, np.ndarray]:
    b = spec.basis
    on = Projector([lab for lab in b if lab.kind in ("Psi", "Tick", "Hidden")]).matrix(b)
    off = Projector([lab for lab in b if lab.kind in ("E", "Ancilla")]).matrix(b)
    return on, off


def prob_on_at(query: TwoStateQuery) -> float:
    spec, k = query.spec, query.postselect
    b = spec.basis
    U1, U2 = intermediate_evolutions(spec, k, query.u)
    p_on, p_off = _branch_projectors(spec)
    start = np.zeros(len(b))
    start[b.index_of(E)] = 1.0
    pre = U1 @ spec.u0.matrix @ start
    bra = spec.um_full[b.index_of(spec.outcome_labels()[k]), :]
    on = complex(bra @ U2 @ p_on @ pre)
    off = complex(bra @ U2 @ p_off @ pre)
    den = abs(on) ** 2 + abs(off) ** 2
    if den < DENOM_TOL:
        raise ZeroDivisionError("both branches have vanishing weight for this outcome")
    return abs(on) ** 2 / den
