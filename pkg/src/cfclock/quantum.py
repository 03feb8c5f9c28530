"""Labeled finite-dimensional states, unitaries, projectors and Born-rule measurement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
ORTHO_TOL = 1e-10

_KINDS = ("E", "Psi", "Tick", "Ancilla", "Hidden")


@dataclass(frozen=True, order=True)
class BasisLabel:
    """One ket of the clock basis.

    ``index`` is the tick number for Tick, the ancilla number (1-based) for
    Ancilla, and the source tick for Hidden; ``sub`` is the elapsed-time index
    of a Hidden label.
    """

    kind: str
    index: int = 0
    sub: int = 0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.index < 0 or self.sub < 0:
            raise ValueError("basis indices must be non-negative")
        if self.kind == "Ancilla" and self.index < 1:
            raise ValueError("ancilla indices start at 1")

    def __str__(self) -> str:
        if self.kind == "E":
            return "E"
        if self.kind == "Psi":
            return "psi"
        if self.kind == "Tick":
            return f"tau{self.index}"
        if self.kind == "Ancilla":
            return f"A{self.index}"
        return f"h{self.index}_{self.sub}"


E = BasisLabel("E")
PSI = BasisLabel("Psi")


def tick(l: int) -> BasisLabel:
    return BasisLabel("Tick", l)


def ancilla(j: int) -> BasisLabel:
    return BasisLabel("Ancilla", j)


def hidden(j: int, l: int) -> BasisLabel:
    return BasisLabel("Hidden", j, l)


def parse_label(text: str) -> BasisLabel:
    """Inverse of ``str(label)``; ``A`` alone means the first ancilla."""
    t = text.strip()
    if t == "E":
        return E
    if t == "psi":
        return PSI
    if t == "A":
        return ancilla(1)
    if t.startswith("tau") and t[3:].isdigit():
        return tick(int(t[3:]))
    if t.startswith("A") and t[1:].isdigit():
        return ancilla(int(t[1:]))
    if t.startswith("h") and "_" in t:
        a, b = t[1:].split("_", 1)
        return hidden(int(a), int(b))
    raise ValueError(f"cannot parse basis label {text!r}")


class Basis(tuple):
    """An ordered tuple of distinct labels with O(1) index lookup."""

    def __new__(cls, labels: Iterable[BasisLabel]):
        obj = super().__new__(cls, tuple(labels))
        if len(set(obj)) != len(obj):
            raise ValueError("basis labels must be pairwise distinct")
        obj._pos = {lab: i for i, lab in enumerate(obj)}
        return obj

    def index_of(self, label: BasisLabel) -> int:
        try:
            return self._pos[label]
        except KeyError:
            raise KeyError(f"label {label} not in basis") from None

    def __contains__(self, label) -> bool:
        return label in self._pos


def measurement_basis(n_ticks: int, m: int) -> Basis:
    """E, tau_0..tau_NT, A_1..A_m: the basis U_m acts on and we measure in."""
    return Basis([E] + [tick(l) for l in range(n_ticks + 1)] + [ancilla(j) for j in range(1, m + 1)])


def clock_basis(n_ticks: int, m: int) -> Basis:
    """Measurement basis plus Psi and one hidden label per (tick, elapsed) pair."""
    hid = [hidden(j, l) for l in range(n_ticks + 1) for j in range(n_ticks + 1)]
    return Basis([E, PSI] + [tick(l) for l in range(n_ticks + 1)] + [ancilla(j) for j in range(1, m + 1)] + hid)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    basis: Basis
    normalized: bool = True

    def __post_init__(self) -> None:
        amps = _frozen(self.amplitudes)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (len(self.basis),):
            raise ValueError("amplitude vector does not match basis size")
        if self.normalized and abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: norm {np.linalg.norm(amps)!r}")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def amp(self, label: BasisLabel) -> complex:
        return complex(self.amplitudes[self.basis.index_of(label)])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        if self.basis != other.basis:
            raise ValueError("basis mismatch")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def embed(self, basis: Basis) -> "StateVector":
        """Re-express in a larger basis; labels absent from self get 0."""
        out = np.zeros(len(basis), dtype=complex)
        for lab, a in zip(self.basis, self.amplitudes):
            out[basis.index_of(lab)] = a
        return StateVector(out, basis, self.normalized)

    def restrict(self, basis: Basis) -> "StateVector":
        """Drop labels outside ``basis``; result is flagged unnormalized."""
        out = np.array([self.amp(lab) if lab in self.basis else 0.0 for lab in basis], dtype=complex)
        return StateVector(out, basis, normalized=False)

    def as_dict(self) -> dict[str, complex]:
        return {str(lab): complex(a) for lab, a in zip(self.basis, self.amplitudes)}


def make_state(pairs: Sequence[tuple[BasisLabel, complex]], basis: Basis | None = None) -> StateVector:
    """Normalized state from (label, amplitude) pairs; missing labels get 0."""
    labels = [lab for lab, _ in pairs]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate label in state specification")
    if basis is None:
        basis = Basis(sorted(labels))
    vec = np.zeros(len(basis), dtype=complex)
    for lab, a in pairs:
        vec[basis.index_of(lab)] = a
    nrm = np.linalg.norm(vec)
    if nrm == 0.0:
        raise ValueError("all-zero amplitudes cannot be normalized")
    return StateVector(vec / nrm, basis)


@dataclass(frozen=True)
class UnitaryMatrix:
    """Square matrix on a labeled basis; columns are images of basis kets."""

    matrix: np.ndarray
    basis: Basis
    tol: float = UNITARY_TOL

    def __post_init__(self) -> None:
        M = _frozen(self.matrix)
        object.__setattr__(self, "matrix", M)
        n = len(self.basis)
        if M.shape != (n, n):
            raise ValueError(f"matrix shape {M.shape} does not match basis size {n}")
        res = unitarity_residual(M)
        if res > self.tol:
            raise ValueError(f"matrix is not unitary: residual {res:.3e}")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def element(self, row: BasisLabel, col: BasisLabel) -> complex:
        """<row|U|col>."""
        return complex(self.matrix[self.basis.index_of(row), self.basis.index_of(col)])

    def dagger(self) -> "UnitaryMatrix":
        return UnitaryMatrix(self.matrix.conj().T, self.basis, self.tol)

    def embed(self, basis: Basis) -> np.ndarray:
        """Dense matrix on a larger basis, acting as identity on the extra labels."""
        out = np.eye(len(basis), dtype=complex)
        idx = [basis.index_of(lab) for lab in self.basis]
        out[np.ix_(idx, idx)] = self.matrix
        return out

    @classmethod
    def identity(cls, basis: Basis) -> "UnitaryMatrix":
        return cls(np.eye(len(basis)), basis)


def unitarity_residual(M: np.ndarray) -> float:
    M = np.asarray(M)
    return float(np.max(np.abs(M.conj().T @ M - np.eye(M.shape[0])))) if M.size else 0.0


def apply_unitary(U: UnitaryMatrix, psi: StateVector) -> StateVector:
    if U.basis != psi.basis:
        raise ValueError("basis of unitary and state disagree")
    return StateVector(U.matrix @ psi.amplitudes, psi.basis, psi.normalized)


def apply_matrix(M: np.ndarray, psi: StateVector, *, normalized: bool | None = None) -> StateVector:
    """Apply a dense operator given in ``psi``'s basis."""
    M = np.asarray(M)
    if M.shape != (psi.dim, psi.dim):
        raise ValueError("operator does not match state dimension")
    return StateVector(M @ psi.amplitudes, psi.basis, psi.normalized if normalized is None else normalized)


@dataclass(frozen=True)
class Projector:
    """Projector onto the span of a set of basis labels."""

    target: frozenset
    name: str = ""

    def __init__(self, target: Iterable[BasisLabel], name: str = "") -> None:
        tgt = frozenset(target)
        object.__setattr__(self, "target", tgt)
        object.__setattr__(self, "name", name or "+".join(str(t) for t in sorted(tgt)))

    @property
    def rank(self) -> int:
        return len(self.target)

    def matrix(self, basis: Basis) -> np.ndarray:
        P = np.zeros((len(basis), len(basis)))
        for lab in self.target:
            i = basis.index_of(lab)
            P[i, i] = 1.0
        return P

    def apply(self, psi: StateVector) -> StateVector:
        return StateVector(self.matrix(psi.basis) @ psi.amplitudes, psi.basis, normalized=False)


def basis_projectors(labels: Iterable[BasisLabel]) -> list[Projector]:
    return [Projector([lab], str(lab)) for lab in labels]


@dataclass(frozen=True)
class OutcomeDistribution:
    probs: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        tot = sum(self.probs.values())
        if abs(tot - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {tot!r}")
        if any(p < 0 for p in self.probs.values()):
            raise ValueError("negative probability")

    def __getitem__(self, key: str) -> float:
        return self.probs[key]

    def get(self, key: str, default: float = 0.0) -> float:
        return self.probs.get(key, default)


def measure(psi: StateVector, projectors: Sequence[Projector]) -> OutcomeDistribution:
    """Born rule over pairwise orthogonal projectors; leftover goes to "rest"."""
    mats = [P.matrix(psi.basis) for P in projectors]
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            if np.max(np.abs(mats[i] @ mats[j])) > ORTHO_TOL:
                raise ValueError(f"projectors {projectors[i].name} and {projectors[j].name} are not orthogonal")
    nrm2 = float(np.vdot(psi.amplitudes, psi.amplitudes).real)
    probs: dict[str, float] = {}
    for P, M in zip(projectors, mats):
        v = M @ psi.amplitudes
        probs[P.name] = float(np.vdot(v, v).real) / nrm2
    probs["rest"] = max(0.0, 1.0 - sum(probs.values()))
    return OutcomeDistribution(probs)
