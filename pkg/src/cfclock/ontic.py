"""Noncontextual ontic-model test by reduced-space projection and cone duality.

A model exists iff the pairing tensor sum_j R_j (x) R_j of an orthonormal
basis of the reduced space lies in the cone generated by a (x) b, with a an
extreme ray of the dual of the state cone and b one of the dual of the effect
cone.  A facet w of that tensor cone with negative pairing is the witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cones import dual_extreme_rays, remove_redundant
from .protocol import ClockSpec
from .quantum import E, tick

MODES = ("on-only", "counterfactual")
HERM_TOL = 1e-12
BASIS_TOL = 1e-10
MAX_TENSOR_DIM = 256


class BudgetError(ValueError):
    """The tensor-space dimension exceeds what the enumeration is sized for."""


def _check_hermitian(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("operator must be a square matrix")
    if np.max(np.abs(M - M.conj().T), initial=0.0) > HERM_TOL:
        raise ValueError("operator is not Hermitian")
    return M


def hs_vec(M: np.ndarray) -> np.ndarray:
    """Real vector whose dot products give the Hilbert-Schmidt inner product."""
    M = np.asarray(M, dtype=complex)
    return np.concatenate([M.real.ravel(), M.imag.ravel()])


def hs_unvec(v: np.ndarray, dim: int) -> np.ndarray:
    n = dim * dim
    return (v[:n] + 1j * v[n:]).reshape(dim, dim)


def _gram_schmidt(vectors: np.ndarray, tol: float = BASIS_TOL) -> np.ndarray:
    basis: list[np.ndarray] = []
    scale = max(1.0, float(np.max(np.linalg.norm(vectors, axis=1), initial=0.0)))
    for v in vectors:
        w = np.array(v, dtype=float)
        for _ in range(2):
            for q in basis:
                w = w - (q @ w) * q
        n = np.linalg.norm(w)
        if n > tol * scale:
            basis.append(w / n)
    return np.array(basis).reshape(len(basis), vectors.shape[1])


@dataclass(frozen=True)
class OnticScenario:
    states: tuple
    effects: tuple
    reduced_basis: tuple
    state_names: tuple = ()
    effect_names: tuple = ()

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    @property
    def reduced_dim(self) -> int:
        return len(self.reduced_basis)

    def _basis_rows(self) -> np.ndarray:
        return np.array([hs_vec(R) for R in self.reduced_basis])

    def coords(self, ops: Sequence[np.ndarray]) -> np.ndarray:
        """Coordinates of P_R(op) in the reduced basis."""
        B = self._basis_rows()
        return np.array([B @ hs_vec(M) for M in ops])

    def project(self, M: np.ndarray) -> np.ndarray:
        B = self._basis_rows()
        return hs_unvec(B.T @ (B @ hs_vec(M)), self.dim)


def scenario_from_operators(states, effects, state_names=(), effect_names=()) -> OnticScenario:
    """Reduced space: span of the states projected onto span(effects)."""
    S = [_check_hermitian(M) for M in states]
    Ef = [_check_hermitian(M) for M in effects]
    if not S or not Ef:
        raise ValueError("need at least one state and one effect")
    Ev = np.array([hs_vec(M) for M in Ef])
    Q = _gram_schmidt(Ev)
    PS = np.array([Q.T @ (Q @ hs_vec(M)) for M in S])
    R = _gram_schmidt(PS)
    dim = S[0].shape[0]
    basis = tuple(hs_unvec(r, dim) for r in R)
    return OnticScenario(tuple(S), tuple(Ef), basis, tuple(state_names), tuple(effect_names))


def _proj(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def build_scenario(spec: ClockSpec, mode: str) -> OnticScenario:
    """State and effect sets of the clock run always-on or counterfactually."""
    mode = mode.lower().replace("_", "-")
    if mode == "ononly":
        mode = "on-only"
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    b = spec.um.basis
    n = len(b)
    U = spec.um.matrix
    ket = lambda lab: np.eye(n)[b.index_of(lab)].astype(complex)
    ticks = [tick(l) for l in range(spec.n_ticks + 1)]
    states = [_proj(ket(E))] + [_proj(ket(t)) for t in ticks]
    snames = ["E"] + [str(t) for t in ticks]
    effects = [_proj(ket(lab)) for lab in b]
    enames = [str(lab) for lab in b]
    if mode == "counterfactual":
        cfs = [spec.c * ket(E) + spec.s * ket(t) for t in ticks]
        states += [_proj(v) for v in cfs] + [U @ _proj(v) @ U.conj().T for v in cfs]
        snames += [f"cf{l}" for l in range(len(ticks))] + [f"Um cf{l}" for l in range(len(ticks))]
        effects += [U.conj().T @ _proj(ket(lab)) @ U for lab in b]
        enames += [f"Um^ {lab}" for lab in b]
    return scenario_from_operators(states, effects, snames, enames)


@dataclass(frozen=True)
class WitnessReport:
    model_exists: bool
    witness: np.ndarray | None
    violation: float
    numeric_floor: float
    counts: dict = field(default_factory=dict)
    certificate_residual: float = 0.0


def _nonzero_rows(X: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    return X[np.linalg.norm(X, axis=1) > tol]


def numeric_floor(S: np.ndarray, Ef: np.ndarray) -> float:
    """Machine epsilon scaled by problem size and conditioning of the ray sets."""
    d = S.shape[1]
    kappa = max(np.linalg.cond(S), np.linalg.cond(Ef), 1.0)
    return 64.0 * np.finfo(float).eps * d * d * kappa


def enumerate_extreme_rays(rays) -> np.ndarray:
    """Unit-norm extreme rays of the dual of cone(rays), lexicographically ordered."""
    return dual_extreme_rays(rays)


def pairing_tensor(d: int) -> np.ndarray:
    """sum_j R_j (x) R_j in reduced coordinates."""
    return np.eye(d).ravel()


def find_witness(scenario: OnticScenario) -> WitnessReport:
    d = scenario.reduced_dim
    if d * d > MAX_TENSOR_DIM:
        raise BudgetError(f"tensor dimension {d * d} exceeds budget {MAX_TENSOR_DIM}")
    S = _nonzero_rows(scenario.coords(scenario.states))
    Ef = _nonzero_rows(scenario.coords(scenario.effects))
    floor = numeric_floor(S, Ef)
    S_ext = remove_redundant(S)
    E_ext = remove_redundant(Ef)
    ray_s = dual_extreme_rays(S_ext)
    ray_e = dual_extreme_rays(E_ext)
    final = np.array([np.kron(a, b) for a in ray_s for b in ray_e])
    W = dual_extreme_rays(final)
    vals = W @ pairing_tensor(d)
    i = int(np.argmin(vals))
    v = float(vals[i])
    counts = {
        "reduced_dim": d,
        "states": len(scenario.states),
        "effects": len(scenario.effects),
        "nonzero_states": len(S),
        "nonzero_effects": len(Ef),
        "ray_S": len(ray_s),
        "ray_E": len(ray_e),
        "ray_final": len(final),
        "W": len(W),
    }
    if v < -100.0 * floor:
        w = W[i]
        cert = float(np.min(final @ w))
        return WitnessReport(False, w, v, floor, counts, cert)
    return WitnessReport(True, None, v, floor, counts)


def verify_witness(scenario: OnticScenario, w: np.ndarray) -> tuple[float, float]:
    """Recompute (min pairing with Ray_final, pairing with the identity tensor) for w."""
    S = _nonzero_rows(scenario.coords(scenario.states))
    Ef = _nonzero_rows(scenario.coords(scenario.effects))
    ray_s = dual_extreme_rays(S)
    ray_e = dual_extreme_rays(Ef)
    d = scenario.reduced_dim
    Wm = np.asarray(w).reshape(d, d)
    cone_min = float(np.min(ray_s @ Wm @ ray_e.T))
    return cone_min, float(np.asarray(w) @ pairing_tensor(d))


def born_table(scenario: OnticScenario) -> np.ndarray:
    return np.array([[np.trace(r @ e).real for e in scenario.effects] for r in scenario.states])


def verify_statistics_reproduction(scenario: OnticScenario, mu, xi) -> float:
    """max |tr[rho E] - sum_l mu[rho, l] xi[E, l]| over the scenario."""
    mu = np.asarray(mu, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if mu.shape[0] != len(scenario.states) or xi.shape[0] != len(scenario.effects) or mu.shape[1] != xi.shape[1]:
        raise ValueError("model dimensions do not match the scenario")
    return float(np.max(np.abs(born_table(scenario) - mu @ xi.T)))


def deterministic_basis_model(scenario: OnticScenario) -> tuple[np.ndarray, np.ndarray]:
    """Ontic states = measurement-basis kets, each preparation and effect deterministic.

    Only valid for scenarios whose states and effects are all basis projectors,
    which is the always-on case.
    """
    labels = list(scenario.effect_names)
    mu = np.zeros((len(scenario.states), len(labels)))
    for i, name in enumerate(scenario.state_names):
        mu[i, labels.index(name)] = 1.0
    xi = np.eye(len(labels))
    return mu, xi


# Plain-text exchange format: a header line "dim n_states n_effects n_basis",
# then every matrix as `dim` lines of real/imag pairs in row-major order,
# states first, then effects, then the reduced basis.


def _write_matrix(fh, M: np.ndarray) -> None:
    for row in M:
        fh.write(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row) + "\n")


def export_scenario(scenario: OnticScenario, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{scenario.dim} {len(scenario.states)} {len(scenario.effects)} {scenario.reduced_dim}\n")
        for M in (*scenario.states, *scenario.effects, *scenario.reduced_basis):
            _write_matrix(fh, M)


def import_scenario(path) -> OnticScenario:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    dim, ns, ne, nb = (int(x) for x in lines[0].split())
    mats = []
    body = lines[1:]
    if len(body) != dim * (ns + ne + nb):
        raise ValueError("matrix count does not match header")
    for k in range(ns + ne + nb):
        rows = []
        for ln in body[k * dim : (k + 1) * dim]:
            vals = [float(x) for x in ln.split()]
            if len(vals) != 2 * dim:
                raise ValueError("row has the wrong number of entries")
            rows.append([complex(vals[2 * j], vals[2 * j + 1]) for j in range(dim)])
        mats.append(np.array(rows))
    states, effects, basis = mats[:ns], mats[ns : ns + ne], mats[ns + ne :]
    scen = OnticScenario(tuple(states), tuple(effects), tuple(basis))
    G = np.array([[hs_vec(a) @ hs_vec(b) for b in basis] for a in basis])
    if nb and np.max(np.abs(G - np.eye(nb))) > BASIS_TOL:
        raise ValueError("reduced basis is not trace-orthonormal")
    return scen


def export_witness(report: WitnessReport, path) -> None:
    """Witness as a d x d real matrix in the same real/imag-pair layout."""
    if report.witness is None:
        raise ValueError("report carries no witness")
    d = math.isqrt(report.witness.size)
    with open(path, "w") as fh:
        fh.write(f"{d} 0 0 1\n")
        _write_matrix(fh, report.witness.reshape(d, d).astype(complex))
