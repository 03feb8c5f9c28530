"""Construction and validation of the measurement unitary U_m.

Tables are built in the "kets are row vectors" layout (row X holds the image
of |X>) and transposed into column convention on output.  Column k of the
structured block corresponds to outcome A_k (k = 0..N_T, with A_0 = E) and the
last structured column to the free gamma entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .protocol import ClockSpec
from .quantum import E, UnitaryMatrix, ancilla, measurement_basis, tick, unitarity_residual

PATTERN_TOL = 1e-10
SPAN_TOL = 1e-8

_S3 = math.sqrt(1.0 / 3.0)
# Rows E, tau0, tau1, A; columns in the same order.
CANONICAL_TABLE = np.array(
    [
        [_S3, _S3, _S3, 0.0],
        [0.0, -_S3, _S3, -_S3],
        [-_S3, 0.0, _S3, _S3],
        [_S3, -_S3, 0.0, _S3],
    ]
)


@dataclass(frozen=True)
class SynthRequest:
    n_ticks: int
    tilde_A: tuple
    tilde_gamma: tuple
    r: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "tilde_A", tuple(float(a) for a in self.tilde_A))
        object.__setattr__(self, "tilde_gamma", tuple(float(g) for g in self.tilde_gamma))
        if self.n_ticks < 1:
            raise ValueError("n_ticks must be positive")
        if len(self.tilde_A) != self.n_ticks + 1:
            raise ValueError(f"tilde_A needs {self.n_ticks + 1} entries")
        if len(self.tilde_gamma) != self.n_ticks + 2:
            raise ValueError(f"tilde_gamma needs {self.n_ticks + 2} entries")
        if self.r == 0 or not math.isfinite(self.r):
            raise ValueError("r must be finite and nonzero")
        if not any(self.tilde_A):
            raise ValueError("all-zero tilde_A gives no counterfactual outcome")

    @property
    def theta(self) -> float:
        """Mixing angle with c/s = r and s > 0."""
        return math.atan2(1.0, self.r)


@dataclass(frozen=True)
class StructureReport:
    pattern_ok: bool
    gamma: float | None
    unitarity_residual: float
    residuals: dict = field(default_factory=dict)


def exchange_matrix(n_ticks: int, m: int) -> np.ndarray:
    """U_ex on the measurement basis: tau_{k-1} <-> A_k for k = 1..N_T."""
    b = measurement_basis(n_ticks, m)
    perm = list(range(len(b)))
    for k in range(1, n_ticks + 1):
        i, j = b.index_of(tick(k - 1)), b.index_of(ancilla(k))
        perm[i], perm[j] = j, i
    return np.eye(len(b))[:, perm]


def _spec_from_table(table: np.ndarray, n_ticks: int, m: int, theta: float) -> ClockSpec:
    M = table.T
    um = exchange_matrix(n_ticks, m) @ M
    return ClockSpec(n_ticks, m, theta, UnitaryMatrix(um, measurement_basis(n_ticks, m)))


def um_nt1_canonical() -> ClockSpec:
    """The one-tick clock with P_cf = 1/6 per outcome (c = s = 1/sqrt 2)."""
    return _spec_from_table(CANONICAL_TABLE, 1, 1, math.pi / 4)


def canonical_um_prime() -> UnitaryMatrix:
    """The bare table U_m' in column convention, without the exchange."""
    return UnitaryMatrix(CANONICAL_TABLE.T, measurement_basis(1, 1))


def structured_block(tilde_A, tilde_gamma, r: float) -> np.ndarray:
    """Rows E, tau_0..tau_NT restricted to the N_T+2 structured columns."""
    a = np.asarray(tilde_A, dtype=complex)
    g = np.asarray(tilde_gamma, dtype=complex)
    n = len(a)
    blk = np.zeros((n + 1, n + 1), dtype=complex)
    blk[0, :n] = a
    for l in range(n):
        row = -r * a.copy()
        row[l] = 0.0
        blk[l + 1, :n] = row
    blk[:, n] = g
    return blk


def dimensional_lift(vectors, dim: int | None = None) -> np.ndarray:
    """Vectors x_j such that the family {e_j (+) x_j} is pairwise orthogonal.

    With G the Gram matrix of the e_j and c* its largest eigenvalue, X is the
    Hermitian square root of c* 1 - G and x_j is its j-th column.  The lifted
    Gram matrix is then c* times the identity.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if dim is not None and V.shape[1] != dim:
        raise ValueError(f"vectors have length {V.shape[1]}, expected {dim}")
    G = V.conj() @ V.T
    w, Q = np.linalg.eigh(G)
    cstar = w[-1]
    lam = cstar - w
    scale = max(1.0, abs(cstar))
    if np.any(lam < -1e-10 * scale):
        raise ArithmeticError("lifting matrix is not positive semidefinite")
    lam = np.clip(lam, 0.0, None)
    X = (Q * np.sqrt(lam)) @ Q.conj().T
    return X.T.copy()  # row j holds x_j


def _complete_rows(F: np.ndarray) -> np.ndarray:
    """Extend orthonormal rows F to a unitary by Gram-Schmidt over canonical seeds."""
    k, n = F.shape
    rows = [r for r in F]
    for idx in range(n):
        if len(rows) == n:
            break
        v = np.zeros(n, dtype=complex)
        v[idx] = 1.0
        for _ in range(2):  # modified Gram-Schmidt, two passes
            for q in rows:
                v = v - np.vdot(q, v) * q
        nrm = np.linalg.norm(v)
        if nrm < SPAN_TOL:
            continue
        rows.append(v / nrm)
    if len(rows) != n:
        raise ArithmeticError("Gram-Schmidt completion ran out of seeds")
    return np.array(rows)


def synth_table(req: SynthRequest) -> tuple[np.ndarray, float]:
    """The full table (row layout) and gamma for a synthesis request."""
    e = structured_block(req.tilde_A, req.tilde_gamma, req.r)
    k = e.shape[0]
    x = dimensional_lift(e)
    norms = np.sum(np.abs(e) ** 2, axis=1) + np.sum(np.abs(x) ** 2, axis=1)
    jstar = int(np.argmax(norms))  # argmax returns the smallest maximizing index
    D = float(norms[jstar])
    if D <= 0:
        raise ArithmeticError("degenerate structured block")
    gamma = 1.0 / math.sqrt(D)
    cvals = np.sqrt(np.clip(1.0 - gamma**2 * norms, 0.0, None))
    cvals[jstar] = 0.0
    n = 3 * k
    F = np.zeros((k, n), dtype=complex)
    F[:, :k] = gamma * e
    F[:, k : 2 * k] = gamma * x
    F[np.arange(k), 2 * k + np.arange(k)] = cvals
    table = _complete_rows(F)
    return table, gamma


def synth_um_general(req: SynthRequest) -> tuple[ClockSpec, float]:
    table, gamma = synth_table(req)
    m = 2 * (req.n_ticks + 2)
    return _spec_from_table(table, req.n_ticks, m, req.theta), gamma


def random_request(n_ticks: int, seed: int, r: float | None = None) -> SynthRequest:
    """Reproducible random synthesis request; r is drawn from [0.5, 2] unless given."""
    rng = np.random.default_rng(seed)
    tilde_A = rng.normal(size=n_ticks + 1)
    tilde_gamma = rng.normal(size=n_ticks + 2)
    if r is None:
        r = float(rng.uniform(0.5, 2.0))
    return SynthRequest(n_ticks, tuple(tilde_A), tuple(tilde_gamma), r)


def validate_um_structure(
    U,
    n_ticks: int,
    m: int,
    r: float,
    *,
    convention: str = "ancilla",
    tilde_A=None,
) -> StructureReport:
    """Check the fixed zero / repetition pattern and unitarity of U (column convention)."""
    M = U.matrix if isinstance(U, UnitaryMatrix) else np.asarray(U, dtype=complex)
    b = measurement_basis(n_ticks, m)
    if M.shape != (len(b), len(b)):
        raise ValueError(f"expected a {len(b)}x{len(b)} matrix for n_ticks={n_ticks}, m={m}")
    if convention == "ancilla":
        outs = [E] + [ancilla(k) for k in range(1, n_ticks + 1)]
    else:
        outs = [E] + [tick(k) for k in range(n_ticks)]
    el = lambda row, col: M[b.index_of(row), b.index_of(col)]
    a0 = np.array([el(o, E) for o in outs])
    zeros = max(abs(el(o, tick(k))) for k, o in enumerate(outs))
    reps = max(
        (abs(el(o, tick(l)) + r * a0[k]) for k, o in enumerate(outs) for l in range(n_ticks + 1) if l != k),
        default=0.0,
    )
    ures = unitarity_residual(M)
    res = {"zeros": float(zeros), "repetitions": float(reps), "unitarity": ures}
    gamma = None
    if tilde_A is not None:
        ta = np.asarray(tilde_A, dtype=float)
        nz = np.abs(ta) > 0
        ratios = a0[nz] / ta[nz]
        gamma = float(ratios[0].real)
        res["scaling"] = float(np.max(np.abs(ratios - gamma))) if ratios.size else 0.0
        res["scaling_zero_entries"] = float(np.max(np.abs(a0[~nz]), initial=0.0))
    ok = all(v <= PATTERN_TOL for v in res.values())
    return StructureReport(ok, gamma, ures, res)


def no_ancilla_trial(a0: complex, a1: complex, r: float, gammas=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, float, float]:
    """Project one no-ancilla pattern draw onto column orthogonality.

    The first two table columns are A_0 (1, 0, -r) and A_1 (1, -r, 0); their
    inner product is conj(A_0) A_1, and within the pattern the only way to
    remove it is to zero one amplitude.  We zero the smaller one (the nearest
    point of the constraint set) and normalize the surviving column.  Returns
    the projected 3x3 table and the pair (P_cf^(0), P_cf^(1)) with c/s = r.
    """
    a0, a1 = complex(a0), complex(a1)
    if abs(a0) >= abs(a1):
        a1 = 0j
    else:
        a0 = 0j
    nrm = math.sqrt(1.0 + r * r)
    if a0 != 0:
        a0 = a0 / (abs(a0) * nrm)
    if a1 != 0:
        a1 = a1 / (abs(a1) * nrm)
    g0, g1, g2 = gammas
    table = np.array([[a0, a1, g0], [0.0, -a1 * r, g1], [-a0 * r, 0.0, g2]], dtype=complex)
    c = r / nrm
    return table, abs(c * a0) ** 2, abs(c * a1) ** 2


def no_ancilla_samples(trials: int, seed: int = 0):
    """Yield projected tables with their (P0, P1) for ``trials`` random draws."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        a = rng.normal(size=2) + 1j * rng.normal(size=2)
        g = rng.normal(size=3) + 1j * rng.normal(size=3)
        r = float(rng.uniform(0.1, 3.0) * rng.choice([-1.0, 1.0]))
        yield no_ancilla_trial(a[0], a[1], r, tuple(g))


def no_ancilla_search(trials: int, seed: int = 0) -> float:
    """max over trials of min(P_cf^(0), P_cf^(1)) without ancillas."""
    best = 0.0
    for table, p0, p1 in no_ancilla_samples(trials, seed):
        best = max(best, min(p0, p1))
    return best
