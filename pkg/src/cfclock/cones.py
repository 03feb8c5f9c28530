"""Polyhedral cone conversion by the double description method.

Given generators r_1..r_n of a cone C, the routines here return the extreme
rays of the dual cone C* = {w : <r_i, w> >= 0 for all i}.  Equivalently, the
facet normals of C (V -> H conversion).
"""

from __future__ import annotations

import numpy as np
from scipy import linalg

ZERO_TOL = 1e-10
PIVOT_TOL = 1e-12
MAX_WORK = 1_000_000_000


class ConeError(ValueError):
    """Raised for empty or rank-deficient cone input."""


class EnumerationError(ArithmeticError):
    """The enumeration exceeded its work budget or returned an inconsistent ray set."""


def _canonical(ray: np.ndarray) -> np.ndarray:
    # Rays are oriented objects; only the scale is normalized.
    ray = ray / np.linalg.norm(ray)
    ray[np.abs(ray) <= PIVOT_TOL] = 0.0
    return ray


def _initial_basis(A: np.ndarray) -> list[int]:
    """Well-conditioned set of linearly independent rows, by pivoted QR."""
    d = A.shape[1]
    _, Rq, piv = linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rq))
    rank = int(np.sum(diag > 1e-9 * max(diag[0], 1.0))) if diag.size else 0
    return sorted(int(i) for i in piv[: min(rank, d)])


def dual_extreme_rays(rays, *, tol: float = ZERO_TOL, max_work: int | None = None) -> np.ndarray:
    """Extreme rays of the dual of cone(rays), unit norm, lexicographic order.

    The input must span its ambient space, so that the dual cone is pointed.
    ``max_work`` (default ``MAX_WORK``) caps the cumulative cost, counted as
    ray pairs examined plus rays scanned by adjacency tests; past it
    :class:`EnumerationError` is raised instead of running on.
    """
    A = np.atleast_2d(np.asarray(rays, dtype=float))
    if A.size == 0 or A.shape[0] == 0:
        raise ConeError("empty ray list")
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms <= PIVOT_TOL):
        raise ConeError("zero ray in input")
    A = A / norms[:, None]
    n, d = A.shape
    basis = _initial_basis(A)
    if len(basis) < d:
        raise ConeError(f"rays span dimension {len(basis)} of ambient {d} (rank gap {d - len(basis)})")

    # The initial cone {w : A_B w >= 0} is simplicial with rays = columns of A_B^{-1}.
    R = np.linalg.inv(A[basis]).T
    R /= np.linalg.norm(R, axis=1)[:, None]
    Z = np.abs(R @ A.T) <= tol  # incidence: ray x constraint
    added = np.zeros(n, dtype=bool)
    added[basis] = True
    order = [i for i in range(n) if not added[i]]
    work = 0
    budget = MAX_WORK if max_work is None else max_work

    for i in order:
        s = R @ A[i]
        s[np.abs(s) <= tol] = 0.0
        pos = np.flatnonzero(s > 0)
        neg = np.flatnonzero(s < 0)
        zer = np.flatnonzero(s == 0)
        added[i] = True
        if neg.size == 0:
            Z[:, i] = s == 0
            continue
        new_rays = []
        new_z = []
        work += pos.size * neg.size
        if pos.size:
            act_idx = np.flatnonzero(added)
            act = Z[:, added]
            zp = act[pos]
            zn = act[neg]
            common = zp.astype(np.int32) @ zn.T.astype(np.int32)
            allz = act.astype(np.int32)
            cand = np.nonzero(common >= d - 2)
            for a, b in zip(*cand):
                work += act.size
                if work > budget:
                    raise EnumerationError(
                        f"work budget {budget} exceeded after {int(added.sum())} of {n} constraints ({len(R)} rays)"
                    )
                p, q = pos[a], neg[b]
                inter = zp[a] & zn[b]
                # combinatorial adjacency: no third ray is tight on the whole intersection
                cover = allz @ inter.astype(np.int32) == inter.sum()
                cover[p] = cover[q] = False
                if cover.any():
                    continue
                r = s[p] * R[q] - s[q] * R[p]
                nr = np.linalg.norm(r)
                if nr <= PIVOT_TOL:
                    continue
                tight = np.append(act_idx[inter], i)
                work += len(tight) * d * d
                r = _refine(A[tight], r / nr)
                new_rays.append(r)
                new_z.append(np.abs(r @ A.T) <= tol)
        keep = np.concatenate([pos, zer])
        R = np.vstack([R[keep]] + ([np.array(new_rays)] if new_rays else []))
        Z = np.vstack([Z[keep]] + ([np.array(new_z)] if new_z else []))
        Z[:, i] = np.abs(R @ A[i]) <= tol

    out = np.array([_canonical(r) for r in R])
    out = _dedupe(out)
    if len(out) < d:
        raise EnumerationError(f"only {len(out)} rays for a pointed cone in dimension {d}")
    idx = np.lexsort(out.T[::-1])
    return out[idx]


def _refine(T: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Replace a combined ray by the null vector of its tight constraints.

    Pairwise combination accumulates rounding over many iterations; the
    tight set determines the ray up to scale whenever it has rank d - 1.
    """
    d = T.shape[1]
    _, sv, Vt = np.linalg.svd(T, full_matrices=T.shape[0] < d)
    if len(sv) < d - 1 or sv[d - 2] <= 1e3 * ZERO_TOL:
        return r
    v = Vt[-1] if len(sv) < d or sv[-1] <= ZERO_TOL else None
    if v is None:
        return r
    return v if v @ r > 0 else -v


def _dedupe(R: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    kept: list[np.ndarray] = []
    for r in R:
        if not any(np.max(np.abs(r - k)) <= tol for k in kept):
            kept.append(r)
    return np.array(kept)


def remove_redundant(rays, *, tol: float = ZERO_TOL) -> np.ndarray:
    """Keep only the extreme generators of cone(rays).

    A generator is extreme iff the facets it lies on have rank d - 1.
    """
    A = np.atleast_2d(np.asarray(rays, dtype=float))
    facets = dual_extreme_rays(A, tol=tol)
    U = A / np.linalg.norm(A, axis=1)[:, None]
    tight = np.abs(U @ facets.T) <= 1e-9
    d = A.shape[1]
    keep = []
    seen: list[np.ndarray] = []
    for i, u in enumerate(U):
        rank = np.linalg.matrix_rank(facets[tight[i]], tol=1e-9) if tight[i].any() else 0
        if rank == d - 1 and not any(np.max(np.abs(u - s)) <= 1e-9 for s in seen):
            keep.append(i)
            seen.append(u)
    return A[keep]
