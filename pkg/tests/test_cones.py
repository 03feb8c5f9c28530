import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfclock.cones import ConeError, EnumerationError, dual_extreme_rays, remove_redundant


def brute_force_dual(A, tol=1e-9):
    """Every null vector of d-1 constraints that satisfies all constraints."""
    A = np.asarray(A, dtype=float)
    d = A.shape[1]
    found = []
    for idx in itertools.combinations(range(len(A)), d - 1):
        sub = A[list(idx)]
        if np.linalg.matrix_rank(sub, tol=1e-10) < d - 1:
            continue
        v = np.linalg.svd(sub)[2][-1]
        for w in (v, -v):
            if np.all(A @ w >= -tol) and not any(np.allclose(w, f, atol=1e-8) for f in found):
                found.append(w / np.linalg.norm(w))
    return np.array(found)


def same_ray_set(X, Y):
    return len(X) == len(Y) and all(any(np.allclose(x, y, atol=1e-8) for y in Y) for x in X)


def sweep_2d(A):
    """Angular sweep for a cone narrower than pi: the dual is bounded by the inward normals at its two edges."""
    base = math.atan2(A[0, 1], A[0, 0])
    rel = np.angle(np.exp(1j * (np.arctan2(A[:, 1], A[:, 0]) - base)))
    lo, hi = base + rel.min(), base + rel.max()
    assert hi - lo < math.pi
    return np.array([[math.cos(hi - math.pi / 2), math.sin(hi - math.pi / 2)], [math.cos(lo + math.pi / 2), math.sin(lo + math.pi / 2)]])


def test_orthant_is_self_dual():
    assert same_ray_set(dual_extreme_rays(np.eye(2)), np.eye(2))


def test_planar_example():
    got = dual_extreme_rays([[1.0, 0.0], [1.0, 1.0]])
    want = np.array([[0.0, 1.0], [1.0, -1.0] / np.sqrt(2)])
    assert same_ray_set(got, want)
    assert same_ray_set(got, sweep_2d(np.array([[1.0, 0.0], [1.0, 1.0]])))


@given(st.integers(0, 2**32 - 1))
def test_planar_cones_against_sweep(seed):
    rng = np.random.default_rng(seed)
    base = rng.uniform(0, 2 * math.pi)
    ang = base + rng.uniform(0.05, 2.5, size=rng.integers(2, 6))
    A = np.column_stack([np.cos(ang), np.sin(ang)])
    if np.ptp(ang) < 0.05:
        return
    assert same_ray_set(dual_extreme_rays(A), sweep_2d(A))


@given(st.integers(0, 2**32 - 1), st.integers(3, 4), st.integers(0, 6))
def test_against_brute_force(seed, d, extra):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(d + extra, d))
    A[:, 0] = np.abs(A[:, 0]) + 1.0  # pointed: all generators in a half space
    assert same_ray_set(dual_extreme_rays(A), brute_force_dual(A))


@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_dual_soundness_and_order(seed, d):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(d + 4, d))
    A[:, 0] = np.abs(A[:, 0]) + 0.5
    R = dual_extreme_rays(A)
    assert np.min(A @ R.T) >= -1e-10
    assert np.allclose(np.linalg.norm(R, axis=1), 1.0)
    assert [tuple(r) for r in R] == sorted(tuple(r) for r in R)


@given(st.integers(0, 2**32 - 1))
def test_double_dual_recovers_extreme_generators(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(8, 3))
    A[:, 0] = np.abs(A[:, 0]) + 1.0
    ext = remove_redundant(A)
    back = dual_extreme_rays(dual_extreme_rays(A))
    ext_unit = ext / np.linalg.norm(ext, axis=1)[:, None]
    assert same_ray_set(back, ext_unit)


def test_product_cone_facet_count():
    rng = np.random.default_rng(1)
    S = rng.normal(size=(4, 4))
    G = rng.normal(size=(9, 4))
    G[:, 0] = np.abs(G[:, 0]) + 2
    Ge = remove_redundant(G)
    final = np.array([np.kron(a, b) for a in dual_extreme_rays(S) for b in dual_extreme_rays(Ge)])
    assert len(dual_extreme_rays(final)) == 4 * len(Ge)


def test_redundant_generator_removed():
    A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.0]])
    kept = remove_redundant(A)
    assert len(kept) == 2


def test_errors():
    with pytest.raises(ConeError):
        dual_extreme_rays(np.zeros((0, 2)))
    with pytest.raises(ConeError):
        dual_extreme_rays([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ConeError, match="rank gap 1"):
        dual_extreme_rays([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def test_work_budget():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(40, 6))
    A[:, 0] = np.abs(A[:, 0]) + 0.5
    with pytest.raises(EnumerationError):
        dual_extreme_rays(A, max_work=10)
