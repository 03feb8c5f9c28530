import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from cfclock.ontic import (
    BudgetError,
    build_scenario,
    born_table,
    deterministic_basis_model,
    enumerate_extreme_rays,
    export_scenario,
    export_witness,
    find_witness,
    hs_vec,
    import_scenario,
    scenario_from_operators,
    verify_statistics_reproduction,
    verify_witness,
    _nonzero_rows,
)
from cfclock.synth import um_nt1_canonical

CANON = um_nt1_canonical()
I2 = np.eye(2)
X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.diag([1.0, -1.0])


def polygon(n):
    ops = [(I2 + math.cos(2 * math.pi * k / n) * Z + math.sin(2 * math.pi * k / n) * X) / 2 for k in range(n)]
    return scenario_from_operators(ops, ops + [I2])


def brute_dual(A, tol=1e-9):
    A = np.asarray(A)
    d = A.shape[1]
    if d == 1:
        return np.array([[1.0]])
    out = []
    for idx in itertools.combinations(range(len(A)), d - 1):
        sub = A[list(idx)]
        if np.linalg.matrix_rank(sub, tol=1e-10) < d - 1:
            continue
        v = np.linalg.svd(sub)[2][-1]
        for w in (v, -v):
            if np.all(A @ w >= -tol) and not any(np.allclose(w, o, atol=1e-8) for o in out):
                out.append(w)
    return np.array(out)


def lp_model_exists(scen):
    """Independent route: is the pairing tensor a nonnegative combination of a (x) b?"""
    S = _nonzero_rows(scen.coords(scen.states))
    Ef = _nonzero_rows(scen.coords(scen.effects))
    final = np.array([np.kron(a, b) for a in brute_dual(S) for b in brute_dual(Ef)])
    d = scen.reduced_dim
    res = linprog(np.zeros(len(final)), A_eq=final.T, b_eq=np.eye(d).ravel(), bounds=(0, None), method="highs")
    return res.status == 0


def test_scenario_sizes():
    on = build_scenario(CANON, "on-only")
    cf = build_scenario(CANON, "counterfactual")
    assert (len(on.states), len(on.effects)) == (3, 4)
    assert (len(cf.states), len(cf.effects)) == (7, 8)


@pytest.mark.parametrize("mode", ["on-only", "counterfactual"])
def test_reduced_basis_orthonormal_and_idempotent(mode):
    scen = build_scenario(CANON, mode)
    B = np.array([hs_vec(R) for R in scen.reduced_basis])
    assert np.allclose(B @ B.T, np.eye(len(B)), atol=1e-10)
    for M in scen.states + scen.effects:
        P = scen.project(M)
        assert np.allclose(scen.project(P), P, atol=1e-12)


def test_mode_validation():
    with pytest.raises(ValueError):
        build_scenario(CANON, "sometimes")
    assert build_scenario(CANON, "OnOnly").reduced_dim == 3


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        scenario_from_operators([np.array([[0, 1], [0, 0]])], [I2])


def test_on_only_admits_model():
    scen = build_scenario(CANON, "on-only")
    rep = find_witness(scen)
    assert rep.model_exists and rep.witness is None
    assert lp_model_exists(scen)


def test_deterministic_model_reproduces_statistics():
    scen = build_scenario(CANON, "on-only")
    mu, xi = deterministic_basis_model(scen)
    assert verify_statistics_reproduction(scen, mu, xi) <= 1e-12


def test_flipped_response_is_detected():
    scen = build_scenario(CANON, "on-only")
    mu, xi = deterministic_basis_model(scen)
    xi = xi.copy()
    xi[0, 0] = 0.0
    assert verify_statistics_reproduction(scen, mu, xi) >= 1.0 - 1e-12


def test_mixture_of_models_is_a_model():
    scen = build_scenario(CANON, "on-only")
    mu1, xi1 = deterministic_basis_model(scen)
    mu2, xi2 = np.eye(len(scen.states)), born_table(scen).T
    p = 0.3
    mu = np.hstack([p * mu1, (1 - p) * mu2])
    xi = np.hstack([xi1, xi2])
    assert verify_statistics_reproduction(scen, mu, xi) <= 1e-12


def test_model_dimension_mismatch():
    scen = build_scenario(CANON, "on-only")
    with pytest.raises(ValueError):
        verify_statistics_reproduction(scen, np.eye(2), np.eye(4))


def test_counterfactual_scenario_admits_explicit_model():
    # The seven states are linearly independent in the reduced space, so
    # lambda = "which preparation" with Born-rule responses is noncontextual.
    scen = build_scenario(CANON, "counterfactual")
    coords = scen.coords(scen.states)
    assert scen.reduced_dim == 7 and np.linalg.matrix_rank(coords, tol=1e-10) == 7
    xi = born_table(scen).T
    assert xi.min() >= -1e-12 and xi.max() <= 1 + 1e-12
    assert verify_statistics_reproduction(scen, np.eye(7), xi) <= 1e-12
    rep = find_witness(scen)
    assert rep.model_exists
    assert lp_model_exists(scen)
    assert rep.counts["W"] == 56


def test_unit_effect_only():
    scen = scenario_from_operators([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])], [I2])
    assert find_witness(scen).model_exists


@pytest.mark.parametrize("n, exists", [(3, True), (4, True), (5, False), (6, False)])
def test_polygon_controls(n, exists):
    scen = polygon(n)
    rep = find_witness(scen)
    assert rep.model_exists is exists
    assert lp_model_exists(scen) is exists
    if not exists:
        assert rep.violation < -100 * rep.numeric_floor
        cone_min, pairing = verify_witness(scen, rep.witness)
        assert cone_min >= -1e-10
        assert pairing == pytest.approx(rep.violation, abs=1e-12)


@settings(max_examples=8)
@given(st.integers(0, 2**32 - 1))
def test_convex_closure(seed):
    rng = np.random.default_rng(seed)
    for n in (4, 6):
        base = polygon(n)
        w = rng.dirichlet(np.ones(n))
        mix_state = sum(wi * s for wi, s in zip(w, base.states))
        v = rng.dirichlet(np.ones(n))
        mix_effect = sum(vi * e for vi, e in zip(v, base.effects[:n]))
        grown = scenario_from_operators(list(base.states) + [mix_state], list(base.effects) + [mix_effect])
        assert find_witness(grown).model_exists is find_witness(base).model_exists


def test_dual_soundness_on_projected_effects():
    scen = build_scenario(CANON, "on-only")
    E = _nonzero_rows(scen.coords(scen.effects))
    R = enumerate_extreme_rays(E)
    assert np.min(E @ R.T) >= -1e-10
    assert len(R) == 3  # regression: the projected always-on effects form a simplicial cone


def test_budget():
    ops = [np.diag(np.eye(17)[i]) for i in range(17)]
    with pytest.raises(BudgetError):
        find_witness(scenario_from_operators(ops, ops))


def test_exchange_round_trip(tmp_path):
    scen = build_scenario(CANON, "counterfactual")
    path = tmp_path / "scenario.txt"
    export_scenario(scen, path)
    back = import_scenario(path)
    assert len(back.states) == 7 and len(back.effects) == 8
    for a, b in zip(scen.states + scen.effects + scen.reduced_basis, back.states + back.effects + back.reduced_basis):
        assert np.array_equal(a, b)


def test_import_rejects_bad_basis(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 0 0 1\n2 0\n")
    with pytest.raises(ValueError):
        import_scenario(path)


def test_witness_export(tmp_path):
    rep = find_witness(polygon(6))
    path = tmp_path / "w.txt"
    export_witness(rep, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "3 0 0 1" and len(lines) == 4
