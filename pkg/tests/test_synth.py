import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfclock.protocol import counterfactual_probabilities, verify_counterfactual_outcome
from cfclock.quantum import E, ancilla, measurement_basis, tick, unitarity_residual
from cfclock.synth import (
    CANONICAL_TABLE,
    SynthRequest,
    canonical_um_prime,
    dimensional_lift,
    exchange_matrix,
    no_ancilla_samples,
    no_ancilla_search,
    no_ancilla_trial,
    random_request,
    structured_block,
    synth_table,
    synth_um_general,
    um_nt1_canonical,
    validate_um_structure,
)

S3 = math.sqrt(1 / 3)


def test_canonical_column_at_E():
    spec = um_nt1_canonical()
    b = spec.um.basis
    col = spec.um.matrix[:, b.index_of(E)]
    assert col[b.index_of(E)] == pytest.approx(S3, abs=1e-15)
    assert col[b.index_of(ancilla(1))] == pytest.approx(S3, abs=1e-15)
    assert unitarity_residual(spec.um.matrix) < 1e-15


def test_canonical_probabilities():
    assert np.allclose(counterfactual_probabilities(um_nt1_canonical()), [1 / 6, 1 / 6], atol=1e-15)


def test_canonical_table_is_orthogonal():
    assert np.allclose(CANONICAL_TABLE @ CANONICAL_TABLE.T, np.eye(4), atol=1e-15)


def test_exchange_is_involution():
    X = exchange_matrix(3, 10)
    assert np.array_equal(X @ X, np.eye(len(X)))
    b = measurement_basis(3, 10)
    assert X[b.index_of(ancilla(2)), b.index_of(tick(1))] == 1


def test_one_tick_equal_coefficients():
    spec, gamma = synth_um_general(SynthRequest(1, (1.0, 1.0), (0.0, 0.0, 0.0), 1.0))
    assert gamma > 0
    p = counterfactual_probabilities(spec)
    assert p[0] == pytest.approx(p[1], abs=1e-14)
    assert all(verify_counterfactual_outcome(spec, k)[0] for k in (0, 1))


def test_three_ticks_all_ones():
    req = SynthRequest(3, (1.0,) * 4, (0.7, -1.1, 0.2, 0.9, 0.4), 1.0)
    spec, _ = synth_um_general(req)
    rep = validate_um_structure(spec.um, 3, spec.m, 1.0, tilde_A=req.tilde_A)
    assert rep.pattern_ok
    assert rep.unitarity_residual < 1e-10


@pytest.mark.parametrize("n_ticks", range(1, 5))
def test_single_nonzero_coefficient(n_ticks):
    tilde_A = (1.0,) + (0.0,) * n_ticks
    spec, _ = synth_um_general(SynthRequest(n_ticks, tilde_A, (0.5,) * (n_ticks + 2), 1.3))
    p = counterfactual_probabilities(spec)
    assert p[0] > 0
    assert np.all(p[1:] <= 1e-28)


def test_request_validation():
    with pytest.raises(ValueError):
        SynthRequest(1, (1.0,), (0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        SynthRequest(1, (0.0, 0.0), (0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        SynthRequest(1, (1.0, 1.0), (0.0, 0.0, 0.0), r=0.0)


def test_lift_of_orthogonal_set_is_diagonal():
    V = np.eye(3)[:2] * np.array([[2.0], [1.0]])
    X = dimensional_lift(V)
    W = np.hstack([V, X])
    G = W @ W.conj().T
    assert np.allclose(G, np.diag(np.diag(G)), atol=1e-14)


def test_lift_of_parallel_vectors():
    V = np.array([[1.0, 0.0], [1.0, 0.0]])
    X = dimensional_lift(V)
    W = np.hstack([V, X])
    assert abs(np.vdot(W[0], W[1])) <= 1e-14


@given(st.integers(0, 2**32 - 1))
def test_lift_of_random_vectors(seed):
    V = np.random.default_rng(seed).normal(size=(4, 4))
    W = np.hstack([V, dimensional_lift(V)])
    G = W @ W.conj().T
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) <= 1e-10 * max(1.0, np.max(np.abs(G)))


def test_validate_rejects_identity():
    assert not validate_um_structure(np.eye(4), 1, 1, 1.0).pattern_ok


def test_validate_accepts_bare_table():
    rep = validate_um_structure(canonical_um_prime(), 1, 1, 1.0, convention="primed", tilde_A=(1.0, 1.0))
    assert rep.pattern_ok
    assert rep.gamma == pytest.approx(S3, abs=1e-15)


def test_validate_dimension_check():
    with pytest.raises(ValueError):
        validate_um_structure(np.eye(5), 1, 1, 1.0)


@given(st.integers(1, 5), st.integers(0, 10_000))
def test_synthesized_output_is_valid(n_ticks, seed):
    req = random_request(n_ticks, seed)
    spec, gamma = synth_um_general(req)
    assert spec.m == 2 * (n_ticks + 2)
    assert len(spec.um.basis) == (n_ticks + 2) + 2 * (n_ticks + 2)
    rep = validate_um_structure(spec.um, n_ticks, spec.m, req.r, tilde_A=req.tilde_A)
    assert rep.pattern_ok
    assert rep.residuals["scaling"] <= 1e-12
    assert rep.gamma == pytest.approx(gamma, rel=1e-12)


@given(st.integers(1, 5), st.integers(0, 10_000))
def test_completion_keeps_structured_rows(n_ticks, seed):
    req = random_request(n_ticks, seed)
    table, gamma = synth_table(req)
    e = structured_block(req.tilde_A, req.tilde_gamma, req.r)
    k = e.shape[0]
    assert np.max(np.abs(table[:k, :k] - gamma * e)) <= 1e-12


def test_no_ancilla_seeded_search():
    assert no_ancilla_search(10_000, seed=1) <= 1e-8


def test_no_ancilla_forced_zeros():
    _, p0, p1 = no_ancilla_trial(2.0, 0.5, 1.0)
    assert p0 > 0 and p1 == 0.0
    _, p0, p1 = no_ancilla_trial(0.5, 2.0, 1.0)
    assert p1 > 0 and p0 == 0.0


@given(st.integers(0, 2**32 - 1))
def test_pattern_obstruction(seed):
    for table, _, _ in no_ancilla_samples(20, seed):
        assert abs(table[0, 0] * table[0, 1]) <= 1e-10
        # the two structured columns are orthogonal
        assert abs(np.vdot(table[:, 0], table[:, 1])) <= 1e-10
