import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfclock.protocol import evolution_matrix
from cfclock.quantum import (
    E,
    PSI,
    Basis,
    Projector,
    StateVector,
    UnitaryMatrix,
    ancilla,
    apply_unitary,
    basis_projectors,
    clock_basis,
    hidden,
    make_state,
    measure,
    measurement_basis,
    parse_label,
    tick,
)
from cfclock.synth import canonical_um_prime, um_nt1_canonical

BASIS = Basis([E, PSI, tick(0), tick(1), ancilla(1)])


def haar(n, rng):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_single_ket_state():
    psi = make_state([(E, 1.0)], BASIS)
    assert psi.amp(E) == 1
    assert np.count_nonzero(psi.amplitudes) == 1


def test_equal_superposition_is_post_rotation_state():
    psi = make_state([(E, 2.0), (PSI, 2.0)], BASIS)
    assert psi.amp(E) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert psi.amp(PSI) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    spec = um_nt1_canonical()
    rotated = spec.u0.matrix @ make_state([(E, 1.0)], spec.basis).amplitudes
    assert rotated[spec.basis.index_of(E)] == pytest.approx(psi.amp(E), abs=1e-15)
    assert rotated[spec.basis.index_of(PSI)] == pytest.approx(psi.amp(PSI), abs=1e-15)


def test_make_state_rejects_zero_and_duplicates():
    with pytest.raises(ValueError):
        make_state([(E, 0.0)], BASIS)
    with pytest.raises(ValueError):
        make_state([(E, 1.0), (E, 1.0)], BASIS)


def test_identity_leaves_state():
    psi = make_state([(E, 1.0)], BASIS)
    out = apply_unitary(UnitaryMatrix.identity(BASIS), psi)
    assert np.allclose(out.amplitudes, psi.amplitudes)


def test_table_column_at_tau0():
    U = canonical_um_prime()
    psi = make_state([(tick(0), 1.0)], U.basis)
    out = apply_unitary(U, psi)
    s3 = 1 / math.sqrt(3)
    assert np.allclose(out.amplitudes, [0.0, -s3, s3, -s3], atol=1e-15)


def test_non_unitary_rejected():
    with pytest.raises(ValueError):
        UnitaryMatrix(np.diag([1.0, 2.0, 1.0, 1.0, 1.0]), BASIS)


@given(st.integers(0, 2**32 - 1))
def test_norm_preserved_by_haar_unitary(seed):
    rng = np.random.default_rng(seed)
    U = UnitaryMatrix(haar(len(BASIS), rng), BASIS)
    v = rng.normal(size=len(BASIS)) + 1j * rng.normal(size=len(BASIS))
    psi = StateVector(v / np.linalg.norm(v), BASIS)
    assert abs(np.linalg.norm(apply_unitary(U, psi).amplitudes) - 1.0) <= 1e-12


def test_elementary_evolution_examples():
    spec = um_nt1_canonical()
    b = spec.basis
    assert np.allclose(evolution_matrix(spec, 0) @ make_state([(E, 1.0)], b).amplitudes, make_state([(E, 1.0)], b).amplitudes)
    out = evolution_matrix(spec, 1) @ make_state([(PSI, 1.0)], b).amplitudes
    assert out[b.index_of(tick(1))] == 1
    mix = evolution_matrix(spec, 0) @ make_state([(E, 1.0), (PSI, 1.0)], b).amplitudes
    assert np.allclose(mix, make_state([(E, 1.0), (tick(0), 1.0)], b).amplitudes)


@pytest.mark.parametrize("n_ticks", range(1, 7))
def test_orthogonality_law(n_ticks):
    from cfclock.protocol import ClockSpec

    b = measurement_basis(n_ticks, n_ticks)
    spec = ClockSpec(n_ticks, n_ticks, math.pi / 4, UnitaryMatrix.identity(b))
    cb = spec.basis
    for k in range(n_ticks + 1):
        V = evolution_matrix(spec, k)
        for l in range(n_ticks + 1):
            if l == k:
                continue
            assert V[cb.index_of(tick(l)), cb.index_of(E)] == 0
            assert V[cb.index_of(tick(l)), cb.index_of(PSI)] == 0


def test_measure_examples():
    psi = make_state([(E, 1.0)], BASIS)
    d = measure(psi, [Projector([E]), Projector([ancilla(1)])])
    assert d.probs == {"E": 1.0, "A1": 0.0, "rest": 0.0}
    psi = make_state([(E, 1.0), (ancilla(1), 1.0)], BASIS)
    d = measure(psi, [Projector([E])])
    assert d["E"] == pytest.approx(0.5) and d["rest"] == pytest.approx(0.5)


def test_measure_rejects_overlapping_projectors():
    psi = make_state([(E, 1.0)], BASIS)
    with pytest.raises(ValueError):
        measure(psi, [Projector([E]), Projector([E, PSI])])


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_probability_completeness(seed, k):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=len(BASIS)) + 1j * rng.normal(size=len(BASIS))
    psi = StateVector(v / np.linalg.norm(v), BASIS)
    d = measure(psi, basis_projectors(list(BASIS)[:k]))
    assert abs(sum(d.probs.values()) - 1.0) <= 1e-10


@pytest.mark.parametrize("label", [E, PSI, tick(3), ancilla(2), hidden(1, 0)])
def test_label_round_trip(label):
    assert parse_label(str(label)) == label


def test_basis_layouts():
    assert len(measurement_basis(2, 8)) == 1 + 3 + 8
    cb = clock_basis(2, 8)
    assert len(cb) == 2 + 3 + 8 + 9
    assert len(set(cb)) == len(cb)
