# tests/test_nni_hamiltonian.py
import numpy as np
import pytest

from common.errors import InvalidInputError, OutOfRangeError, ResourceLimitError
from services.chain.core.nni_hamiltonian import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    admissible_range,
    assemble,
    assemble_dense,
    build_model,
    diagonalize,
    ground_state,
    interaction_constants,
    lbr_split,
    op_norm,
    oscillator_levels,
    spectral_system,
)


def _site(op, k, d):
    out = np.eye(1)
    for i in range(1, d + 1):
        out = np.kron(out, op if i == k else np.eye(2))
    return out


def _explicit_tfi(d, h, g):
    h_mat = sum(-h * _site(PAULI_X, k, d) for k in range(1, d + 1))
    return h_mat + sum(-g * _site(PAULI_Z, k, d) @ _site(PAULI_Z, k + 1, d) for k in range(1, d))


def test_assembly_counts_site_terms_once():
    spec = build_model("tfi", 4, {"h": 0.7, "g": 1.3})
    assert np.allclose(assemble_dense(spec), _explicit_tfi(4, 0.7, 1.3), atol=1e-14)
    assert assemble(spec).shape == (16, 16)


def test_diagonalize_shifts_ground_energy_to_zero():
    spec = build_model("tfi", 4, {"h": 2.0, "g": 1.0})
    eig = diagonalize(spec)
    exact = np.linalg.eigvalsh(_explicit_tfi(4, 2.0, 1.0))
    assert eig.eigenvalues[0] == 0.0
    assert eig.shift == pytest.approx(exact[0], abs=1e-10)
    assert eig.gap == pytest.approx(exact[1] - exact[0], abs=1e-10)
    assert not eig.degenerate
    assert np.allclose(eig.ground_projector @ eig.ground_projector, eig.ground_projector, atol=1e-12)


def test_decoupled_spins_gap():
    eig = diagonalize(build_model("tfi", 3, {"h": 1.0, "g": 0.0}))
    assert eig.gap == pytest.approx(2.0, abs=1e-12)


def test_degenerate_ground_state_is_flagged():
    eig = diagonalize(build_model("tfi", 4, {"h": 0.0, "g": 1.0}))
    assert eig.degenerate


def test_dense_cap():
    with pytest.raises(ResourceLimitError):
        diagonalize(build_model("tfi", 3), cap=4)


def test_lanczos_matches_dense():
    spec = build_model("tfi", 6, {"h": 2.0, "g": 1.0})
    dense = ground_state(spec)
    sparse = ground_state(spec, threshold=16)
    assert dense.method == "dense" and sparse.method == "lanczos"
    assert sparse.energy == pytest.approx(dense.energy, abs=1e-8)
    overlap = abs(np.vdot(dense.state.amplitudes, sparse.state.amplitudes))
    assert overlap == pytest.approx(1.0, abs=1e-6)


def test_lbr_split_reconstructs(tfi_d6):
    spec, eig = tfi_d6
    split = lbr_split(spec, eig, 3, 0)
    total = split.H_L.matrix + split.H_B.matrix + split.H_R.matrix
    h_shifted = assemble_dense(spec) - eig.shift * np.eye(64)
    assert np.max(np.abs(total - h_shifted)) < 1e-10
    assert sum(split.expectation_shifts) == pytest.approx(eig.shift)
    assert split.H_B.support == (2, 5)
    psi = eig.ground_state.amplitudes
    for part in (split.H_L, split.H_B, split.H_R):
        assert abs(np.vdot(psi, part.matrix @ psi)) < 1e-10


def test_lbr_split_admissibility(tfi_d6):
    spec, eig = tfi_d6
    with pytest.raises(OutOfRangeError):
        lbr_split(spec, eig, 1, 1)
    with pytest.raises(OutOfRangeError):
        lbr_split(spec, eig, 4, 1)


def test_interaction_constant_tfi():
    # ‖Φ‖ = g，‖[Φ, I⊗H]‖ = 2gh
    J, norms = interaction_constants(build_model("tfi", 4, {"h": 2.0, "g": 1.0}))
    assert J == pytest.approx(4.0)
    assert norms.shape == (3, 3)
    assert np.allclose(norms[:, 0], 1.0)


def test_other_models():
    xxz = assemble_dense(build_model("xxz", 4, {"delta_z": 0.5}))
    assert np.allclose(xxz, xxz.conj().T)
    energies, position = oscillator_levels(4)
    np.testing.assert_allclose(energies, [1.0, 3.0, 5.0, 7.0], atol=0.1)
    assert np.allclose(position, position.T)


def test_build_model_rejects_unknowns():
    with pytest.raises(InvalidInputError):
        build_model("heisenberg", 4)
    with pytest.raises(InvalidInputError):
        build_model("tfi", 4, {"delta_z": 1.0})


def test_empty_left_block_is_zero():
    spec = build_model("tfi", 5, {"h": 2.0, "g": 1.0})
    split = lbr_split(spec, diagonalize(spec), 2, 0)
    assert split.H_L.support == (1, 1)
    assert np.max(np.abs(split.H_L.matrix)) == 0.0
    assert split.expectation_shifts[0] == 0.0


def test_commutator_with_left_block_is_bounded(tfi_d6):
    spec, eig = tfi_d6
    h = assemble_dense(spec)
    J, _ = interaction_constants(spec)
    for l in (0, 1):
        lo, hi = admissible_range(6, l)
        for j in range(lo, hi + 1):
            h_l = lbr_split(spec, eig, j, l).H_L.matrix
            assert op_norm(h @ h_l - h_l @ h) <= 3 * J ** 2 + 1e-9


@pytest.mark.parametrize("h", [0.7, -1.3])
def test_uncoupled_tfi_ground_energy(h):
    eig = diagonalize(build_model("tfi", 2, {"h": h, "g": 0.0}))
    assert eig.shift == pytest.approx(-2 * abs(h), abs=1e-12)
    assert eig.gap == pytest.approx(2 * abs(h), abs=1e-12)


def test_xx_chain_matches_explicit_assembly():
    spec = build_model("xxz", 3, {"delta_z": 0.0})
    explicit = sum(
        _site(PAULI_X, k, 3) @ _site(PAULI_X, k + 1, 3) + _site(PAULI_Y, k, 3) @ _site(PAULI_Y, k + 1, 3)
        for k in (1, 2)
    )
    np.testing.assert_allclose(np.linalg.eigvalsh(assemble_dense(spec)), np.linalg.eigvalsh(explicit), atol=1e-12)
    assert np.linalg.eigvalsh(explicit)[0] == pytest.approx(-2 * np.sqrt(2), abs=1e-12)


def test_uncoupled_oscillators_add_levels():
    eig = diagonalize(build_model("oscillator", 2, {"n_levels": 3, "coupling": 0.0}))
    levels, _ = oscillator_levels(3)
    pairs = np.sort(np.add.outer(levels, levels).ravel())
    np.testing.assert_allclose(eig.eigenvalues + eig.shift, pairs, atol=1e-10)


def test_spectral_system_two_level():
    eig = spectral_system([1.0, 0.0])
    assert eig.geometry is None
    assert eig.gap == 1.0 and eig.shift == 0.0
    np.testing.assert_allclose(eig.ground_projector, np.diag([1.0, 0.0]))
    with pytest.raises(InvalidInputError):
        eig.ground_state
    with pytest.raises(InvalidInputError):
        spectral_system([0.0])
