# tests/test_tensor_core.py
import numpy as np
import pytest

from common.errors import InvalidInputError, OutOfRangeError, ResourceLimitError
from common.schemas import DenseState, SiteGeometry
from services.chain.core.tensor_core import (
    all_schmidt_spectra,
    check_dense_budget,
    is_left_orthogonal,
    partial_trace,
    product_state,
    random_state,
    reduced_density_matrix,
    reduced_spectrum,
    schmidt_spectrum,
    truncation_error,
    tt_canonicalize,
    tt_decompose,
    tt_reconstruct,
)


def test_product_state_has_rank_one_everywhere():
    state = product_state([[1, 0], [1, 1], [0, 1], [1, 1j]])
    for spectrum in all_schmidt_spectra(state):
        assert spectrum.rank == 1
        assert spectrum.values[0] == pytest.approx(1.0, abs=1e-14)
        assert truncation_error(spectrum, 1) == 0.0


def test_bell_pair_spectrum(bell_pair):
    spectrum = schmidt_spectrum(bell_pair, 1)
    np.testing.assert_allclose(spectrum.values, [2 ** -0.5, 2 ** -0.5], atol=1e-15)
    assert truncation_error(spectrum, 1) == pytest.approx(2 ** -0.5)
    assert truncation_error(spectrum, 5) == 0.0


def test_cut_out_of_range_and_unnormalized(bell_pair):
    with pytest.raises(OutOfRangeError):
        schmidt_spectrum(bell_pair, 0)
    with pytest.raises(OutOfRangeError):
        schmidt_spectrum(bell_pair, 2)
    loose = DenseState(geometry=SiteGeometry.uniform(2, 2), amplitudes=[2, 0, 0, 0])
    with pytest.raises(InvalidInputError):
        schmidt_spectrum(loose, 1)


def test_tt_decompose_exact_and_truncated(rng):
    state = random_state(SiteGeometry.uniform(6, 2), rng)

    exact = tt_decompose(state, 1e-12)
    assert exact.ranks == (2, 4, 8, 4, 2)
    rebuilt = tt_reconstruct(exact)
    assert np.linalg.norm(rebuilt.amplitudes - state.amplitudes) < 1e-10

    tol = 0.3
    cut = tt_decompose(state, tol)
    err = np.linalg.norm(tt_reconstruct(cut).amplitudes - state.amplitudes)
    print(f"📉 TT 截断误差 {err:.4f} (容差 {tol})")
    assert err <= tol + 1e-12


def test_tt_max_rank_records_discarded_weight(rng):
    state = random_state(SiteGeometry.uniform(5, 2), rng)
    tt = tt_decompose(state, 0.0, max_rank=1)
    assert tt.ranks == (1, 1, 1, 1)
    assert tt.discarded[0] == pytest.approx(truncation_error(schmidt_spectrum(state, 1), 1) ** 2)


def test_canonicalize_keeps_state(rng):
    state = random_state(SiteGeometry(d=4, dims=(2, 3, 2, 3)), rng)
    tt = tt_canonicalize(tt_decompose(state, 0.2))
    assert is_left_orthogonal(tt)
    before = tt_reconstruct(tt_decompose(state, 0.2)).amplitudes
    assert np.allclose(tt_reconstruct(tt).amplitudes, before, atol=1e-12)


def test_reduced_spectrum_matches_schmidt(rng):
    state = random_state(SiteGeometry.uniform(6, 2), rng)
    for j in (1, 2, 3):
        reduced = reduced_spectrum(state, (1, j)).eigenvalues
        np.testing.assert_allclose(reduced, schmidt_spectrum(state, j).values ** 2, atol=1e-12)


def test_partial_trace_agrees_with_pure_state_path(rng):
    state = random_state(SiteGeometry(d=4, dims=(2, 3, 2, 2)), rng)
    rho = np.outer(state.amplitudes, state.amplitudes.conj())
    direct = partial_trace(rho, state.geometry.dims, (2, 3))
    assert np.allclose(direct, reduced_density_matrix(state, (2, 3)), atol=1e-13)
    assert np.trace(direct).real == pytest.approx(1.0)
    with pytest.raises(OutOfRangeError):
        partial_trace(rho, state.geometry.dims, (0, 2))


def test_dense_budget():
    check_dense_budget(4, budget=4)
    with pytest.raises(ResourceLimitError):
        check_dense_budget(5, budget=4)


def test_tt_decompose_rejects_bad_arguments(rng):
    state = random_state(SiteGeometry.uniform(4, 2), rng)
    for tol in (-0.1, float("nan"), float("inf")):
        with pytest.raises(InvalidInputError):
            tt_decompose(state, tol)
    with pytest.raises(InvalidInputError):
        tt_decompose(state, 0.1, max_rank=0)
    loose = DenseState(geometry=state.geometry, amplitudes=2 * state.amplitudes)
    with pytest.raises(InvalidInputError):
        tt_decompose(loose, 0.1)
