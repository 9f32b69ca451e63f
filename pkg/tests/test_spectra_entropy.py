# tests/test_spectra_entropy.py
import numpy as np
import pytest

from common.errors import BoundUndefinedError, InvalidInputError
from common.schemas import ProbabilitySequence, SchmidtSpectrum
from services.chain.core.spectra_entropy import (
    example_state,
    example_state_renyi,
    finiteness_check,
    gibbs_entropy,
    gibbs_entropy_bound,
    gibbs_state,
    majorizes,
    rank_lower_bound,
    renyi_entropy,
    renyi_lower_bound,
    renyi_upper_bound,
    tail_weights,
    von_neumann_entropy,
)
from services.chain.core.tensor_core import schmidt_spectrum, truncation_error


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0, 2.0, 7.0])
def test_uniform_distribution_is_log_n(alpha):
    p = ProbabilitySequence(values=np.full(8, 1 / 8))
    assert renyi_entropy(p, alpha).value == pytest.approx(3.0, abs=1e-12)


def test_pure_and_invalid_inputs():
    assert von_neumann_entropy([1.0, 0.0]).value == 0.0
    with pytest.raises(InvalidInputError):
        renyi_entropy([0.5, 0.5], 0.0)
    with pytest.raises(InvalidInputError):
        ProbabilitySequence(values=[0.2, 0.8])


def test_majorization():
    peaked = ProbabilitySequence(values=[1.0, 0.0])
    flat = ProbabilitySequence(values=[0.5, 0.5])
    assert majorizes(peaked, flat)
    assert not majorizes(flat, peaked)
    # 长度不同时补零比较
    assert majorizes(flat, ProbabilitySequence(values=[0.25] * 4))


def test_renyi_bounds_on_uniform_spectrum():
    p = ProbabilitySequence(values=np.full(4, 0.25))
    eps2 = tail_weights(p)
    assert renyi_lower_bound(eps2[2], 2, 0.5) == pytest.approx(1.0)
    assert renyi_upper_bound(eps2[2], 2, 2.0) == pytest.approx(3.0)
    # r = 支撑大小时上界是紧的
    assert renyi_upper_bound(eps2[4], 4, 2.0) == pytest.approx(renyi_entropy(p, 2.0).value)


def test_renyi_bound_domains():
    with pytest.raises(InvalidInputError):
        renyi_lower_bound(0.1, 3, 1.5)
    with pytest.raises(InvalidInputError):
        renyi_lower_bound(0.1, 1, 0.5)
    with pytest.raises(BoundUndefinedError):
        renyi_lower_bound(0.0, 3, 0.5)
    with pytest.raises(InvalidInputError):
        renyi_upper_bound(1.0, 3, 2.0)


def test_bounds_are_vectorized():
    r = np.arange(2, 6)
    out = renyi_lower_bound(np.full(4, 0.2), r, 0.5)
    assert out.shape == (4,)
    assert np.all(np.diff(out) > 0)


def test_rank_lower_bound_and_finiteness():
    assert rank_lower_bound(3.0, 1.0) == pytest.approx(4.0)
    spectrum = SchmidtSpectrum(cut=1, values=[1.0])
    assert finiteness_check(spectrum, s=0.6)
    assert not finiteness_check(spectrum, s=0.4)
    assert finiteness_check(spectrum, s=1.1, alpha=0.5)


def test_fitted_power_law_rate():
    k = np.arange(1, 200)
    sigma = k ** -1.5
    spectrum = SchmidtSpectrum(cut=1, values=sigma / np.linalg.norm(sigma))
    # ŝ ≈ 1.5 > 1/2
    assert finiteness_check(spectrum)


def test_gibbs_linear_spectrum():
    levels = np.arange(64, dtype=np.float64)
    beta, bound = gibbs_entropy_bound(levels, 1.0)
    print(f"🌡️  β = {beta!r}, 熵界 = {bound!r}")
    assert beta == pytest.approx(np.log(2.0), abs=1e-6)
    assert bound == pytest.approx(gibbs_entropy(gibbs_state(levels, beta)), abs=1e-9)


def test_gibbs_energy_out_of_range():
    levels = np.arange(4, dtype=np.float64)
    with pytest.raises(InvalidInputError):
        gibbs_entropy_bound(levels, 0.0)
    with pytest.raises(InvalidInputError):
        gibbs_entropy_bound(levels, 1.5)


@pytest.mark.parametrize("d", [2, 3])
def test_example_state_closed_forms(d):
    p = 1.0 / d
    state = example_state(d, p)
    assert state.is_normalized
    assert truncation_error(schmidt_spectrum(state, d), 1) == pytest.approx(np.sqrt(p), abs=1e-12)
    for j in range(1, d + 1):
        spectrum = schmidt_spectrum(state, j)
        for alpha in (0.5, 1.0):
            assert renyi_entropy(spectrum, alpha).value == pytest.approx(example_state_renyi(p, j, alpha), abs=1e-9)


def test_renyi_is_non_increasing_in_alpha(rng):
    alphas = [0.3, 0.5, 0.9, 1.0, 1.5, 2.0, 5.0]
    for _ in range(20):
        p = rng.dirichlet(np.ones(int(rng.integers(2, 64))))
        values = [renyi_entropy(p, a).value for a in alphas]
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_renyi_is_continuous_at_one(rng):
    p = rng.dirichlet(np.ones(16))
    at_one = renyi_entropy(p, 1.0).value
    for alpha in (1 - 1e-6, 1 + 1e-6):
        assert abs(renyi_entropy(p, alpha).value - at_one) <= 1e-4
