# tests/test_arealaw_analysis.py
import numpy as np
import pytest

from common.errors import BoundUndefinedError, DegenerateGroundStateError, InsufficientDataError, InvalidInputError, OutOfRangeError
from common.schemas import LocalOperator, SaturationRow, SiteGeometry
from services.chain.core.arealaw_analysis import (
    binary_relative_entropy,
    boundary_profile,
    dephasing_channel,
    entropy_sweep,
    expectation_E,
    fit_c5,
    fit_truncation_rates,
    mutual_information,
    plateau_rise,
    region_information,
    relative_entropy,
    relent_check,
    relent_lower_bound,
    saturation_point,
    saturation_report,
    sl_recursion_check,
    sl_required_constant,
    smax_check,
    subsystem_gibbs_bound,
    truncation_errors,
)
from services.chain.core.locality_filters import approximate_ground_projector
from services.chain.core.tensor_core import product_state, random_state


def test_bell_pair_information(bell_pair):
    record = region_information(bell_pair, (1, 1), (2, 2))
    assert record.S_A.value == pytest.approx(1.0)
    assert record.S_AB.value == pytest.approx(0.0, abs=1e-12)
    assert record.I == pytest.approx(2.0)
    with pytest.raises(InvalidInputError):
        region_information(bell_pair, (2, 2), (1, 1))


def test_product_state_has_no_information():
    state = product_state([[1, 0], [1, 1], [0, 1], [1, -1], [1, 1j], [1, 0]])
    record = mutual_information(state, 3, 0)
    assert record.region_a == (1, 3) and record.region_b == (4, 6)
    assert record.I == pytest.approx(0.0, abs=1e-12)
    assert expectation_E(state, 3) == pytest.approx(1.0)


def test_mutual_information_window_overflow(rng):
    state = random_state(SiteGeometry.uniform(4, 2), rng)
    with pytest.raises(OutOfRangeError):
        mutual_information(state, 2, 0)
    clipped = mutual_information(state, 2, 0, clip=True)
    assert clipped.region_a == (1, 2) and clipped.region_b == (3, 4)
    assert clipped.I >= 0


def test_expectation_of_bell_pair(bell_pair):
    # Σσ⁶ = 2·(1/√2)⁶
    assert expectation_E(bell_pair, 1) == pytest.approx(0.25)


def test_relent_lower_bound_values_and_domain():
    assert relent_lower_bound(0.0, 0.5) == pytest.approx(1.0)
    assert relent_lower_bound(0.1, 0.5) == pytest.approx(0.8 * np.log2(1.6) + 0.2 * np.log2(0.4))
    for eps, e_b in ((0.1, 0.0), (0.1, 1.0), (0.5, 0.3)):
        with pytest.raises(BoundUndefinedError):
            relent_lower_bound(eps, e_b)


def test_binary_and_quantum_relative_entropy():
    assert binary_relative_entropy(0.5, 0.5) == 0.0
    assert binary_relative_entropy(1.0, 0.5) == pytest.approx(1.0)
    assert binary_relative_entropy(0.5, 0.0) == float("inf")

    pure = np.diag([1.0, 0.0]).astype(complex)
    mixed = np.eye(2, dtype=complex) / 2
    assert relative_entropy(mixed, mixed) == pytest.approx(0.0, abs=1e-12)
    assert relative_entropy(pure, mixed) == pytest.approx(1.0)
    assert relative_entropy(mixed, pure) == float("inf")
    with pytest.raises(InvalidInputError):
        relative_entropy(2 * mixed, mixed)


def test_dephasing_channel_extremes():
    rho = np.eye(4, dtype=complex) / 4
    np.testing.assert_allclose(dephasing_channel(rho, np.eye(4)), [1.0, 0.0])
    np.testing.assert_allclose(dephasing_channel(rho, np.zeros((4, 4))), [0.0, 1.0])
    np.testing.assert_allclose(dephasing_channel(rho, np.diag([1, 1, 0, 0])), [0.5, 0.5])
    with pytest.raises(InvalidInputError):
        dephasing_channel(rho, 2 * np.eye(4))


def test_relent_check_on_pipeline(tfi_d6):
    spec, eig = tfi_d6
    approx = approximate_ground_projector(spec, eig, 3, 0)
    record = relent_check(eig.ground_state, approx, 3, 0)
    print(f"📊 I={record.information.I:.4f}, D={record.dephased_divergence:.4f}, ε={approx.error:.3e}")
    assert record.information.region_a == (1, 3) and record.information.region_b == (4, 6)
    assert record.data_processing.satisfied
    assert 0.0 <= record.expectation.E <= 1.0
    assert 0.0 <= record.outcome_p <= 1.0
    if record.bound is None:
        assert not record.bound_check.applicable and not record.bound_check.satisfied


def test_sl_recursion_constant_is_tight(rng):
    state = random_state(SiteGeometry.uniform(6, 2), rng)
    required = sl_required_constant(state, 2, 0.1, 0.3)
    assert sl_recursion_check(state, 2, 0.1, 0.3, c5=required).slack == pytest.approx(0.0, abs=1e-12)
    assert not sl_recursion_check(state, 2, 0.1, 0.3, c5=required - 0.1).satisfied
    with pytest.raises(OutOfRangeError):
        sl_required_constant(state, 4, 0.1, 0.3)


def test_fit_c5_is_least_squares():
    fit = fit_c5([0.3, -0.2, 1.1], tolerance=0.1)
    assert fit.c5 == pytest.approx(0.4)
    assert np.allclose(fit.residuals, (0.1, 0.6, -0.7))
    assert fit.max_violation == pytest.approx(0.7)
    assert not fit.satisfied
    assert fit_c5([1.0, 1.02, 0.98], tolerance=0.05).satisfied
    with pytest.raises(InsufficientDataError):
        fit_c5([])
    with pytest.raises(InvalidInputError):
        fit_c5([1.0, np.nan])


def test_smax_subadditivity(rng):
    s_max, check = smax_check(random_state(SiteGeometry.uniform(5, 2), rng))
    assert 0 < s_max <= 1.0 + 1e-12
    assert check.satisfied


def test_truncation_rate_cases():
    r = np.arange(1, 33)
    power = fit_truncation_rates({int(k): 0.5 * k ** -2.0 for k in r}, m=0)
    assert power.case_label == "polynomial-in-dimension"
    assert power.exponent == pytest.approx(2.0, rel=0.1)
    assert power.s_hat == pytest.approx(power.exponent * 6)

    prefactor = fit_truncation_rates({int(k): 2.0 * k ** -1.5 for k in r}, m=1)
    assert prefactor.case_label == "exponential-prefactor"
    assert prefactor.s_hat == pytest.approx(1.5, rel=0.1)


def test_truncation_rate_degenerate_and_sparse():
    pure = np.outer([1, 0, 0, 0], [1, 0, 0, 0]).astype(complex)
    errors = truncation_errors(pure, 1, (2, 2))
    assert errors == {1: 0.0}
    assert fit_truncation_rates(errors, 0).degenerate
    with pytest.raises(InsufficientDataError):
        fit_truncation_rates({1: 0.1, 2: 0.05}, 0)


def test_truncation_errors_grid(rng):
    g = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    errors = truncation_errors(rho, 2, (2, 2, 2, 2), max_points=8)
    assert 0 < len(errors) <= 8
    assert all(1 <= r < 16 for r in errors)
    assert all(e >= 0 for e in errors.values())


def test_subsystem_gibbs_bound(tfi_d6):
    spec, eig = tfi_d6
    for j in range(1, 6):
        check = subsystem_gibbs_bound(spec, eig.ground_state, j)
        assert check.satisfied, f"j={j}: S={check.lhs}, 界={check.rhs}"


def test_saturation_point_product_ground_state():
    rows = saturation_point("tfi", 4, {"h": 1.0, "g": 0.0})
    assert [r.j for r in rows] == [1, 2, 3]
    assert all(r.entropy == pytest.approx(0.0, abs=1e-10) for r in rows)
    with pytest.raises(DegenerateGroundStateError):
        saturation_point("tfi", 4, {"h": 0.0, "g": 1.0})


def test_entropy_sweep_saturates_off_criticality():
    gapped, critical = entropy_sweep("tfi", [4, 6, 8], [3.0, 1.0], fixed={"g": 1.0})
    print(f"📈 Δ_sat: h=3 → {gapped.delta_sat:.2e}, h=1 → {critical.delta_sat:.2e}")
    assert not gapped.exempt and gapped.passed
    assert gapped.delta_sat < 0.05
    assert critical.exempt and critical.passed
    assert set(gapped.mid_cut) == {4, 6, 8}
    # 单点熵最多 1 bit
    assert gapped.single_site_max <= 1.0 + 1e-12


def test_relent_bound_applies_with_exact_projector(tfi_d6):
    spec, eig = tfi_d6
    approx = approximate_ground_projector(spec, eig, 3, 0)
    exact = approx.model_copy(update={
        "O_B": LocalOperator(matrix=eig.ground_projector, support=(1, 6), geometry=spec.geometry, label="O_B"),
        "error": 0.0,
    })
    record = relent_check(eig.ground_state, exact, 3, 0)
    assert record.outcome_p == pytest.approx(1.0, abs=1e-10)
    assert record.bound == pytest.approx(np.log2(1.0 / record.expectation.E_B))
    assert record.bound_check.applicable
    assert record.bound_check.satisfied


def _saturation_rows(d, profile, h=2.0):
    return [
        SaturationRow(model="tfi", h=h, d=d, j=j, entropy=profile[min(j, d - j) - 1], single_site_max=0.3)
        for j in range(1, d)
    ]


def test_boundary_profile_takes_max_per_distance():
    rows = _saturation_rows(6, [0.2, 0.5, 0.6])
    rows[0] = rows[0].model_copy(update={"entropy": 0.25})
    assert boundary_profile(rows) == {1: 0.25, 2: 0.5, 3: 0.6}


def test_plateau_rise_on_gapped_profile():
    profile = [0.3, 0.34, 0.345, 0.346, 0.346, 0.346]
    start, rise = plateau_rise(boundary_profile(_saturation_rows(12, profile)), 0.05)
    assert start == 1
    assert rise == pytest.approx(0.046)
    report = saturation_report("tfi", 2.0, _saturation_rows(12, profile) + _saturation_rows(10, profile[:5]), 0.05, {"g": 1.0})
    assert report.passed and report.plateau_rise < 0.05
    assert report.plateau_start == {10: 1, 12: 1}


def test_plateau_rise_flags_slow_growth():
    profile = [0.3, 0.34, 0.38, 0.42, 0.46, 0.5]
    _, rise = plateau_rise(boundary_profile(_saturation_rows(12, profile)), 0.05)
    assert rise == pytest.approx(0.2)
    rows = _saturation_rows(12, profile) + _saturation_rows(10, profile[:5])
    report = saturation_report("tfi", 2.0, rows, 0.05, {"g": 1.0})
    # 中间切口只差 0.04，单看 Δ_sat 会放行
    assert report.delta_sat < 0.05
    assert not report.passed
    with pytest.raises(InsufficientDataError):
        plateau_rise({}, 0.05)
