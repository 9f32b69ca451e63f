# tests/test_locality_filters.py
import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erf

from common.errors import InvalidInputError
from common.schemas import FilterParams, LocalOperator, SiteGeometry
from services.chain.core.locality_filters import (
    approximate_ground_projector,
    estimate_velocity,
    filtered_operator,
    gaussian_projector,
    interaction_picture_ob,
    locality_profile,
    localization_error,
    localize,
    ordered_gaussian_average,
    pipeline_supports,
    projector_error,
    time_ordered_ob,
    verify_locality,
    window_projector,
)
from services.chain.core.nni_hamiltonian import (
    PAULI_X,
    PAULI_Z,
    admissible_range,
    build_model,
    diagonalize,
    embed,
    interaction_constants,
    lbr_split,
    op_norm,
    spectral_system,
)
from services.chain.core.tensor_core import product_state


def _local(op, site, geometry, label=""):
    return LocalOperator(
        matrix=embed(op, site, geometry.dims).toarray(), support=(site, site), geometry=geometry, label=label
    )


def _hermitian(rng, n, scale):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (g + g.conj().T) / 2


@pytest.mark.parametrize("factor", [0.5, 2.0, 8.0])
def test_gaussian_projector_error_closed_form(tfi_d6, factor):
    _, eig = tfi_d6
    q = factor / eig.gap ** 2
    expected = np.exp(-0.5 * eig.gap ** 2 * q)
    assert projector_error(eig, q) == pytest.approx(expected, rel=1e-10)


def test_gaussian_projector_at_zero_is_identity(tfi_d6):
    _, eig = tfi_d6
    assert np.allclose(gaussian_projector(eig, 0.0).matrix, np.eye(64), atol=1e-12)


def test_filter_with_zero_width_is_identity_map(tfi_d6):
    spec, eig = tfi_d6
    a = _local(PAULI_X, 3, spec.geometry, "X3")
    assert np.allclose(filtered_operator(eig, a, 0.0).matrix, a.matrix, atol=1e-12)
    with pytest.raises(InvalidInputError):
        filtered_operator(eig, a, -1.0)


def test_localize_keeps_local_operator(rng):
    geometry = SiteGeometry.uniform(4, 2)
    a = _local(PAULI_Z, 2, geometry)
    assert localization_error(a, (2, 3)) < 1e-14
    local = localize(a, (2, 3))
    assert local.support == (2, 3)
    assert verify_locality(local, rng)


def test_localize_drops_far_part(rng):
    geometry = SiteGeometry.uniform(4, 2)
    a = _local(PAULI_Z, 1, geometry).matrix + _local(PAULI_X, 4, geometry).matrix
    op = LocalOperator(matrix=a, support=(1, 4), geometry=geometry)
    # X 的归一化偏迹为 0，留下的是 Z_1
    assert np.allclose(localize(op, (1, 2)).matrix, _local(PAULI_Z, 1, geometry).matrix, atol=1e-14)
    assert not verify_locality(LocalOperator(matrix=a, support=(1, 2), geometry=geometry), rng)


def test_locality_profile_of_filtered_operator(tfi_d6):
    spec, eig = tfi_d6
    a = filtered_operator(eig, _local(PAULI_X, 3, spec.geometry, "X3"), 1.0 / eig.gap ** 2)
    profile = locality_profile(a, (3, 3), [0, 1, 3])
    assert [r for r, _ in profile] == [0, 1, 3]
    assert profile[0][1] > 0
    # 半径 3 已盖住整条链
    assert profile[-1][1] < 1e-12


def test_window_projector_guarantee():
    state = product_state([[1, 0], [1, 1], [1, 0]])
    z1 = _local(PAULI_Z, 1, state.geometry, "Z1")
    # Z1 ψ = ψ，窗口 τ=0.5 只保留 |λ| ≤ 0.5 的部分 (空)
    empty = window_projector(z1, state, tau=0.5)
    assert np.allclose(empty.matrix, 0.0)
    full = window_projector(z1, state, tau=1.0)
    assert np.allclose(full.matrix, np.eye(8))
    with pytest.raises(InvalidInputError):
        window_projector(LocalOperator(matrix=1j * z1.matrix, support=(1, 1), geometry=state.geometry), state)


def test_ordered_average_matches_spectral_form(rng):
    geometry = SiteGeometry.uniform(2, 2)
    ops = [
        LocalOperator(matrix=_hermitian(rng, 4, 0.5), support=(1, 2), geometry=geometry, label=name)
        for name in ("M_L", "M_B", "M_R")
    ]
    q, T = 1.0, 6.0
    avg = ordered_gaussian_average(*ops, q=q, T=T, threshold=1e-7, max_refinements=16)
    reference = interaction_picture_ob(*ops, q=q, T=T)
    print(f"🔍 乘积积分残差 {avg.residual:.2e}, 步数 {avg.steps}")
    assert op_norm(avg.operator.matrix - reference) < 1e-6


def test_time_ordered_ob_needs_explicit_q(tfi_d6):
    spec, _ = tfi_d6
    z = _local(PAULI_Z, 1, spec.geometry)
    with pytest.raises(InvalidInputError):
        time_ordered_ob(z, z, z, FilterParams(l=0))
    out = time_ordered_ob(z, z, z, FilterParams(l=0, q=1.0))
    assert out.operator.norm <= 1.0 + 1e-6
    assert out.residual < 1e-6


def test_pipeline_outputs(tfi_d6):
    spec, eig = tfi_d6
    approx = approximate_ground_projector(spec, eig, 3, 0)
    supports = pipeline_supports(6, 3, 0)
    assert approx.O_B.support == supports["O_B"] == (1, 6)
    assert approx.O_L.support == (1, 3) and approx.O_R.support == (4, 6)
    for op in (approx.O_B, approx.O_L, approx.O_R):
        assert op.norm <= 1.0 + 1e-8
    o_l = approx.O_L.matrix
    assert op_norm(o_l @ o_l - o_l) < 1e-10
    for defect, bound in zip(approx.window_defects, approx.window_bounds):
        assert defect <= bound + 1e-12
    assert all(n <= approx.ann_bound + 1e-12 for n in approx.ann_norms)
    assert approx.ob_residual < 1e-6
    assert np.isfinite(approx.error) and approx.error >= 0


def test_velocity_estimate(tfi_d6):
    spec, eig = tfi_d6
    estimate = estimate_velocity(spec, eig, times=np.linspace(0.001, 1.5, 1500), radii=[0, 1])
    print(f"🚀 v̂ = {estimate.velocity:.3f}, 前沿 {estimate.fronts}")
    assert estimate.velocity > 0
    radii = [r for r, _ in estimate.fronts]
    times = [t for _, t in estimate.fronts]
    assert radii == sorted(radii) and times == sorted(times)


def test_two_level_projector_error():
    eig = spectral_system([0.0, 1.0])
    assert projector_error(eig, 2.0) == pytest.approx(np.exp(-1.0), rel=1e-12)


def test_filter_fixes_operators_commuting_with_h(tfi_d6):
    spec, eig = tfi_d6
    rho0 = LocalOperator(matrix=eig.ground_projector, support=(1, 6), geometry=spec.geometry)
    assert op_norm(filtered_operator(eig, rho0, 3.0).matrix - rho0.matrix) < 1e-10
    a = _local(PAULI_X, 3, spec.geometry, "X3")
    for q in (0.1, 1.0, 10.0):
        assert filtered_operator(eig, a, q).norm <= a.norm + 1e-12


def test_localize_is_idempotent_and_contracts(rng):
    geometry = SiteGeometry.uniform(4, 2)
    a = LocalOperator(matrix=_hermitian(rng, 16, 1.0), support=(1, 4), geometry=geometry)
    once = localize(a, (2, 3))
    twice = localize(once, (2, 3))
    assert op_norm(twice.matrix - once.matrix) < 1e-13
    assert once.norm <= a.norm + 1e-12


def test_ann_inequality_on_q_grid(tfi_d6):
    spec, eig = tfi_d6
    J, _ = interaction_constants(spec)
    psi = eig.ground_state.amplitudes
    for l in (0, 1):
        lo, hi = admissible_range(6, l)
        for j in range(lo, hi + 1):
            split = lbr_split(spec, eig, j, l)
            for factor in (0.5, 1.0, 2.0, 4.0, 8.0):
                q = factor / eig.gap ** 2
                bound = 3 * J ** 2 / eig.gap * np.exp(-0.5 * eig.gap ** 2 * q)
                for part in (split.H_L, split.H_B, split.H_R):
                    assert np.linalg.norm(filtered_operator(eig, part, q).matrix @ psi) <= bound + 1e-12


def test_ordered_average_without_generator_is_gaussian_mass():
    geometry = SiteGeometry.uniform(2, 2)
    k = LocalOperator(matrix=np.diag([0.4, -0.2, 0.1, 0.7]), support=(1, 2), geometry=geometry)
    zero = LocalOperator(matrix=np.zeros((4, 4)), support=(1, 2), geometry=geometry)
    q, T = 1.0, 6.0
    avg = ordered_gaussian_average(k, zero, k, q=q, T=T, threshold=1e-8)
    mass = erf(T / np.sqrt(2 * q))
    assert op_norm(avg.operator.matrix - mass * np.eye(4)) < 1e-8


def test_ordered_average_commuting_case():
    geometry = SiteGeometry.uniform(2, 2)
    b = np.array([0.3, -0.7, 1.2, 0.0])

    def diag(v):
        return LocalOperator(matrix=np.diag(v), support=(1, 2), geometry=geometry)

    q, T = 1.0, 6.0
    avg = ordered_gaussian_average(
        diag([0.5, 0.1, -0.4, 0.2]), diag(b), diag([0.0, 0.3, 0.3, -0.1]), q=q, T=T, threshold=1e-8
    )
    # 对易时有序指数退化为 e^{iM_B t}，Õ_B = diag(∫ g(t) cos(bt) dt)
    def weight(t, x):
        return np.exp(-t ** 2 / (2 * q)) / np.sqrt(2 * np.pi * q) * np.cos(x * t)

    expected = [quad(weight, -T, T, args=(x,), epsabs=1e-13)[0] for x in b]
    assert op_norm(avg.operator.matrix - np.diag(expected)) < 1e-6


def test_pipeline_supports_in_the_bulk():
    assert pipeline_supports(12, 6, 1) == {"M_L": (2, 6), "M_B": (2, 11), "M_R": (7, 11), "O_B": (1, 12)}
    assert pipeline_supports(12, 6, 0) == {"M_L": (4, 6), "M_B": (4, 9), "M_R": (7, 9), "O_B": (4, 9)}


def test_pipeline_localizes_left_and_right_parts():
    spec = build_model("tfi", 7, {"h": 2.0, "g": 1.0})
    eig = diagonalize(spec)
    approx = approximate_ground_projector(spec, eig, 4, 0)
    assert approx.O_L.support == (2, 4) and approx.O_R.support == (5, 7)
    assert approx.O_B.support == (2, 7)
    for op in (approx.O_B, approx.O_L, approx.O_R):
        assert op.norm <= 1.0 + 1e-8
    for defect, bound in zip(approx.window_defects, approx.window_bounds):
        assert defect <= bound + 1e-12


def test_default_q_and_time_truncation(tfi_d6):
    spec, eig = tfi_d6
    assert FilterParams(l=2).resolve_q(eig.gap, 1.0) == pytest.approx(4.0 / eig.gap ** 2)
    assert FilterParams(l=0).resolve_q(eig.gap, 1.0) == pytest.approx(1.0 / eig.gap ** 2)
    assert FilterParams(l=4).resolve_time_truncation(0.01, velocity=0.5) == pytest.approx(4.0)
    assert FilterParams(l=4).resolve_time_truncation(0.01) == pytest.approx(0.6)
    assert FilterParams(l=4, velocity=2.0).resolve_time_truncation(0.01, velocity=0.5) == pytest.approx(1.0)

    approx = approximate_ground_projector(spec, eig, 3, 1)
    estimate = estimate_velocity(spec, eig)
    assert approx.velocity == pytest.approx(estimate.velocity)
    assert approx.time_truncation == pytest.approx(max(6 * np.sqrt(approx.q), 1 / (2 * estimate.velocity)))
