# services/chain/core/locality_filters.py
"""
在本征基下精确执行的高斯滤波流水线

能用闭式的时间积分 (高斯加权的 e^{iHt}·e^{−iHt} 共轭) 都在本征基下直接算；
只有含时序指数的 Õ_B 用数值求积 + 乘积积分。
"""
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.special import erf
from scipy.stats import unitary_group

from common.config import settings
from common.errors import InsufficientDataError, InvalidInputError, NumericalError
from common.logger import debug_log
from common.schemas import (
    DenseState,
    EigenSystem,
    FilterParams,
    GroundProjectorApproximation,
    LocalOperator,
    NNISpec,
    OrderedAverage,
    VelocityEstimate,
)
from services.chain.core.nni_hamiltonian import bond_term, embed, interaction_constants, lbr_split, op_norm


def _require_shifted(eig: EigenSystem):
    if abs(eig.eigenvalues[0]) > eig.ground_tolerance:
        raise InvalidInputError(f"谱未平移 (λ0 = {eig.eigenvalues[0]:.3e})")


def _full(eig: EigenSystem, matrix: np.ndarray, label: str) -> LocalOperator:
    return LocalOperator(matrix=matrix, support=(1, eig.geometry.d), geometry=eig.geometry, label=label)


def _gaussian_matrix(eig: EigenSystem, q: float) -> np.ndarray:
    _require_shifted(eig)
    if q < 0:
        raise InvalidInputError(f"q 必须非负, 实际 {q}")
    v = eig.eigenvectors
    weights = np.exp(-0.5 * q * eig.eigenvalues ** 2)
    return (v * weights) @ v.conj().T


def gaussian_projector(eig: EigenSystem, q: float) -> LocalOperator:
    """ρ^q = Σ_k exp(−λ_k² q/2) P_k"""
    return _full(eig, _gaussian_matrix(eig, q), "rho_q")


def projector_error(eig: EigenSystem, q: float) -> float:
    """‖ρ^q − ρ^0‖，由矩阵直接测量；只有谱的玩具系统也适用"""
    return op_norm(_gaussian_matrix(eig, q) - eig.ground_projector)


def filtered_operator(eig: EigenSystem, A: LocalOperator, q: float) -> LocalOperator:
    """Ã_km = A_km · exp(−q(λ_k − λ_m)²/2) (本征基下)"""
    if q < 0:
        raise InvalidInputError(f"q 必须非负, 实际 {q}")
    v = eig.eigenvectors
    lam = eig.eigenvalues
    kernel = np.exp(-0.5 * q * (lam[:, None] - lam[None, :]) ** 2)
    a_eig = v.conj().T @ A.matrix @ v
    return _full(eig, v @ (a_eig * kernel) @ v.conj().T, f"{A.label}~" if A.label else "")


# --- 局域化 Π ---

def reduce_to_support(A: LocalOperator, support: Tuple[int, int]) -> np.ndarray:
    """对补集做归一化偏迹 (补集上取最大混合参考态)，返回 support 上的小矩阵"""
    g = A.geometry
    a, b = _check_support(g, support)
    left, mid, right = g.interval_dim(1, a - 1), g.interval_dim(a, b), g.interval_dim(b + 1, g.d)
    t = A.matrix.reshape(left, mid, right, left, mid, right)
    return np.einsum("akbalb->kl", t) / (left * right)


def embed_support(x: np.ndarray, support: Tuple[int, int], geometry) -> np.ndarray:
    a, b = support
    left, right = geometry.interval_dim(1, a - 1), geometry.interval_dim(b + 1, geometry.d)
    return np.kron(np.kron(np.eye(left), x), np.eye(right))


def _check_support(geometry, support) -> Tuple[int, int]:
    try:
        a, b = (int(x) for x in support)
    except (TypeError, ValueError):
        raise InvalidInputError(f"支撑必须是连续区间 (a, b): {support!r}")
    if b < a:
        raise InvalidInputError(f"支撑不是连续区间: [{a},{b}]")
    geometry.check_interval(a, b)
    return a, b


def localize(A: LocalOperator, target_support: Tuple[int, int]) -> LocalOperator:
    """Π(A) = (tr_补(A)/dim_补) ⊗ I_补，支撑恰为 target_support"""
    support = _check_support(A.geometry, target_support)
    x = reduce_to_support(A, support)
    return LocalOperator(
        matrix=embed_support(x, support, A.geometry), support=support, geometry=A.geometry, label=A.label
    )


def localization_error(A: LocalOperator, target_support: Tuple[int, int]) -> float:
    return op_norm(A.matrix - localize(A, target_support).matrix)


def locality_profile(A: LocalOperator, center: Tuple[int, int], radii: Iterable[int]) -> List[Tuple[int, float]]:
    """把支撑从 center 向两侧各扩 r 个站点，记录 ‖A − Π(A)‖"""
    d = A.geometry.d
    profile = []
    for r in radii:
        target = (max(1, center[0] - r), min(d, center[1] + r))
        err = localization_error(A, target)
        profile.append((int(r), err))
        debug_log(f"局域化误差 r={r} {target}: {err:.3e}", "DEBUG")
    return profile


def verify_locality(A: LocalOperator, rng: np.random.Generator, tol: float = 1e-10) -> bool:
    """用补集上的随机酉阵共轭，检查 A 不变 (即 A 确实只作用在声明的支撑上)"""
    g = A.geometry
    a, b = A.support
    left, mid, right = g.interval_dim(1, a - 1), g.interval_dim(a, b), g.interval_dim(b + 1, g.d)
    u_left = unitary_group.rvs(left, random_state=rng) if left > 1 else np.eye(1)
    u_right = unitary_group.rvs(right, random_state=rng) if right > 1 else np.eye(1)
    u = np.kron(np.kron(u_left, np.eye(mid)), u_right)
    return op_norm(u @ A.matrix @ u.conj().T - A.matrix) <= tol * max(1.0, A.norm)


# --- 谱窗投影 ---

def default_window(M: LocalOperator, psi0: DenseState) -> float:
    """τ = √(‖Mψ0‖·‖M‖)；M ψ0 = 0 时取一个极小正数"""
    m_psi = float(np.linalg.norm(M.matrix @ psi0.amplitudes))
    tau = np.sqrt(m_psi * M.norm)
    return float(max(tau, 1e-12 * max(1.0, M.norm)))


def window_projector(M: LocalOperator, psi0: DenseState, tau: Optional[float] = None) -> LocalOperator:
    """
    M 在 |λ| ≤ τ 上的谱投影 (在支撑上算，再嵌入)
    每次调用都检查 ‖(O − I)ψ0‖ ≤ ‖Mψ0‖/τ
    """
    if not M.is_self_adjoint(1e-10):
        raise InvalidInputError(f"M 不自伴: ‖M − M†‖ = {M.adjoint_defect:.3e}")
    tau = default_window(M, psi0) if tau is None else tau
    if not tau > 0:
        raise InvalidInputError(f"τ 必须 > 0, 实际 {tau}")

    x = reduce_to_support(M, M.support)
    if op_norm(embed_support(x, M.support, M.geometry) - M.matrix) > 1e-10 * max(1.0, M.norm):
        raise InvalidInputError(f"M 不在声明的支撑 {M.support} 上")
    mu, w = np.linalg.eigh(0.5 * (x + x.conj().T))
    keep = w[:, np.abs(mu) <= tau]
    proj = embed_support(keep @ keep.conj().T, M.support, M.geometry)

    psi = psi0.amplitudes
    defect = float(np.linalg.norm(proj @ psi - psi))
    bound = float(np.linalg.norm(M.matrix @ psi)) / tau
    if defect > bound + 1e-12:
        raise NumericalError(f"谱窗保证失败: ‖(O−I)ψ0‖={defect:.3e} > ‖Mψ0‖/τ={bound:.3e}")
    debug_log(f"谱窗 τ={tau:.4g}: 保留 {keep.shape[1]}/{mu.size}, slack={bound - defect:.3e}", "DEBUG")
    return LocalOperator(matrix=proj, support=M.support, geometry=M.geometry, label=f"O({M.label})")


def positive_contraction(A: LocalOperator) -> LocalOperator:
    """A 的厄米部分在支撑上把本征值截到 [0,1]"""
    x = reduce_to_support(A, A.support)
    mu, w = np.linalg.eigh(0.5 * (x + x.conj().T))
    clipped = (w * np.clip(mu, 0.0, 1.0)) @ w.conj().T
    return LocalOperator(
        matrix=embed_support(clipped, A.support, A.geometry), support=A.support, geometry=A.geometry, label=A.label
    )


# --- 时序指数 Õ_B ---

def _gauss(t: np.ndarray, q: float) -> np.ndarray:
    return np.exp(-t ** 2 / (2.0 * q)) / np.sqrt(2.0 * np.pi * q)


def _truncated_transform(omega: np.ndarray, q: float, T: float) -> np.ndarray:
    """G(ω) = ∫_{−T}^{T} g(t) e^{iωt} dt；高频处值 < 1e-9，直接取 0"""
    omega = np.asarray(omega, dtype=np.float64)
    expo = 0.5 * q * omega ** 2
    safe = expo < 300.0
    w = np.where(safe, omega, 0.0)
    z = np.sqrt(2.0 * q)
    val = 0.5 * np.exp(-0.5 * q * w ** 2) * (erf((T - 1j * q * w) / z) + erf((T + 1j * q * w) / z))
    return np.where(safe, val, 0.0)


def interaction_picture_ob(M_L: LocalOperator, M_B: LocalOperator, M_R: LocalOperator, q: float, T: float) -> np.ndarray:
    """
    同一高斯平均的谱闭式：有序指数等于 e^{i(K+M_B)t} e^{−iKt}，K = M_L + M_R
    用于核对乘积积分
    """
    k = M_L.matrix + M_R.matrix
    alpha, va = np.linalg.eigh(k + M_B.matrix)
    kappa, wk = np.linalg.eigh(k)
    overlap = va.conj().T @ wk
    kernel = _truncated_transform(alpha[:, None] - kappa[None, :], q, T)
    return va @ (overlap * kernel) @ wk.conj().T


def _ordered_sum(kappa, b_k, q, T, nodes, substeps) -> np.ndarray:
    """
    在 K 的本征基下做梯形求积 + 中点有序乘积
    Y_{m+1} = Y_m S，S = e^{iKΔ/2} e^{iBΔ} e^{iKΔ/2}，U(t_m) = Y_m e^{−iK t_m}
    """
    n = kappa.size
    h = T / nodes
    dt = h / substeps
    beta, z = np.linalg.eigh(b_k)
    e_b = (z * np.exp(1j * beta * dt)) @ z.conj().T
    half = np.exp(0.5j * kappa * dt)
    step = half[:, None] * e_b * half[None, :]
    s_node = np.linalg.matrix_power(step, substeps)

    weights = h * _gauss(np.arange(nodes + 1) * h, q)
    weights[-1] *= 0.5
    acc = weights[0] * np.eye(n, dtype=np.complex128)
    for sign, factor in ((1.0, s_node), (-1.0, s_node.conj().T)):
        y = np.eye(n, dtype=np.complex128)
        for m in range(1, nodes + 1):
            y = y @ factor
            acc += weights[m] * (y * np.exp(-1j * sign * kappa * m * h)[None, :])
    return acc


def ordered_gaussian_average(
        M_L: LocalOperator,
        M_B: LocalOperator,
        M_R: LocalOperator,
        q: float,
        T: float,
        quadrature_nodes: int = 32,
        ode_steps: int = 32,
        threshold: float = 1e-6,
        max_refinements: int = 16,
) -> OrderedAverage:
    """
    Õ_B = ∫_{−T}^{T} g(t) Texp[∫_0^t A(τ)dτ] dt，A(t) = e^{iKt} iM_B e^{−iKt}
    每次把 Δt 减半，直到前后两次结果之差 < threshold
    """
    for op in (M_L, M_B, M_R):
        if not op.is_self_adjoint(1e-10):
            raise InvalidInputError(f"{op.label or '算符'} 不自伴")
    if q <= 0 or T <= 0:
        raise InvalidInputError(f"q 和 T 必须为正: q={q}, T={T}")

    k = M_L.matrix + M_R.matrix
    kappa, wk = np.linalg.eigh(0.5 * (k + k.conj().T))
    b_k = wk.conj().T @ M_B.matrix @ wk
    b_k = 0.5 * (b_k + b_k.conj().T)

    # 梯形求积的混叠误差 ~ exp(−q(2π/h − ω_max)²/2)，取到 e^{−40}
    omega_max = op_norm(k + M_B.matrix) + op_norm(k)
    nodes = max(quadrature_nodes, int(np.ceil(T * (omega_max + np.sqrt(80.0 / q)) / (2.0 * np.pi))))
    h = T / nodes
    substeps = max(1, int(np.ceil(ode_steps / nodes)), int(np.ceil(h * omega_max)))

    previous = _ordered_sum(kappa, b_k, q, T, nodes, substeps)
    residual = np.inf
    refinement = 0
    while refinement < max_refinements:
        refinement += 1
        substeps *= 2
        current = _ordered_sum(kappa, b_k, q, T, nodes, substeps)
        residual = op_norm(current - previous)
        debug_log(f"乘积积分细化 #{refinement}: steps={nodes * substeps}, residual={residual:.3e}", "DEBUG")
        previous = current
        if residual < threshold:
            break
    if not residual < threshold:
        raise NumericalError(f"乘积积分残差 {residual:.3e} 在 {max_refinements} 次细化后仍 ≥ {threshold}")

    matrix = wk @ previous @ wk.conj().T
    operator = LocalOperator(
        matrix=matrix, support=(1, M_B.geometry.d), geometry=M_B.geometry, label="O_B~"
    )
    return OrderedAverage(
        operator=operator, residual=float(residual), nodes=nodes, steps=nodes * substeps, refinements=refinement
    )


def time_ordered_ob(M_L: LocalOperator, M_B: LocalOperator, M_R: LocalOperator, params: FilterParams) -> OrderedAverage:
    """按 params 给出的 q、T 与离散化设置求 Õ_B，结果带残差"""
    if params.q is None:
        raise InvalidInputError("time_ordered_ob 需要显式的 q")
    T = params.resolve_time_truncation(params.q)
    return ordered_gaussian_average(
        M_L, M_B, M_R, params.q, T,
        quadrature_nodes=params.quadrature_nodes,
        ode_steps=params.ode_steps,
        threshold=params.residual_threshold,
        max_refinements=params.max_refinements,
    )


# --- Lieb-Robinson 速度估计 ---

def estimate_velocity(
        spec: NNISpec,
        eig: EigenSystem,
        site: Optional[int] = None,
        times: Optional[Sequence[float]] = None,
        radii: Optional[Sequence[int]] = None,
        threshold: float = 1e-3,
) -> VelocityEstimate:
    """
    海森堡演化的中心键项向外扩散的前沿：
    对每个半径 r 找 ‖A(t) − Π_r(A(t))‖/‖A‖ 首次超过 threshold 的时刻，拟合 r 对 t 的斜率
    """
    g = spec.geometry
    site = g.d // 2 if site is None else site
    times = np.linspace(0.05, 3.0, 60) if times is None else np.asarray(times, dtype=np.float64)
    radii = list(range(0, max(1, min(site - 1, g.d - site - 1)) + 1)) if radii is None else list(radii)

    a0 = embed(bond_term(spec, site), site, g.dims).toarray()
    a0 = a0 / op_norm(a0)
    v = eig.eigenvectors
    a_eig = v.conj().T @ a0 @ v
    fronts = []
    for r in radii:
        target = (max(1, site - r), min(g.d, site + 1 + r))
        for t in times:
            phase = np.exp(1j * eig.eigenvalues * t)
            a_t = v @ (phase[:, None] * a_eig * phase.conj()[None, :]) @ v.conj().T
            op = LocalOperator(matrix=a_t, support=(1, g.d), geometry=g)
            if localization_error(op, target) > threshold:
                fronts.append((int(r), float(t)))
                break

    if len(fronts) < 2:
        raise InsufficientDataError(f"只找到 {len(fronts)} 个扩散前沿，无法估计速度")
    rs = np.array([f[0] for f in fronts], dtype=np.float64)
    ts = np.array([f[1] for f in fronts])
    slope, _ = np.polyfit(ts, rs, 1)
    if not slope > 0:
        raise InsufficientDataError(f"前沿拟合斜率非正 ({slope:.3g})")
    debug_log(f"经验 Lieb-Robinson 速度 v̂ = {slope:.4g}", "DEBUG")
    return VelocityEstimate(velocity=float(slope), fronts=tuple(fronts))


# --- 主流水线 ---

def pipeline_supports(d: int, j: int, l: int) -> dict:
    return {
        "M_L": (max(1, j - 2 * l - 2), j),
        "M_B": (max(1, j - 2 * l - 2), min(d, j + 2 * l + 3)),
        "M_R": (j + 1, min(d, j + 2 * l + 3)),
        "O_B": (max(1, j - 3 * l - 2), min(d, j + 3 * l + 3)),
    }


def approximate_ground_projector(
        spec: NNISpec,
        eig: EigenSystem,
        j: int,
        l: int,
        params: Optional[FilterParams] = None,
) -> GroundProjectorApproximation:
    """
    lbr_split → 滤波 → 局域化 (M_L, M_B, M_R) → 谱窗 O_L, O_R → Õ_B → 局域化 + 正化得 O_B
    返回 ‖O_B O_L O_R − ρ^0‖ 以及各步诊断量
    """
    params = params or FilterParams(l=l)
    _require_shifted(eig)
    if eig.degenerate:
        debug_log("基态简并，流水线继续 (仅标记)", "WARNING")

    # 1. 拆分与参数
    split = lbr_split(spec, eig, j, l)
    q = params.resolve_q(eig.gap, settings.filter_c1)
    velocity = params.velocity
    if velocity is None and params.time_truncation is None and l > 0:
        try:
            velocity = estimate_velocity(spec, eig).velocity
        except InsufficientDataError as e:
            debug_log(f"速度估计失败，T 只取 6√q: {e}", "WARNING")
    T = params.resolve_time_truncation(q, velocity)
    J, _ = interaction_constants(spec)
    psi0 = eig.ground_state
    psi = psi0.amplitudes
    supports = pipeline_supports(spec.geometry.d, j, l)

    # 2. 高斯滤波
    h_tilde = [filtered_operator(eig, part, q) for part in (split.H_L, split.H_B, split.H_R)]
    ann_norms = tuple(float(np.linalg.norm(op.matrix @ psi)) for op in h_tilde)
    ann_bound = 3.0 * J ** 2 / eig.gap * np.exp(-0.5 * eig.gap ** 2 * q) if eig.gap > 0 else np.inf

    # 3. 局域化
    m_ops = [localize(op, supports[name]) for op, name in zip(h_tilde, ("M_L", "M_B", "M_R"))]
    loc_errors = tuple(op_norm(a.matrix - m.matrix) for a, m in zip(h_tilde, m_ops))
    m_l, m_b, m_r = m_ops

    # 4. 谱窗投影
    tau_l = params.tau_L or default_window(m_l, psi0)
    tau_r = params.tau_R or default_window(m_r, psi0)
    o_l = window_projector(m_l, psi0, tau_l)
    o_r = window_projector(m_r, psi0, tau_r)
    defects = (
        float(np.linalg.norm(o_l.matrix @ psi - psi)),
        float(np.linalg.norm(o_r.matrix @ psi - psi)),
    )
    bounds = (
        float(np.linalg.norm(m_l.matrix @ psi)) / tau_l,
        float(np.linalg.norm(m_r.matrix @ psi)) / tau_r,
    )

    # 5. 时序指数与 O_B
    avg = time_ordered_ob(m_l, m_b, m_r, params.model_copy(update={"q": q, "time_truncation": T}))
    o_b = localize(avg.operator, supports["O_B"])
    if params.positive_ob:
        o_b = positive_contraction(o_b)
    o_b = o_b.model_copy(update={"label": "O_B"})

    # 6. 误差
    error = op_norm(o_b.matrix @ o_l.matrix @ o_r.matrix - eig.ground_projector)
    debug_log(f"O_B O_L O_R (j={j}, l={l}, q={q:.4g}): 误差 {error:.4e}", "INFO")
    return GroundProjectorApproximation(
        j=j, l=l, q=q,
        time_truncation=T,
        velocity=velocity,
        O_L=o_l.model_copy(update={"label": "O_L"}),
        O_B=o_b,
        O_R=o_r.model_copy(update={"label": "O_R"}),
        error=error,
        tau_L=tau_l, tau_R=tau_r,
        window_defects=defects,
        window_bounds=bounds,
        ob_residual=avg.residual,
        ob_raw_norm=avg.operator.norm,
        ann_norms=ann_norms,
        ann_bound=float(ann_bound),
        localization_errors=loc_errors,
    )
