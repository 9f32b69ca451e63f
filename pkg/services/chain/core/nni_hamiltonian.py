# services/chain/core/nni_hamiltonian.py
"""
最近邻相互作用 (NNI) 链：组装、精确对角化、L/B/R 拆分、相互作用常数

记账约定：键 k 连接站点 k, k+1；单点项 H_j 只计一次，
挂在键 j 上 (H_d 挂在键 d−1 上)。
"""
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from common.config import settings
from common.errors import InvalidInputError, NumericalError, OutOfRangeError, ResourceLimitError
from common.logger import debug_log
from common.schemas import DenseState, EigenSystem, GroundState, LBRSplit, LocalOperator, NNISpec, SiteGeometry

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def op_norm(m: np.ndarray) -> float:
    """算符范数 (最大奇异值)"""
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def embed(op, first_site: int, dims) -> sp.csr_matrix:
    """把作用在 first_site 起若干站点上的算符用单位阵补齐到整条链"""
    dims = tuple(dims)
    size = op.shape[0]
    span, acc = 0, 1
    while acc < size:
        acc *= dims[first_site - 1 + span]
        span += 1
    if acc != size:
        raise InvalidInputError(f"算符维数 {size} 与站点 {first_site} 起的局部维数不匹配")
    left = int(np.prod(dims[:first_site - 1], dtype=np.int64))
    right = int(np.prod(dims[first_site - 1 + span:], dtype=np.int64))
    out = sp.kron(sp.identity(left, dtype=np.complex128, format="csr"), sp.csr_matrix(op), format="csr")
    return sp.kron(out, sp.identity(right, dtype=np.complex128, format="csr"), format="csr")


def bond_term(spec: NNISpec, k: int) -> np.ndarray:
    """键 k 上的两点项：Φ_k + H_k⊗I (+ I⊗H_d 若 k = d−1)"""
    g = spec.geometry
    if not 1 <= k <= g.d - 1:
        raise OutOfRangeError(f"键 {k} 不在 [1,{g.d - 1}]")
    n_left, n_right = g.dims[k - 1], g.dims[k]
    term = spec.couplings[k - 1] + np.kron(spec.site_terms[k - 1], np.eye(n_right))
    if k == g.d - 1:
        term = term + np.kron(np.eye(n_left), spec.site_terms[k])
    return term


def _bond_sum(spec: NNISpec, bonds) -> sp.csr_matrix:
    dim = spec.geometry.dimension
    total = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for k in bonds:
        total = total + embed(bond_term(spec, k), k, spec.geometry.dims)
    return total


def assemble(spec: NNISpec, budget: Optional[int] = None) -> sp.csr_matrix:
    """稀疏组装 H = Σ_k (键项)，每个 H_j 恰好出现一次"""
    dim = spec.geometry.dimension
    budget = settings.dense_memory_budget if budget is None else budget
    if dim > budget:
        raise ResourceLimitError(f"希尔伯特空间维数 {dim} 超过预算 {budget}")
    h = _bond_sum(spec, range(1, spec.geometry.d))
    defect = abs(h - h.conj().T).max() if h.nnz else 0.0
    if defect > 1e-12:
        raise InvalidInputError(f"组装出的 H 不自伴: ‖H − H†‖_max = {defect:.3e}")
    return h


def assemble_dense(spec: NNISpec, budget: Optional[int] = None) -> np.ndarray:
    dim = spec.geometry.dimension
    budget = settings.dense_memory_budget if budget is None else budget
    if dim * dim > budget:
        raise ResourceLimitError(f"稠密 H 需要 {dim * dim} 个元素，超过预算 {budget}")
    return assemble(spec, budget).toarray()


def diagonalize(spec: NNISpec, cap: Optional[int] = None) -> EigenSystem:
    """全谱稠密对角化；本征值平移使 λ0 = 0，平移量记录在 shift"""
    cap = settings.dense_eig_cap if cap is None else cap
    dim = spec.geometry.dimension
    if dim > cap:
        raise ResourceLimitError(f"维数 {dim} 超过稠密求解上限 {cap}，请改用 ground_state()")
    h = assemble_dense(spec)
    try:
        evals, evecs = scipy.linalg.eigh(h)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"稠密对角化不收敛: {e}") from e

    h_norm = float(np.max(np.abs(evals)))
    scale = max(1.0, h_norm)
    residual = np.linalg.norm(h @ evecs - evecs * evals, axis=0)
    if np.max(residual) > 1e-9 * scale:
        raise NumericalError(f"本征残差 {np.max(residual):.3e} 超过 1e-9‖H‖")
    ortho = np.max(np.abs(evecs.conj().T @ evecs - np.eye(dim)))
    if ortho > 1e-10:
        raise NumericalError(f"本征向量正交性误差 {ortho:.3e}")

    shift = float(evals[0])
    shifted = evals - shift
    gap = float(shifted[1]) if dim > 1 else 0.0
    degenerate = gap <= 1e-12 * scale
    degenerate_excited = dim > 2 and abs(shifted[2] - shifted[1]) <= 1e-12 * scale
    if degenerate:
        debug_log(f"基态简并 (ΔE = {gap:.3e})，仅标记", "WARNING")
    debug_log(f"对角化完成: dim={dim}, ΔE={gap:.6g}, shift={shift:.6g}", "DEBUG")
    return EigenSystem(
        geometry=spec.geometry,
        eigenvalues=shifted,
        eigenvectors=evecs,
        gap=gap,
        shift=shift,
        degenerate=degenerate,
        degenerate_excited=degenerate_excited,
        hamiltonian_norm=h_norm,
    )


def spectral_system(eigenvalues: Sequence[float]) -> EigenSystem:
    """只有谱、没有站点结构的系统 (计算基即本征基)，用于闭式核对"""
    values = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    if values.size < 2:
        raise InvalidInputError("至少需要两个能级")
    shifted = values - values[0]
    h_norm = float(np.max(np.abs(values)))
    scale = max(1.0, h_norm)
    return EigenSystem(
        eigenvalues=shifted,
        eigenvectors=np.eye(values.size),
        gap=float(shifted[1]),
        shift=float(values[0]),
        degenerate=bool(shifted[1] <= 1e-12 * scale),
        degenerate_excited=bool(values.size > 2 and abs(shifted[2] - shifted[1]) <= 1e-12 * scale),
        hamiltonian_norm=h_norm,
    )


def ground_state(spec: NNISpec, threshold: Optional[int] = None, seed: int = 0) -> GroundState:
    """
    只要基态：维数不超过 threshold 时走稠密对角化，否则用 Lanczos (eigsh, k=2)
    初始向量固定随机种子，避免落在对称子空间里低估能隙
    """
    threshold = settings.iterative_threshold if threshold is None else threshold
    dim = spec.geometry.dimension
    if dim <= threshold:
        eig = diagonalize(spec)
        return GroundState(
            state=eig.ground_state, energy=eig.shift, gap=eig.gap, degenerate=eig.degenerate, method="dense"
        )

    h = assemble(spec)
    v0 = np.random.default_rng(seed).standard_normal(dim).astype(np.complex128)
    try:
        evals, evecs = eigsh(h, k=2, which="SA", v0=v0, tol=1e-12)
    except ArpackNoConvergence as e:
        raise NumericalError(f"Lanczos 不收敛: {e}") from e
    order = np.argsort(evals)
    evals, evecs = evals[order], evecs[:, order]
    scale = max(1.0, float(abs(evals[0])))
    gap = float(evals[1] - evals[0])
    psi = evecs[:, 0] / np.linalg.norm(evecs[:, 0])
    debug_log(f"Lanczos 基态: dim={dim}, E0={evals[0]:.10g}, ΔE≈{gap:.6g}", "DEBUG")
    return GroundState(
        state=DenseState(geometry=spec.geometry, amplitudes=psi),
        energy=float(evals[0]),
        gap=gap,
        degenerate=gap <= 1e-12 * scale,
        method="lanczos",
    )


def admissible_range(d: int, l: int) -> Tuple[int, int]:
    return 1 + l, d - 2 - l


def lbr_split(spec: NNISpec, eig: EigenSystem, j: int, l: int) -> LBRSplit:
    """
    按键拆分 H − λ0 = H_L + H_B + H_R (各自减去基态期望)
    L: 键 k ≤ j−l−2；B: j−l−1 ≤ k ≤ j+l+1；R: k ≥ j+l+2
    """
    d = spec.geometry.d
    lo, hi = admissible_range(d, l)
    if l < 0 or not lo <= j <= hi:
        raise OutOfRangeError(f"(j={j}, l={l}) 不满足 1+l ≤ j ≤ d−2−l (d={d})")

    groups = {
        "L": (range(1, j - l - 1), (1, max(1, j - l - 1))),
        "B": (range(max(1, j - l - 1), min(d - 1, j + l + 1) + 1), (max(1, j - l - 1), min(d, j + l + 2))),
        "R": (range(j + l + 2, d), (min(d, j + l + 2), d)),
    }
    psi = eig.ground_state.amplitudes
    dim = spec.geometry.dimension
    parts, shifts = {}, []
    for name, (bonds, support) in groups.items():
        m = _bond_sum(spec, bonds).toarray()
        s = float(np.real(np.vdot(psi, m @ psi)))
        shifts.append(s)
        parts[name] = LocalOperator(
            matrix=m - s * np.eye(dim), support=support, geometry=spec.geometry, label=f"H_{name}"
        )

    # 重构检查：各部分之和 = H − λ0，平移之和 = λ0 (未平移)
    total = parts["L"].matrix + parts["B"].matrix + parts["R"].matrix
    h_shifted = assemble_dense(spec) - eig.shift * np.eye(dim)
    defect = float(np.max(np.abs(total - h_shifted)))
    if defect > 1e-10 * max(1.0, eig.hamiltonian_norm) or abs(sum(shifts) - eig.shift) > 1e-10 * max(1.0, abs(eig.shift)):
        raise NumericalError(f"L/B/R 拆分重构失败: defect={defect:.3e}")
    debug_log(f"L/B/R 拆分 j={j}, l={l}: shifts={[round(s, 8) for s in shifts]}", "DEBUG")
    return LBRSplit(j=j, l=l, H_L=parts["L"], H_B=parts["B"], H_R=parts["R"], expectation_shifts=tuple(shifts))


def interaction_constants(spec: NNISpec) -> Tuple[float, np.ndarray]:
    """
    J = max_k max(‖Φ_k‖, ‖[Φ_k, I⊗H_{k+1}]‖, ‖[H_k⊗I, Φ_k]‖)
    返回 (J, 每个键的三个范数，形状 (d−1, 3))
    """
    g = spec.geometry
    norms = np.zeros((g.d - 1, 3))
    for k in range(1, g.d):
        phi = spec.couplings[k - 1]
        n_left, n_right = g.dims[k - 1], g.dims[k]
        h_left = np.kron(spec.site_terms[k - 1], np.eye(n_right))
        h_right = np.kron(np.eye(n_left), spec.site_terms[k])
        norms[k - 1] = (
            op_norm(phi),
            op_norm(phi @ h_right - h_right @ phi),
            op_norm(h_left @ phi - phi @ h_left),
        )
    J = float(norms.max()) if norms.size else 0.0
    return J, norms


# --- 模型构造器 ---

def tfi_chain(d: int, h: float, g: float = 1.0) -> NNISpec:
    """横场 Ising：H = −g Σ Z_k Z_{k+1} − h Σ X_k；|h/g| > 1 有能隙"""
    geometry = SiteGeometry.uniform(d, 2)
    return NNISpec(
        geometry=geometry,
        site_terms=tuple(-h * PAULI_X for _ in range(d)),
        couplings=tuple(-g * np.kron(PAULI_Z, PAULI_Z) for _ in range(d - 1)),
        model="tfi",
        params={"h": float(h), "g": float(g)},
    )


def xxz_chain(d: int, delta_z: float, coupling: float = 1.0) -> NNISpec:
    """XXZ：Φ = J(XX + YY + Δz·ZZ)，无单点项；Δz = 0 即 XX 链"""
    geometry = SiteGeometry.uniform(d, 2)
    phi = coupling * (np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y) + delta_z * np.kron(PAULI_Z, PAULI_Z))
    return NNISpec(
        geometry=geometry,
        site_terms=tuple(np.zeros((2, 2)) for _ in range(d)),
        couplings=tuple(phi for _ in range(d - 1)),
        model="xxz",
        params={"delta_z": float(delta_z), "coupling": float(coupling)},
    )


def oscillator_levels(n_levels: int, grid_points: int = 96, half_width: float = 8.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    在网格上离散化 −d²/dx² + x²，保留最低 n_levels 个能级
    返回 (能级, 截断基下的位置算符)
    """
    if n_levels < 2 or grid_points <= n_levels:
        raise InvalidInputError(f"需要 2 ≤ n_levels < grid_points, 实际 {n_levels}/{grid_points}")
    x = np.linspace(-half_width, half_width, grid_points)
    dx = x[1] - x[0]
    diag = 2.0 / dx ** 2 + x ** 2
    off = -np.ones(grid_points - 1) / dx ** 2
    energies, vecs = scipy.linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, n_levels - 1))
    position = vecs.T @ (x[:, None] * vecs)
    return energies, position


def truncated_oscillator_chain(d: int, n_levels: int, coupling: float) -> NNISpec:
    """截断谐振子链：单点 −Δ + x² 的最低能级，耦合 coupling·x⊗x (有界)"""
    energies, position = oscillator_levels(n_levels)
    xx = coupling * np.kron(position, position)
    debug_log(f"谐振子耦合范数 ‖Φ‖ = {op_norm(xx):.6g}", "DEBUG")
    return NNISpec(
        geometry=SiteGeometry.uniform(d, n_levels),
        site_terms=tuple(np.diag(energies) for _ in range(d)),
        couplings=tuple(xx for _ in range(d - 1)),
        model="oscillator",
        params={"n_levels": float(n_levels), "coupling": float(coupling)},
    )


BUILDERS: Dict[str, Callable[..., NNISpec]] = {
    "tfi": lambda d, h=2.0, g=1.0: tfi_chain(d, h, g),
    "xxz": lambda d, delta_z=1.0, coupling=1.0: xxz_chain(d, delta_z, coupling),
    "oscillator": lambda d, n_levels=3, coupling=0.1: truncated_oscillator_chain(d, int(n_levels), coupling),
}

MODEL_PARAMS: Dict[str, List[str]] = {
    "tfi": ["h", "g"],
    "xxz": ["delta_z", "coupling"],
    "oscillator": ["n_levels", "coupling"],
}


def build_model(name: str, d: int, params: Optional[Dict[str, float]] = None) -> NNISpec:
    if name not in BUILDERS:
        raise InvalidInputError(f"未知模型 {name!r}，可选: {sorted(BUILDERS)}")
    params = dict(params or {})
    unknown = set(params) - set(MODEL_PARAMS[name])
    if unknown:
        raise InvalidInputError(f"模型 {name} 不认识参数 {sorted(unknown)}")
    return BUILDERS[name](d, **params)
