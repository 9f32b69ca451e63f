# services/chain/core/tensor_core.py
"""
稠密态与张量列 (TT/MPS) 基本操作

矩阵化约定：切口 j 处，行指标是站点 1..j 的多重指标 (站点 1 变化最慢)，
列指标是站点 j+1..d；与 numpy 的 C 序 reshape 一致。
区间一律 1-based 闭区间 [a, b]。
"""
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from common.config import settings
from common.errors import InvalidInputError, OutOfRangeError, ResourceLimitError
from common.logger import debug_log
from common.schemas import DenseState, ReducedSpectrum, SchmidtSpectrum, SiteGeometry, TTState

# 小于 CLAMP_REL·σ1 的奇异值视为 0，秩计数更稳定
CLAMP_REL = 1e-14


def _clamp(values: np.ndarray) -> np.ndarray:
    if values.size == 0:
        return values
    out = np.array(values, dtype=np.float64)
    out[out < CLAMP_REL * out[0]] = 0.0
    return out


def _singular_values(matrix: np.ndarray) -> np.ndarray:
    return _clamp(np.linalg.svd(matrix, compute_uv=False))


def _split(geometry: SiteGeometry, a: int, b: int) -> Tuple[int, int, int]:
    return (
        geometry.interval_dim(1, a - 1),
        geometry.interval_dim(a, b),
        geometry.interval_dim(b + 1, geometry.d),
    )


def check_dense_budget(entries: int, what: str = "稠密数组", budget: Optional[int] = None):
    budget = settings.dense_memory_budget if budget is None else budget
    if entries > budget:
        raise ResourceLimitError(f"{what} 需要 {entries} 个复数元素，超过预算 {budget}")


def schmidt_spectrum(state: DenseState, cut: int) -> SchmidtSpectrum:
    """切口 cut 处矩阵化的奇异值 (非增，平方和为 1)"""
    g = state.geometry
    g.check_cut(cut)
    state.require_normalized()
    matrix = state.amplitudes.reshape(g.interval_dim(1, cut), -1)
    return SchmidtSpectrum(cut=cut, values=_singular_values(matrix))


def all_schmidt_spectra(state: DenseState) -> List[SchmidtSpectrum]:
    return [schmidt_spectrum(state, j) for j in range(1, state.geometry.d)]


def truncation_error(spectrum: SchmidtSpectrum, r: int) -> float:
    """ε_j(r) = sqrt(Σ_{k>r} σ_k²)；r 超出谱长度时为 0"""
    if r < 0:
        raise InvalidInputError(f"截断秩 r 必须 ≥ 0, 实际 {r}")
    tail = spectrum.values[r:]
    return float(np.sqrt(np.sum(tail ** 2))) if tail.size else 0.0


def tt_decompose(state: DenseState, tolerance: float, max_rank: Optional[int] = None) -> TTState:
    """
    从左到右的 TT-SVD
    每个切口的误差预算是 tolerance/√(d−1)；各切口误差按平方相加，
    所以总重构误差 ≤ tolerance。max_rank 生效时该保证失效，实际丢弃量记在 discarded 里。
    """
    if not np.isfinite(tolerance) or tolerance < 0:
        raise InvalidInputError(f"tolerance 必须是有限非负数, 实际 {tolerance}")
    if max_rank is not None and max_rank < 1:
        raise InvalidInputError(f"max_rank 必须 ≥ 1, 实际 {max_rank}")
    state.require_normalized()

    g = state.geometry
    budget = tolerance / np.sqrt(g.d - 1)
    cores = []
    discarded = []
    carry = state.amplitudes.reshape(1, -1)
    r_prev = 1
    for k in range(g.d - 1):
        carry = carry.reshape(r_prev * g.dims[k], -1)
        u, s, vh = np.linalg.svd(carry, full_matrices=False)
        s = _clamp(s)
        # tails[r] = sqrt(Σ_{i≥r} s_i²)
        tails = np.sqrt(np.concatenate([np.cumsum((s ** 2)[::-1])[::-1], [0.0]]))
        r = int(np.argmax(tails <= budget))
        r = max(r, 1)
        if max_rank is not None:
            r = min(r, max_rank)
        discarded.append(float(tails[r] ** 2))
        cores.append(u[:, :r].reshape(r_prev, g.dims[k], r))
        carry = s[:r, None] * vh[:r]
        r_prev = r
    cores.append(carry.reshape(r_prev, g.dims[-1], 1))

    tt = TTState(geometry=g, cores=tuple(cores), discarded=tuple(discarded))
    debug_log(f"TT-SVD: ranks={tt.ranks}, 丢弃权重={sum(discarded):.3e}", "DEBUG")
    return tt


def tt_canonicalize(tt: TTState) -> TTState:
    """QR 左正交化核 1..d−1，所表示的态不变"""
    cores = [np.array(c) for c in tt.cores]
    for k in range(len(cores) - 1):
        r, n, r_next = cores[k].shape
        q, rr = np.linalg.qr(cores[k].reshape(r * n, r_next))
        cores[k] = q.reshape(r, n, q.shape[1])
        nxt = cores[k + 1]
        cores[k + 1] = (rr @ nxt.reshape(nxt.shape[0], -1)).reshape(q.shape[1], nxt.shape[1], nxt.shape[2])
    return TTState(geometry=tt.geometry, cores=tuple(cores), discarded=tt.discarded)


def is_left_orthogonal(tt: TTState, tol: float = 1e-10) -> bool:
    for core in tt.cores[:-1]:
        r, n, r_next = core.shape
        m = core.reshape(r * n, r_next)
        if np.max(np.abs(m.conj().T @ m - np.eye(r_next))) > tol:
            return False
    return True


def tt_ranks(tt: TTState) -> Tuple[int, ...]:
    return tt.ranks


def tt_reconstruct(tt: TTState, renormalize: bool = False, budget: Optional[int] = None) -> DenseState:
    """按站点顺序收缩所有核；默认不重新归一化 (截断后的 TT 范数 < 1)"""
    g = tt.geometry
    check_dense_budget(g.dimension, "TT 重构", budget)
    result = tt.cores[0].reshape(g.dims[0], -1)
    for core in tt.cores[1:]:
        r, n, r_next = core.shape
        result = (result @ core.reshape(r, n * r_next)).reshape(-1, r_next)
    state = DenseState(geometry=g, amplitudes=result.reshape(-1))
    return state.normalized() if renormalize else state


def reduced_density_matrix(state: DenseState, keep: Tuple[int, int]) -> np.ndarray:
    """对补集做偏迹，返回区间 keep 上的约化密度矩阵"""
    a, b = _check_keep(state.geometry, keep)
    left, mid, right = _split(state.geometry, a, b)
    check_dense_budget(mid * mid, "约化密度矩阵")
    t = state.amplitudes.reshape(left, mid, right)
    return np.einsum("akb,alb->kl", t, t.conj())


def reduced_spectrum(state: DenseState, keep: Tuple[int, int]) -> ReducedSpectrum:
    """
    约化态的本征值 (非增)
    通过 (keep) × (补集) 重排矩阵的奇异值平方得到，不显式组装 ρ；
    keep = [1, j] 时正好是切口 j 处 Schmidt 值的平方
    """
    a, b = _check_keep(state.geometry, keep)
    state.require_normalized()
    left, mid, right = _split(state.geometry, a, b)
    t = state.amplitudes.reshape(left, mid, right)
    matrix = np.transpose(t, (1, 0, 2)).reshape(mid, left * right)
    return ReducedSpectrum(keep=(a, b), eigenvalues=_singular_values(matrix) ** 2)


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: Tuple[int, int]) -> np.ndarray:
    """对密度矩阵 (非纯态) 做偏迹，保留连续区间 keep"""
    dims = tuple(int(n) for n in dims)
    a, b = keep
    if not (1 <= a <= b <= len(dims)):
        raise OutOfRangeError(f"区间 [{a},{b}] 不在 [1,{len(dims)}] 内")
    left = int(np.prod(dims[:a - 1], dtype=np.int64))
    mid = int(np.prod(dims[a - 1:b], dtype=np.int64))
    right = int(np.prod(dims[b:], dtype=np.int64))
    if rho.shape != (left * mid * right,) * 2:
        raise InvalidInputError(f"密度矩阵形状 {rho.shape} 与 dims={dims} 不符")
    t = rho.reshape(left, mid, right, left, mid, right)
    return np.einsum("akbalb->kl", t)


def _check_keep(geometry: SiteGeometry, keep) -> Tuple[int, int]:
    try:
        a, b = (int(x) for x in keep)
    except (TypeError, ValueError):
        raise InvalidInputError(f"keep 必须是连续区间 (a, b): {keep!r}")
    if b < a:
        raise InvalidInputError(f"keep 不是连续区间: [{a},{b}]")
    geometry.check_interval(a, b)
    return a, b


def random_state(geometry: SiteGeometry, rng: np.random.Generator) -> DenseState:
    n = geometry.dimension
    check_dense_budget(n, "随机态")
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return DenseState(geometry=geometry, amplitudes=v / np.linalg.norm(v))


def product_state(vectors: Iterable[Sequence[complex]]) -> DenseState:
    """各站点向量 (各自归一化后) 的张量积"""
    vecs = [np.asarray(v, dtype=np.complex128) for v in vectors]
    geometry = SiteGeometry(d=len(vecs), dims=tuple(v.size for v in vecs))
    out = np.ones(1, dtype=np.complex128)
    for v in vecs:
        out = np.kron(out, v / np.linalg.norm(v))
    return DenseState(geometry=geometry, amplitudes=out)
