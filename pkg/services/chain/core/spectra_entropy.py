# services/chain/core/spectra_entropy.py
"""
熵泛函与熵↔秩不等式

约定：所有熵以 bit 为单位 (log2)；秩下界用 2^{S−g}。
零概率对所有熵和贡献 0。
"""
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from common.errors import (
    BoundUndefinedError,
    InsufficientDataError,
    InvalidInputError,
    NumericalError,
)
from common.logger import debug_log
from common.schemas import DenseState, EntropyValue, GibbsSpec, ProbabilitySequence, SchmidtSpectrum, SiteGeometry

ArrayLike = Union[float, np.ndarray]

LN2 = np.log(2.0)
BISECTION_MAX_ITER = 200


def _probabilities(p) -> np.ndarray:
    if isinstance(p, ProbabilitySequence):
        return p.values
    if isinstance(p, SchmidtSpectrum):
        return p.probabilities
    return ProbabilitySequence(values=p).values


def renyi_entropy(p, alpha: float) -> EntropyValue:
    """
    S^α = log2(Σ p^α)/(1−α)；α = 1 直接走 von Neumann 公式
    p 可以是 ProbabilitySequence、SchmidtSpectrum (用 σ²) 或数组
    """
    if not alpha > 0:
        raise InvalidInputError(f"alpha 必须 > 0, 实际 {alpha}")
    probs = _probabilities(p)
    nz = probs[probs > 0]
    if alpha == 1:
        value = float(-np.sum(nz * np.log2(nz)))
    else:
        value = float(np.log2(np.sum(nz ** alpha)) / (1.0 - alpha))
    return EntropyValue(alpha=alpha, value=value)


def von_neumann_entropy(p) -> EntropyValue:
    return renyi_entropy(p, 1.0)


def majorizes(a: ProbabilitySequence, b: ProbabilitySequence) -> bool:
    """a ≻ b：a 的每个前缀和都不小于 b 的 (容差 1e-12)"""
    n = max(a.values.size, b.values.size)
    pa = np.cumsum(np.pad(a.values, (0, n - a.values.size)))
    pb = np.cumsum(np.pad(b.values, (0, n - b.values.size)))
    return bool(np.all(pa >= pb - 1e-12))


def renyi_lower_bound(epsilon_sq: ArrayLike, r: ArrayLike, alpha: float) -> ArrayLike:
    """
    0<α<1 时的熵下界
    (α/(1−α))·log2(ε²/α) + log2((r−1)/(1−α))
    支持数组输入 (按 r 向量化)
    """
    eps = np.asarray(epsilon_sq, dtype=np.float64)
    rr = np.asarray(r, dtype=np.float64)
    if not 0 < alpha < 1:
        raise InvalidInputError(f"下界要求 0 < alpha < 1, 实际 {alpha}")
    if np.any(rr < 2):
        raise InvalidInputError("下界要求 r ≥ 2")
    if np.any(eps < 0) or np.any(eps > 1):
        raise InvalidInputError("epsilon_sq 必须在 [0,1]")
    if np.any(eps == 0):
        raise BoundUndefinedError("epsilon_sq = 0 时下界无定义 (log 0)")
    out = alpha / (1.0 - alpha) * np.log2(eps / alpha) + np.log2((rr - 1.0) / (1.0 - alpha))
    return float(out) if out.ndim == 0 else out


def renyi_upper_bound(epsilon_sq: ArrayLike, r: ArrayLike, alpha: float) -> ArrayLike:
    """α>1 时的熵上界 (α/(1−α))·log2(1−ε²) + log2(r)"""
    eps = np.asarray(epsilon_sq, dtype=np.float64)
    rr = np.asarray(r, dtype=np.float64)
    if not alpha > 1:
        raise InvalidInputError(f"上界要求 alpha > 1, 实际 {alpha}")
    if np.any(rr < 1):
        raise InvalidInputError("上界要求 r ≥ 1")
    if np.any(eps < 0) or np.any(eps >= 1):
        raise InvalidInputError("上界要求 0 ≤ epsilon_sq < 1")
    out = alpha / (1.0 - alpha) * np.log2(1.0 - eps) + np.log2(rr)
    return float(out) if out.ndim == 0 else out


def tail_weights(p) -> np.ndarray:
    """ε²(r) = Σ_{k>r} p_k，r = 0..n"""
    probs = _probabilities(p)
    return np.concatenate([np.cumsum(probs[::-1])[::-1], [0.0]])


def rank_lower_bound(S: float, g: float) -> float:
    if S < 0 or g < 0:
        raise InvalidInputError(f"S 和 g 必须非负: S={S}, g={g}")
    return float(2.0 ** (S - g))


def fit_power_law_rate(spectrum: SchmidtSpectrum) -> float:
    """对 σ_k > 1e-12 的部分在 log–log 上做最小二乘，返回 σ_k ≈ C k^{−ŝ} 的 ŝ"""
    values = spectrum.values
    mask = values > 1e-12
    if np.count_nonzero(mask) < 4:
        raise InsufficientDataError(f"非零奇异值只有 {np.count_nonzero(mask)} 个，至少需要 4 个")
    k = np.arange(1, values.size + 1)[mask]
    slope, _ = np.polyfit(np.log(k), np.log(values[mask]), 1)
    return float(-slope)


def finiteness_check(spectrum: SchmidtSpectrum, s: Optional[float] = None, alpha: float = 1.0) -> bool:
    """
    σ_k ≲ k^{−s} 且 s > 1/(2α) 时熵有限
    s 为 None 时用拟合的 ŝ；给定 s 时直接对该衰减率判定
    """
    if not 0 < alpha <= 1:
        raise InvalidInputError(f"alpha 必须在 (0,1], 实际 {alpha}")
    rate = fit_power_law_rate(spectrum) if s is None else float(s)
    debug_log(f"幂律衰减率 ŝ = {rate:.4f}, 阈值 {1 / (2 * alpha):.4f}", "DEBUG")
    return rate > 1.0 / (2.0 * alpha)


def _gibbs_energy(levels: np.ndarray, beta: float) -> float:
    # 以 λ0 为基准平移，避免 exp 溢出
    w = np.exp(-beta * (levels - levels[0]))
    return float(np.dot(levels, w) / np.sum(w))


def gibbs_state(eigenvalues, beta: float) -> GibbsSpec:
    levels = np.asarray(eigenvalues, dtype=np.float64)
    log_z = float(logsumexp(-beta * levels))
    return GibbsSpec(
        eigenvalues=levels,
        beta=beta,
        partition_value=float(np.exp(log_z)),
        log2_partition=log_z / LN2,
    )


def gibbs_entropy(spec: GibbsSpec) -> float:
    """Gibbs 态的精确熵 −Σ p log2 p"""
    return von_neumann_entropy(ProbabilitySequence.from_weights(spec.probabilities)).value


def gibbs_entropy_bound(eigenvalues, E: float) -> Tuple[float, float]:
    """
    二分求解 E(β) = E，返回 (β, βE·log2(e) + log2 Z)
    有限谱上 E(0) 是算术平均，β→∞ 时 E(β) → λ0，E(β) 严格递减
    """
    levels = np.asarray(eigenvalues, dtype=np.float64).reshape(-1)
    if levels.size < 2 or not np.all(np.isfinite(levels)):
        raise InvalidInputError("本征值必须有限且至少两个")
    if np.any(np.diff(levels) < 0):
        raise InvalidInputError("本征值必须非降")
    mean = float(np.mean(levels))
    if not levels[0] < E < mean:
        raise InvalidInputError(f"E={E} 不在 (λ0={levels[0]}, 均值={mean})")

    # 1. 找上界：加倍直到 E(β_hi) ≤ E
    lo, hi = 0.0, 1.0
    for _ in range(BISECTION_MAX_ITER):
        if _gibbs_energy(levels, hi) <= E:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise NumericalError("Gibbs 二分：找不到 β 上界")

    # 2. 二分
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if _gibbs_energy(levels, mid) > E:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    else:
        raise NumericalError(f"Gibbs 二分 {BISECTION_MAX_ITER} 次未收敛")

    beta = 0.5 * (lo + hi)
    spec = gibbs_state(levels, beta)
    bound = beta * E / LN2 + spec.log2_partition
    debug_log(f"Gibbs: E={E:.6g} → β={beta:.10g}, 熵界={bound:.6g} bit", "DEBUG")
    return beta, float(bound)


def example_state(d: int, p: float) -> DenseState:
    """
    2d 个三能级站点上的反例态
    ψ = √(1−p)·φ3^{⊗2d} + √(p/2^d)·Σ_{i∈{0,1}^d} φ_i ⊗ φ_i (后 d 个站点复制前 d 个)
    """
    if d < 1:
        raise InvalidInputError(f"d 必须 ≥ 1, 实际 {d}")
    if not 0 <= p <= 1:
        raise InvalidInputError(f"p 必须在 [0,1], 实际 {p}")
    geometry = SiteGeometry.uniform(2 * d, 3)
    amps = np.zeros(geometry.dimension, dtype=np.complex128)
    amps[-1] = np.sqrt(1.0 - p)
    bits = np.array(np.meshgrid(*([[0, 1]] * d), indexing="ij")).reshape(d, -1)
    index = np.ravel_multi_index(tuple(np.vstack([bits, bits])), geometry.dims)
    amps[index] = np.sqrt(p / 2 ** d)
    return DenseState(geometry=geometry, amplitudes=amps)


def example_state_renyi(p: float, j: int, alpha: float) -> float:
    """反例态在切口 j ≤ d 处 Rényi 熵的闭式"""
    if alpha == 1:
        probs = np.array([1.0 - p] + [p / 2 ** j] * 2 ** j)
        return von_neumann_entropy(ProbabilitySequence.from_weights(probs)).value
    return float(np.log2((1.0 - p) ** alpha + 2.0 ** ((1.0 - alpha) * j) * p ** alpha) / (1.0 - alpha))
