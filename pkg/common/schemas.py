# common/schemas.py
# 所有值类型都是冻结的 pydantic 模型；数组在构造时复制并设为只读，可在线程间共享
from functools import cached_property
from math import prod
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from common.errors import InvalidInputError, OutOfRangeError

NORM_TOL = 1e-12
SUM_TOL = 1e-10


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class _Value(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


# --- tensor_core ---

class SiteGeometry(_Value):
    d: int
    dims: Tuple[int, ...]

    @model_validator(mode="after")
    def _check(self):
        if self.d < 2:
            raise InvalidInputError(f"站点数 d 必须 ≥ 2, 实际 {self.d}")
        if len(self.dims) != self.d:
            raise InvalidInputError(f"dims 长度 {len(self.dims)} 与 d={self.d} 不一致")
        if any(n < 2 for n in self.dims):
            raise InvalidInputError(f"局部维数必须 ≥ 2: {self.dims}")
        return self

    @classmethod
    def uniform(cls, d: int, n: int) -> "SiteGeometry":
        return cls(d=d, dims=(n,) * d)

    @property
    def dimension(self) -> int:
        return prod(self.dims)

    def interval_dim(self, a: int, b: int) -> int:
        """区间 [a,b] (1-based, 闭区间) 的维数；空区间为 1"""
        if b < a:
            return 1
        return prod(self.dims[a - 1:b])

    def check_interval(self, a: int, b: int):
        if not (1 <= a <= b <= self.d):
            raise OutOfRangeError(f"区间 [{a},{b}] 不在 [1,{self.d}] 内")

    def check_cut(self, cut: int):
        if not (1 <= cut <= self.d - 1):
            raise OutOfRangeError(f"切口 {cut} 不在 [1,{self.d - 1}] 内")


class DenseState(_Value):
    """稠密纯态；范数不在构造时强制，需要归一化的操作自行检查"""
    geometry: SiteGeometry
    amplitudes: np.ndarray

    @field_validator("amplitudes", mode="before")
    @classmethod
    def _as_complex(cls, v):
        arr = np.asarray(v, dtype=np.complex128).reshape(-1)
        return _frozen_array(arr, np.complex128)

    @model_validator(mode="after")
    def _check_length(self):
        if self.amplitudes.size != self.geometry.dimension:
            raise InvalidInputError(
                f"振幅长度 {self.amplitudes.size} ≠ 维数 {self.geometry.dimension}"
            )
        return self

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm - 1.0) <= NORM_TOL

    def require_normalized(self):
        if not self.is_normalized:
            raise InvalidInputError(f"态未归一化: ‖ψ‖ = {self.norm:.16g}")

    def normalized(self) -> "DenseState":
        n = self.norm
        if n == 0.0:
            raise InvalidInputError("零向量无法归一化")
        return DenseState(geometry=self.geometry, amplitudes=self.amplitudes / n)

    def as_tensor(self) -> np.ndarray:
        # 站点 1 变化最慢 (C 序)
        return self.amplitudes.reshape(self.geometry.dims)


class SchmidtSpectrum(_Value):
    cut: int
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_real(cls, v):
        return _frozen_array(np.asarray(v, dtype=np.float64).reshape(-1), np.float64)

    @model_validator(mode="after")
    def _check(self):
        v = self.values
        if v.size == 0:
            raise InvalidInputError("Schmidt 谱不能为空")
        if np.any(v < 0):
            raise InvalidInputError("Schmidt 值必须非负")
        if np.any(np.diff(v) > 1e-14):
            raise InvalidInputError("Schmidt 值必须非增")
        total = float(np.sum(v ** 2))
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidInputError(f"Σσ² = {total:.16g} ≠ 1")
        return self

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.values))

    @property
    def probabilities(self) -> np.ndarray:
        return self.values ** 2


class TTState(_Value):
    geometry: SiteGeometry
    cores: Tuple[np.ndarray, ...]
    # 每个切口被丢弃的权重 Σ_{k>r} σ_k²，按 TT-SVD 扫描时的值
    discarded: Tuple[float, ...] = ()

    @field_validator("cores", mode="before")
    @classmethod
    def _as_cores(cls, v):
        return tuple(_frozen_array(np.asarray(c, dtype=np.complex128), np.complex128) for c in v)

    @model_validator(mode="after")
    def _check(self):
        g = self.geometry
        if len(self.cores) != g.d:
            raise InvalidInputError(f"核数 {len(self.cores)} ≠ d={g.d}")
        left = 1
        for k, core in enumerate(self.cores):
            if core.ndim != 3 or core.shape[0] != left or core.shape[1] != g.dims[k]:
                raise InvalidInputError(f"第 {k + 1} 个核形状非法: {core.shape}")
            left = core.shape[2]
        if left != 1:
            raise InvalidInputError("末端秩必须为 1")
        return self

    @property
    def ranks(self) -> Tuple[int, ...]:
        return tuple(core.shape[2] for core in self.cores[:-1])


class ReducedSpectrum(_Value):
    keep: Tuple[int, int]
    eigenvalues: np.ndarray

    @field_validator("eigenvalues", mode="before")
    @classmethod
    def _as_real(cls, v):
        return _frozen_array(np.asarray(v, dtype=np.float64).reshape(-1), np.float64)

    @model_validator(mode="after")
    def _check(self):
        ev = self.eigenvalues
        if np.any(ev < -1e-14):
            raise InvalidInputError("约化谱出现负值")
        total = float(np.sum(ev))
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidInputError(f"约化谱之和 {total:.16g} ≠ 1")
        return self


# --- spectra_entropy ---

class ProbabilitySequence(_Value):
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_real(cls, v):
        arr = np.asarray(v, dtype=np.float64).reshape(-1)
        # 舍入噪声造成的微小负值截为 0
        arr = np.where((arr < 0) & (arr >= -1e-14), 0.0, arr)
        return _frozen_array(arr, np.float64)

    @model_validator(mode="after")
    def _check(self):
        v = self.values
        if v.size == 0:
            raise InvalidInputError("概率序列不能为空")
        if np.any(v < 0):
            raise InvalidInputError("概率必须非负")
        if np.any(np.diff(v) > 1e-12):
            raise InvalidInputError("概率序列必须非增")
        total = float(np.sum(v))
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidInputError(f"概率之和 {total:.16g} ≠ 1")
        return self

    @classmethod
    def from_weights(cls, weights) -> "ProbabilitySequence":
        w = np.clip(np.asarray(weights, dtype=np.float64).reshape(-1), 0.0, None)
        total = w.sum()
        if total <= 0:
            raise InvalidInputError("权重全为零")
        return cls(values=np.sort(w / total)[::-1])

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.values))


class EntropyValue(_Value):
    alpha: float = Field(gt=0)
    value: float

    @field_validator("value", mode="before")
    @classmethod
    def _clip(cls, v):
        v = float(v)
        return 0.0 if -1e-12 <= v < 0 else v

    @model_validator(mode="after")
    def _check(self):
        if self.value < 0:
            raise InvalidInputError(f"熵不能为负: {self.value}")
        return self


class GibbsSpec(_Value):
    eigenvalues: np.ndarray
    beta: float = Field(gt=0)
    partition_value: float
    # log2 Z，大 β 时 Z 会下溢，熵用这个
    log2_partition: float

    @field_validator("eigenvalues", mode="before")
    @classmethod
    def _as_real(cls, v):
        return _frozen_array(np.asarray(v, dtype=np.float64).reshape(-1), np.float64)

    @property
    def probabilities(self) -> np.ndarray:
        logw = -self.beta * self.eigenvalues / np.log(2.0) - self.log2_partition
        return np.exp2(logw)


# --- nni_hamiltonian ---

def _hermitian_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


class NNISpec(_Value):
    geometry: SiteGeometry
    site_terms: Tuple[np.ndarray, ...]
    couplings: Tuple[np.ndarray, ...]
    model: str = "custom"
    params: Dict[str, float] = Field(default_factory=dict)

    @field_validator("site_terms", "couplings", mode="before")
    @classmethod
    def _as_mats(cls, v):
        return tuple(_frozen_array(np.asarray(m, dtype=np.complex128), np.complex128) for m in v)

    @model_validator(mode="after")
    def _check(self):
        g = self.geometry
        if len(self.site_terms) != g.d or len(self.couplings) != g.d - 1:
            raise InvalidInputError(
                f"需要 {g.d} 个单点项和 {g.d - 1} 个耦合，实际 {len(self.site_terms)}/{len(self.couplings)}"
            )
        for j, h in enumerate(self.site_terms, start=1):
            n = g.dims[j - 1]
            if h.shape != (n, n):
                raise InvalidInputError(f"H_{j} 形状 {h.shape} ≠ ({n},{n})")
            if _hermitian_defect(h) > 1e-12:
                raise InvalidInputError(f"H_{j} 不是自伴的")
        for k, phi in enumerate(self.couplings, start=1):
            n = g.dims[k - 1] * g.dims[k]
            if phi.shape != (n, n):
                raise InvalidInputError(f"Φ_{k},{k + 1} 形状 {phi.shape} ≠ ({n},{n})")
            if _hermitian_defect(phi) > 1e-12:
                raise InvalidInputError(f"Φ_{k},{k + 1} 不是自伴的")
        return self


class EigenSystem(_Value):
    # 只有谱、没有站点结构的玩具系统 geometry 为 None
    geometry: Optional[SiteGeometry] = None
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gap: float
    shift: float
    degenerate: bool
    degenerate_excited: bool = False
    hamiltonian_norm: float

    @field_validator("eigenvalues", mode="before")
    @classmethod
    def _as_real(cls, v):
        return _frozen_array(np.asarray(v, dtype=np.float64).reshape(-1), np.float64)

    @field_validator("eigenvectors", mode="before")
    @classmethod
    def _as_complex(cls, v):
        return _frozen_array(np.asarray(v, dtype=np.complex128), np.complex128)

    @property
    def dimension(self) -> int:
        return self.eigenvalues.size

    @property
    def ground_tolerance(self) -> float:
        return 1e-12 * max(1.0, self.hamiltonian_norm)

    @property
    def ground_state(self) -> DenseState:
        if self.geometry is None:
            raise InvalidInputError("没有站点结构的谱不能给出基态向量")
        return DenseState(geometry=self.geometry, amplitudes=self.eigenvectors[:, 0])

    @cached_property
    def ground_projector(self) -> np.ndarray:
        """ρ^0：零能 (平移后) 本征空间的投影"""
        mask = np.abs(self.eigenvalues) <= self.ground_tolerance
        v = self.eigenvectors[:, mask]
        return v @ v.conj().T


class GroundState(_Value):
    """迭代求解器的结果：只有基态和能隙估计"""
    state: DenseState
    energy: float
    gap: float
    degenerate: bool
    method: Literal["dense", "lanczos"]


class LocalOperator(_Value):
    matrix: np.ndarray
    support: Tuple[int, int]
    geometry: SiteGeometry
    label: str = ""

    @field_validator("matrix", mode="before")
    @classmethod
    def _as_complex(cls, v):
        return _frozen_array(np.asarray(v, dtype=np.complex128), np.complex128)

    @model_validator(mode="after")
    def _check(self):
        n = self.geometry.dimension
        if self.matrix.shape != (n, n):
            raise InvalidInputError(f"算符形状 {self.matrix.shape} ≠ ({n},{n})")
        a, b = self.support
        self.geometry.check_interval(a, b)
        return self

    @cached_property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    @property
    def adjoint_defect(self) -> float:
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T, 2))

    def is_self_adjoint(self, tol: float = 1e-10) -> bool:
        return self.adjoint_defect <= tol * max(1.0, self.norm)


class LBRSplit(_Value):
    j: int
    l: int
    H_L: LocalOperator
    H_B: LocalOperator
    H_R: LocalOperator
    expectation_shifts: Tuple[float, float, float]


class FilterParams(_Value):
    """
    滤波流水线参数
    q / time_truncation 为 None 时按能隙和 l 取默认值
    """
    l: int = Field(ge=0)
    q: Optional[float] = Field(default=None, gt=0)
    time_truncation: Optional[float] = Field(default=None, gt=0)
    quadrature_nodes: int = Field(default=32, ge=8)
    ode_steps: int = Field(default=32, ge=8)
    c1: Optional[float] = Field(default=None, gt=0)
    tau_L: Optional[float] = Field(default=None, gt=0)
    tau_R: Optional[float] = Field(default=None, gt=0)
    velocity: Optional[float] = Field(default=None, gt=0)
    positive_ob: bool = True
    residual_threshold: float = Field(default=1e-6, gt=0)
    max_refinements: int = Field(default=16, ge=1)

    def resolve_q(self, gap: float, c1_default: float) -> float:
        if self.q is not None:
            return self.q
        if gap <= 0:
            raise InvalidInputError("能隙为零，无法给出默认 q")
        c1 = self.c1 if self.c1 is not None else c1_default
        # l = 0 时按 l = 1/2 取值，保证 q > 0
        return 2.0 * max(self.l, 0.5) * c1 / gap ** 2

    def resolve_time_truncation(self, q: float, velocity: Optional[float] = None) -> float:
        """T = max(6√q, l/(2v̂))；显式给出的 velocity 字段优先于估计值"""
        if self.time_truncation is not None:
            return self.time_truncation
        t = 6.0 * np.sqrt(q)
        v = self.velocity if self.velocity is not None else velocity
        if v is not None and v > 0:
            t = max(t, self.l / (2.0 * v))
        return float(t)


class OrderedAverage(_Value):
    """有序指数高斯平均的数值结果"""
    operator: LocalOperator
    residual: float
    nodes: int
    steps: int
    refinements: int


class GroundProjectorApproximation(_Value):
    j: int
    l: int
    q: float
    time_truncation: float
    velocity: Optional[float] = None
    O_L: LocalOperator
    O_B: LocalOperator
    O_R: LocalOperator
    error: float
    tau_L: float
    tau_R: float
    # ‖(O−I)ψ0‖ 与 Chebyshev 上界 ‖Mψ0‖/τ
    window_defects: Tuple[float, float]
    window_bounds: Tuple[float, float]
    ob_residual: float
    ob_raw_norm: float
    # ‖H̃_X ψ0‖ (X=L,B,R) 与 3J²/ΔE·exp(−ΔE²q/2)
    ann_norms: Tuple[float, float, float]
    ann_bound: float
    localization_errors: Tuple[float, float, float]


class VelocityEstimate(_Value):
    velocity: float
    fronts: Tuple[Tuple[int, float], ...]


# --- arealaw_analysis ---

class MutualInformationRecord(_Value):
    region_a: Tuple[int, int]
    region_b: Tuple[int, int]
    S_A: EntropyValue
    S_B: EntropyValue
    S_AB: EntropyValue
    I: float

    @model_validator(mode="after")
    def _check(self):
        if self.I < -1e-9:
            raise InvalidInputError(f"互信息为负 ({self.I})，违反次可加性")
        return self


class ExpectationRecord(_Value):
    j: int
    E: float
    E_B: float
    epsilon_l: float

    @model_validator(mode="after")
    def _check(self):
        if not (-1e-12 <= self.E <= 1 + 1e-12):
            raise InvalidInputError(f"𝔼 = {self.E} 不在 [0,1]")
        return self


class BoundCheck(_Value):
    name: str
    satisfied: bool
    lhs: float
    rhs: float
    slack: float
    applicable: bool = True

    def __bool__(self) -> bool:
        return self.satisfied


class RelentRecord(_Value):
    j: int
    l: int
    information: MutualInformationRecord
    expectation: ExpectationRecord
    outcome_p: float
    outcome_e: float
    dephased_divergence: float
    bound: Optional[float]
    bound_check: BoundCheck
    data_processing: BoundCheck
    lowerb: BoundCheck


class C5Fit(_Value):
    """S_l 递推常数的最小二乘拟合；残差 = C5 − 所需值，带符号"""
    c5: float
    residuals: Tuple[float, ...]
    tolerance: float

    @property
    def max_violation(self) -> float:
        return float(max(0.0, -min(self.residuals)))

    @property
    def satisfied(self) -> bool:
        return self.max_violation <= self.tolerance


class RateFit(_Value):
    s_hat: float
    # log–log 上的原始衰减指数
    exponent: float = float("nan")
    case_label: Optional[Literal["polynomial-in-dimension", "log-corrected", "exponential-prefactor"]]
    residuals: Dict[str, float]
    degenerate: bool = False
    errors: Tuple[float, ...] = ()


class DecayFit(_Value):
    rate: float
    intercept: float
    residual: float


class SaturationRow(_Value):
    model: str
    h: float
    d: int
    j: int
    entropy: float
    single_site_max: float


class SaturationReport(_Value):
    model: str
    h: float
    rows: Tuple[SaturationRow, ...]
    max_over_cuts: Dict[int, float]
    mid_cut: Dict[int, float]
    single_site_max: float
    delta_sat: float
    # 每个 d 的平台起点 (到边界的距离) 与平台之后熵的最大涨幅
    plateau_start: Dict[int, int] = Field(default_factory=dict)
    plateau_rise: float = 0.0
    tolerance: float
    exempt: bool
    passed: bool


# --- cli_runner ---

class ModelChoice(_Value):
    name: Literal["tfi", "xxz", "oscillator"]
    params: Dict[str, float] = Field(default_factory=dict)


class ExperimentConfig(_Value):
    sweep: Literal["entropy_sweep", "obolor_sweep", "bounds_suite", "gibbs_suite", "check"]
    model: ModelChoice = ModelChoice(name="tfi", params={"h": 2.0, "g": 1.0})
    d_grid: List[int] = Field(default_factory=lambda: [8])
    j_grid: List[int] = Field(default_factory=list)
    l_grid: List[int] = Field(default_factory=lambda: [0, 1, 2])
    q_grid: List[float] = Field(default_factory=list)
    h_grid: List[float] = Field(default_factory=list)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    output_dir: Path = Path("results")
    seed: int = 1234
    workers: int = Field(default=1, ge=1)
    ledger: bool = False
    checks: List[str] = Field(default_factory=list)
    suite_scale: float = Field(default=1.0, gt=0, le=1.0)

    @field_validator("d_grid")
    @classmethod
    def _d_positive(cls, v):
        if not v:
            raise ValueError("d_grid 不能为空")
        if any(d < 2 for d in v):
            raise ValueError("d_grid 中所有 d 必须 ≥ 2")
        return v

    @field_validator("l_grid")
    @classmethod
    def _l_nonneg(cls, v):
        if not v:
            raise ValueError("l_grid 不能为空")
        if any(l < 0 for l in v):
            raise ValueError("l_grid 必须非负")
        return v

    @field_validator("q_grid")
    @classmethod
    def _q_positive(cls, v):
        if any(q <= 0 for q in v):
            raise ValueError("q_grid 必须为正")
        return v

    def tolerance(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))


class CheckResult(_Value):
    name: str
    passed: bool
    detail: str = ""
    metrics: Dict[str, float] = Field(default_factory=dict)


class RunOutcome(_Value):
    status: int
    files: Tuple[Path, ...] = ()
    failed: Tuple[str, ...] = ()
    run_id: Optional[str] = None
