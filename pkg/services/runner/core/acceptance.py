# services/runner/core/acceptance.py
"""
验收检查 (check 子命令)

编号与名字都可以在 CHECKS 里引用；SUITE_SCALE 只缩放随机化检查的次数。
所有模型检查固定在 TFI (h=2) 上，与实验配置里的模型无关。
"""
from functools import lru_cache
import tempfile
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from common.errors import ChainError, ConfigError
from common.logger import debug_log
from common.schemas import CheckResult, EigenSystem, ExperimentConfig, FilterParams, GroundProjectorApproximation, NNISpec, RelentRecord
from services.chain.core.arealaw_analysis import entropy_sweep, expectation_E, relent_check
from services.chain.core.locality_filters import approximate_ground_projector, filtered_operator, projector_error
from services.chain.core.nni_hamiltonian import (
    admissible_range,
    build_model,
    diagonalize,
    interaction_constants,
    lbr_split,
    op_norm,
    spectral_system,
)
from services.runner.core.fit import fit_decay
from services.runner.core import suites

Q_FACTORS = (0.5, 1.0, 2.0, 4.0, 8.0)
PIPELINE_D, PIPELINE_J, PIPELINE_LS = 8, 4, (0, 1, 2)
ACCEPT_H = 2.0


@lru_cache(maxsize=8)
def _tfi(d: int, h: float = ACCEPT_H, g: float = 1.0) -> Tuple[NNISpec, EigenSystem]:
    spec = build_model("tfi", d, {"h": h, "g": g})
    return spec, diagonalize(spec)


@lru_cache(maxsize=16)
def _pipeline(d: int, j: int, l: int, q_factor: float = 0.0) -> GroundProjectorApproximation:
    """q_factor = 0 用默认 q，否则 q = q_factor / ΔE²"""
    spec, eig = _tfi(d)
    q = q_factor / eig.gap ** 2 if q_factor > 0 else None
    return approximate_ground_projector(spec, eig, j, l, FilterParams(l=l, q=q))


def _result(name: str, violations: int, detail: str, **metrics: float) -> CheckResult:
    return CheckResult(
        name=name,
        passed=violations == 0,
        detail=detail,
        metrics={"violations": float(violations), **{k: float(v) for k, v in metrics.items()}},
    )


def check_gaussian_projector(rng: np.random.Generator, scale: float) -> CheckResult:
    """‖ρ^q − ρ^0‖ = exp(−ΔE² q/2)，TFI d=8 与两能级玩具系统 diag(0, 1)"""
    systems = {"tfi_d8": _tfi(8)[1], "two_level": spectral_system([0.0, 1.0])}
    violations, worst = 0, 0.0
    for label, eig in systems.items():
        for factor in Q_FACTORS:
            q = factor / eig.gap ** 2
            expected = np.exp(-0.5 * eig.gap ** 2 * q)
            rel = abs(projector_error(eig, q) - expected) / expected
            worst = max(worst, rel)
            violations += int(rel > 1e-10)
    return _result("gaussian_projector", violations, f"最大相对误差 {worst:.3e}", max_relative_error=worst)


def check_ann_inequality(rng: np.random.Generator, scale: float) -> CheckResult:
    """‖H̃_X ψ0‖ ≤ 3J²/ΔE · exp(−ΔE² q/2)，所有可行 (j, l ≤ 2) 与 q 网格"""
    spec, eig = _tfi(PIPELINE_D)
    J, _ = interaction_constants(spec)
    psi = eig.ground_state.amplitudes
    violations, worst, count = 0, np.inf, 0
    for l in PIPELINE_LS:
        lo, hi = admissible_range(PIPELINE_D, l)
        for j in range(lo, hi + 1):
            split = lbr_split(spec, eig, j, l)
            for factor in Q_FACTORS:
                q = factor / eig.gap ** 2
                bound = 3.0 * J ** 2 / eig.gap * np.exp(-0.5 * eig.gap ** 2 * q)
                for part in (split.H_L, split.H_B, split.H_R):
                    norm = float(np.linalg.norm(filtered_operator(eig, part, q).matrix @ psi))
                    worst = min(worst, bound - norm)
                    violations += int(norm > bound + 1e-12)
                    count += 1
    return _result("ann_inequality", violations, f"{violations}/{count} 次违反", checks=count, min_slack=worst)


def check_window_projector(rng: np.random.Generator, scale: float) -> CheckResult:
    """‖(O − I)ψ0‖ ≤ ‖Mψ0‖/τ，且 O² = O = O†"""
    violations, worst_idem = 0, 0.0
    for l in PIPELINE_LS:
        approx = _pipeline(PIPELINE_D, PIPELINE_J, l)
        for defect, bound in zip(approx.window_defects, approx.window_bounds):
            violations += int(defect > bound + 1e-12)
        for op in (approx.O_L, approx.O_R):
            m = op.matrix
            idem = max(op_norm(m @ m - m), op_norm(m - m.conj().T))
            worst_idem = max(worst_idem, idem)
            violations += int(idem > 1e-10)
    return _result("window_projector", violations, f"最大幂等/自伴误差 {worst_idem:.3e}", max_projector_defect=worst_idem)


def check_obolor_decay(rng: np.random.Generator, scale: float) -> CheckResult:
    """log‖O_B O_L O_R − ρ0‖ 对 l 的斜率 < 0，三个算符范数 ≤ 1 + 1e-8"""
    runs = [_pipeline(PIPELINE_D, PIPELINE_J, l) for l in PIPELINE_LS]
    violations = 0
    max_norm = max(max(a.O_B.norm, a.O_L.norm, a.O_R.norm) for a in runs)
    violations += int(max_norm > 1 + 1e-8)
    errors = {a.l: a.error for a in runs}
    try:
        slope = fit_decay(sorted(errors.items())).rate
    except ChainError as e:
        debug_log(f"误差衰减拟合失败: {e}", "WARNING")
        slope = float("nan")
    violations += int(not slope < 0)
    metrics = {f"error_l{l}": e for l, e in errors.items()}
    return _result("obolor_decay", violations, f"斜率 {slope:.4g}", slope=slope, max_norm=max_norm, **metrics)


def check_expectation_dual_path(rng: np.random.Generator, scale: float) -> CheckResult:
    """随机态 + 套件里所有基态的所有切口"""
    result = suites.expectation_dual_path(rng, scale)
    violations = int(result.metrics["violations"])
    for d in sorted({2, 4, 6, PIPELINE_D}):
        _, eig = _tfi(d)
        for j in range(1, d):
            try:
                expectation_E(eig.ground_state, j)
            except ChainError:
                violations += 1
    return _result("expectation_dual_path", violations, f"{violations} 次不一致", trials=result.metrics["trials"])


def relent_verdict(records: Sequence[RelentRecord]) -> CheckResult:
    """
    lowerb 与数据处理不等式每个点都判定；相对熵下界只在适用的点判定，
    一个适用点都没有时整项失败
    """
    violations, applicable, worst = 0, 0, np.inf
    for record in records:
        violations += int(not record.lowerb.satisfied) + int(not record.data_processing.satisfied)
        if record.bound_check.applicable:
            applicable += 1
            worst = min(worst, record.bound_check.slack)
            violations += int(not record.bound_check.satisfied)
    skipped = len(records) - applicable
    if applicable == 0:
        violations += 1
        debug_log(f"相对熵下界在 {len(records)} 个点上都不适用 (1 − 2ε < 𝔼_B)", "WARNING")
    return _result(
        "relent_end_to_end", violations,
        f"{applicable} 个点落在下界适用区间，{skipped} 个不适用",
        applicable=applicable, not_applicable=skipped, min_slack=worst,
    )


def check_relent_end_to_end(rng: np.random.Generator, scale: float) -> CheckResult:
    """TFI d=8 流水线：默认 q 与最大的 q 网格点各跑一遍"""
    _, eig = _tfi(PIPELINE_D)
    state = eig.ground_state
    records = [
        relent_check(state, _pipeline(PIPELINE_D, PIPELINE_J, l, factor), PIPELINE_J, l)
        for l in PIPELINE_LS
        for factor in (0.0, Q_FACTORS[-1])
    ]
    return relent_verdict(records)


def check_area_law(rng: np.random.Generator, scale: float) -> CheckResult:
    """
    TFI h=2, d ∈ {6,8,10,12}：中间切口熵饱和，且每个 d 的熵剖面过了平台后不随离边界的距离上涨
    h=1 只记录
    """
    gapped, critical = entropy_sweep("tfi", [6, 8, 10, 12], [ACCEPT_H, 1.0], fixed={"g": 1.0})
    violations = int(not gapped.delta_sat < gapped.tolerance) + int(gapped.plateau_rise > gapped.tolerance)
    return _result(
        "area_law_saturation", violations,
        f"Δ_sat={gapped.delta_sat:.4g}, 平台后涨幅 {gapped.plateau_rise:.3e} (h=1 对照: {critical.delta_sat:.4g})",
        delta_sat=gapped.delta_sat,
        plateau_rise=gapped.plateau_rise,
        critical_delta_sat=critical.delta_sat,
        critical_plateau_rise=critical.plateau_rise,
        single_site_max=gapped.single_site_max,
    )


def check_discretization(rng: np.random.Generator, scale: float) -> CheckResult:
    """求积节点与乘积积分步数加倍后，TFI d=6 流水线所有输出的变化 < 1e-6"""
    spec, eig = _tfi(6)
    worst = 0.0
    for l in (0, 1):
        base = FilterParams(l=l, residual_threshold=1e-7)
        fine = base.model_copy(update={"quadrature_nodes": 2 * base.quadrature_nodes, "ode_steps": 2 * base.ode_steps})
        a = approximate_ground_projector(spec, eig, 3, l, base)
        b = approximate_ground_projector(spec, eig, 3, l, fine)
        for x, y in ((a.O_B, b.O_B), (a.O_L, b.O_L), (a.O_R, b.O_R)):
            worst = max(worst, op_norm(x.matrix - y.matrix))
        worst = max(worst, abs(a.error - b.error))
    return _result("discretization", int(worst >= 1e-6), f"最大变化 {worst:.3e}", max_change=worst)


def _from_suite(name: str) -> Callable[[np.random.Generator, float], CheckResult]:
    return suites.SUITES[name]


DETERMINISM_CHECKS = ("renyi_sandwich", "majorization", "example_state", "data_processing")


def check_determinism(rng: np.random.Generator, scale: float) -> CheckResult:
    """
    把 check 子命令 (随机化检查子集) 以同一种子跑两遍，比较 check.csv 的字节
    两遍的线程数不同，结果也不能依赖完成顺序
    """
    from services.runner.core.config_loader import parse_experiment_config
    from services.runner.core.runner import run_checks

    seed = int(rng.integers(0, 2 ** 31))
    outputs = []
    with tempfile.TemporaryDirectory(prefix="determinism_") as tmp:
        for index, workers in enumerate((1, 2)):
            out = Path(tmp) / f"run{index}"
            config = parse_experiment_config(
                f"SWEEP=check\nCHECKS={','.join(DETERMINISM_CHECKS)}\nSEED={seed}\n"
                f"SUITE_SCALE={min(scale, 0.05)!r}\nWORKERS={workers}\n"
            ).model_copy(update={"output_dir": out})
            run_checks(config)
            outputs.append((out / "check.csv").read_bytes())
    same = outputs[0] == outputs[1]
    return _result("determinism", int(not same), "两次 check.csv 逐字节一致" if same else "两次 check.csv 不一致", bytes=len(outputs[0]))


CHECKS: Dict[str, Callable[[np.random.Generator, float], CheckResult]] = {
    "gaussian_projector": check_gaussian_projector,
    "ann_inequality": check_ann_inequality,
    "window_projector": check_window_projector,
    "obolor_decay": check_obolor_decay,
    "renyi_sandwich": _from_suite("renyi_sandwich"),
    "majorization": _from_suite("majorization"),
    "example_state": _from_suite("example_state"),
    "expectation_dual_path": check_expectation_dual_path,
    "relent_end_to_end": check_relent_end_to_end,
    "data_processing": _from_suite("data_processing"),
    "area_law_saturation": check_area_law,
    "gibbs_linear": _from_suite("gibbs_linear"),
    "discretization": check_discretization,
    "determinism": check_determinism,
}
CHECK_NUMBERS = {str(i): name for i, name in enumerate(CHECKS, start=1)}


def select_checks(config: ExperimentConfig) -> List[str]:
    if not config.checks:
        return list(CHECKS)
    names = []
    for item in config.checks:
        name = CHECK_NUMBERS.get(item, item)
        if name not in CHECKS:
            raise ConfigError(f"未知检查 {item!r}，可选编号 1–{len(CHECKS)} 或名字 {list(CHECKS)}", field="CHECKS")
        if name not in names:
            names.append(name)
    # 按编号顺序执行与输出
    return [name for name in CHECKS if name in names]


def check_rows(result: CheckResult) -> List[Dict[str, object]]:
    return [
        {
            "model": None, "d": None, "j": None, "l": None, "q": None,
            "check": result.name, "passed": result.passed, "metric": key, "value": value,
        }
        for key, value in sorted(result.metrics.items())
    ]


CHECK_COLUMNS = ("model", "d", "j", "l", "q", "check", "passed", "metric", "value")
