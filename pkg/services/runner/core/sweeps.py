# services/runner/core/sweeps.py
"""
四种扫描：entropy_sweep / obolor_sweep / bounds_suite / gibbs_suite

每种扫描由三部分组成：
  points(config)         生成有序的参数点
  compute(config)        返回 (point, rng) -> rows 的函数，在线程池里跑
  reduce(config, rows)   顺序归并成 summary 与衰减曲线
每一行都带完整的参数元组 (model, d, j, l, q)，不适用的列为 None
"""
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from common.errors import ChainError, ConfigError, InsufficientDataError, NumericalError
from common.logger import debug_log
from common.schemas import ExperimentConfig, FilterParams, SaturationRow
from services.chain.core.arealaw_analysis import (
    eb_bound_check,
    fit_c5,
    relent_check,
    saturation_point,
    saturation_report,
    sl_required_constant,
    subsystem_gibbs_bound,
    tm_density,
    truncation_rate_fit,
)
from services.chain.core.locality_filters import approximate_ground_projector
from services.chain.core.nni_hamiltonian import MODEL_PARAMS, admissible_range, build_model, diagonalize, ground_state
from services.runner.core.fit import fit_decay, fitted_line
from services.runner.core.suites import SUITES

Row = Dict[str, object]

PARAM_COLUMNS = ("model", "d", "j", "l", "q")

COLUMNS: Dict[str, Tuple[str, ...]] = {
    "entropy_sweep": PARAM_COLUMNS + ("h", "entropy", "single_site_max"),
    "obolor_sweep": PARAM_COLUMNS + (
        "error", "norm_ob", "norm_ol", "norm_or", "ob_residual",
        "ann_max", "ann_bound", "window_slack", "localization_max",
        "mutual_information", "relent_bound", "relent_applicable", "relent_ok", "data_processing_ok", "lowerb_ok", "eb_ok",
        "E", "E_B", "c5_required", "tm_s_hat", "tm_case",
    ),
    "bounds_suite": PARAM_COLUMNS + ("suite", "trials", "violations", "min_slack", "passed"),
    "gibbs_suite": PARAM_COLUMNS + ("entropy", "bound", "slack", "satisfied"),
}
DECAY_COLUMNS = ("model", "d", "j", "q", "x", "y", "y_fit")

# 模型第一个参数 (扫描用的 h) 的缺省值，与构造器一致
DEFAULT_FIRST = {"tfi": 2.0, "xxz": 1.0, "oscillator": 3.0}


def _first_param(config: ExperimentConfig) -> Tuple[str, List[float], Dict[str, float]]:
    name = config.model.name
    first = MODEL_PARAMS[name][0]
    params = dict(config.model.params)
    default = params.pop(first, DEFAULT_FIRST[name])
    values = sorted(config.h_grid) if config.h_grid else [default]
    return first, values, params


def _model_params(config: ExperimentConfig) -> Dict[str, float]:
    return dict(config.model.params)


# --- entropy_sweep ---

def entropy_points(config: ExperimentConfig) -> List[dict]:
    _, h_values, _ = _first_param(config)
    return [{"model": config.model.name, "h": h, "d": d} for h in h_values for d in sorted(set(config.d_grid))]


def entropy_compute(config: ExperimentConfig) -> Callable[[dict, np.random.Generator], List[Row]]:
    first, _, fixed = _first_param(config)

    def compute(point: dict, rng: np.random.Generator) -> List[Row]:
        rows = saturation_point(point["model"], point["d"], {first: point["h"], **fixed})
        return [
            {
                "model": r.model, "d": r.d, "j": r.j, "l": None, "q": None,
                "h": r.h, "entropy": r.entropy, "single_site_max": r.single_site_max,
            }
            for r in rows
        ]

    return compute


def entropy_reduce(config: ExperimentConfig, rows: List[Row]) -> Tuple[Dict[str, object], Optional[List[Row]]]:
    first, h_values, fixed = _first_param(config)
    tolerance = config.tolerance("saturation", 0.05)
    summary: Dict[str, object] = {"sweep": "entropy_sweep", "model": config.model.name}
    for h in h_values:
        group = [
            SaturationRow(model=r["model"], h=r["h"], d=r["d"], j=r["j"], entropy=r["entropy"], single_site_max=r["single_site_max"])
            for r in rows if r["h"] == h
        ]
        if not group:
            continue
        report = saturation_report(config.model.name, float(h), group, tolerance, {first: h, **fixed})
        prefix = f"h={h!r}"
        summary[f"{prefix}.delta_sat"] = report.delta_sat
        summary[f"{prefix}.exempt"] = report.exempt
        summary[f"{prefix}.passed"] = report.passed
        summary[f"{prefix}.single_site_max"] = report.single_site_max
        for d, value in report.mid_cut.items():
            summary[f"{prefix}.mid_cut.d={d}"] = value
        for d, value in report.max_over_cuts.items():
            summary[f"{prefix}.max_over_cuts.d={d}"] = value
    summary["tolerance.saturation"] = tolerance
    return summary, None


# --- obolor_sweep ---

def obolor_points(config: ExperimentConfig) -> List[dict]:
    points = []
    for d in sorted(set(config.d_grid)):
        for j in sorted(set(config.j_grid)) or [d // 2]:
            for l in sorted(set(config.l_grid)):
                lo, hi = admissible_range(d, l)
                if not lo <= j <= hi:
                    debug_log(f"跳过不可行点 d={d}, j={j}, l={l} (需要 {lo} ≤ j ≤ {hi})", "WARNING")
                    continue
                for q in sorted(set(config.q_grid)) or [None]:
                    points.append({"model": config.model.name, "d": d, "j": j, "l": l, "q": q})
    if not points:
        raise ConfigError("没有满足 1+l ≤ j ≤ d−2−l 的 (d, j, l)", field="L_GRID")
    return points


def obolor_compute(config: ExperimentConfig) -> Callable[[dict, np.random.Generator], List[Row]]:
    params = _model_params(config)

    def compute(point: dict, rng: np.random.Generator) -> List[Row]:
        d, j, l = point["d"], point["j"], point["l"]
        # 1. 模型与全谱
        spec = build_model(point["model"], d, params)
        eig = diagonalize(spec)

        # 2. 流水线
        approx = approximate_ground_projector(spec, eig, j, l, FilterParams(l=l, q=point["q"]))
        state = eig.ground_state
        eps = approx.error

        # 3. 互信息与各不等式
        relent = relent_check(state, approx, j, l)
        record = relent.expectation
        eb_ok = eb_bound_check(record).satisfied if eps < 0.5 else None
        c5_required = None
        if l >= 1 and 2 * l <= d and eps < 0.5:
            c5_required = sl_required_constant(state, l, eps, record.E)

        # 4. 截断速率 (只记录，不判定)
        s_hat, case = None, None
        try:
            rate = truncation_rate_fit(tm_density(approx, state, j), j, spec.geometry.dims, m=l)
            s_hat, case = rate.s_hat, ("degenerate" if rate.degenerate else rate.case_label)
        except (InsufficientDataError, NumericalError) as e:
            debug_log(f"截断速率拟合跳过 (d={d}, j={j}, l={l}): {e}", "DEBUG")

        return [{
            "model": point["model"], "d": d, "j": j, "l": l, "q": approx.q,
            "error": eps,
            "norm_ob": approx.O_B.norm, "norm_ol": approx.O_L.norm, "norm_or": approx.O_R.norm,
            "ob_residual": approx.ob_residual,
            "ann_max": max(approx.ann_norms), "ann_bound": approx.ann_bound,
            "window_slack": min(b - dft for b, dft in zip(approx.window_bounds, approx.window_defects)),
            "localization_max": max(approx.localization_errors),
            "mutual_information": relent.information.I,
            "relent_bound": relent.bound,
            "relent_applicable": relent.bound_check.applicable,
            "relent_ok": relent.bound_check.satisfied if relent.bound_check.applicable else None,
            "data_processing_ok": relent.data_processing.satisfied,
            "lowerb_ok": relent.lowerb.satisfied,
            "eb_ok": eb_ok,
            "E": record.E, "E_B": record.E_B,
            "c5_required": c5_required,
            "tm_s_hat": s_hat, "tm_case": case,
        }]

    return compute


def obolor_reduce(config: ExperimentConfig, rows: List[Row]) -> Tuple[Dict[str, object], Optional[List[Row]]]:
    summary: Dict[str, object] = {"sweep": "obolor_sweep", "model": config.model.name}
    decay: List[Row] = []
    groups: Dict[Tuple, List[Row]] = {}
    # 未给 Q_GRID 时 q 随 l 变化 (默认值)，只按 (d, j) 分组
    for r in rows:
        groups.setdefault((r["d"], r["j"], r["q"] if config.q_grid else None), []).append(r)

    for (d, j, q), group in sorted(groups.items(), key=lambda kv: kv[0]):
        group = sorted(group, key=lambda r: r["l"])
        prefix = f"d={d}.j={j}.q={q!r}"
        summary[f"{prefix}.relent_violations"] = sum(1 for r in group if r["relent_ok"] is False)
        summary[f"{prefix}.relent_not_applicable"] = sum(1 for r in group if not r["relent_applicable"])
        summary[f"{prefix}.lowerb_violations"] = sum(1 for r in group if r["lowerb_ok"] is False)
        summary[f"{prefix}.data_processing_violations"] = sum(1 for r in group if r["data_processing_ok"] is False)

        points = [(r["l"], r["error"]) for r in group if r["error"] is not None and r["error"] > 0]
        try:
            fit = fit_decay(points)
        except ChainError as e:
            summary[f"{prefix}.decay_rate"] = None
            debug_log(f"衰减拟合跳过 {prefix}: {e}", "DEBUG")
        else:
            summary[f"{prefix}.decay_rate"] = fit.rate
            summary[f"{prefix}.decay_intercept"] = fit.intercept
            summary[f"{prefix}.decay_residual"] = fit.residual
            x = np.array([p[0] for p in points], dtype=np.float64)
            for (xi, yi), yf in zip(points, fitted_line(fit, x)):
                decay.append({"model": config.model.name, "d": d, "j": j, "q": q, "x": xi, "y": yi, "y_fit": float(yf)})


    # C5 对整个模型族只拟合一次
    required = [r["c5_required"] for r in rows if r["c5_required"] is not None]
    if required:
        fit = fit_c5(required, config.tolerance("c5", 0.1))
        summary["c5"] = fit.c5
        summary["c5_points"] = len(required)
        summary["c5_min_residual"] = min(fit.residuals)
        summary["c5_max_residual"] = max(fit.residuals)
        summary["c5_satisfied"] = fit.satisfied
    summary["relent_applicable"] = sum(1 for r in rows if r["relent_applicable"])
    return summary, decay


# --- bounds_suite ---

def bounds_points(config: ExperimentConfig) -> List[dict]:
    names = config.checks or list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigError(f"未知检查 {unknown}，可选: {list(SUITES)}", field="CHECKS")
    return [{"suite": name} for name in names]


def bounds_compute(config: ExperimentConfig) -> Callable[[dict, np.random.Generator], List[Row]]:
    def compute(point: dict, rng: np.random.Generator) -> List[Row]:
        result = SUITES[point["suite"]](rng, config.suite_scale)
        return [{
            "model": None, "d": None, "j": None, "l": None, "q": None,
            "suite": result.name,
            "trials": int(result.metrics["trials"]),
            "violations": int(result.metrics["violations"]),
            "min_slack": result.metrics["min_slack"],
            "passed": result.passed,
        }]

    return compute


def bounds_reduce(config: ExperimentConfig, rows: List[Row]) -> Tuple[Dict[str, object], Optional[List[Row]]]:
    summary: Dict[str, object] = {"sweep": "bounds_suite"}
    for r in rows:
        summary[f"{r['suite']}.violations"] = r["violations"]
        summary[f"{r['suite']}.min_slack"] = r["min_slack"]
        summary[f"{r['suite']}.passed"] = r["passed"]
    return summary, None


# --- gibbs_suite ---

def gibbs_points(config: ExperimentConfig) -> List[dict]:
    points = []
    for d in sorted(set(config.d_grid)):
        cuts = [j for j in sorted(set(config.j_grid)) if 1 <= j <= d - 1] if config.j_grid else range(1, d)
        points.extend({"model": config.model.name, "d": d, "j": j} for j in cuts)
    if not points:
        raise ConfigError("J_GRID 中没有落在 [1, d−1] 内的切口", field="J_GRID")
    return points


def gibbs_compute(config: ExperimentConfig) -> Callable[[dict, np.random.Generator], List[Row]]:
    params = _model_params(config)

    def compute(point: dict, rng: np.random.Generator) -> List[Row]:
        spec = build_model(point["model"], point["d"], params)
        state = ground_state(spec).state
        check = subsystem_gibbs_bound(spec, state, point["j"])
        return [{
            "model": point["model"], "d": point["d"], "j": point["j"], "l": None, "q": None,
            "entropy": check.lhs, "bound": check.rhs, "slack": check.slack, "satisfied": check.satisfied,
        }]

    return compute


def gibbs_reduce(config: ExperimentConfig, rows: List[Row]) -> Tuple[Dict[str, object], Optional[List[Row]]]:
    slacks = [r["slack"] for r in rows if r["slack"] is not None]
    return {
        "sweep": "gibbs_suite",
        "model": config.model.name,
        "violations": sum(1 for r in rows if r["satisfied"] is False),
        "min_slack": min(slacks) if slacks else None,
    }, None


SWEEPS = {
    "entropy_sweep": (entropy_points, entropy_compute, entropy_reduce),
    "obolor_sweep": (obolor_points, obolor_compute, obolor_reduce),
    "bounds_suite": (bounds_points, bounds_compute, bounds_reduce),
    "gibbs_suite": (gibbs_points, gibbs_compute, gibbs_reduce),
}
