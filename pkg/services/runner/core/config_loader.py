# services/runner/core/config_loader.py
"""
实验配置：KEY=VALUE 文本 (dotenv 语法)，列表用逗号分隔

    SWEEP=entropy_sweep
    MODEL=tfi
    MODEL_H=2.0
    D_GRID=6,8,10,12
    TOL_SATURATION=0.05
"""
import io
from pathlib import Path
from typing import Callable, Dict, List, Union

from dotenv import dotenv_values
from pydantic import ValidationError

from common.config import settings
from common.errors import ChainError, ConfigError
from common.logger import debug_log
from common.schemas import ExperimentConfig, ModelChoice
from services.chain.core.nni_hamiltonian import MODEL_PARAMS

# ExperimentConfig 字段 → 配置键
FIELD_KEYS = {
    "sweep": "SWEEP",
    "model": "MODEL",
    "d_grid": "D_GRID",
    "j_grid": "J_GRID",
    "l_grid": "L_GRID",
    "q_grid": "Q_GRID",
    "h_grid": "H_GRID",
    "tolerances": "TOL_*",
    "output_dir": "OUTPUT_DIR",
    "seed": "SEED",
    "workers": "WORKERS",
    "ledger": "LEDGER",
    "checks": "CHECKS",
    "suite_scale": "SUITE_SCALE",
}
_KEY_FIELDS = {v: k for k, v in FIELD_KEYS.items()}

_GRIDS = {"D_GRID": int, "J_GRID": int, "L_GRID": int, "Q_GRID": float, "H_GRID": float}
_SCALARS = {"SEED": int, "WORKERS": int, "SUITE_SCALE": float}


def _split(raw: str) -> List[str]:
    return [item.strip() for item in (raw or "").split(",") if item.strip()]


def _convert(key: str, raw: str, cast: Callable):
    try:
        return cast(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} 的取值 {raw!r} 无法解析", field=key)


def _bool(key: str, raw: str) -> bool:
    value = (raw or "").strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"{key} 必须是布尔值, 实际 {raw!r}", field=key)


def _model(values: Dict[str, str]) -> ModelChoice:
    name = (values.get("MODEL") or "tfi").strip().lower()
    if name not in MODEL_PARAMS:
        raise ConfigError(f"MODEL 必须是 {sorted(MODEL_PARAMS)} 之一, 实际 {name!r}", field="MODEL")
    params = {}
    for key, raw in values.items():
        if not key.startswith("MODEL_"):
            continue
        param = key[len("MODEL_"):].lower()
        if param not in MODEL_PARAMS[name]:
            raise ConfigError(f"模型 {name} 不认识参数 {key}", field=key)
        params[param] = _convert(key, raw, float)
    if "MODEL" not in values and not params:
        return ExperimentConfig.model_fields["model"].default
    return ModelChoice(name=name, params=params)


def parse_experiment_config(text: str) -> ExperimentConfig:
    values = {k.strip().upper(): (v or "").strip() for k, v in dotenv_values(stream=io.StringIO(text)).items()}
    if "SWEEP" not in values:
        raise ConfigError("缺少 SWEEP", field="SWEEP")

    raw: Dict[str, object] = {"sweep": values["SWEEP"], "model": _model(values)}
    tolerances = {}
    for key, value in values.items():
        if key in ("SWEEP", "MODEL") or key.startswith("MODEL_"):
            continue
        if key in _GRIDS:
            raw[_KEY_FIELDS[key]] = [_convert(key, item, _GRIDS[key]) for item in _split(value)]
        elif key in _SCALARS:
            raw[_KEY_FIELDS[key]] = _convert(key, value, _SCALARS[key])
        elif key.startswith("TOL_"):
            tolerances[key[len("TOL_"):].lower()] = _convert(key, value, float)
        elif key == "OUTPUT_DIR":
            raw["output_dir"] = Path(value)
        elif key == "LEDGER":
            raw["ledger"] = _bool(key, value)
        elif key == "CHECKS":
            raw["checks"] = _split(value)
        else:
            raise ConfigError(f"未知配置键 {key}", field=key)
    raw["tolerances"] = tolerances
    if settings.output_dir is not None:
        raw["output_dir"] = settings.output_dir

    try:
        config = ExperimentConfig(**raw)
    except ValidationError as e:
        first = e.errors()[0]
        field = str(first["loc"][0]) if first["loc"] else "config"
        key = FIELD_KEYS.get(field, field)
        raise ConfigError(f"配置项 {key} 非法: {first['msg']}", field=key) from e
    except ChainError as e:
        raise ConfigError(f"配置非法: {e}", field="config") from e
    debug_log(f"实验配置已加载: sweep={config.sweep}, model={config.model.name}, d={config.d_grid}", "DEBUG")
    return config


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"无法读取配置文件 {path}: {e}", field="config") from e
    return parse_experiment_config(text)
