# services/chain/io/spec_codec.py
"""
模型配置的文本格式 (KEY=VALUE，每行一个)

    MODEL=tfi
    D=8
    MODEL_H=2.0
    MODEL_G=1.0
"""
import io
from pathlib import Path
from typing import Dict, Tuple, Union

from dotenv import dotenv_values

from common.errors import ChainError, ConfigError
from common.schemas import NNISpec
from services.chain.core.nni_hamiltonian import MODEL_PARAMS, build_model

PathLike = Union[str, Path]


def dump_model_config(spec: NNISpec) -> str:
    if spec.model not in MODEL_PARAMS:
        raise ConfigError(f"自定义模型 {spec.model!r} 无法序列化", field="MODEL")
    lines = [f"MODEL={spec.model}", f"D={spec.geometry.d}"]
    for name in MODEL_PARAMS[spec.model]:
        if name in spec.params:
            lines.append(f"MODEL_{name.upper()}={spec.params[name]!r}")
    return "\n".join(lines) + "\n"


def parse_model_config(text: str) -> Tuple[str, int, Dict[str, float]]:
    values = dotenv_values(stream=io.StringIO(text))
    name = (values.get("MODEL") or "").strip().lower()
    if name not in MODEL_PARAMS:
        raise ConfigError(f"MODEL 必须是 {sorted(MODEL_PARAMS)} 之一, 实际 {name!r}", field="MODEL")
    try:
        d = int(values.get("D") or "")
    except ValueError:
        raise ConfigError(f"D 必须是整数, 实际 {values.get('D')!r}", field="D")

    params = {}
    for key, raw in values.items():
        if not key.startswith("MODEL_"):
            continue
        param = key[len("MODEL_"):].lower()
        if param not in MODEL_PARAMS[name]:
            raise ConfigError(f"模型 {name} 不认识参数 {key}", field=key)
        try:
            params[param] = float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} 必须是数值, 实际 {raw!r}", field=key)
    return name, d, params


def load_model_config(path: PathLike) -> NNISpec:
    name, d, params = parse_model_config(Path(path).read_text(encoding="utf-8"))
    try:
        return build_model(name, d, params)
    except ChainError as e:
        raise ConfigError(f"模型配置无法构造: {e}", field="MODEL") from e
