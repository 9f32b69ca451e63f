# common/config.py
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from common.errors import ConfigError

load_dotenv()


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


class Settings(BaseModel):
    """
    进程级配置 (来自环境变量 / .env)
    实验参数不放这里，见 services/runner/core/config_loader.py
    """
    # 稠密向量/矩阵最多允许的复数元素个数
    dense_memory_budget: int = Field(default=2 ** 26, gt=0)
    # 全谱稠密对角化的维数上限
    dense_eig_cap: int = Field(default=4096, gt=1)
    # 超过该维数时，基态改用 Lanczos (eigsh)
    iterative_threshold: int = Field(default=2048, gt=1)
    # q 默认值里的常数 c1
    filter_c1: float = Field(default=1.0, gt=0)
    output_dir: Optional[Path] = None
    ledger_url: str = "sqlite:///arealaw_ledger.db"
    enable_db_log: bool = False
    log_level: str = "INFO"


def load_settings() -> Settings:
    raw = {
        "dense_memory_budget": os.getenv("DENSE_MEMORY_BUDGET", str(2 ** 26)),
        "dense_eig_cap": os.getenv("DENSE_EIG_CAP", "4096"),
        "iterative_threshold": os.getenv("ITERATIVE_THRESHOLD", "2048"),
        "filter_c1": os.getenv("FILTER_C1", "1.0"),
        "output_dir": os.getenv("AREALAW_OUTPUT_DIR") or None,
        "ledger_url": os.getenv("LEDGER_URL", "sqlite:///arealaw_ledger.db"),
        "enable_db_log": _env_bool("ENABLE_DB_LOG", "False"),
        "log_level": os.getenv("LOG_LEVEL", "INFO").upper(),
    }
    try:
        return Settings(**raw)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(x) for x in first["loc"])
        raise ConfigError(f"环境变量配置非法: {field} ({first['msg']})", field=field) from e


settings = load_settings()
