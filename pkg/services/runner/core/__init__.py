# services/runner/core/__init__.py

# 1. 配置
from .config_loader import load_experiment_config, parse_experiment_config

# 2. 账本
from .ledger import claim_point, finish_point_success, mark_point_failed, open_run, recover_processing_points

# 3. 分发与拟合
from .dispatch import dispatch_points
from .fit import fit_decay

# 4. 主流程
from .runner import run, run_checks

__all__ = [
    "load_experiment_config",
    "parse_experiment_config",
    "claim_point",
    "finish_point_success",
    "mark_point_failed",
    "open_run",
    "recover_processing_points",
    "dispatch_points",
    "fit_decay",
    "run",
    "run_checks",
]
