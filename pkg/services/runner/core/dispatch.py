# services/runner/core/dispatch.py
"""
有界线程池分发扫描点

每个点拿到自己的随机数流 default_rng([seed, index])，结果按输入顺序返回，
与完成顺序无关。开启账本时走 认领 → 计算 → 落库 的流程。
"""
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from common.errors import ChainError, ConfigError, ResourceLimitError
from common.logger import debug_log, log_error
from common.models import PointStatus
from services.runner.core.ledger import claim_point, finish_point_success, mark_point_failed, point_key

Row = Dict[str, object]
PointResult = Tuple[dict, Optional[List[Row]], Optional[str]]


def clean_value(value):
    """numpy 标量转成 Python 标量；nan 记为 None (CSV 里写 na)"""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def clean_row(row: Row) -> Row:
    return {k: clean_value(v) for k, v in row.items()}


def dispatch_points(
        points: Sequence[dict],
        compute: Callable[[dict, np.random.Generator], List[Row]],
        workers: int = 1,
        seed: int = 0,
        session_factory=None,
        ledger_state: Optional[Dict[str, Tuple[str, int, Optional[dict]]]] = None,
) -> List[PointResult]:
    """
    返回 [(point, rows 或 None, 错误信息 或 None)]，顺序与 points 一致
    资源上限与配置错误直接抛出；其余领域错误只让该点失败
    """

    def _run(index: int) -> PointResult:
        point = points[index]
        rng = np.random.default_rng([seed, index])
        entry = ledger_state.get(point_key(point)) if ledger_state is not None else None
        if entry is not None and entry[1] == PointStatus.SUCCESS and entry[2] is not None:
            debug_log(f"♻️ 复用已完成的扫描点 {entry[0]}", "DEBUG")
            return point, entry[2]["rows"], None

        db = session_factory() if entry is not None else None
        point_id = entry[0] if entry is not None else None
        try:
            # 1. 认领
            if db is not None and not claim_point(db, point_id):
                return point, None, "扫描点已被其他 worker 认领"

            # 2. 计算
            start = time.time()
            rows = [clean_row(r) for r in compute(point, rng)]
            cost = round(time.time() - start, 3)
            debug_log(f"扫描点 {point_key(point)} 完成，{len(rows)} 行，耗时 {cost}s", "DEBUG")

            # 3. 落库
            if db is not None:
                finish_point_success(db, point_id, {"rows": rows}, cost)
            return point, rows, None

        # --- 统一异常处理 ---
        except (ResourceLimitError, ConfigError):
            if db is not None:
                mark_point_failed(db, point_id, "资源上限或配置错误")
            raise
        except ChainError as e:
            log_error("Sweep", f"扫描点 {point_key(point)} 失败: {e}", point_id, e)
            if db is not None:
                mark_point_failed(db, point_id, str(e))
            return point, None, f"{type(e).__name__}: {e}"
        finally:
            if db is not None:
                db.close()

    if workers <= 1:
        return [_run(i) for i in range(len(points))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run, range(len(points))))
