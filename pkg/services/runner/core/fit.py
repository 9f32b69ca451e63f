# services/runner/core/fit.py
from typing import Iterable, Tuple

import numpy as np

from common.errors import InvalidInputError
from common.logger import debug_log
from common.schemas import DecayFit


def fit_decay(points: Iterable[Tuple[float, float]]) -> DecayFit:
    """
    log y = rate·x + intercept 的最小二乘
    residual 是对数尺度上的最大绝对残差；rate 的符号有意义 (负数表示衰减)
    """
    pts = np.asarray(list(points), dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise InvalidInputError(f"拟合至少需要 3 个点, 实际 {pts.shape[0]}")
    x, y = pts[:, 0], pts[:, 1]
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("拟合数据含 nan/inf")
    if np.any(y <= 0):
        raise InvalidInputError("拟合要求 y > 0")
    if np.ptp(x) == 0:
        raise InvalidInputError("x 全部相同，无法拟合斜率")
    log_y = np.log(y)
    rate, intercept = np.polyfit(x, log_y, 1)
    residual = float(np.max(np.abs(log_y - (rate * x + intercept))))
    debug_log(f"衰减拟合: rate={rate:.6g}, intercept={intercept:.6g}, residual={residual:.3e}", "DEBUG")
    return DecayFit(rate=float(rate), intercept=float(intercept), residual=residual)


def fitted_line(fit: DecayFit, x) -> np.ndarray:
    return np.exp(fit.rate * np.asarray(x, dtype=np.float64) + fit.intercept)
