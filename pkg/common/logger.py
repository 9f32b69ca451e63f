# common/logger.py
import sys
import traceback

from loguru import logger

from common.config import settings

# === 日志开关 ===
# 默认关闭写库；在 .env 里设 ENABLE_DB_LOG=True 即可把错误堆栈同步到账本库
ENABLE_DB_LOG = settings.enable_db_log

logger.remove()
logger.add(
    sys.stderr,
    level=settings.log_level,
    format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | {message}",
    enqueue=False,
)

_EMOJI_MAP = {
    "INFO": "ℹ️", "SUCCESS": "✅", "ERROR": "❌", "WARNING": "⚠️",
    "DEBUG": "🔍", "REQUEST": "📥"
}
# REQUEST 不是 loguru 内置级别，按 INFO 输出
_LEVEL_MAP = {"REQUEST": "INFO"}


def debug_log(message: str, level: str = "INFO"):
    """统一的控制台日志输出"""
    emoji = _EMOJI_MAP.get(level, "•")
    logger.opt(depth=1).log(_LEVEL_MAP.get(level, level), f"{emoji} {message}")


def log_error(source: str, message: str, point_id: str = None, error: Exception = None):
    """
    通用错误记录函数
    :param source: 来源 (如 "Sweep", "CLI")
    :param message: 简短描述
    :param point_id: 关联的扫描点ID (可选)
    :param error: 捕获的 Exception 对象 (可选)
    """
    # --- 1. 无论开关状态，永远打印到控制台 ---
    display_msg = message if message else str(error)
    logger.error(f"❌ [{source}] PointID: {point_id} | {display_msg}")
    if error:
        logger.error(f"   └── Reason: {error}")

    # --- 2. 根据开关决定是否写数据库 ---
    if not ENABLE_DB_LOG:
        return

    # 延迟导入：只有开启写库时才需要建引擎
    from common.database import SessionLocal
    from common.models import SystemLog

    db = SessionLocal()
    try:
        stack_trace = None
        if error:
            stack_trace = "".join(traceback.format_exception(type(error), error, error.__traceback__))
            if not message:
                message = str(error)

        log = SystemLog(
            level="ERROR",
            source=source,
            point_id=point_id,
            message=message,
            stack_trace=stack_trace
        )
        db.add(log)
        db.commit()
        logger.debug(f"   └── [已同步至数据库] ID: {log.id}")
    except Exception as e:
        logger.warning(f"⚠️ 严重：日志写入数据库失败! {e}")
    finally:
        db.close()
