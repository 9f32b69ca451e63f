# services/runner/core/ledger.py
from datetime import datetime
from typing import Dict, List, Optional, Tuple

import orjson
from sqlalchemy.orm import Session

from common import models
from common.errors import ConfigError
from common.logger import debug_log, log_error
from common.models import PointStatus


def point_key(point: dict) -> str:
    """参数元组的规范写法 (键排序)，同一 run 内唯一"""
    return orjson.dumps(point, option=orjson.OPT_SORT_KEYS).decode()


def create_run(db: Session, sweep: str, config: dict, points: List[dict]) -> str:
    """建一个批次，并把所有扫描点以 PENDING 插入"""
    run = models.SweepRun(sweep=sweep, config=config, status="PROCESSING")
    db.add(run)
    db.flush()
    for point in points:
        db.add(models.SweepPoint(run_id=run.run_id, point_key=point_key(point), status=PointStatus.PENDING))
    db.commit()
    debug_log(f"📝 新建扫描批次 {run.run_id}: {len(points)} 个点", "INFO")
    return run.run_id


def load_points(db: Session, run_id: str) -> Dict[str, Tuple[str, int, Optional[dict]]]:
    """point_key → (point_id, status, result)，脱离会话后也能用"""
    rows = db.query(models.SweepPoint).filter(models.SweepPoint.run_id == run_id).all()
    return {row.point_key: (row.point_id, int(row.status), row.result) for row in rows}


def recover_processing_points(db: Session, run_id: str) -> int:
    """
    崩溃恢复：上次中断时停在 PROCESSING 的点重置为 PENDING
    FAILED 的点也一并重试
    """
    try:
        count = db.query(models.SweepPoint).filter(
            models.SweepPoint.run_id == run_id,
            models.SweepPoint.status.in_([PointStatus.PROCESSING, PointStatus.FAILED]),
        ).update({"status": PointStatus.PENDING, "error_msg": None}, synchronize_session=False)
        db.commit()
        if count:
            debug_log(f"🔄 批次 {run_id}: {count} 个未完成的点已重置为 PENDING", "WARNING")
        return count
    except Exception as e:
        db.rollback()
        log_error("Ledger", f"恢复扫描点失败: {e}", run_id, e)
        return 0


def claim_point(db: Session, point_id: str) -> bool:
    """
    🔥 幂等认领：UPDATE ... WHERE status=PENDING
    只有一个 worker 能把同一个点改成 PROCESSING
    """
    try:
        result = db.query(models.SweepPoint).filter(
            models.SweepPoint.point_id == point_id,
            models.SweepPoint.status == PointStatus.PENDING,
        ).update({"status": PointStatus.PROCESSING}, synchronize_session=False)
        db.commit()

        if result == 1:
            debug_log(f"🔒 锁定扫描点: {point_id} -> PROCESSING", "DEBUG")
            return True
        debug_log(f"✋ 扫描点已被认领或已完成: {point_id}", "DEBUG")
        return False

    except Exception as e:
        db.rollback()
        log_error("Ledger", f"认领扫描点时数据库错误: {e}", point_id)
        return False


def mark_point_failed(db: Session, point_id: str, error_msg: str):
    try:
        point = db.query(models.SweepPoint).filter(models.SweepPoint.point_id == point_id).first()
        if point:
            point.status = PointStatus.FAILED
            point.error_msg = str(error_msg)
            db.commit()
            debug_log(f"💾 扫描点已标记为失败: {point_id} - {error_msg}", "WARNING")
        else:
            debug_log(f"标记失败时未找到扫描点: {point_id}", "WARNING")
    except Exception as e:
        db.rollback()
        log_error("Ledger", f"更新失败状态时数据库错误: {e}", point_id)


def finish_point_success(db: Session, point_id: str, result: dict, cost_time: float) -> bool:
    try:
        point = db.query(models.SweepPoint).filter(models.SweepPoint.point_id == point_id).first()
        if not point:
            debug_log(f"保存结果时未找到扫描点: {point_id}", "WARNING")
            return False
        point.result = result
        point.status = PointStatus.SUCCESS
        point.cost_time = cost_time
        point.updated_at = datetime.now()
        db.commit()
        debug_log(f"扫描点完成: {point_id} (耗时 {cost_time}s)", "SUCCESS")
        return True
    except Exception as e:
        db.rollback()
        log_error("Ledger", f"保存扫描点结果失败: {e}", point_id)
        return False


def finish_run(db: Session, run_id: str, status: str):
    run = db.query(models.SweepRun).filter(models.SweepRun.run_id == run_id).first()
    if run:
        run.status = status
        db.commit()


def open_run(db: Session, sweep: str, config: dict, points: List[dict], resume: Optional[str] = None) -> Tuple[str, Dict[str, Tuple[str, int, Optional[dict]]]]:
    """新建或续跑一个批次；续跑时先做崩溃恢复，再补上缺失的点"""
    if resume is None:
        run_id = create_run(db, sweep, config, points)
        return run_id, load_points(db, run_id)

    run = db.query(models.SweepRun).filter(models.SweepRun.run_id == resume).first()
    if run is None:
        raise ConfigError(f"找不到批次 {resume}", field="resume")
    recover_processing_points(db, resume)
    existing = load_points(db, resume)
    for point in points:
        if point_key(point) not in existing:
            db.add(models.SweepPoint(run_id=resume, point_key=point_key(point), status=PointStatus.PENDING))
    db.commit()
    return resume, load_points(db, resume)
