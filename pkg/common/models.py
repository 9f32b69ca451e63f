# models.py
import uuid
from datetime import datetime
from enum import IntEnum

from sqlalchemy import Column, String, DateTime, Text, ForeignKey, JSON, Float, Integer, BigInteger
from sqlalchemy.orm import relationship

from common.database import Base


class SystemLog(Base):
    """
    系统日志表
    用于记录详细的报错堆栈，方便排查失败的扫描点
    """
    __tablename__ = "sys_logs"
    id = Column(BigInteger().with_variant(Integer, "sqlite"), primary_key=True, index=True, autoincrement=True)
    level = Column(String, default="INFO", index=True)
    source = Column(String, index=True)
    point_id = Column(String, index=True, nullable=True)
    message = Column(Text)
    stack_trace = Column(Text, nullable=True)
    created_at = Column(DateTime, default=datetime.now)


class SweepRun(Base):
    """一次 sweep/check 调用算一个批次"""
    __tablename__ = "sweep_runs"

    id = Column(BigInteger().with_variant(Integer, "sqlite"), primary_key=True, index=True, autoincrement=True)
    run_id = Column(String, unique=True, index=True, default=lambda: str(uuid.uuid4()))
    sweep = Column(String)
    config = Column(JSON, nullable=True)
    status = Column(String, default="PROCESSING")
    created_at = Column(DateTime, default=datetime.now)
    updated_at = Column(DateTime, default=datetime.now, onupdate=datetime.now)

    points = relationship("SweepPoint", back_populates="run")


class PointStatus(IntEnum):
    PENDING = 0
    SUCCESS = 1
    FAILED = 2
    PROCESSING = 3


class SweepPoint(Base):
    __tablename__ = "sweep_points"

    id = Column(BigInteger().with_variant(Integer, "sqlite"), primary_key=True, index=True, autoincrement=True)
    point_id = Column(String, unique=True, index=True, default=lambda: str(uuid.uuid4()))
    run_id = Column(String, ForeignKey("sweep_runs.run_id"), index=True)

    # 参数元组的规范 JSON (orjson, 键排序)，同一 run 内唯一
    point_key = Column(String, index=True)
    status = Column(Integer, default=PointStatus.PENDING, index=True)
    result = Column(JSON, nullable=True)
    error_msg = Column(Text, nullable=True)
    cost_time = Column(Float, nullable=True)
    created_at = Column(DateTime, default=datetime.now)
    updated_at = Column(DateTime, default=datetime.now, onupdate=datetime.now)

    run = relationship("SweepRun", back_populates="points")
