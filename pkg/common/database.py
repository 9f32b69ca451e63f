# common/database.py
import orjson
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker, declarative_base

from common.config import settings


def _dumps(value) -> str:
    return orjson.dumps(value, option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY).decode()


def build_engine(url: str):
    """sqlite 需要关闭同线程检查，否则工作线程池无法共享引擎；JSON 列统一走 orjson"""
    connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
    return create_engine(
        url,
        pool_pre_ping=True,
        connect_args=connect_args,
        json_serializer=_dumps,
        json_deserializer=orjson.loads,
    )


engine = build_engine(settings.ledger_url)
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)
Base = declarative_base()
