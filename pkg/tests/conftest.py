# tests/conftest.py
import os
import sys

import numpy as np
import pytest
from sqlalchemy.orm import sessionmaker

# 添加项目根目录到路径
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from common import models  # noqa: E402,F401
from common.database import Base, build_engine  # noqa: E402
from common.schemas import DenseState, SiteGeometry  # noqa: E402
from services.chain.core.nni_hamiltonian import build_model, diagonalize  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def bell_pair():
    amps = np.array([1, 0, 0, 1], dtype=np.complex128) / np.sqrt(2.0)
    return DenseState(geometry=SiteGeometry.uniform(2, 2), amplitudes=amps)


@pytest.fixture(scope="session")
def tfi_d6():
    """有能隙的 TFI 链 (h=2, g=1)，d=6，带全谱"""
    spec = build_model("tfi", 6, {"h": 2.0, "g": 1.0})
    return spec, diagonalize(spec)


@pytest.fixture
def ledger_factory(tmp_path):
    """临时文件上的 sqlite 账本，多线程可共享"""
    engine = build_engine(f"sqlite:///{tmp_path / 'ledger.db'}")
    Base.metadata.create_all(bind=engine)
    yield sessionmaker(autocommit=False, autoflush=False, bind=engine)
    engine.dispose()
