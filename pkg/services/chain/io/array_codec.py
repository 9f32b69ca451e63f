# services/chain/io/array_codec.py
"""
二进制数组格式 (小端)

    4s   magic  b"NNIA"
    H    version
    H    kind   (1=态, 2=算符, 3=谱)
    I    d
    I×d  dims
    H    ndim
    I×ndim shape
    然后是 complex64 原始数据 (实部, 虚部 交替)
"""
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from common.errors import InvalidInputError
from common.logger import debug_log
from common.schemas import DenseState, SiteGeometry

MAGIC = b"NNIA"
VERSION = 1
KIND_STATE, KIND_OPERATOR, KIND_SPECTRUM = 1, 2, 3
_KINDS = {KIND_STATE, KIND_OPERATOR, KIND_SPECTRUM}

_HEAD = struct.Struct("<4sHHI")

PathLike = Union[str, Path]


def encode_array(array: np.ndarray, geometry: SiteGeometry, kind: int) -> bytes:
    if kind not in _KINDS:
        raise InvalidInputError(f"未知数组类型 {kind}")
    arr = np.asarray(array)
    parts = [
        _HEAD.pack(MAGIC, VERSION, kind, geometry.d),
        struct.pack(f"<{geometry.d}I", *geometry.dims),
        struct.pack("<H", arr.ndim),
        struct.pack(f"<{arr.ndim}I", *arr.shape),
        np.ascontiguousarray(arr, dtype="<c8").tobytes(),
    ]
    return b"".join(parts)


def decode_array(blob: bytes) -> Tuple[int, SiteGeometry, np.ndarray]:
    """返回 (kind, geometry, array)；数组以 complex128 返回"""
    try:
        magic, version, kind, d = _HEAD.unpack_from(blob, 0)
        offset = _HEAD.size
        if magic != MAGIC:
            raise InvalidInputError(f"magic 不匹配: {magic!r}")
        if version != VERSION:
            raise InvalidInputError(f"不支持的版本 {version}")
        dims = struct.unpack_from(f"<{d}I", blob, offset)
        offset += 4 * d
        (ndim,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        shape = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += 4 * ndim
    except struct.error as e:
        raise InvalidInputError(f"数组文件头损坏: {e}") from e

    count = int(np.prod(shape, dtype=np.int64))
    if len(blob) - offset != 8 * count:
        raise InvalidInputError(f"数据长度 {len(blob) - offset} 字节与形状 {shape} 不符")
    data = np.frombuffer(blob, dtype="<c8", count=count, offset=offset).astype(np.complex128)
    return kind, SiteGeometry(d=d, dims=tuple(dims)), data.reshape(shape)


def write_array(path: PathLike, array: np.ndarray, geometry: SiteGeometry, kind: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_array(array, geometry, kind))
    debug_log(f"💾 已写出数组 {path} (kind={kind}, shape={np.shape(array)})", "DEBUG")
    return path


def read_array(path: PathLike) -> Tuple[int, SiteGeometry, np.ndarray]:
    return decode_array(Path(path).read_bytes())


def write_state(path: PathLike, state: DenseState) -> Path:
    return write_array(path, state.amplitudes, state.geometry, KIND_STATE)


def read_state(path: PathLike) -> DenseState:
    """complex64 精度有限，读回后重新归一化"""
    kind, geometry, data = read_array(path)
    if kind != KIND_STATE:
        raise InvalidInputError(f"{path} 不是态文件 (kind={kind})")
    return DenseState(geometry=geometry, amplitudes=data.reshape(-1)).normalized()
