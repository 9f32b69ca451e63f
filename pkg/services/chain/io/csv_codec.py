# services/chain/io/csv_codec.py
"""
CSV 读写：UTF-8，带表头，浮点用 repr 精确输出，不适用的列写 na
"""
import csv
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from common.errors import InvalidInputError
from common.schemas import EntropyValue, ProbabilitySequence, SchmidtSpectrum

NA = "na"

PathLike = Union[str, Path]


def format_value(value) -> str:
    if value is None:
        return NA
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise InvalidInputError(f"行长度 {len(row)} 与表头 {len(header)} 不符")
            writer.writerow([format_value(v) for v in row])
    return path


def read_columns(path: PathLike) -> dict:
    """按列读取，值保持字符串 (na 原样保留)"""
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise InvalidInputError(f"{path} 没有表头")
        columns = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name in reader.fieldnames:
                columns[name].append(row[name])
    return columns


def _floats(values: List[str], name: str) -> np.ndarray:
    try:
        return np.array([float("nan") if v == NA else float(v) for v in values], dtype=np.float64)
    except ValueError as e:
        raise InvalidInputError(f"列 {name} 含非数值: {e}") from e


def write_spectrum_csv(path: PathLike, spectrum: SchmidtSpectrum) -> Path:
    return write_rows(path, ("k", "sigma"), ((k, float(s)) for k, s in enumerate(spectrum.values, start=1)))


def read_spectrum_csv(path: PathLike, cut: int = 1) -> SchmidtSpectrum:
    columns = read_columns(path)
    if "sigma" not in columns:
        raise InvalidInputError(f"{path} 缺少 sigma 列")
    return SchmidtSpectrum(cut=cut, values=_floats(columns["sigma"], "sigma"))


def write_probability_csv(path: PathLike, p: ProbabilitySequence) -> Path:
    return write_rows(path, ("k", "value"), ((k, float(v)) for k, v in enumerate(p.values, start=1)))


def read_probability_csv(path: PathLike) -> ProbabilitySequence:
    columns = read_columns(path)
    if "value" not in columns:
        raise InvalidInputError(f"{path} 缺少 value 列")
    return ProbabilitySequence(values=_floats(columns["value"], "value"))


def write_entropy_rows(path: PathLike, entropies: Iterable[EntropyValue]) -> Path:
    return write_rows(path, ("alpha", "value_bits"), ((e.alpha, e.value) for e in entropies))
