# services/runner/core/report.py
"""
报告文件：<sweep>.csv，<sweep>_summary.txt (按键排序的 key: value)，<sweep>_decay.csv
只写确定性的内容，耗时只进日志
"""
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from services.chain.io.csv_codec import format_value, write_rows


def write_sweep_csv(out_dir: Path, name: str, columns: Sequence[str], rows: List[dict]) -> Path:
    return write_rows(Path(out_dir) / f"{name}.csv", columns, ([row.get(c) for c in columns] for row in rows))


def write_summary(out_dir: Path, name: str, summary: Dict[str, object]) -> Path:
    path = Path(out_dir) / f"{name}_summary.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}: {format_value(summary[key])}" for key in sorted(summary)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_report(
        out_dir: Path,
        name: str,
        columns: Sequence[str],
        rows: List[dict],
        summary: Dict[str, object],
        decay: Optional[List[dict]] = None,
        decay_columns: Sequence[str] = (),
) -> List[Path]:
    files = [write_sweep_csv(out_dir, name, columns, rows), write_summary(out_dir, name, summary)]
    if decay is not None:
        files.append(write_rows(Path(out_dir) / f"{name}_decay.csv", decay_columns, ([r.get(c) for c in decay_columns] for r in decay)))
    return files
