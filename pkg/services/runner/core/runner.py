# services/runner/core/runner.py
from pathlib import Path
from typing import List, Optional

from common.errors import ConfigError
from common.logger import debug_log
from common.schemas import ExperimentConfig, RunOutcome
from services.runner.core.acceptance import CHECK_COLUMNS, CHECKS, check_rows, select_checks
from services.runner.core.dispatch import dispatch_points
from services.runner.core.ledger import finish_run, open_run, point_key
from services.runner.core.report import write_report
from services.runner.core.sweeps import COLUMNS, DECAY_COLUMNS, SWEEPS


def _open_ledger(config: ExperimentConfig, points: List[dict], resume: Optional[str], session_factory):
    from common.database import Base, SessionLocal

    factory = session_factory or SessionLocal
    Base.metadata.create_all(bind=factory.kw["bind"])
    db = factory()
    try:
        run_id, state = open_run(db, config.sweep, config.model_dump(mode="json"), points, resume)
    finally:
        db.close()
    return factory, run_id, state


def run_checks(config: ExperimentConfig) -> RunOutcome:
    """验收套件：每个检查是一个点，check.csv 每个指标一行"""
    names = select_checks(config)

    def compute(point, rng):
        result = CHECKS[point["check"]](rng, config.suite_scale)
        debug_log(f"检查 {result.name}: {'通过' if result.passed else '失败'} ({result.detail})", "SUCCESS" if result.passed else "ERROR")
        return check_rows(result)

    results = dispatch_points([{"check": n} for n in names], compute, config.workers, config.seed)
    rows = [r for _, rs, _ in results if rs for r in rs]
    failed = sorted({r["check"] for r in rows if not r["passed"]} | {p["check"] for p, rs, _ in results if rs is None})
    summary = {f"{name}.passed": name not in failed for name in names}
    summary["checks.failed"] = len(failed)
    files = write_report(config.output_dir, "check", CHECK_COLUMNS, rows, summary)
    return RunOutcome(status=1 if failed else 0, files=tuple(files), failed=tuple(failed))


def run(config: ExperimentConfig, resume: Optional[str] = None, session_factory=None) -> RunOutcome:
    """
    🚀 执行一次扫描
    点生成 -> (账本) -> 线程池计算 -> 归并 -> 写报告
    """
    if config.sweep == "check":
        return run_checks(config)

    points_fn, compute_fn, reduce_fn = SWEEPS[config.sweep]
    points = points_fn(config)
    debug_log(f"开始 {config.sweep}: {len(points)} 个点, workers={config.workers}, seed={config.seed}", "REQUEST")

    # 1. 账本
    factory, run_id, ledger_state = None, None, None
    if config.ledger:
        factory, run_id, ledger_state = _open_ledger(config, points, resume, session_factory)
    elif resume is not None:
        raise ConfigError("--resume 需要在配置里打开 LEDGER=true", field="LEDGER")

    # 2. 计算
    results = dispatch_points(points, compute_fn(config), config.workers, config.seed, factory, ledger_state)
    rows = [r for _, rs, _ in results if rs for r in rs]
    failed = [f"{point_key(p)}: {err}" for p, rs, err in results if err]

    # 3. 归并与报告
    summary, decay = reduce_fn(config, rows)
    summary["points.total"] = len(points)
    summary["points.failed"] = len(failed)
    files = write_report(Path(config.output_dir), config.sweep, COLUMNS[config.sweep], rows, summary, decay, DECAY_COLUMNS)

    if factory is not None:
        db = factory()
        try:
            finish_run(db, run_id, "FAILED" if failed else "SUCCESS")
        finally:
            db.close()
    if failed:
        debug_log(f"{config.sweep}: {len(failed)} 个点失败", "WARNING")
    else:
        debug_log(f"{config.sweep} 完成，报告写入 {config.output_dir}", "SUCCESS")
    return RunOutcome(status=1 if failed else 0, files=tuple(files), failed=tuple(failed), run_id=run_id)
