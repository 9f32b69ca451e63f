# services/runner/cli.py
"""
命令行入口

    python -m services.runner.cli sweep --config exp.env [--workers N] [--seed S] [--resume RUN_ID]
    python -m services.runner.cli check --config exp.env
    python -m services.runner.cli fit --input results/obolor_sweep.csv --x l --y error
    python -m services.runner.cli export --model-config model.env --what ground-state --out psi.bin

退出码：0 成功；1 检查失败或有点失败；2 配置错误；3 超出资源上限
"""
import functools
import sys

import click

from common.errors import ChainError, ConfigError, ResourceLimitError
from common.logger import log_error

EXIT_FAILED, EXIT_CONFIG, EXIT_RESOURCE = 1, 2, 3


def _guarded(fn):
    """统一异常处理：按错误类型映射退出码"""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return fn(*args, **kwargs)
        except ConfigError as e:
            field = f" [{e.field}]" if e.field else ""
            click.echo(f"❌ 配置错误{field}: {e}", err=True)
            ctx.exit(EXIT_CONFIG)
        except ResourceLimitError as e:
            click.echo(f"❌ 超出资源上限: {e}", err=True)
            ctx.exit(EXIT_RESOURCE)
        except ChainError as e:
            log_error("CLI", str(e), None, e)
            ctx.exit(EXIT_FAILED)

    return wrapper


def _finish(ctx: click.Context, outcome):
    for path in outcome.files:
        click.echo(f"📄 {path}")
    if outcome.run_id:
        click.echo(f"run_id: {outcome.run_id}")
    for name in outcome.failed:
        click.echo(f"FAILED {name}", err=True)
    ctx.exit(outcome.status)


@click.group()
def main():
    """NNI 链面积律数值实验"""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--workers", type=click.IntRange(min=1), default=None, help="覆盖配置里的 WORKERS")
@click.option("--seed", type=int, default=None, help="覆盖配置里的 SEED")
@click.option("--resume", "resume", default=None, help="续跑账本里的批次")
@click.pass_context
@_guarded
def sweep(ctx, config_path, workers, seed, resume):
    from services.runner.core import load_experiment_config, run

    config = load_experiment_config(config_path)
    overrides = {k: v for k, v in (("workers", workers), ("seed", seed)) if v is not None}
    if overrides:
        config = config.model_copy(update=overrides)
    _finish(ctx, run(config, resume=resume))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--workers", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
@_guarded
def check(ctx, config_path, workers, seed):
    from services.runner.core import load_experiment_config, run_checks

    config = load_experiment_config(config_path)
    overrides = {k: v for k, v in (("workers", workers), ("seed", seed)) if v is not None}
    config = config.model_copy(update={"sweep": "check", **overrides})
    _finish(ctx, run_checks(config))


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--x", "x_col", required=True)
@click.option("--y", "y_col", required=True)
@_guarded
def fit(input_path, x_col, y_col):
    """对 CSV 两列做 log y = rate·x + b 拟合 (跳过 na)"""
    from services.chain.io.csv_codec import NA, read_columns
    from services.runner.core import fit_decay

    columns = read_columns(input_path)
    for col in (x_col, y_col):
        if col not in columns:
            raise ConfigError(f"CSV 中没有列 {col}，可选: {list(columns)}", field=col)
    points = []
    for x, y in zip(columns[x_col], columns[y_col]):
        if NA in (x, y):
            continue
        try:
            points.append((float(x), float(y)))
        except ValueError:
            raise ConfigError(f"列 {x_col}/{y_col} 含非数值: {x!r}, {y!r}", field=y_col)
    result = fit_decay(points)
    click.echo(f"rate: {result.rate!r}")
    click.echo(f"intercept: {result.intercept!r}")
    click.echo(f"residual: {result.residual!r}")


@main.command()
@click.option("--model-config", "model_config", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--what", type=click.Choice(["hamiltonian", "ground-state", "spectrum"]), required=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_guarded
def export(model_config, what, out_path):
    """把模型的哈密顿量 / 基态 / 能谱写成二进制数组"""
    from services.chain.core.nni_hamiltonian import assemble_dense, diagonalize, ground_state
    from services.chain.io.array_codec import KIND_OPERATOR, KIND_SPECTRUM, write_array, write_state
    from services.chain.io.spec_codec import load_model_config

    spec = load_model_config(model_config)
    if what == "hamiltonian":
        path = write_array(out_path, assemble_dense(spec), spec.geometry, KIND_OPERATOR)
    elif what == "ground-state":
        path = write_state(out_path, ground_state(spec).state)
    else:
        eig = diagonalize(spec)
        path = write_array(out_path, eig.eigenvalues + eig.shift, spec.geometry, KIND_SPECTRUM)
    click.echo(f"📄 {path}")


if __name__ == "__main__":
    sys.exit(main())
