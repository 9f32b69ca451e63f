# tests/test_runner.py
import numpy as np
import pytest
from click.testing import CliRunner

from common.errors import ConfigError, InsufficientDataError, InvalidInputError, ResourceLimitError
from services.chain.io.csv_codec import read_columns, write_rows
from services.chain.io.array_codec import read_state
from services.runner.cli import main
from services.chain.core.arealaw_analysis import relent_check
from services.chain.core.locality_filters import approximate_ground_projector
from services.runner.core.acceptance import check_gaussian_projector, check_obolor_decay, relent_verdict, select_checks
from services.runner.core.config_loader import parse_experiment_config
from services.runner.core.dispatch import dispatch_points
from services.runner.core.fit import fit_decay


def _write_config(tmp_path, body, name="exp.env"):
    path = tmp_path / name
    path.write_text(body + f"\nOUTPUT_DIR={tmp_path / 'out'}\n", encoding="utf-8")
    return path


# --- 配置 ---

def test_config_defaults_and_tolerances():
    config = parse_experiment_config("SWEEP=obolor_sweep\nMODEL=tfi\nMODEL_H=3\nD_GRID=6,8\nTOL_SATURATION=0.01\n")
    assert config.model.params == {"h": 3.0}
    assert config.d_grid == [6, 8]
    assert config.l_grid == [0, 1, 2]
    assert config.tolerance("saturation", 0.05) == 0.01
    assert config.workers == 1 and not config.ledger


@pytest.mark.parametrize(
    "text, field",
    [
        ("MODEL=tfi\n", "SWEEP"),
        ("SWEEP=entropy_sweep\nCOLOUR=red\n", "COLOUR"),
        ("SWEEP=entropy_sweep\nD_GRID=6,x\n", "D_GRID"),
        ("SWEEP=entropy_sweep\nWORKERS=0\n", "WORKERS"),
        ("SWEEP=entropy_sweep\nMODEL=tfi\nMODEL_DELTA_Z=1\n", "MODEL_DELTA_Z"),
        ("SWEEP=entropy_sweep\nLEDGER=maybe\n", "LEDGER"),
        ("SWEEP=nonsense\n", "SWEEP"),
    ],
)
def test_config_errors_name_the_key(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_experiment_config(text)
    assert exc.value.field == field


def test_select_checks_numbers_and_names():
    config = parse_experiment_config("SWEEP=check\nCHECKS=12,example_state,7\n")
    assert select_checks(config) == ["example_state", "gibbs_linear"]
    with pytest.raises(ConfigError) as exc:
        select_checks(parse_experiment_config("SWEEP=check\nCHECKS=99\n"))
    assert exc.value.field == "CHECKS"


# --- 分发 ---

def test_dispatch_isolates_point_failures():
    def compute(point, rng):
        if point["x"] == 2:
            raise InsufficientDataError("点 2 故意失败")
        return [{"x": point["x"], "u": float(rng.random())}]

    points = [{"x": x} for x in range(4)]
    serial = dispatch_points(points, compute, workers=1, seed=7)
    pooled = dispatch_points(points, compute, workers=3, seed=7)
    assert [p for p, _, _ in serial] == points
    assert serial[2][1] is None and "InsufficientDataError" in serial[2][2]
    assert all(err is None for i, (_, _, err) in enumerate(serial) if i != 2)
    # 每个点的随机数流只取决于 (seed, index)
    assert [rows for _, rows, _ in serial] == [rows for _, rows, _ in pooled]
    assert serial[0][1][0]["u"] == float(np.random.default_rng([7, 0]).random())


def test_dispatch_propagates_resource_limit():
    def compute(point, rng):
        raise ResourceLimitError("太大")

    with pytest.raises(ResourceLimitError):
        dispatch_points([{"x": 1}, {"x": 2}], compute, workers=2)


def test_fit_decay():
    x = np.arange(5, dtype=np.float64)
    result = fit_decay(zip(x, 3.0 * np.exp(-0.7 * x)))
    assert result.rate == pytest.approx(-0.7)
    assert result.intercept == pytest.approx(np.log(3.0))
    assert result.residual < 1e-12
    assert fit_decay([(0, 2.0), (1, 2.0), (2, 2.0)]).rate == pytest.approx(0.0, abs=1e-12)
    for bad in ([(0, 1), (1, 0.5)], [(0, 1), (1, 0), (2, 1)], [(1, 1), (1, 2), (1, 3)]):
        with pytest.raises(InvalidInputError):
            fit_decay(bad)


# --- 命令行 ---

def test_cli_malformed_config_exits_2(tmp_path):
    path = _write_config(tmp_path, "SWEEP=entropy_sweep\nD_GRID=four")
    result = CliRunner().invoke(main, ["sweep", "--config", str(path)])
    assert result.exit_code == 2
    assert "D_GRID" in result.output


def test_cli_entropy_sweep(tmp_path):
    path = _write_config(tmp_path, "SWEEP=entropy_sweep\nMODEL=tfi\nMODEL_H=2\nMODEL_G=1\nD_GRID=4")
    result = CliRunner().invoke(main, ["sweep", "--config", str(path)])
    print(result.output)
    assert result.exit_code == 0, result.output

    out = tmp_path / "out"
    columns = read_columns(out / "entropy_sweep.csv")
    assert list(columns) == ["model", "d", "j", "l", "q", "h", "entropy", "single_site_max"]
    assert columns["j"] == ["1", "2", "3"]
    assert set(columns["l"]) == {"na"}
    summary = (out / "entropy_sweep_summary.txt").read_text(encoding="utf-8").splitlines()
    assert "points.total: 1" in summary
    assert "points.failed: 0" in summary
    assert summary == sorted(summary)


def test_cli_bounds_suite_is_deterministic(tmp_path):
    outputs = []
    for workers in ("1", "2"):
        path = _write_config(tmp_path, "SWEEP=bounds_suite\nSEED=99\nSUITE_SCALE=0.01", name=f"w{workers}.env")
        result = CliRunner().invoke(main, ["sweep", "--config", str(path), "--workers", workers])
        assert result.exit_code == 0, result.output
        outputs.append((tmp_path / "out" / "bounds_suite.csv").read_bytes())
    assert outputs[0] == outputs[1]
    assert outputs[0].count(b"\n") == 1 + 7


def test_cli_fit_command(tmp_path):
    x = np.arange(6)
    path = write_rows(tmp_path / "decay.csv", ("l", "error"), [(int(v), float(np.exp(-2.0 * v))) for v in x] + [(6, None)])
    result = CliRunner().invoke(main, ["fit", "--input", str(path), "--x", "l", "--y", "error"])
    assert result.exit_code == 0, result.output
    rate_line = next(line for line in result.output.splitlines() if line.startswith("rate:"))
    rate = float(rate_line.split(":")[1])
    assert rate == pytest.approx(-2.0)

    missing = CliRunner().invoke(main, ["fit", "--input", str(path), "--x", "l", "--y", "nope"])
    assert missing.exit_code == 2


def test_cli_resume_needs_ledger(tmp_path):
    path = _write_config(tmp_path, "SWEEP=entropy_sweep\nD_GRID=4")
    result = CliRunner().invoke(main, ["sweep", "--config", str(path), "--resume", "abc"])
    assert result.exit_code == 2
    assert "LEDGER" in result.output


def test_cli_export_ground_state(tmp_path):
    model = tmp_path / "model.env"
    model.write_text("MODEL=tfi\nD=4\nMODEL_H=2.0\n", encoding="utf-8")
    out = tmp_path / "psi.bin"
    result = CliRunner().invoke(main, ["export", "--model-config", str(model), "--what", "ground-state", "--out", str(out)])
    assert result.exit_code == 0, result.output
    state = read_state(out)
    assert state.geometry.d == 4
    assert state.norm == pytest.approx(1.0)


def test_cli_check_subset(tmp_path):
    path = _write_config(tmp_path, "SWEEP=check\nCHECKS=7,12")
    result = CliRunner().invoke(main, ["check", "--config", str(path)])
    assert result.exit_code == 0, result.output
    columns = read_columns(tmp_path / "out" / "check.csv")
    assert set(columns["check"]) == {"example_state", "gibbs_linear"}
    assert set(columns["passed"]) == {"true"}


def test_cli_check_is_byte_identical_across_runs(tmp_path):
    outputs = []
    for run, workers in (("a", "1"), ("b", "2")):
        path = tmp_path / f"{run}.env"
        path.write_text(
            f"SWEEP=check\nCHECKS=5,6,7\nSEED=4242\nSUITE_SCALE=0.01\nOUTPUT_DIR={tmp_path / run}\n", encoding="utf-8"
        )
        result = CliRunner().invoke(main, ["check", "--config", str(path), "--workers", workers])
        assert result.exit_code == 0, result.output
        outputs.append((tmp_path / run / "check.csv").read_bytes())
    assert outputs[0] == outputs[1]
    assert b"renyi_sandwich" in outputs[0]


# --- 验收判定 ---

def test_relent_verdict_needs_an_applicable_point(tfi_d6):
    spec, eig = tfi_d6
    record = relent_check(eig.ground_state, approximate_ground_projector(spec, eig, 3, 0), 3, 0)
    skipped = record.model_copy(update={
        "bound_check": record.bound_check.model_copy(update={"applicable": False, "satisfied": False}),
        "lowerb": record.lowerb.model_copy(update={"satisfied": True}),
    })
    verdict = relent_verdict([skipped, skipped])
    assert not verdict.passed
    assert verdict.metrics["applicable"] == 0 and verdict.metrics["not_applicable"] == 2

    checked = skipped.model_copy(update={
        "bound_check": record.bound_check.model_copy(update={"applicable": True, "satisfied": True, "slack": 0.2}),
    })
    verdict = relent_verdict([skipped, checked])
    assert verdict.passed
    assert verdict.metrics["applicable"] == 1 and verdict.metrics["min_slack"] == pytest.approx(0.2)

    broken = checked.model_copy(update={
        "bound_check": checked.bound_check.model_copy(update={"satisfied": False, "slack": -0.1}),
    })
    assert not relent_verdict([checked, broken]).passed


def test_gaussian_projector_check_passes():
    result = check_gaussian_projector(np.random.default_rng(0), 1.0)
    assert result.passed, result.detail


def test_obolor_error_decays_with_l():
    result = check_obolor_decay(np.random.default_rng(0), 1.0)
    print(f"📊 {result.detail}, 误差 {[result.metrics[k] for k in sorted(result.metrics) if k.startswith('error_l')]}")
    assert result.metrics["slope"] < 0
    assert result.metrics["max_norm"] <= 1 + 1e-8
    assert result.passed
