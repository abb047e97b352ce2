import json
import shutil

import pandas as pd
import pytest

from src.cli import MfoCLI, error_payload, parse_flags
from src.errors import DimensionMismatchError
from tests.conftest import CONFIGS


def run(*argv) -> int:
    return MfoCLI().run(list(argv))


def last_error(capsys) -> dict:
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A config copy, a small reaching dataset and a one-epoch model"""
    root = tmp_path_factory.mktemp("mfo")
    shutil.copytree(CONFIGS, root / "configs")
    patch = pytest.MonkeyPatch()
    patch.chdir(root)
    patch.setenv("MFO_CONFIG_DIR", str(root / "configs"))
    patch.setenv("MFO_HOME", str(root / "home"))
    assert run("synth", "--count", "6", "--duration", "2.5", "--workers", "1") == 0
    assert run("train", "--epochs", "1", "--hidden-size", "8") == 0
    yield root
    patch.undo()


def test_parse_flags():
    positional, flags = parse_flags(["a", "--epochs", "3", "--fast", "--hidden-size=8", "--goal", "0,1,2"])
    assert positional == ["a"]
    assert flags == {"epochs": "3", "fast": True, "hidden_size": "8", "goal": "0,1,2"}


def test_error_payload():
    payload = error_payload(DimensionMismatchError("bad width"))
    assert payload == {"error": "dimension-mismatch", "type": "DimensionMismatchError", "message": "bad width"}
    assert error_payload(RuntimeError("boom"))["error"] == "error"


def test_synth_writes_a_dataset_and_manifest(workspace):
    dataset = workspace / "runs" / "synth" / "dataset"
    assert len(list(dataset.glob("*.csv"))) == 6
    manifest = json.loads((workspace / "runs" / "synth" / "manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 7
    assert manifest["overrides"] == {"synthetic.count": 6, "synthetic.duration_s": 2.5, "synthetic.workers": 1}
    assert "dataset/dataset.json" in manifest["artifacts"]
    assert not [p for p in (workspace / "runs").iterdir() if p.name.startswith(".")]


def test_train_writes_model_and_loss_curve(workspace):
    train_dir = workspace / "runs" / "train"
    assert (train_dir / "model.mfo").is_file()
    curve = pd.read_csv(train_dir / "loss_curve.csv")
    assert list(curve["epoch"]) == [0, 1]
    manifest = json.loads((train_dir / "manifest.json").read_text())
    assert set(manifest["inputs"]) == {"data"}
    assert "skeletons/default.json" in manifest["configs"]


def test_eval_reports_eight_horizons(workspace):
    assert run("eval", "--max-samples", "1") == 0
    report = pd.read_csv(workspace / "runs" / "eval" / "eval_report.csv", index_col="method")
    assert list(report.columns) == ["125", "250", "375", "500", "625", "750", "875", "1000"]
    assert {"zerovel", "model", "ours g", "interp (w)"} <= set(report.index)
    manifest = json.loads((workspace / "runs" / "eval" / "manifest.json").read_text())
    assert set(manifest["inputs"]) == {"model", "data"}
    assert "objectives/reach_goal.json" in manifest["configs"]


def test_predict(workspace):
    assert run("predict", "--data", "runs/synth/dataset", "--horizon", "5") == 0
    prediction = pd.read_csv(workspace / "runs" / "predict" / "prediction.csv")
    assert len(prediction) == 5


def test_optimize_trace_export_and_rerun(workspace):
    assert run("optimize", "--data", "runs/synth/dataset", "--index", "0", "--horizon", "10") == 0
    first = workspace / "runs" / "optimize"
    result = json.loads((first / "result.json").read_text())
    assert result["horizon"] == 10
    assert result["goal_error"] is not None
    assert len(pd.read_csv(first / "human.csv")) == 10

    assert run("trace-export", "--run", "runs/optimize") == 0
    trace = pd.read_csv(workspace / "runs" / "trace-export" / "trace.csv")
    assert len(trace) == result["iterations"] + 1
    assert set(pd.read_csv(workspace / "runs" / "trace-export" / "terms.csv")["term"]) == set(result["terms"])

    assert run("rerun", "--manifest", "runs/optimize", "--out", "runs/optimize-again") == 0
    again = workspace / "runs" / "optimize-again"
    for name in ("human.csv", "delta.csv"):
        assert (again / name).read_bytes() == (first / name).read_bytes()


def test_horizon_sweep(workspace):
    assert run("optimize", "--data", "runs/synth/dataset", "--horizons", "5,10", "--out", "runs/sweep") == 0
    assert len(pd.read_csv(workspace / "runs" / "sweep" / "h5" / "human.csv")) == 5
    assert len(pd.read_csv(workspace / "runs" / "sweep" / "h10" / "delta.csv")) == 10
    assert run("trace-export", "--run", "runs/sweep", "--out", "runs/sweep-trace") == 0
    trace = pd.read_csv(workspace / "runs" / "sweep-trace" / "trace.csv")
    assert set(trace["horizon"]) == {5, 10}


@pytest.mark.slow
def test_plan_joint_with_the_walking_project(workspace):
    assert run("plan-joint", "--project", "walking", "--model", "runs/train/model.mfo",
               "--data", "runs/synth/dataset", "--horizon", "10", "--out", "runs/joint") == 0
    joint = workspace / "runs" / "joint"
    assert len(pd.read_csv(joint / "robot.csv")) == len(pd.read_csv(joint / "human.csv")) == 10
    result = json.loads((joint / "result.json").read_text())
    assert result["min_separation"] >= 0.0
    assert result["robot_goal_error"] is not None
    assert json.loads((joint / "manifest.json").read_text())["project"] == "walking"


def test_missing_model_fails_without_output(workspace, capsys):
    code = run("optimize", "--model", "runs/absent.mfo", "--data", "runs/synth/dataset", "--out", "runs/failed")
    assert code == 2
    error = last_error(capsys)
    assert error["error"] == "missing-reference"
    assert error["type"] == "MissingReferenceError"
    assert not (workspace / "runs" / "failed").exists()
    assert not [p for p in (workspace / "runs").iterdir() if p.name.startswith(".failed")]


def test_usage_errors(workspace, capsys):
    assert run("fly") == 2
    assert last_error(capsys)["message"] == "Unknown command: fly"
    assert run() == 2
    assert run("train", "--epoch", "3") == 2
    assert "Unknown parameter: epoch" in last_error(capsys)["message"]
    assert run("train", "--epochs", "many") == 2
    assert "Invalid type for epochs" in last_error(capsys)["message"]
    assert run("trace-export") == 2
    assert "Missing required parameter: run" in last_error(capsys)["message"]
    assert run("synth", "stray") == 2
    assert run("synth", "--project", "nowhere") == 2
    assert last_error(capsys)["error"] == "missing-reference"


def test_trace_export_of_a_run_without_results(workspace, capsys):
    assert run("trace-export", "--run", "runs/synth", "--out", "runs/empty-trace") == 2
    assert last_error(capsys)["error"] == "missing-reference"


def test_obstacle_project_uses_the_stored_goal_and_sphere(workspace):
    assert run("synth", "--project", "obstacle", "--count", "2", "--duration", "3", "--workers", "1") == 0
    objective = json.loads((workspace / "configs" / "objectives" / "reach_obstacle.json").read_text())
    objective["scene"] = "scenes/chair.json"
    (workspace / "configs" / "objectives" / "reach_chair.json").write_text(json.dumps(objective))
    assert run("optimize", "--project", "obstacle", "--model", "runs/train/model.mfo",
               "--data", "runs/obstacle/synth/dataset", "--objective", "objectives/reach_chair.json",
               "--horizon", "10", "--out", "runs/obstacle/optimize") == 0
    out = workspace / "runs" / "obstacle" / "optimize"
    result = json.loads((out / "result.json").read_text())
    assert result["goal_error"] is not None
    assert {"delta", "goal", "obstacle"} == set(result["terms"])
    configs = json.loads((out / "manifest.json").read_text())["configs"]
    assert "objectives/reach_chair.json" in configs
    assert "scenes/chair.json" not in configs
