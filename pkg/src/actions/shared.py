import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from src.dataio import GoalPoint, SyntheticDataset, load_dataset, load_trajectory
from src.errors import ConfigurationError, DimensionMismatchError
from src.helpers.runs import RunContext
from src.kinematics.trajectory import Trajectory
from src.model import PredictorModel, load_model
from src.optimizer import OptimizationResult
from src.scene import Scene

logger = logging.getLogger("actions.shared")

RESULT_FILE = "result.json"


def default_data_dir(project) -> Path:
    return project.output_dir / "synth" / "dataset"


def default_model_path(project) -> Path:
    return project.output_dir / "train" / "model.mfo"


def open_dataset(project, context: RunContext, data: Optional[Union[str, Path]]) -> SyntheticDataset:
    directory = Path(data) if data is not None else default_data_dir(project)
    dataset = load_dataset(directory, project.skeleton)
    context.record_input("data", directory)
    return dataset


def open_model(project, context: RunContext, path: Union[str, Path]) -> PredictorModel:
    model = load_model(path)
    context.record_input("model", path)
    if model.state_dim != project.skeleton.state_dim:
        raise DimensionMismatchError(
            f"Model state dimension {model.state_dim} does not match skeleton {project.skeleton.name} "
            f"({project.skeleton.state_dim})")
    return model


def observed_motion(project, context: RunContext, observed: Optional[str] = None, data: Optional[str] = None,
                    index: int = 0,
                    observed_seconds: Optional[float] = None) -> Tuple[Trajectory, Optional[GoalPoint], Scene]:
    """The observed window plus the goal and obstacle stored with it, when it comes from a dataset"""
    if observed is not None:
        traj = load_trajectory(observed, project.skeleton)
        context.record_input("observed", observed)
        return traj, None, Scene()
    if data is None:
        raise ConfigurationError("Provide an observed trajectory file or a dataset directory")
    dataset = open_dataset(project, context, data)
    if not 0 <= index < len(dataset):
        raise ConfigurationError(f"Sample index {index} is outside the dataset of {len(dataset)} trajectories")
    traj = dataset.trajectories[index]
    seconds = observed_seconds if observed_seconds is not None else project.config.evaluation.observed_seconds
    frames = int(round(seconds * traj.frame_rate))
    if not 1 <= frames <= len(traj):
        raise ConfigurationError(f"Cannot observe {frames} frames of a {len(traj)}-frame trajectory")
    return traj.window(0, frames), dataset.goal_for(index), dataset.scene_for(index)


def result_summary(result: OptimizationResult) -> Dict[str, Any]:
    return {
        "termination": result.termination.value,
        "objective": float(result.objective),
        "gradient_norm": float(result.gradient_norm),
        "iterations": result.iterations,
        "evaluations": result.evaluations,
        "terms": {name: float(value) for name, value in result.terms.items()},
        "trace": [
            {"iteration": e.iteration, "objective": float(e.objective), "gradient_norm": float(e.gradient_norm)}
            for e in result.trace
        ],
    }


def write_result(result: OptimizationResult, directory: Path, **extra: Any) -> Path:
    summary = result_summary(result)
    summary.update(extra)
    path = directory / RESULT_FILE
    with open(path, "w") as f:
        json.dump(summary, f, indent=2)
    return path
