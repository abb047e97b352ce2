import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.dataio.synthetic import SyntheticDataset
from src.errors import ConfigurationError, DimensionMismatchError, FileFormatError, MissingReferenceError
from src.kinematics.skeleton import Skeleton
from src.kinematics.trajectory import Trajectory
from src.scene import primitive_from_dict
from src.types import ObjectiveSpec

logger = logging.getLogger("dataio.files")

FLOAT_FORMAT = "%.17g"
ROBOT_COLUMNS = ["robot_x", "robot_y", "robot_z"]
DATASET_INDEX = "dataset.json"


def human_columns(skeleton: Optional[Skeleton], dim: int) -> List[str]:
    columns = [f"base_pos_{a}" for a in "xyz"] + [f"base_rot_{a}" for a in "xyz"]
    if skeleton is not None:
        names = [j.name for j in skeleton.joints[1:]]
    else:
        names = [f"{k}" for k in range(1, (dim - 6) // 3 + 1)]
    for name in names:
        columns.extend(f"joint_{name}_{a}" for a in "xyz")
    return columns


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_suffix(".json")


def save_trajectory(traj: Trajectory, path: Union[str, Path], skeleton: Optional[Skeleton] = None) -> Path:
    """Write a trajectory as CSV (time_s plus one column per state coordinate) with a JSON sidecar"""
    path = Path(path)
    if traj.layout == "robot":
        if traj.dim != 3:
            raise DimensionMismatchError(f"Robot trajectories are 3-dimensional, got {traj.dim}")
        columns = ROBOT_COLUMNS
    else:
        if skeleton is not None:
            skeleton.check_state(traj.states)
        columns = human_columns(skeleton, traj.dim)
        if len(columns) != traj.dim:
            raise DimensionMismatchError(f"State dimension {traj.dim} cannot be split into base and joint rotations")
    frame = pd.DataFrame(traj.states, columns=columns)
    frame.insert(0, "time_s", traj.times())
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    meta = {"frame_rate": traj.frame_rate, "layout": traj.layout, "frames": len(traj),
            "skeleton": skeleton.name if skeleton is not None and traj.layout == "human" else None}
    with open(sidecar_path(path), "w") as f:
        json.dump(meta, f, indent=2)
    return path


def load_trajectory(path: Union[str, Path], skeleton: Optional[Skeleton] = None) -> Trajectory:
    path = Path(path)
    if not path.exists():
        raise MissingReferenceError(f"Trajectory file not found: {path}")
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise FileFormatError(f"Trajectory file {path} is not valid CSV: {e}")
    if "time_s" not in frame.columns:
        raise FileFormatError(f"Trajectory file {path} has no time_s column")
    values = frame.drop(columns=["time_s"])
    layout = "robot" if list(values.columns) == ROBOT_COLUMNS else "human"
    try:
        states = values.to_numpy(dtype=float)
    except ValueError as e:
        raise FileFormatError(f"Trajectory file {path} contains non-numeric values: {e}")
    if not np.all(np.isfinite(states)):
        raise FileFormatError(f"Trajectory file {path} contains non-finite values")

    meta_path = sidecar_path(path)
    if meta_path.exists():
        try:
            with open(meta_path, "r") as f:
                meta = json.load(f)
            frame_rate = float(meta["frame_rate"])
            layout = meta.get("layout", layout)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise FileFormatError(f"Trajectory sidecar {meta_path} is malformed: {e}")
    else:
        times = frame["time_s"].to_numpy(dtype=float)
        if len(times) < 2 or not np.all(np.diff(times) > 0):
            raise FileFormatError(f"Cannot infer a frame rate for {path} without a sidecar file")
        frame_rate = float(np.round(1.0 / np.median(np.diff(times)), 9))

    if layout == "human" and skeleton is not None:
        skeleton.check_state(states)
    return Trajectory(frame_rate, states, layout)


def save_dataset(dataset: SyntheticDataset, directory: Union[str, Path], skeleton: Skeleton) -> Path:
    """One CSV per trajectory plus an index carrying goals and obstacles"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, traj in enumerate(dataset.trajectories):
        name = f"traj_{i:04d}.csv"
        save_trajectory(traj, directory / name, skeleton)
        goal = dataset.goals[i] if i < len(dataset.goals) else None
        obstacle = dataset.obstacles[i] if i < len(dataset.obstacles) else None
        entries.append({
            "file": name,
            "goal": None if goal is None else np.asarray(goal).tolist(),
            "obstacle": None if obstacle is None else obstacle.to_dict(),
        })
    with open(directory / DATASET_INDEX, "w") as f:
        json.dump({"kind": dataset.kind, "skeleton": skeleton.name, "goal_joint": dataset.goal_joint,
                   "trajectories": entries}, f, indent=2)
    return directory


def load_dataset(directory: Union[str, Path], skeleton: Optional[Skeleton] = None) -> SyntheticDataset:
    directory = Path(directory)
    index = directory / DATASET_INDEX
    if not index.exists():
        raise MissingReferenceError(f"No dataset index found in {directory}")
    try:
        with open(index, "r") as f:
            data = json.load(f)
        entries = data["trajectories"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise FileFormatError(f"Dataset index {index} is malformed: {e}")
    dataset = SyntheticDataset(kind=data.get("kind", "unknown"), goal_joint=data.get("goal_joint", "right_wrist"))
    for entry in entries:
        dataset.trajectories.append(load_trajectory(directory / entry["file"], skeleton))
        goal = entry.get("goal")
        dataset.goals.append(None if goal is None else np.asarray(goal, dtype=float))
        obstacle = entry.get("obstacle")
        dataset.obstacles.append(None if obstacle is None else primitive_from_dict(obstacle))
    logger.debug(f"Loaded {len(dataset)} trajectories from {directory}")
    return dataset


def read_json(path: Union[str, Path], what: str) -> Dict[str, Any]:
    path = Path(path)
    try:
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError:
        raise MissingReferenceError(f"{what} file not found: {path}")
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{what} file {path} contains invalid JSON: {e}")


def load_objective(path: Union[str, Path]) -> ObjectiveSpec:
    data = read_json(path, "Objective")
    try:
        return ObjectiveSpec.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Objective file {path} is invalid: {e}")


def save_table(values: np.ndarray, path: Union[str, Path], columns: List[str], index_name: str = "step") -> Path:
    """Write a 2-D array with a 1-based step column, e.g. the optimized velocity perturbations"""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != len(columns):
        raise DimensionMismatchError(f"Table of shape {values.shape} does not match {len(columns)} columns")
    frame = pd.DataFrame(values, columns=columns)
    frame.insert(0, index_name, np.arange(1, len(values) + 1))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)
