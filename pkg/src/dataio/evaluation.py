import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.dataio.baselines import interpolation_baseline, zero_velocity_baseline
from src.dataio.synthetic import SyntheticDataset
from src.errors import MfoError
from src.kinematics.skeleton import Skeleton, all_joint_positions, joint_positions
from src.kinematics.trajectory import Trajectory
from src.model.predictor import PredictorModel, rollout
from src.optimizer.problems import optimize_prediction
from src.types import EvaluationConfig, ObjectiveSpec

logger = logging.getLogger("dataio.evaluation")


class EvaluationError(MfoError):
    """Raised when predictions cannot be scored against ground truth"""
    code = "evaluation"


def horizon_frames(horizon_ms: float, frame_rate: float) -> int:
    """Nearest frame index for a horizon given in milliseconds"""
    frames = int(round(horizon_ms * frame_rate / 1000.0))
    if frames < 1:
        raise EvaluationError(f"Horizon {horizon_ms} ms is shorter than one frame at {frame_rate} Hz")
    return frames


@dataclass
class EvalReport:
    """Mean error in meters per method (rows) and horizon in ms (columns)"""
    horizons_ms: List[float]
    rows: Dict[str, List[float]] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        columns = [f"{h:g}" for h in self.horizons_ms]
        frame = pd.DataFrame.from_dict(self.rows, orient="index", columns=columns)
        frame.index.name = "method"
        return frame

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, float_format="%.2f")

    def __getitem__(self, method: str) -> List[float]:
        return self.rows[method]


def _per_step_errors(skeleton: Skeleton, predicted: np.ndarray, truth: np.ndarray, wrist: str):
    """Sum of key-joint distances and wrist distance for every step"""
    key = [skeleton.resolve_joint(name) for name in skeleton.key_joints]
    pred_pos = all_joint_positions(skeleton, predicted)
    true_pos = all_joint_positions(skeleton, truth)
    distances = np.linalg.norm(pred_pos - true_pos, axis=-1)
    w = skeleton.resolve_joint(wrist)
    return distances[:, key].sum(axis=1), distances[:, w]


TrajectoryLike = Union[Trajectory, np.ndarray]


def _at_rate(values: TrajectoryLike, frame_rate: float, what: str) -> np.ndarray:
    if isinstance(values, Trajectory):
        if values.frame_rate != frame_rate:
            raise EvaluationError(
                f"{what} is sampled at {values.frame_rate} Hz, horizons are scored at {frame_rate} Hz")
        return values.states
    return np.asarray(values, dtype=float)


def evaluate(predictions: Mapping[str, Sequence[TrajectoryLike]], ground_truth: Sequence[TrajectoryLike],
             skeleton: Skeleton, horizons_ms: Sequence[float], frame_rate: float,
             wrist_joint: str = "right_wrist") -> EvalReport:
    """Score each method against the same ground-truth futures.

    State predictions (T, D) give a whole-body row and a wrist row "<method> (w)";
    position predictions (T, 3) give only the wrist row.
    """
    frames = [horizon_frames(h, frame_rate) for h in horizons_ms]
    report = EvalReport(list(horizons_ms))
    truths = [_at_rate(t, frame_rate, f"Ground truth {i}") for i, t in enumerate(ground_truth)]
    true_wrists = [joint_positions(skeleton, t, wrist_joint) for t in truths]
    for method, samples in predictions.items():
        if len(samples) != len(truths):
            raise EvaluationError(f"Method {method} has {len(samples)} predictions for {len(truths)} samples")
        if not samples:
            continue
        body = np.zeros(len(frames))
        wrist = np.zeros(len(frames))
        state_rows = True
        for i, (predicted, truth, true_wrist) in enumerate(zip(samples, truths, true_wrists)):
            predicted = _at_rate(predicted, frame_rate, f"Prediction {i} of method {method}")
            steps = min(len(predicted), len(truth))
            if max(frames) > steps:
                raise EvaluationError(
                    f"Horizon of {max(frames)} frames exceeds the {steps} predicted frames of method {method}")
            idx = np.asarray(frames) - 1
            if predicted.shape[1] == 3:
                state_rows = False
                wrist += np.linalg.norm(predicted[idx] - true_wrist[idx], axis=-1)
            else:
                body_err, wrist_err = _per_step_errors(skeleton, predicted[idx], truth[idx], wrist_joint)
                body += body_err
                wrist += wrist_err
        n = len(samples)
        if state_rows:
            report.rows[method] = (body / n).tolist()
        report.rows[f"{method} (w)"] = (wrist / n).tolist()
    return report


def evaluation_windows(dataset: SyntheticDataset, observed_frames: int, horizon: int,
                       max_samples: Optional[int] = None):
    """(index, observed, future) triples from the start of every long enough trajectory"""
    windows = []
    for i, traj in enumerate(dataset.trajectories):
        if len(traj) < observed_frames + horizon:
            continue
        windows.append((i, traj.window(0, observed_frames), traj.states[observed_frames:observed_frames + horizon]))
        if max_samples is not None and len(windows) >= max_samples:
            break
    return windows


def run_evaluation(model: PredictorModel, skeleton: Skeleton, dataset: SyntheticDataset,
                   config: EvaluationConfig, spec: ObjectiveSpec) -> EvalReport:
    """Zero-velocity, the plain network, the goal-informed (and obstacle-aware) refinement and interpolation"""
    frame_rate = model.config.frame_rate
    horizon = max(horizon_frames(h, frame_rate) for h in config.horizons_ms)
    observed_frames = int(round(config.observed_seconds * frame_rate))
    windows = evaluation_windows(dataset, observed_frames, horizon, config.max_samples)
    if not windows:
        raise EvaluationError(f"No trajectory has {observed_frames + horizon} frames for evaluation")

    # δ moves only the evaluated limb
    limb = skeleton.limb_coordinates(config.wrist_joint) or None
    human = spec.human_only().model_copy(
        update={"horizon": horizon, "end_effector": config.wrist_joint, "delta_mask": limb})
    goal_only = human.with_weights(obstacle=0.0, goal=human.weights.goal or 1.0)
    methods: Dict[str, List[np.ndarray]] = {"zerovel": [], "model": [], "ours g": [], "interp": []}
    with_obstacles = any(o is not None for o in dataset.obstacles)
    if with_obstacles:
        methods["ours g+o"] = []
    truths = []
    for index, observed, future in windows:
        truths.append(Trajectory(dataset.trajectories[index].frame_rate, future))
        goal = joint_positions(skeleton, future[-1:], config.wrist_joint)[0]
        methods["zerovel"].append(zero_velocity_baseline(observed, horizon).states)
        methods["model"].append(rollout(model, observed, None, horizon, keep_cache=False).states)
        goal_spec = goal_only.model_copy(update={"goal": goal.tolist()})
        methods["ours g"].append(optimize_prediction(model, observed, goal_spec, skeleton).human_states)
        if with_obstacles:
            obstacle_spec = goal_spec.with_weights(obstacle=human.weights.obstacle or 1.0)
            methods["ours g+o"].append(
                optimize_prediction(model, observed, obstacle_spec, skeleton, dataset.scene_for(index)).human_states)
        start = joint_positions(skeleton, observed.states[-1:], config.wrist_joint)[0]
        methods["interp"].append(interpolation_baseline(start, goal, horizon))
    logger.info(f"Evaluated {len(truths)} held-out windows over {len(config.horizons_ms)} horizons")
    return evaluate(methods, truths, skeleton, config.horizons_ms, frame_rate, config.wrist_joint)
