import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.action_handler import ActionParameter, float_list, int_list, register_action
from src.actions.shared import RESULT_FILE, default_model_path, observed_motion, open_model, write_result
from src.dataio import GoalPoint, human_columns, save_table, save_trajectory
from src.dataio.files import FLOAT_FORMAT
from src.errors import ConfigurationError, FileFormatError, MissingReferenceError
from src.helpers.runs import command_run
from src.kinematics.skeleton import Skeleton, joint_positions
from src.kinematics.trajectory import Trajectory
from src.optimizer import JointProblem, OptimizationResult, optimize_joint, optimize_prediction, sweep_horizons
from src.scene import Scene
from src.types import ObjectiveSpec

logger = logging.getLogger("actions.optimize_actions")

OBSERVED_PARAMETERS = [
    ActionParameter("observed", False, str, "observed trajectory CSV"),
    ActionParameter("data", False, str, "dataset directory to take the observed window from"),
    ActionParameter("index", False, int, "trajectory index within the dataset"),
    ActionParameter("observed_seconds", False, float, "length of the observed window"),
]


def _objective(project, objective: Optional[str], **updates) -> ObjectiveSpec:
    spec = project.load_objective(objective)
    updates = {k: v for k, v in updates.items() if v is not None}
    if updates:
        try:
            spec = ObjectiveSpec.model_validate(dict(spec.model_dump(), **updates))
        except ValidationError as e:
            raise ConfigurationError(f"Invalid objective override: {e}")
    return spec


def _with_dataset_goal(spec: ObjectiveSpec, goal: Optional[GoalPoint], skeleton: Skeleton) -> ObjectiveSpec:
    if spec.goal is not None or goal is None or spec.weights.goal == 0:
        return spec
    if skeleton.resolve_joint(spec.end_effector) != skeleton.resolve_joint(goal.joint):
        logger.warning(f"The dataset stores {goal.joint} goals, the objective steers {spec.end_effector}; "
                       f"pass --goal to set one")
        return spec
    return spec.model_copy(update={"goal": goal.position.tolist()})


def _scene(project, spec: ObjectiveSpec, dataset_scene: Scene) -> Scene:
    """The obstacles stored with the observed motion, else the scene the objective names"""
    if not dataset_scene.is_empty:
        if spec.scene is not None:
            logger.info(f"Using the dataset obstacles instead of {spec.scene}")
        return dataset_scene
    return project.scene_for(spec)


def _goal_error(skeleton: Skeleton, states: np.ndarray, spec: ObjectiveSpec) -> Optional[float]:
    if spec.goal is None:
        return None
    final = joint_positions(skeleton, states[-1:], spec.end_effector)[0]
    return float(np.linalg.norm(final - np.asarray(spec.goal)))


def _write_human(directory: Path, result: OptimizationResult, frame_rate: float, skeleton: Skeleton,
                 spec: ObjectiveSpec, **extra) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    save_trajectory(Trajectory(frame_rate, result.human_states), directory / "human.csv", skeleton)
    save_table(result.delta, directory / "delta.csv", human_columns(skeleton, result.delta.shape[1]))
    write_result(result, directory, horizon=len(result.human_states),
                 goal_error=_goal_error(skeleton, result.human_states, spec), **extra)


@register_action("optimize", parameters=[
    ActionParameter("model", False, str, "model file written by train"),
    *OBSERVED_PARAMETERS,
    ActionParameter("objective", False, str, "objective file relative to the config directory"),
    ActionParameter("goal", False, float_list, "end-effector goal x,y,z"),
    ActionParameter("horizon", False, int, "frames to optimize"),
    ActionParameter("horizons", False, int_list, "comma separated horizons to sweep"),
    ActionParameter("out", False, str, "output directory"),
])
def optimize(project, model=None, objective=None, goal=None, horizon=None, horizons=None, out=None, **kwargs):
    """Refine a prediction toward a goal and away from obstacles"""
    model_path = model or str(default_model_path(project))
    spec = _objective(project, objective, goal=goal, horizon=horizon)
    human = spec.human_only()
    if human.weights != spec.weights:
        logger.info("Robot and joint weights are ignored when optimizing the human prediction alone")
    params = dict(kwargs, model=model_path, objective=objective, goal=goal, horizon=horizon, horizons=horizons)
    skeleton = project.skeleton
    with command_run(project, "optimize", params, out) as run:
        predictor = open_model(project, run, model_path)
        observed, dataset_goal, dataset_scene = observed_motion(project, run, **kwargs)
        human = _with_dataset_goal(human, dataset_goal, skeleton)
        scene = _scene(project, human, dataset_scene)
        if horizons:
            results = sweep_horizons(predictor, observed, human, skeleton, horizons, scene)
            for steps, result in results.items():
                _write_human(run.staging / f"h{steps}", result, observed.frame_rate, skeleton, human)
        else:
            result = optimize_prediction(predictor, observed, human, skeleton, scene)
            _write_human(run.staging, result, observed.frame_rate, skeleton, human)
    return run.final_dir


@register_action("plan-joint", parameters=[
    ActionParameter("model", False, str, "model file written by train"),
    *OBSERVED_PARAMETERS,
    ActionParameter("objective", False, str, "objective file relative to the config directory"),
    ActionParameter("goal", False, float_list, "human end-effector goal x,y,z"),
    ActionParameter("robot_start", False, float_list, "robot start x,y,z"),
    ActionParameter("robot_goal", False, float_list, "robot goal x,y,z"),
    ActionParameter("horizon", False, int, "frames to plan"),
    ActionParameter("out", False, str, "output directory"),
])
def plan_joint(project, model=None, objective=None, goal=None, robot_start=None, robot_goal=None, horizon=None,
               out=None, **kwargs):
    """Optimize the human prediction and a robot trajectory together"""
    model_path = model or str(default_model_path(project))
    spec = _objective(project, objective, goal=goal, robot_start=robot_start, robot_goal=robot_goal,
                      horizon=horizon)
    params = dict(kwargs, model=model_path, objective=objective, goal=goal, robot_start=robot_start,
                  robot_goal=robot_goal, horizon=horizon)
    skeleton = project.skeleton
    with command_run(project, "plan-joint", params, out) as run:
        predictor = open_model(project, run, model_path)
        observed, dataset_goal, dataset_scene = observed_motion(project, run, **kwargs)
        spec = _with_dataset_goal(spec, dataset_goal, skeleton)
        scene = _scene(project, spec, dataset_scene)
        result = optimize_joint(JointProblem(observed.states, predictor, spec, skeleton, scene))

        contact = joint_positions(skeleton, result.human_states, spec.contact_joint)
        separation = float(np.min(np.linalg.norm(contact - result.robot, axis=1)))
        robot_error = None
        if spec.robot_goal is not None:
            robot_error = float(np.linalg.norm(result.robot[-1] - np.asarray(spec.robot_goal)))
        save_trajectory(Trajectory(observed.frame_rate, result.robot, "robot"), run.staging / "robot.csv")
        _write_human(run.staging, result, observed.frame_rate, skeleton, spec,
                     min_separation=separation, robot_goal_error=robot_error)
        logger.info(f"Closest approach between human and robot: {separation:.3f} m")
    return run.final_dir


def _read_result(path: Path) -> dict:
    try:
        with open(path, "r") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FileFormatError(f"Optimization result {path} contains invalid JSON: {e}")


@register_action("trace-export", parameters=[
    ActionParameter("run", True, str, "output directory of optimize or plan-joint"),
    ActionParameter("out", False, str, "output directory"),
])
def trace_export(project, run, out=None):
    """Collect the optimizer iteration traces and final cost terms of a run as CSV"""
    source = Path(run)
    files = sorted(source.glob(f"h*/{RESULT_FILE}")) or sorted(source.glob(RESULT_FILE))
    if not files:
        raise MissingReferenceError(f"No optimization results found in {source}")
    traces, terms = [], []
    for path in files:
        result = _read_result(path)
        try:
            horizon = result["horizon"]
            for entry in result["trace"]:
                traces.append({"horizon": horizon, **entry})
            for name, value in result["terms"].items():
                terms.append({"horizon": horizon, "term": name, "value": value})
        except (KeyError, TypeError) as e:
            raise FileFormatError(f"Optimization result {path} is missing {e}")
    traces.sort(key=lambda row: (row["horizon"], row["iteration"]))
    terms.sort(key=lambda row: (row["horizon"], row["term"]))

    with command_run(project, "trace-export", {"run": run}, out) as context:
        context.record_input("run", source)
        pd.DataFrame(traces, columns=["horizon", "iteration", "objective", "gradient_norm"]).to_csv(
            context.staging / "trace.csv", index=False, float_format=FLOAT_FORMAT)
        pd.DataFrame(terms, columns=["horizon", "term", "value"]).to_csv(
            context.staging / "terms.csv", index=False, float_format=FLOAT_FORMAT)
    return context.final_dir
