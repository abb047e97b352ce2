import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np

from src.costs import Objective
from src.errors import ConfigurationError, DimensionMismatchError
from src.kinematics.skeleton import Skeleton
from src.kinematics.trajectory import Trajectory
from src.model.predictor import PredictorModel
from src.optimizer.lbfgs import OptimizationResult, lbfgs_minimize
from src.scene import Scene
from src.types import ObjectiveSpec

logger = logging.getLogger("optimizer.problems")


def straight_line(start: np.ndarray, goal: np.ndarray, horizon: int) -> np.ndarray:
    """x_k = start + (goal - start) * k / T for k = 1..T"""
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    fractions = np.arange(1, horizon + 1, dtype=float)[:, None] / horizon
    return start + (goal - start) * fractions


def optimize_prediction(model: PredictorModel, observed: Union[Trajectory, np.ndarray], spec: ObjectiveSpec,
                        skeleton: Skeleton, scene: Optional[Scene] = None,
                        delta0: Optional[np.ndarray] = None) -> OptimizationResult:
    """Minimize the human cost c_H(delta) starting from the unperturbed prediction"""
    w = spec.weights
    active_robot = [name for name in ("robot_goal", "robot_obstacle", "smooth", "joint") if getattr(w, name) != 0]
    if active_robot:
        raise ConfigurationError(
            f"Human-only optimization needs zero robot and joint weights, got nonzero {', '.join(active_robot)}")
    objective = Objective(spec, model, skeleton, observed, scene)
    shape = (spec.horizon, model.state_dim)
    start = np.zeros(shape) if delta0 is None else np.asarray(delta0, dtype=float)
    if start.shape != shape:
        raise DimensionMismatchError(f"Initial delta has shape {start.shape}, expected {shape}")

    def f_and_grad(z: np.ndarray):
        value = objective.evaluate(z.reshape(shape))
        return value.total, value.grad_delta.ravel()

    result = lbfgs_minimize(f_and_grad, start, spec.optimizer)
    delta = result.x.reshape(shape)
    final = objective.evaluate(delta)
    result.delta = objective.effective_delta(delta)
    result.human_states = objective.predict(delta).states
    result.terms = final.terms
    return result


@dataclass
class JointProblem:
    """Human prediction variables and robot base trajectory optimized together"""
    observed: np.ndarray
    model: PredictorModel
    spec: ObjectiveSpec
    skeleton: Skeleton
    scene: Optional[Scene] = None
    robot_init: Optional[np.ndarray] = None

    def __post_init__(self):
        if isinstance(self.observed, Trajectory):
            self.observed = self.observed.states
        if self.spec.robot_start is None:
            raise ConfigurationError("Joint problems need a robot_start")
        if self.robot_init is None:
            goal = self.spec.robot_goal if self.spec.robot_goal is not None else self.spec.robot_start
            self.robot_init = straight_line(self.spec.robot_start, goal, self.spec.horizon)
        self.robot_init = np.asarray(self.robot_init, dtype=float)
        if self.robot_init.shape != (self.spec.horizon, 3):
            raise DimensionMismatchError(
                f"Robot trajectory has shape {self.robot_init.shape}, human horizon is {self.spec.horizon}")

    @property
    def horizon(self) -> int:
        return self.spec.horizon


def optimize_joint(problem: JointProblem) -> OptimizationResult:
    """Minimize c(delta, x) over the stacked variable z = (delta, x)"""
    objective = Objective(problem.spec, problem.model, problem.skeleton, problem.observed, problem.scene)
    delta_shape = (problem.horizon, problem.model.state_dim)
    split = int(np.prod(delta_shape))

    def f_and_grad(z: np.ndarray):
        value = objective.evaluate(z[:split].reshape(delta_shape), z[split:].reshape(-1, 3))
        return value.total, np.concatenate([value.grad_delta.ravel(), value.grad_x.ravel()])

    z0 = np.concatenate([np.zeros(split), problem.robot_init.ravel()])
    result = lbfgs_minimize(f_and_grad, z0, problem.spec.optimizer)
    delta = result.x[:split].reshape(delta_shape)
    robot = result.x[split:].reshape(-1, 3)
    final = objective.evaluate(delta, robot)
    result.delta = objective.effective_delta(delta)
    result.robot = robot
    result.human_states = objective.predict(delta).states
    result.terms = final.terms
    return result


def sweep_horizons(model: PredictorModel, observed: Union[Trajectory, np.ndarray], spec: ObjectiveSpec,
                   skeleton: Skeleton, horizons: Sequence[int],
                   scene: Optional[Scene] = None) -> Dict[int, OptimizationResult]:
    """Solve the same human-only problem once per candidate horizon"""
    results = {}
    for horizon in horizons:
        logger.info(f"Optimizing with horizon {horizon}")
        results[horizon] = optimize_prediction(model, observed, spec.model_copy(update={"horizon": horizon}),
                                               skeleton, scene)
    return results
