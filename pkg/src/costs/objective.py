import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Optional, Union

import numpy as np

from src.costs.smoothness import anchored_smoothness, build_K
from src.costs.terms import CostError, cost_delta, cost_goal_path, cost_interaction, cost_obstacle
from src.errors import ConfigurationError, DimensionMismatchError, MfoError
from src.kinematics.skeleton import Skeleton, joint_positions, joint_positions_vjp
from src.kinematics.trajectory import Trajectory
from src.model.predictor import PredictorModel, RolloutResult, grad_delta, rollout
from src.scene import Scene
from src.types import ObjectiveSpec

logger = logging.getLogger("costs.objective")


class CostTermError(CostError):
    """Wraps an error raised while evaluating one named cost term"""
    code = "cost-term"

    def __init__(self, term: str, cause: Exception):
        super().__init__(f"cost term '{term}' failed: {cause}")
        self.term = term
        self.cause = cause
        if isinstance(cause, MfoError):
            self.exit_code = cause.exit_code


@contextmanager
def _term(name: str):
    try:
        yield
    except CostTermError:
        raise
    except (MfoError, ValueError, FloatingPointError) as e:
        raise CostTermError(name, e) from e


@dataclass
class ObjectiveValue:
    total: float
    grad_delta: np.ndarray
    grad_x: Optional[np.ndarray]
    # unweighted term values, only for active terms
    terms: Dict[str, float] = field(default_factory=dict)
    rollout: Optional[RolloutResult] = field(default=None, repr=False)


class Objective:
    """c(delta, x) = c_H(delta) + c_R(x) + c_J(delta, x) for one observed motion.

    Human terms share a single rollout; their position gradients are pulled
    back through forward kinematics and then through the network in one
    reverse pass. Terms with zero weight are never evaluated.
    """

    def __init__(self, spec: ObjectiveSpec, model: PredictorModel, skeleton: Skeleton,
                 observed: Union[Trajectory, np.ndarray], scene: Optional[Scene] = None):
        self.spec = spec
        self.model = model
        self.skeleton = skeleton
        self.observed = observed.states if isinstance(observed, Trajectory) else np.asarray(observed, dtype=float)
        self.scene = scene if scene is not None else Scene()
        self.horizon = spec.horizon
        self.weights = spec.weights

        if model.state_dim != skeleton.state_dim:
            raise DimensionMismatchError(
                f"Model state dimension {model.state_dim} does not match skeleton {skeleton.name} ({skeleton.state_dim})")
        skeleton.check_state(self.observed)
        self.end_effector = skeleton.resolve_joint(spec.end_effector)
        self.contact_joint = skeleton.resolve_joint(spec.contact_joint)

        self.delta_mask = np.ones(model.state_dim)
        if spec.delta_mask is not None:
            self.delta_mask = np.zeros(model.state_dim)
            try:
                self.delta_mask[spec.delta_mask] = 1.0
            except IndexError:
                raise ConfigurationError(f"delta_mask indices must lie in [0, {model.state_dim})")

        w = self.weights
        if w.goal > 0 and spec.goal is None:
            raise ConfigurationError("The goal term is enabled but the objective has no goal point")
        if w.robot_goal > 0 and spec.robot_goal is None:
            raise ConfigurationError("The robot goal term is enabled but the objective has no robot goal")
        if (w.robot_goal > 0 or w.robot_obstacle > 0 or w.smooth > 0 or w.joint > 0) and spec.robot_start is None:
            raise ConfigurationError("Robot terms are enabled but the objective has no robot_start")

        self.robot_start = None if spec.robot_start is None else np.asarray(spec.robot_start, dtype=float)
        self._K = None
        if w.smooth > 0:
            self._K = build_K(self.horizon + 2, spec.smoothness_variant)

    @property
    def needs_rollout(self) -> bool:
        w = self.weights
        return w.goal > 0 or w.obstacle > 0 or w.joint > 0

    @property
    def uses_robot(self) -> bool:
        w = self.weights
        return w.robot_goal > 0 or w.robot_obstacle > 0 or w.smooth > 0 or w.joint > 0

    def last_observed_position(self, joint: int) -> np.ndarray:
        return joint_positions(self.skeleton, self.observed[-1:], joint)[0]

    def effective_delta(self, delta: np.ndarray) -> np.ndarray:
        return delta * self.delta_mask

    def predict(self, delta: Optional[np.ndarray] = None, keep_cache: bool = False) -> RolloutResult:
        if delta is None:
            delta = np.zeros((self.horizon, self.model.state_dim))
        return rollout(self.model, self.observed, self.effective_delta(delta), self.horizon, keep_cache=keep_cache)

    def evaluate(self, delta: np.ndarray, x: Optional[np.ndarray] = None) -> ObjectiveValue:
        delta = np.asarray(delta, dtype=float)
        if delta.shape != (self.horizon, self.model.state_dim):
            raise DimensionMismatchError(
                f"Delta has shape {delta.shape}, expected {(self.horizon, self.model.state_dim)}")
        if x is not None:
            x = np.asarray(x, dtype=float)
            if x.shape != (self.horizon, 3):
                raise DimensionMismatchError(f"Robot trajectory has shape {x.shape}, expected {(self.horizon, 3)}")
        elif self.uses_robot:
            raise ConfigurationError("Robot terms are enabled but no robot trajectory was given")

        w = self.weights
        spec = self.spec
        terms: Dict[str, float] = {}
        total = 0.0
        effective = self.effective_delta(delta)
        g_delta = np.zeros_like(delta)
        g_x = None if x is None else np.zeros_like(x)

        if w.delta > 0:
            with _term("delta"):
                value, grad = cost_delta(effective)
                terms["delta"] = value
                total += w.delta * value
                g_delta += w.delta * grad

        result = None
        if self.needs_rollout:
            with _term("rollout"):
                result = rollout(self.model, self.observed, effective, self.horizon, keep_cache=True)
            states = result.states
            g_states = np.zeros_like(states)
            ee_path = None
            g_ee = None
            if w.goal > 0 or w.obstacle > 0:
                ee_path = joint_positions(self.skeleton, states, self.end_effector)
                g_ee = np.zeros_like(ee_path)

            if w.goal > 0:
                with _term("goal"):
                    value, grad = cost_goal_path(ee_path, spec.goal)
                    terms["goal"] = value
                    total += w.goal * value
                    g_ee += w.goal * grad

            if w.obstacle > 0:
                with _term("obstacle"):
                    value, grad = cost_obstacle(ee_path, self.scene, spec.alpha,
                                                self.last_observed_position(self.end_effector))
                    terms["obstacle"] = value
                    total += w.obstacle * value
                    g_ee += w.obstacle * grad

            if g_ee is not None:
                g_states += joint_positions_vjp(self.skeleton, states, self.end_effector, g_ee)

            if w.joint > 0:
                with _term("joint"):
                    contact_path = joint_positions(self.skeleton, states, self.contact_joint)
                    value, g_h, g_r = cost_interaction(
                        contact_path, x, spec.alpha,
                        self.last_observed_position(self.contact_joint), self.robot_start)
                    terms["joint"] = value
                    total += w.joint * value
                    g_states += joint_positions_vjp(self.skeleton, states, self.contact_joint, w.joint * g_h)
                    g_x += w.joint * g_r

            with _term("rollout"):
                g_delta += grad_delta(self.model, self.observed, effective, self.horizon, g_states, result)

        if w.robot_goal > 0:
            with _term("robot_goal"):
                value, grad = cost_goal_path(x, spec.robot_goal)
                terms["robot_goal"] = value
                total += w.robot_goal * value
                g_x += w.robot_goal * grad

        if w.robot_obstacle > 0:
            with _term("robot_obstacle"):
                value, grad = cost_obstacle(x, self.scene, spec.alpha, self.robot_start)
                terms["robot_obstacle"] = value
                total += w.robot_obstacle * value
                g_x += w.robot_obstacle * grad

        if w.smooth > 0:
            with _term("smooth"):
                value, grad = anchored_smoothness(x, self.robot_start, K=self._K)
                terms["smooth"] = value
                total += w.smooth * value
                g_x += w.smooth * grad

        return ObjectiveValue(total=total, grad_delta=g_delta * self.delta_mask, grad_x=g_x,
                              terms=terms, rollout=result)


def total_objective(delta: np.ndarray, x: Optional[np.ndarray], spec: ObjectiveSpec, model: PredictorModel,
                    observed: Union[Trajectory, np.ndarray], skeleton: Skeleton,
                    scene: Optional[Scene] = None) -> ObjectiveValue:
    return Objective(spec, model, skeleton, observed, scene).evaluate(delta, x)
