import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.errors import ConfigurationError
from src.kinematics.rotations import unwrap_expmap_sequence
from src.kinematics.skeleton import Skeleton, joint_positions
from src.kinematics.trajectory import Trajectory
from src.scene import Scene, Sphere
from src.types import SyntheticSpec

logger = logging.getLogger("dataio.synthetic")

PELVIS_HEIGHT = 0.95
STRIDE_LENGTH = 1.4
# joint whose final position is stored as the goal of each motion
GOAL_JOINTS = {"reaching": "right_wrist", "walking": "pelvis", "obstacle": "pelvis"}


@dataclass(frozen=True)
class GoalPoint:
    joint: str
    position: np.ndarray


@dataclass
class SyntheticDataset:
    kind: str
    trajectories: List[Trajectory] = field(default_factory=list)
    # final position of goal_joint in every motion
    goals: List[Optional[np.ndarray]] = field(default_factory=list)
    obstacles: List[Optional[Sphere]] = field(default_factory=list)
    goal_joint: str = "right_wrist"

    def __len__(self) -> int:
        return len(self.trajectories)

    def goal_for(self, index: int) -> Optional[GoalPoint]:
        goal = self.goals[index] if self.goals else None
        return None if goal is None else GoalPoint(self.goal_joint, np.asarray(goal, dtype=float))

    def scene_for(self, index: int) -> Scene:
        obstacle = self.obstacles[index] if self.obstacles else None
        return Scene((obstacle,)) if obstacle is not None else Scene()

    def subset(self, indices) -> "SyntheticDataset":
        picked = list(indices)
        return SyntheticDataset(
            kind=self.kind,
            trajectories=[self.trajectories[i] for i in picked],
            goals=[self.goals[i] for i in picked] if self.goals else [],
            obstacles=[self.obstacles[i] for i in picked] if self.obstacles else [],
            goal_joint=self.goal_joint,
        )


def minimum_jerk_profile(tau: np.ndarray) -> np.ndarray:
    """Normalised minimum-jerk position 10 t^3 - 15 t^4 + 6 t^5 on [0, 1]"""
    tau = np.clip(tau, 0.0, 1.0)
    return tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)


def _set_rotation(states: np.ndarray, skeleton: Skeleton, joint: str, values: np.ndarray) -> None:
    states[:, skeleton.rotation_slice(skeleton.resolve_joint(joint))] = values


def _yaw_rotation(yaw: np.ndarray) -> np.ndarray:
    yaw = np.asarray(yaw, dtype=float)
    out = np.zeros(yaw.shape + (3,))
    out[..., 2] = yaw
    return out


def _reaching(skeleton: Skeleton, spec: SyntheticSpec, rng: np.random.Generator, frames: int):
    low, high = np.asarray(spec.workspace_low), np.asarray(spec.workspace_high)
    t = np.arange(frames) / spec.frame_rate
    states = np.zeros((frames, skeleton.state_dim))
    states[:, 0:2] = rng.uniform(low[:2], high[:2])
    states[:, 2] = PELVIS_HEIGHT
    states[:, 3:6] = _yaw_rotation(np.full(frames, rng.uniform(-np.pi, np.pi)))

    onset = rng.uniform(0.3, 0.8)
    length = rng.uniform(1.0, 1.6)
    s = minimum_jerk_profile((t - onset) / length)[:, None]

    # rest pose is all zeros; the reach pose raises the right arm forward
    lean = np.array([0.0, rng.uniform(0.0, 0.2), 0.0])
    shoulder = np.array([rng.uniform(-0.3, 0.1), -rng.uniform(0.6, 1.6), rng.uniform(-0.2, 0.2)])
    elbow = np.array([0.0, -rng.uniform(0.0, 0.8), 0.0])
    _set_rotation(states, skeleton, "torso", s * lean)
    _set_rotation(states, skeleton, "right_shoulder", s * shoulder)
    _set_rotation(states, skeleton, "right_elbow", s * elbow)
    traj = Trajectory(spec.frame_rate, states)
    goal = joint_positions(skeleton, states[-1:], "right_wrist")[0]
    return traj, goal, None


def _gait(skeleton: Skeleton, states: np.ndarray, phase: np.ndarray, amplitude: float) -> None:
    swing = amplitude * np.sin(phase)
    flex_left = 0.5 * amplitude * (1.0 - np.cos(phase))
    flex_right = 0.5 * amplitude * (1.0 + np.cos(phase))
    zero = np.zeros_like(phase)
    _set_rotation(states, skeleton, "left_hip", np.stack([zero, -swing, zero], axis=1))
    _set_rotation(states, skeleton, "right_hip", np.stack([zero, swing, zero], axis=1))
    _set_rotation(states, skeleton, "left_knee", np.stack([zero, flex_left, zero], axis=1))
    _set_rotation(states, skeleton, "right_knee", np.stack([zero, flex_right, zero], axis=1))
    _set_rotation(states, skeleton, "left_shoulder", np.stack([zero, 0.6 * swing, zero], axis=1))
    _set_rotation(states, skeleton, "right_shoulder", np.stack([zero, -0.6 * swing, zero], axis=1))


def _walking(skeleton: Skeleton, spec: SyntheticSpec, rng: np.random.Generator, frames: int,
             detour: bool = False):
    low, high = np.asarray(spec.workspace_low), np.asarray(spec.workspace_high)
    t = np.arange(frames) / spec.frame_rate
    duration = frames / spec.frame_rate
    speed = rng.uniform(0.6, 1.4)
    heading = rng.uniform(-np.pi, np.pi)
    forward = np.array([np.cos(heading), np.sin(heading)])
    lateral = np.array([-np.sin(heading), np.cos(heading)])
    start = rng.uniform(low[:2], high[:2])

    distance = speed * t
    offset = np.zeros(frames)
    offset_rate = np.zeros(frames)
    obstacle = None
    if detour:
        radius = spec.obstacle_radius
        amplitude = radius + 0.25
        u = t / duration
        offset = amplitude * np.sin(np.pi * u) ** 2
        offset_rate = amplitude * np.pi * np.sin(2.0 * np.pi * u) / duration
        center = start + forward * speed * 0.5 * duration
        obstacle = Sphere(center=[center[0], center[1], 0.5], radius=radius)

    states = np.zeros((frames, skeleton.state_dim))
    states[:, 0:2] = start + distance[:, None] * forward + offset[:, None] * lateral
    phase = 2.0 * np.pi * (speed / STRIDE_LENGTH) * t + rng.uniform(0.0, 2.0 * np.pi)
    states[:, 2] = PELVIS_HEIGHT - 0.02 + 0.02 * np.cos(2.0 * phase)
    yaw = heading + np.arctan2(offset_rate, speed)
    states[:, 3:6] = unwrap_expmap_sequence(_yaw_rotation(yaw))
    _gait(skeleton, states, phase, amplitude=rng.uniform(0.3, 0.5))
    return Trajectory(spec.frame_rate, states), states[-1, :3].copy(), obstacle


def _generate_one(skeleton: Skeleton, spec: SyntheticSpec, index: int):
    rng = np.random.default_rng([spec.seed, index])
    frames = int(round(spec.duration_s * spec.frame_rate))
    if spec.kind == "reaching":
        return _reaching(skeleton, spec, rng, frames)
    if spec.kind == "walking":
        return _walking(skeleton, spec, rng, frames)
    if spec.kind == "obstacle":
        return _walking(skeleton, spec, rng, frames, detour=True)
    raise ConfigurationError(f"Unknown synthetic kind: {spec.kind}")


def generate_synthetic(spec: SyntheticSpec, skeleton: Skeleton) -> SyntheticDataset:
    """Reproducible synthetic motions; every sample draws from its own seed so workers never change the result"""
    for joint in ("torso", "right_shoulder", "right_elbow", "right_wrist", "left_hip", "right_hip",
                  "left_knee", "right_knee", "left_shoulder"):
        skeleton.resolve_joint(joint)
    indices = range(spec.count)
    if spec.workers > 1 and spec.count > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            produced = list(pool.map(lambda i: _generate_one(skeleton, spec, i), indices))
    else:
        produced = [_generate_one(skeleton, spec, i) for i in indices]

    dataset = SyntheticDataset(kind=spec.kind, goal_joint=GOAL_JOINTS[spec.kind])
    for traj, goal, obstacle in produced:
        dataset.trajectories.append(traj)
        dataset.goals.append(goal)
        dataset.obstacles.append(obstacle)
    logger.info(f"Generated {len(dataset)} synthetic {spec.kind} trajectories "
                f"({spec.duration_s}s at {spec.frame_rate} Hz, seed {spec.seed})")
    return dataset
