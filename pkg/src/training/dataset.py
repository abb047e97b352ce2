import logging
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import MfoError
from src.kinematics.rotations import expmap_to_quat_array, quat_multiply, quat_to_expmap_array, unwrap_expmap_sequence
from src.kinematics.trajectory import Trajectory
from src.types import TrainingConfig

logger = logging.getLogger("training.dataset")


class TrainingError(MfoError):
    """Base exception for dataset preparation and training errors"""
    code = "training"


@dataclass(frozen=True)
class Sample:
    """One training window split into an observed segment and the segment to predict"""
    observed: np.ndarray
    target: np.ndarray

    @property
    def frames(self) -> np.ndarray:
        return np.concatenate([self.observed, self.target])


@dataclass
class Batch:
    samples: List[Sample]

    def __post_init__(self):
        shapes = {(s.observed.shape, s.target.shape) for s in self.samples}
        if len(shapes) > 1:
            raise TrainingError(f"Samples in a batch must share segment lengths, got {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def observed(self) -> np.ndarray:
        return np.stack([s.observed for s in self.samples])

    @property
    def target(self) -> np.ndarray:
        return np.stack([s.target for s in self.samples])


@dataclass
class SlicedDataset:
    samples: List[Sample] = field(default_factory=list)
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, i: int) -> Sample:
        return self.samples[i]


def slice_dataset(trajectories: Sequence[Trajectory], config: TrainingConfig) -> SlicedDataset:
    """Overlapping windows of slice_frames at the configured stride; short trajectories are skipped"""
    window = config.slice_frames
    split = config.input_frames
    out = SlicedDataset()
    for traj in trajectories:
        if abs(traj.frame_rate - config.frame_rate) > 1e-9:
            raise TrainingError(
                f"Trajectory frame rate {traj.frame_rate} Hz differs from training frame rate {config.frame_rate} Hz")
        if len(traj) < window:
            out.skipped += 1
            continue
        for start in range(0, len(traj) - window + 1, config.stride):
            states = traj.states[start:start + window]
            out.samples.append(Sample(observed=states[:split].copy(), target=states[split:].copy()))
    if out.skipped:
        logger.warning(f"Skipped {out.skipped} trajectories shorter than {window} frames")
    return out


def holdout_indices(n: int, fraction: float, seed: int) -> List[int]:
    """Sorted indices of the held-out trajectories; at least one and never all of them"""
    if fraction <= 0 or n < 2:
        return []
    count = min(n - 1, max(1, int(round(n * fraction))))
    order = np.random.default_rng(seed).permutation(n)
    return sorted(order[:count].tolist())


def split_holdout(trajectories: Sequence[Trajectory], fraction: float,
                  seed: int) -> Tuple[List[Trajectory], List[Trajectory]]:
    """Hold out a fraction of one dataset's trajectories before slicing"""
    held = set(holdout_indices(len(trajectories), fraction, seed))
    train = [t for i, t in enumerate(trajectories) if i not in held]
    holdout = [t for i, t in enumerate(trajectories) if i in held]
    return train, holdout


def yaw_quaternion(theta: float) -> np.ndarray:
    return np.array([np.cos(0.5 * theta), 0.0, 0.0, np.sin(0.5 * theta)])


def rotate_heading(states: np.ndarray, theta: float, pivot: Optional[np.ndarray] = None) -> np.ndarray:
    """Rotate base position and base rotation of every frame about the vertical axis through pivot"""
    states = np.array(states, dtype=float)
    if theta == 0.0:
        return states
    if pivot is None:
        pivot = states[0, :3]
    c, s = np.cos(theta), np.sin(theta)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    out = states.copy()
    out[:, :3] = pivot + (states[:, :3] - pivot) @ rz.T
    q = quat_multiply(yaw_quaternion(theta), expmap_to_quat_array(states[:, 3:6]))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    out[:, 3:6] = unwrap_expmap_sequence(quat_to_expmap_array(q))
    return out


def augment_heading(sample: Sample, rng: np.random.Generator, theta: Optional[float] = None) -> Sample:
    """Random yaw in [0, 2pi) applied consistently to both segments, pivoting on the first frame"""
    if theta is None:
        theta = float(rng.uniform(0.0, 2.0 * np.pi))
    frames = rotate_heading(sample.frames, theta)
    split = len(sample.observed)
    return Sample(observed=frames[:split], target=frames[split:])
