import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.constants import KEY_JOINTS
from src.errors import ConfigurationError, DimensionMismatchError, FileFormatError, MfoError, MissingReferenceError
from src.kinematics.rotations import ExpMap, expmap_matrix_derivatives, expmap_to_matrix

logger = logging.getLogger("kinematics.skeleton")

ROOT_NAME = "pelvis"


class KinematicsError(MfoError):
    """Base exception for skeleton and forward kinematics errors"""
    code = "kinematics"


class UnknownJointError(KinematicsError, ConfigurationError):
    """Raised when a joint or end-effector name is not part of the skeleton"""
    code = "unknown-joint"


@dataclass(frozen=True)
class JointSpec:
    name: str
    parent: int
    offset: Tuple[float, float, float]
    end_effector: Optional[str] = None


@dataclass(frozen=True)
class Skeleton:
    """Kinematic tree in topological order; joint 0 is the base (pelvis).

    Every joint after the root owns one exponential-map rotation in the state
    vector, so the flattened state is 3 (base position) + 3 (base rotation)
    + 3 per rotational joint.
    """
    name: str
    joints: Tuple[JointSpec, ...]
    key_joints: Tuple[str, ...] = tuple(KEY_JOINTS)
    _index: Dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.joints:
            raise ConfigurationError("Skeleton needs at least a root joint")
        if self.joints[0].parent != -1:
            raise ConfigurationError("The first joint must be the root (parent -1)")
        index = {}
        for i, joint in enumerate(self.joints):
            if joint.name in index:
                raise ConfigurationError(f"Duplicate joint name: {joint.name}")
            if i > 0 and not 0 <= joint.parent < i:
                raise ConfigurationError(
                    f"Joint {joint.name} has parent index {joint.parent}; parents must precede their children")
            index[joint.name] = i
        self._index.update(index)
        missing = [name for name in self.key_joints if name not in index]
        if missing:
            raise ConfigurationError(f"Unknown key joints: {', '.join(missing)}")

    @property
    def num_rotational(self) -> int:
        return len(self.joints) - 1

    @property
    def state_dim(self) -> int:
        return 6 + 3 * self.num_rotational

    @property
    def names(self) -> List[str]:
        return [joint.name for joint in self.joints]

    @property
    def offsets(self) -> np.ndarray:
        return np.array([joint.offset for joint in self.joints], dtype=float)

    def end_effectors(self) -> Dict[str, int]:
        return {j.end_effector: i for i, j in enumerate(self.joints) if j.end_effector}

    def resolve_joint(self, name: str) -> int:
        """Index of a joint name or an end-effector flag such as 'left' or 'right'"""
        if name in self._index:
            return self._index[name]
        flags = self.end_effectors()
        if name in flags:
            return flags[name]
        raise UnknownJointError(f"Unknown joint or end-effector: {name}")

    def chain(self, joint: Union[str, int]) -> List[int]:
        """Ancestors of a joint, root first, the joint itself last"""
        k = self.resolve_joint(joint) if isinstance(joint, str) else joint
        out = []
        while k >= 0:
            out.append(k)
            k = self.joints[k].parent
        return out[::-1]

    def descendants(self, k: int) -> List[int]:
        return [d for d in range(k + 1, len(self.joints)) if k in self.chain(d)]

    def limb_coordinates(self, joint: Union[str, int]) -> List[int]:
        """Rotation coordinates that move a joint but no key joint off its own chain.

        For a wrist these are the shoulder and elbow rotations; the base and
        any joint shared with another limb are left out. Empty for the root.
        """
        path = self.chain(joint)
        on_path = set(path)
        key = {self.resolve_joint(name) for name in self.key_joints}
        coords = []
        for k in path[1:-1]:
            if all(d in on_path for d in self.descendants(k) if d in key):
                start = self.rotation_slice(k).start
                coords.extend(range(start, start + 3))
        return coords

    def rotation_slice(self, k: int) -> slice:
        """State coordinates of the rotation owned by joint k (k=0 is the base rotation)"""
        start = 3 + 3 * k
        return slice(start, start + 3)

    def check_state(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        if vec.shape[-1] != self.state_dim:
            raise DimensionMismatchError(
                f"State has dimension {vec.shape[-1]}, skeleton {self.name} expects {self.state_dim}")
        return vec


@dataclass(frozen=True)
class HumanState:
    base_pos: np.ndarray
    base_rot: ExpMap
    joints: Tuple[ExpMap, ...]

    @property
    def dim(self) -> int:
        return 6 + 3 * len(self.joints)

    def to_vector(self) -> np.ndarray:
        parts = [np.asarray(self.base_pos, dtype=float).reshape(3), self.base_rot.v]
        parts.extend(j.v for j in self.joints)
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, vec: np.ndarray, skeleton: Optional[Skeleton] = None) -> "HumanState":
        vec = np.asarray(vec, dtype=float)
        if skeleton is not None:
            skeleton.check_state(vec)
        if vec.ndim != 1 or (len(vec) - 6) % 3 or len(vec) < 6:
            raise DimensionMismatchError(f"Cannot split a vector of length {vec.shape} into a human state")
        joints = tuple(ExpMap(vec[i:i + 3]) for i in range(6, len(vec), 3))
        return cls(base_pos=vec[:3].copy(), base_rot=ExpMap(vec[3:6]), joints=joints)


StateLike = Union[HumanState, np.ndarray, Sequence[float]]


def _as_vector(skel: Skeleton, state: StateLike) -> np.ndarray:
    vec = state.to_vector() if isinstance(state, HumanState) else np.asarray(state, dtype=float)
    return skel.check_state(vec)


def _chain_transforms(skel: Skeleton, vec: np.ndarray, chain: Sequence[int]):
    n = len(skel.joints)
    offsets = skel.offsets
    pos = np.zeros((n, 3))
    world = np.zeros((n, 3, 3))
    local = np.zeros((n, 3, 3))
    for k in chain:
        local[k] = expmap_to_matrix(vec[skel.rotation_slice(k)])
        parent = skel.joints[k].parent
        if parent < 0:
            pos[k] = vec[:3]
            world[k] = local[k]
        else:
            pos[k] = pos[parent] + world[parent] @ offsets[k]
            world[k] = world[parent] @ local[k]
    return pos, world, local


def forward_kinematics(skel: Skeleton, state: StateLike) -> Dict[str, np.ndarray]:
    """World position of every joint in meters"""
    vec = _as_vector(skel, state)
    pos, _, _ = _chain_transforms(skel, vec, range(len(skel.joints)))
    return {name: pos[i].copy() for i, name in enumerate(skel.names)}


def all_joint_positions(skel: Skeleton, states: np.ndarray) -> np.ndarray:
    """(T, D) states -> (T, n_joints, 3) positions"""
    states = skel.check_state(np.atleast_2d(states))
    every = range(len(skel.joints))
    return np.stack([_chain_transforms(skel, s, every)[0] for s in states])


def joint_positions(skel: Skeleton, states: np.ndarray, joint: Union[str, int]) -> np.ndarray:
    """(T, D) states -> (T, 3) positions of one joint, computed along its chain only"""
    states = skel.check_state(np.atleast_2d(states))
    chain = skel.chain(joint)
    target = chain[-1]
    return np.stack([_chain_transforms(skel, s, chain)[0][target] for s in states])


def joint_positions_vjp(skel: Skeleton, states: np.ndarray, joint: Union[str, int],
                        upstream: np.ndarray) -> np.ndarray:
    """Pull (T, 3) position gradients back to (T, D) state gradients"""
    states = skel.check_state(np.atleast_2d(states))
    upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
    if upstream.shape != (len(states), 3):
        raise DimensionMismatchError(f"Upstream gradient has shape {upstream.shape}, expected {(len(states), 3)}")
    chain = skel.chain(joint)
    target = chain[-1]
    offsets = skel.offsets
    grads = np.zeros_like(states)
    for t, vec in enumerate(states):
        if not np.any(upstream[t]):
            continue
        _, world, local = _chain_transforms(skel, vec, chain)
        g_pos = {k: np.zeros(3) for k in chain}
        g_rot = {k: np.zeros((3, 3)) for k in chain}
        g_pos[target] = upstream[t].copy()
        for k in reversed(chain):
            parent = skel.joints[k].parent
            if parent >= 0:
                g_pos[parent] += g_pos[k]
                g_rot[parent] += np.outer(g_pos[k], offsets[k]) + g_rot[k] @ local[k].T
                g_local = world[parent].T @ g_rot[k]
            else:
                grads[t, :3] = g_pos[k]
                g_local = g_rot[k]
            if not np.any(g_local):
                continue
            derivs = expmap_matrix_derivatives(vec[skel.rotation_slice(k)], local[k])
            grads[t, skel.rotation_slice(k)] = np.einsum("irc,rc->i", derivs, g_local)
    return grads


def load_skeleton(path: Union[str, Path]) -> Skeleton:
    """Read a skeleton file: joints in topological order with parent name, offset and flags"""
    path = Path(path)
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise MissingReferenceError(f"Skeleton file not found: {path}")
    except json.JSONDecodeError as e:
        raise FileFormatError(f"Skeleton file {path} contains invalid JSON: {e}")

    try:
        names = [entry["name"] for entry in data["joints"]]
        joints = []
        for entry in data["joints"]:
            parent = entry.get("parent")
            parent_index = -1 if parent is None else (parent if isinstance(parent, int) else names.index(parent))
            offset = tuple(float(c) for c in entry.get("offset", (0.0, 0.0, 0.0)))
            if len(offset) != 3:
                raise FileFormatError(f"Joint {entry['name']} offset must have 3 components")
            joints.append(JointSpec(entry["name"], parent_index, offset, entry.get("end_effector")))
    except (KeyError, ValueError, TypeError) as e:
        raise FileFormatError(f"Malformed skeleton file {path}: {e}")

    skeleton = Skeleton(
        name=data.get("name", path.stem),
        joints=tuple(joints),
        key_joints=tuple(data.get("key_joints", KEY_JOINTS)),
    )
    logger.debug(f"Loaded skeleton {skeleton.name} with {len(joints)} joints, state dimension {skeleton.state_dim}")
    return skeleton
