from src.kinematics.rotations import (
    ExpMap,
    Quaternion,
    QuaternionNormError,
    expmap_to_quat,
    quat_loss_pair,
    quat_to_expmap,
)
from src.kinematics.skeleton import (
    HumanState,
    JointSpec,
    KinematicsError,
    Skeleton,
    UnknownJointError,
    all_joint_positions,
    forward_kinematics,
    joint_positions,
    joint_positions_vjp,
    load_skeleton,
)
from src.kinematics.trajectory import Trajectory, TrajectoryError, finite_difference_velocities, velocities_of
