PACKAGE_VERSION = "0.1.0"
MODEL_FORMAT_VERSION = "mfo-model-v1"

DEFAULT_FRAME_RATE = 30.0
DEFAULT_HORIZON = 30

# Evaluation joints: wrists, elbows, knees, ankles and the pelvis
KEY_JOINTS = [
    "left_wrist", "right_wrist",
    "left_elbow", "right_elbow",
    "left_knee", "right_knee",
    "left_ankle", "right_ankle",
    "pelvis",
]

REACHING_HORIZONS_MS = [125, 250, 375, 500, 625, 750, 875, 1000]
OBSTACLE_HORIZONS_MS = [250, 500, 750, 1000, 1250, 1500, 1750, 2000]

# per-term weights of the objective
DEFAULT_WEIGHTS = {
    "delta": 1e-2,
    "goal": 1.0,
    "obstacle": 1.0,
    "robot_goal": 1.0,
    "robot_obstacle": 1.0,
    "smooth": 1e-1,
    "joint": 1.0,
}
HUMAN_TERMS = ("delta", "goal", "obstacle")
ROBOT_TERMS = ("robot_goal", "robot_obstacle", "smooth")
JOINT_TERMS = ("joint",)

DEFAULT_ALPHA = 10.0
