from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.constants import (
    DEFAULT_ALPHA,
    DEFAULT_FRAME_RATE,
    DEFAULT_HORIZON,
    DEFAULT_WEIGHTS,
    HUMAN_TERMS,
    REACHING_HORIZONS_MS,
)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


def _check_vector(value: Optional[List[float]], name: str) -> Optional[List[float]]:
    if value is not None and len(value) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(value)}")
    return value


class ModelConfig(StrictModel):
    """Shape and numeric settings of the recurrent predictor"""
    state_dim: int = Field(66, ge=1)
    hidden_size: int = Field(1000, ge=1)
    num_layers: int = Field(3, ge=1)
    frame_rate: float = Field(DEFAULT_FRAME_RATE, gt=0)
    # state coordinates whose positions never enter the recurrent unit
    blind_coordinates: List[int] = Field(default_factory=lambda: [0, 1, 2])
    dtype: Literal["float32", "float64"] = "float64"
    init_seed: int = 0

    @model_validator(mode="after")
    def _check_blind(self):
        bad = [i for i in self.blind_coordinates if not 0 <= i < self.state_dim]
        if bad:
            raise ValueError(f"blind_coordinates out of range: {bad}")
        return self


class TrainingConfig(StrictModel):
    slice_seconds: float = Field(2.0, gt=0)
    input_seconds: float = Field(1.0, gt=0)
    frame_rate: float = Field(DEFAULT_FRAME_RATE, gt=0)
    stride: int = Field(1, ge=1)
    learning_rate: float = Field(1e-4, gt=0)
    batch_size: int = Field(8, ge=1)
    epochs: int = Field(10, ge=0)
    seed: int = 0
    holdout_fraction: float = Field(0.1, ge=0, lt=1)
    grad_clip: float = Field(5.0, gt=0)
    augment_heading: bool = True

    @property
    def slice_frames(self) -> int:
        return int(round(self.slice_seconds * self.frame_rate))

    @property
    def input_frames(self) -> int:
        return int(round(self.input_seconds * self.frame_rate))

    @model_validator(mode="after")
    def _check_frames(self):
        for name, seconds in (("slice", self.slice_seconds), ("input", self.input_seconds)):
            frames = seconds * self.frame_rate
            if abs(frames - round(frames)) > 1e-9:
                raise ValueError(f"{name} length {seconds}s is not a whole number of frames at {self.frame_rate} Hz")
        if self.slice_frames < 2:
            raise ValueError("slice must contain at least 2 frames")
        if not 2 <= self.input_frames < self.slice_frames:
            raise ValueError("input segment needs at least 2 frames and must be shorter than the slice")
        return self


class LbfgsConfig(StrictModel):
    memory: int = Field(10, ge=1)
    max_iterations: int = Field(100, ge=0)
    gradient_tolerance: float = Field(1e-6, ge=0)
    objective_tolerance: float = Field(1e-9, ge=0)
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = Field(20, ge=1)

    @model_validator(mode="after")
    def _check_wolfe(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("Wolfe constants must satisfy 0 < c1 < c2 < 1")
        return self


class ObjectiveWeights(StrictModel):
    """Per-term weights; a zero weight disables the term"""
    delta: float = Field(DEFAULT_WEIGHTS["delta"], ge=0)
    goal: float = Field(DEFAULT_WEIGHTS["goal"], ge=0)
    obstacle: float = Field(DEFAULT_WEIGHTS["obstacle"], ge=0)
    robot_goal: float = Field(DEFAULT_WEIGHTS["robot_goal"], ge=0)
    robot_obstacle: float = Field(DEFAULT_WEIGHTS["robot_obstacle"], ge=0)
    smooth: float = Field(DEFAULT_WEIGHTS["smooth"], ge=0)
    joint: float = Field(DEFAULT_WEIGHTS["joint"], ge=0)


class ObjectiveSpec(StrictModel):
    weights: ObjectiveWeights = Field(default_factory=ObjectiveWeights)
    alpha: float = Field(DEFAULT_ALPHA, gt=0)
    goal: Optional[List[float]] = None
    end_effector: str = "right_wrist"
    interaction_joint: Optional[str] = None
    robot_start: Optional[List[float]] = None
    robot_goal: Optional[List[float]] = None
    scene: Optional[str] = None
    horizon: int = Field(DEFAULT_HORIZON, ge=1)
    smoothness_variant: Literal["difference", "printed"] = "difference"
    delta_mask: Optional[List[int]] = None
    optimizer: LbfgsConfig = Field(default_factory=LbfgsConfig)

    @field_validator("goal", "robot_start", "robot_goal")
    @classmethod
    def check_points(cls, value, info):
        return _check_vector(value, info.field_name)

    @property
    def contact_joint(self) -> str:
        return self.interaction_joint or self.end_effector

    def human_only(self) -> "ObjectiveSpec":
        weights = {name: getattr(self.weights, name) if name in HUMAN_TERMS else 0.0
                   for name in ObjectiveWeights.model_fields}
        return self.model_copy(update={"weights": ObjectiveWeights(**weights)})

    def with_weights(self, **weights: float) -> "ObjectiveSpec":
        merged = self.weights.model_dump()
        merged.update(weights)
        return self.model_copy(update={"weights": ObjectiveWeights(**merged)})


class SyntheticSpec(StrictModel):
    kind: Literal["reaching", "walking", "obstacle"] = "reaching"
    count: int = Field(20, ge=0)
    duration_s: float = Field(3.0, gt=0)
    frame_rate: float = Field(DEFAULT_FRAME_RATE, gt=0)
    workspace_low: List[float] = Field(default_factory=lambda: [-1.0, -1.0, 0.0])
    workspace_high: List[float] = Field(default_factory=lambda: [1.0, 1.0, 2.0])
    obstacle_radius: float = Field(0.3, gt=0)
    seed: int = 0
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_bounds(self):
        _check_vector(self.workspace_low, "workspace_low")
        _check_vector(self.workspace_high, "workspace_high")
        if any(lo >= hi for lo, hi in zip(self.workspace_low, self.workspace_high)):
            raise ValueError("degenerate workspace bounds: every low must be below its high")
        if self.duration_s * self.frame_rate < 2:
            raise ValueError("synthetic trajectories need at least 2 frames")
        return self


class EvaluationConfig(StrictModel):
    horizons_ms: List[float] = Field(default_factory=lambda: list(REACHING_HORIZONS_MS))
    wrist_joint: str = "right_wrist"
    observed_seconds: float = Field(1.0, gt=0)
    max_samples: Optional[int] = Field(None, ge=1)


class ProjectConfig(StrictModel):
    name: str
    skeleton: str
    model: ModelConfig = Field(default_factory=ModelConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)
    objective: str
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    output_dir: str = "runs"
