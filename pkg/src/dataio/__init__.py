from src.dataio.baselines import interpolation_baseline, zero_velocity_baseline
from src.dataio.evaluation import EvalReport, EvaluationError, evaluate, horizon_frames, run_evaluation
from src.dataio.files import (
    human_columns,
    load_dataset,
    load_objective,
    load_trajectory,
    read_json,
    save_dataset,
    save_table,
    save_trajectory,
)
from src.dataio.synthetic import GoalPoint, SyntheticDataset, generate_synthetic, minimum_jerk_profile
