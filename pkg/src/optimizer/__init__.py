from src.optimizer.lbfgs import (
    OptimizationError,
    OptimizationResult,
    TerminationReason,
    TraceEntry,
    lbfgs_minimize,
    strong_wolfe,
)
from src.optimizer.problems import JointProblem, optimize_joint, optimize_prediction, straight_line, sweep_horizons
