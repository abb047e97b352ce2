from src.costs.objective import CostTermError, Objective, ObjectiveValue, total_objective
from src.costs.smoothness import anchored_smoothness, build_K, cost_smooth, second_difference_matrix
from src.costs.terms import CostError, cost_delta, cost_goal_path, cost_goal_point, cost_interaction, cost_obstacle
