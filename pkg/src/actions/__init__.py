# importing the modules registers their actions
from src.actions import data_actions, eval_actions, model_actions, optimize_actions, run_actions
