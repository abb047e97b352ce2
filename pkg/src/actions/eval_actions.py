import logging

from src.action_handler import ActionParameter, float_list, register_action
from src.actions.shared import default_model_path, open_dataset, open_model
from src.dataio import run_evaluation
from src.helpers.runs import command_run
from src.training import holdout_indices

logger = logging.getLogger("actions.eval_actions")


@register_action("eval", parameters=[
    ActionParameter("model", False, str, "model file written by train"),
    ActionParameter("data", False, str, "dataset directory written by synth"),
    ActionParameter("objective", False, str, "objective file relative to the config directory"),
    ActionParameter("horizons", False, float_list, "comma separated horizons in ms", override="evaluation.horizons_ms"),
    ActionParameter("max_samples", False, int, "evaluate at most this many windows", override="evaluation.max_samples"),
    ActionParameter("out", False, str, "output directory"),
])
def evaluate(project, model=None, data=None, objective=None, out=None, **kwargs):
    """Score every prediction method on the held-out trajectories of a dataset"""
    config = project.config
    model_path = model or str(default_model_path(project))
    params = dict(kwargs, model=model_path, data=data, objective=objective)
    with command_run(project, "eval", params, out, seed=config.training.seed) as run:
        predictor = open_model(project, run, model_path)
        dataset = open_dataset(project, run, data)
        held = holdout_indices(len(dataset), config.training.holdout_fraction, config.training.seed)
        if held:
            dataset = dataset.subset(held)
        else:
            logger.warning("No held-out split configured, evaluating on the whole dataset")
        report = run_evaluation(predictor, project.skeleton, dataset, config.evaluation,
                                project.load_objective(objective))
        report.to_csv(run.staging / "eval_report.csv")
        logger.info("\n" + report.to_frame().to_string(float_format=lambda v: f"{v:.2f}"))
    return run.final_dir
