import logging

from src.action_handler import ActionParameter, register_action
from src.actions.shared import default_model_path, observed_motion, open_dataset, open_model
from src.dataio import save_trajectory
from src.helpers.runs import command_run
from src.kinematics.trajectory import Trajectory
from src.model import PredictorModel, rollout, save_model
from src.training import slice_dataset, split_holdout, train as train_model

logger = logging.getLogger("actions.model_actions")


@register_action("train", parameters=[
    ActionParameter("data", False, str, "dataset directory written by synth"),
    ActionParameter("epochs", False, int, "training epochs", override="training.epochs"),
    ActionParameter("learning_rate", False, float, "Adam step size", override="training.learning_rate"),
    ActionParameter("batch_size", False, int, "samples per batch", override="training.batch_size"),
    ActionParameter("seed", False, int, "shuffle, holdout and augmentation seed", override="training.seed"),
    ActionParameter("hidden_size", False, int, "GRU units per layer", override="model.hidden_size"),
    ActionParameter("layers", False, int, "GRU layers", override="model.num_layers"),
    ActionParameter("out", False, str, "output directory"),
])
def train(project, data=None, out=None, **kwargs):
    """Train the recurrent predictor on a dataset and export its loss curve"""
    config = project.config
    with command_run(project, "train", dict(kwargs, data=data), out, seed=config.training.seed) as run:
        dataset = open_dataset(project, run, data)
        fit, held = split_holdout(dataset.trajectories, config.training.holdout_fraction, config.training.seed)
        samples = slice_dataset(fit, config.training)
        holdout = slice_dataset(held, config.training)
        logger.info(f"Training on {len(samples)} slices, {len(holdout)} held out")
        model = PredictorModel.initialize(config.model)
        result = train_model(model, samples.samples, config.training, holdout.samples)
        save_model(result.model, run.staging / "model.mfo")
        result.curve.to_csv(run.staging / "loss_curve.csv")
    return run.final_dir


@register_action("predict", parameters=[
    ActionParameter("model", False, str, "model file written by train"),
    ActionParameter("observed", False, str, "observed trajectory CSV"),
    ActionParameter("data", False, str, "dataset directory to take the observed window from"),
    ActionParameter("index", False, int, "trajectory index within the dataset"),
    ActionParameter("observed_seconds", False, float, "length of the observed window"),
    ActionParameter("horizon", False, int, "frames to predict"),
    ActionParameter("out", False, str, "output directory"),
])
def predict(project, model=None, horizon=None, out=None, **kwargs):
    """Roll the predictor forward from an observed motion"""
    model_path = model or str(default_model_path(project))
    horizon = horizon or project.objective.horizon
    params = dict(kwargs, model=model_path, horizon=horizon)
    with command_run(project, "predict", params, out) as run:
        predictor = open_model(project, run, model_path)
        observed, _, _ = observed_motion(project, run, **kwargs)
        result = rollout(predictor, observed, None, horizon, keep_cache=False)
        save_trajectory(Trajectory(observed.frame_rate, result.states), run.staging / "prediction.csv",
                        project.skeleton)
    return run.final_dir
