import logging

from src.action_handler import ActionParameter, register_action
from src.dataio import generate_synthetic, save_dataset
from src.helpers.runs import command_run

logger = logging.getLogger("actions.data_actions")


@register_action("synth", parameters=[
    ActionParameter("kind", False, str, "reaching, walking or obstacle", override="synthetic.kind"),
    ActionParameter("count", False, int, "number of trajectories", override="synthetic.count"),
    ActionParameter("duration", False, float, "seconds per trajectory", override="synthetic.duration_s"),
    ActionParameter("seed", False, int, "dataset seed", override="synthetic.seed"),
    ActionParameter("workers", False, int, "generator threads", override="synthetic.workers"),
    ActionParameter("out", False, str, "output directory"),
])
def synth(project, out=None, **kwargs):
    """Generate a synthetic motion dataset"""
    spec = project.config.synthetic
    with command_run(project, "synth", kwargs, out, seed=spec.seed) as run:
        dataset = generate_synthetic(spec, project.skeleton)
        save_dataset(dataset, run.staging / "dataset", project.skeleton)
    return run.final_dir
