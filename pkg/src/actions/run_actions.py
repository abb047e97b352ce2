import logging

from src.action_handler import ActionParameter, execute_action, register_action
from src.helpers.runs import read_manifest
from src.project import MfoProject

logger = logging.getLogger("actions.run_actions")


@register_action("rerun", parameters=[
    ActionParameter("manifest", True, str, "manifest.json or the run directory holding it"),
    ActionParameter("out", True, str, "new output directory"),
])
def rerun(project, manifest, out):
    """Replay a recorded run into a new output directory"""
    recorded = read_manifest(manifest)
    replay = MfoProject(recorded.project, recorded.config_dir, recorded.overrides)
    for name, digest in recorded.configs.items():
        current = replay.config_hashes.get(name)
        if current is not None and current != digest:
            logger.warning(f"Config file {name} changed since the run was recorded")
    return execute_action(replay, recorded.command, **recorded.params, out=out)
