import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from src.dataio.files import load_objective, read_json
from src.errors import ConfigurationError
from src.helpers.runs import file_sha256
from src.kinematics.skeleton import Skeleton, load_skeleton
from src.scene import Scene, load_scene
from src.types import ObjectiveSpec, ProjectConfig

REQUIRED_FIELDS = ["name", "skeleton", "objective"]
GENERAL_CONFIG = "general.json"

logger = logging.getLogger("project")


def config_dir() -> Path:
    return Path(os.getenv("MFO_CONFIG_DIR", "configs"))


def default_project_name(directory: Optional[Path] = None) -> Optional[str]:
    path = (directory or config_dir()) / GENERAL_CONFIG
    if not path.exists():
        return None
    return read_json(path, "General config").get("default_project")


def list_projects(directory: Optional[Path] = None) -> list:
    directory = directory or config_dir()
    if not directory.exists():
        return []
    return sorted(p.stem for p in directory.glob("*.json") if p.name != GENERAL_CONFIG)


def apply_overrides(config: ProjectConfig, overrides: Dict[str, Any]) -> ProjectConfig:
    """Set dotted keys such as training.epochs and validate the result"""
    data = config.model_dump()
    for key, value in overrides.items():
        node = data
        *parents, leaf = key.split(".")
        for part in parents:
            if not isinstance(node.get(part), dict):
                raise ConfigurationError(f"Unknown configuration key: {key}")
            node = node[part]
        if leaf not in node:
            raise ConfigurationError(f"Unknown configuration key: {key}")
        node[leaf] = value
    try:
        return ProjectConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid override {overrides}: {e}")


class MfoProject:
    """A project file plus the skeleton, objective and scene files it refers to"""

    def __init__(self, project_name: str, directory: Optional[Union[str, Path]] = None,
                 overrides: Optional[Dict[str, Any]] = None):
        self.directory = Path(directory) if directory is not None else config_dir()
        path = self.directory / f"{project_name}.json"
        data = read_json(path, "Project")

        missing_fields = [field for field in REQUIRED_FIELDS if field not in data]
        if missing_fields:
            raise ConfigurationError(f"Missing required fields: {', '.join(missing_fields)}")
        try:
            config = ProjectConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(f"Project file {path} is invalid: {e}")

        self.overrides = dict(overrides or {})
        self.config = apply_overrides(config, self.overrides) if self.overrides else config
        self.name = self.config.name
        self.project_name = project_name
        self.path = path
        # sha256 of every config file read, keyed by its path relative to the config directory
        self.config_hashes: Dict[str, str] = {path.name: file_sha256(path)}
        self._skeleton: Optional[Skeleton] = None
        self._objective: Optional[ObjectiveSpec] = None

    def with_overrides(self, overrides: Dict[str, Any]) -> "MfoProject":
        """Reload the project with extra dotted-key overrides on top of the current ones"""
        merged = dict(self.overrides)
        merged.update(overrides)
        return MfoProject(self.project_name, self.directory, merged)

    def resolve(self, reference: Union[str, Path]) -> Path:
        reference = Path(reference)
        return reference if reference.is_absolute() else self.directory / reference

    def _record(self, path: Path) -> None:
        try:
            key = path.relative_to(self.directory).as_posix()
        except ValueError:
            key = str(path)
        self.config_hashes[key] = file_sha256(path)

    @property
    def skeleton(self) -> Skeleton:
        if self._skeleton is None:
            path = self.resolve(self.config.skeleton)
            self._skeleton = load_skeleton(path)
            self._record(path)
            if self._skeleton.state_dim != self.config.model.state_dim:
                raise ConfigurationError(
                    f"Skeleton {self._skeleton.name} has state dimension {self._skeleton.state_dim}, "
                    f"model config declares {self.config.model.state_dim}")
        return self._skeleton

    def load_objective(self, reference: Optional[Union[str, Path]] = None) -> ObjectiveSpec:
        if reference is None and self._objective is not None:
            return self._objective
        path = self.resolve(reference or self.config.objective)
        spec = load_objective(path)
        self._record(path)
        if reference is None:
            self._objective = spec
        return spec

    @property
    def objective(self) -> ObjectiveSpec:
        return self.load_objective()

    def scene_for(self, spec: ObjectiveSpec) -> Scene:
        if spec.scene is None:
            return Scene()
        path = self.resolve(spec.scene)
        scene = load_scene(path)
        self._record(path)
        return scene

    @property
    def output_dir(self) -> Path:
        return Path(self.config.output_dir)
