import hashlib
import json
import logging
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from src.constants import MODEL_FORMAT_VERSION, PACKAGE_VERSION
from src.errors import FileFormatError, MissingReferenceError

logger = logging.getLogger("helpers.runs")

MANIFEST_NAME = "manifest.json"


def file_sha256(path: Union[str, Path]) -> str:
    """Hex digest of a file, or of every file below a directory in sorted order"""
    path = Path(path)
    if not path.exists():
        raise MissingReferenceError(f"Cannot hash missing file: {path}")
    digest = hashlib.sha256()
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for file in files:
        if path.is_dir():
            digest.update(file.relative_to(path).as_posix().encode())
        with open(file, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                digest.update(chunk)
    return digest.hexdigest()


def versions() -> Dict[str, str]:
    return {"package": PACKAGE_VERSION, "numpy": np.__version__, "model_format": MODEL_FORMAT_VERSION}


class RunManifest(BaseModel):
    """Everything needed to regenerate the outputs of one command"""
    command: str
    project: str
    config_dir: str
    params: Dict[str, Any] = Field(default_factory=dict)
    overrides: Dict[str, Any] = Field(default_factory=dict)
    configs: Dict[str, str] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(default_factory=dict)
    seed: Optional[int] = None
    versions: Dict[str, str] = Field(default_factory=versions)
    artifacts: List[str] = Field(default_factory=list)


def write_manifest(manifest: RunManifest, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    manifest.artifacts = sorted(
        p.relative_to(directory).as_posix() for p in directory.rglob("*")
        if p.is_file() and p.name != MANIFEST_NAME
    )
    path = directory / MANIFEST_NAME
    with open(path, "w") as f:
        json.dump(manifest.model_dump(), f, indent=2)
    return path


def read_manifest(path: Union[str, Path]) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise MissingReferenceError(f"Run manifest not found: {path}")
    except json.JSONDecodeError as e:
        raise FileFormatError(f"Run manifest {path} contains invalid JSON: {e}")
    try:
        return RunManifest.model_validate(data)
    except ValidationError as e:
        raise FileFormatError(f"Run manifest {path} is malformed: {e}")


@contextmanager
def staged_output(final_dir: Union[str, Path]) -> Iterator[Path]:
    """Yield an empty sibling directory that replaces final_dir only if the block succeeds"""
    final_dir = Path(final_dir)
    final_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{final_dir.name}-", dir=final_dir.parent))
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    if final_dir.exists():
        shutil.rmtree(final_dir)
    staging.rename(final_dir)
    logger.debug(f"Moved staged output into {final_dir}")


@dataclass
class RunContext:
    """Staging directory and manifest of the command being executed"""
    staging: Path
    final_dir: Path
    manifest: RunManifest

    def record_input(self, name: str, path: Union[str, Path]) -> None:
        self.manifest.inputs[name] = file_sha256(path)


@contextmanager
def command_run(project, command: str, params: Dict[str, Any], out: Optional[Union[str, Path]] = None,
                seed: Optional[int] = None) -> Iterator[RunContext]:
    """Stage the outputs of one command and write its manifest next to them"""
    final_dir = Path(out) if out is not None else project.output_dir / command
    manifest = RunManifest(
        command=command,
        project=project.project_name,
        config_dir=str(project.directory.resolve()),
        params={k: v for k, v in params.items() if v is not None},
        overrides=dict(project.overrides),
        seed=seed,
    )
    with staged_output(final_dir) as staging:
        context = RunContext(staging=staging, final_dir=final_dir, manifest=manifest)
        yield context
        manifest.configs = dict(project.config_hashes)
        write_manifest(manifest, staging)
    logger.info(f"Wrote {command} results to {final_dir}")
