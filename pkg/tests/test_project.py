import json
import shutil

import pytest

from src.errors import ConfigurationError, FileFormatError, MissingReferenceError
from src.helpers.runs import RunManifest, file_sha256, read_manifest, staged_output, write_manifest
from src.project import MfoProject, apply_overrides, default_project_name, list_projects
from tests.conftest import CONFIGS


@pytest.fixture
def configs(tmp_path):
    directory = tmp_path / "configs"
    shutil.copytree(CONFIGS, directory)
    return directory


def test_bundled_projects(configs):
    assert list_projects(configs) == ["default", "obstacle", "walking"]
    assert default_project_name(configs) == "default"
    for name in list_projects(configs):
        project = MfoProject(name, configs)
        assert project.skeleton.state_dim == 66
        assert project.objective.horizon >= 1


def test_missing_required_fields(configs):
    (configs / "broken.json").write_text(json.dumps({"name": "broken", "skeleton": "skeletons/default.json"}))
    with pytest.raises(ConfigurationError, match="Missing required fields: objective"):
        MfoProject("broken", configs)
    with pytest.raises(MissingReferenceError):
        MfoProject("absent", configs)


def test_overrides(configs):
    project = MfoProject("default", configs)
    tuned = project.with_overrides({"training.epochs": 2, "model.hidden_size": 8})
    assert tuned.config.training.epochs == 2
    assert tuned.config.model.hidden_size == 8
    assert project.config.training.epochs == 5
    assert tuned.with_overrides({"synthetic.seed": 3}).overrides == {
        "training.epochs": 2, "model.hidden_size": 8, "synthetic.seed": 3}
    with pytest.raises(ConfigurationError, match="Unknown configuration key"):
        apply_overrides(project.config, {"training.epoch": 2})
    with pytest.raises(ConfigurationError, match="Unknown configuration key"):
        apply_overrides(project.config, {"name.first": "x"})
    with pytest.raises(ConfigurationError):
        apply_overrides(project.config, {"training.epochs": "many"})


def test_config_hashes_cover_every_file_read(configs):
    project = MfoProject("obstacle", configs)
    project.scene_for(project.objective)
    project.skeleton
    assert project.config_hashes["obstacle.json"] == file_sha256(configs / "obstacle.json")
    assert set(project.config_hashes) >= {"obstacle.json", "skeletons/default.json"}
    assert any(key.startswith("scenes/") for key in project.config_hashes)


def test_directory_hash_depends_on_names_and_content(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "a" / "x.csv").write_text("1\n")
    first = file_sha256(tmp_path / "a")
    (tmp_path / "a" / "x.csv").rename(tmp_path / "a" / "y.csv")
    assert file_sha256(tmp_path / "a") != first
    with pytest.raises(MissingReferenceError):
        file_sha256(tmp_path / "b")


def test_staged_output_is_all_or_nothing(tmp_path):
    final = tmp_path / "runs" / "train"
    with pytest.raises(RuntimeError):
        with staged_output(final) as staging:
            (staging / "model.mfo").write_text("partial")
            raise RuntimeError("interrupted")
    assert list((tmp_path / "runs").iterdir()) == []

    final.mkdir()
    (final / "old.txt").write_text("old")
    with staged_output(final) as staging:
        (staging / "new.txt").write_text("new")
    assert sorted(p.name for p in final.iterdir()) == ["new.txt"]


def test_manifest_round_trip_and_errors(tmp_path):
    (tmp_path / "out.csv").write_text("a\n")
    manifest = RunManifest(command="synth", project="default", config_dir=str(tmp_path), seed=7)
    write_manifest(manifest, tmp_path)
    loaded = read_manifest(tmp_path)
    assert loaded.artifacts == ["out.csv"]
    assert loaded.seed == 7
    with pytest.raises(MissingReferenceError):
        read_manifest(tmp_path / "absent")
    (tmp_path / "manifest.json").write_text(json.dumps({"command": "synth"}))
    with pytest.raises(FileFormatError):
        read_manifest(tmp_path)
