import json

import numpy as np
import pandas as pd
import pytest

from src.dataio import (
    EvalReport,
    EvaluationError,
    evaluate,
    generate_synthetic,
    horizon_frames,
    human_columns,
    interpolation_baseline,
    load_dataset,
    load_objective,
    load_trajectory,
    minimum_jerk_profile,
    run_evaluation,
    save_dataset,
    save_table,
    save_trajectory,
    zero_velocity_baseline,
)
from src.errors import ConfigurationError, DimensionMismatchError, FileFormatError, MissingReferenceError
from src.kinematics.skeleton import joint_positions
from src.kinematics.trajectory import Trajectory, TrajectoryError
from src.model import PredictorModel
from src.project import MfoProject
from src.training import holdout_indices, slice_dataset, split_holdout, train
from src.types import EvaluationConfig, LbfgsConfig, ObjectiveSpec, SyntheticSpec
from tests.conftest import CONFIGS
from tests.helpers import random_states, tiny_model


def test_minimum_jerk_profile():
    tau = np.array([-0.5, 0.0, 0.5, 1.0, 2.0])
    np.testing.assert_allclose(minimum_jerk_profile(tau), [0.0, 0.0, 0.5, 1.0, 1.0])


@pytest.mark.parametrize("kind", ["reaching", "walking", "obstacle"])
def test_synthetic_data_does_not_depend_on_workers(skeleton, kind):
    single = generate_synthetic(SyntheticSpec(kind=kind, count=4, duration_s=1.0, seed=3, workers=1), skeleton)
    pooled = generate_synthetic(SyntheticSpec(kind=kind, count=4, duration_s=1.0, seed=3, workers=2), skeleton)
    assert len(single) == 4
    for a, b in zip(single.trajectories, pooled.trajectories):
        np.testing.assert_array_equal(a.states, b.states)
    other = generate_synthetic(SyntheticSpec(kind=kind, count=4, duration_s=1.0, seed=4), skeleton)
    assert not np.array_equal(single.trajectories[0].states, other.trajectories[0].states)


def test_empty_synthetic_dataset(skeleton):
    assert len(generate_synthetic(SyntheticSpec(count=0), skeleton)) == 0


def test_degenerate_workspace_is_rejected():
    with pytest.raises(ValueError):
        SyntheticSpec(workspace_low=[0.0, 0.0, 0.0], workspace_high=[1.0, 0.0, 2.0])


@pytest.mark.parametrize("kind", ["walking", "obstacle"])
def test_walking_base_speed_is_bounded(skeleton, kind):
    dataset = generate_synthetic(SyntheticSpec(kind=kind, count=10, duration_s=3.0, seed=11), skeleton)
    for traj in dataset.trajectories:
        speed = np.linalg.norm(np.diff(traj.states[:, :3], axis=0), axis=1) * traj.frame_rate
        assert speed.max() <= 2.0


def test_reaching_goals_are_the_final_wrist_positions(skeleton):
    dataset = generate_synthetic(SyntheticSpec(kind="reaching", count=3, duration_s=3.0, seed=1), skeleton)
    for traj, goal, obstacle in zip(dataset.trajectories, dataset.goals, dataset.obstacles):
        np.testing.assert_allclose(joint_positions(skeleton, traj.states[-1:], "right_wrist")[0], goal)
        assert obstacle is None


@pytest.mark.parametrize("kind", ["walking", "obstacle"])
def test_walking_goals_are_the_final_pelvis_positions(skeleton, kind):
    dataset = generate_synthetic(SyntheticSpec(kind=kind, count=2, duration_s=2.0, seed=3), skeleton)
    assert dataset.goal_joint == "pelvis"
    for index, traj in enumerate(dataset.trajectories):
        goal = dataset.goal_for(index)
        assert goal.joint == "pelvis"
        np.testing.assert_allclose(goal.position, joint_positions(skeleton, traj.states[-1:], "pelvis")[0])


def test_obstacles_lie_on_the_straight_walking_line(skeleton):
    dataset = generate_synthetic(SyntheticSpec(kind="obstacle", count=3, duration_s=3.0, seed=2), skeleton)
    for index, traj in enumerate(dataset.trajectories):
        scene = dataset.scene_for(index)
        assert len(scene) == 1
        clearance = scene.distances(traj.states[:, :3])
        assert clearance.min() > 0.0


def test_zero_velocity_baseline(rng):
    observed = Trajectory(30.0, random_states(rng, 5, 12))
    predicted = zero_velocity_baseline(observed, 7)
    assert len(predicted) == 7
    np.testing.assert_array_equal(predicted.states, np.tile(observed.states[-1], (7, 1)))
    with pytest.raises(TrajectoryError):
        zero_velocity_baseline(Trajectory(30.0, np.zeros((0, 12))), 3)


def test_interpolation_baseline():
    start, goal = np.array([0.0, 0.5, 1.0]), np.array([0.3, -0.1, 1.2])
    path = interpolation_baseline(start, goal, 10)
    np.testing.assert_array_equal(path[-1], goal)
    np.testing.assert_allclose(path[4], 0.5 * (start + goal))
    np.testing.assert_allclose(interpolation_baseline(start, start, 4), np.tile(start, (4, 1)))


def test_horizon_frames():
    assert horizon_frames(125, 30.0) == 4
    assert horizon_frames(1000, 30.0) == 30
    with pytest.raises(EvaluationError):
        horizon_frames(10, 30.0)


def test_evaluate_examples(skeleton, rng):
    truth = random_states(rng, 30, skeleton.state_dim)
    shifted = truth.copy()
    shifted[:, 0] += 0.1
    static = np.tile(truth[0], (30, 1))
    report = evaluate({"same": [truth], "shifted": [shifted]}, [truth], skeleton, [500, 1000], 30.0)
    np.testing.assert_allclose(report["same"], [0.0, 0.0])
    np.testing.assert_allclose(report["shifted"], [0.9, 0.9])
    np.testing.assert_allclose(report["shifted (w)"], [0.1, 0.1])
    zerovel = evaluate({"zerovel": [static]}, [static], skeleton, [250, 1000], 30.0)
    np.testing.assert_allclose(zerovel["zerovel"], [0.0, 0.0])


def test_evaluate_wrist_paths_and_errors(skeleton, rng):
    truth = random_states(rng, 30, skeleton.state_dim)
    wrist = joint_positions(skeleton, truth, "right_wrist")
    report = evaluate({"interp": [wrist]}, [truth], skeleton, [1000], 30.0)
    assert list(report.rows) == ["interp (w)"]
    assert report["interp (w)"] == [0.0]
    with pytest.raises(EvaluationError):
        evaluate({"short": [truth[:10]]}, [truth], skeleton, [1000], 30.0)
    with pytest.raises(EvaluationError):
        evaluate({"missing": []}, [truth], skeleton, [1000], 30.0)


def test_eval_report_csv(tmp_path):
    report = EvalReport([125, 250], {"zerovel": [0.123, 0.456], "model (w)": [0.05, 0.0]})
    report.to_csv(tmp_path / "report.csv")
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines == ["method,125,250", "zerovel,0.12,0.46", "model (w),0.05,0.00"]


def test_trajectory_file_round_trip(skeleton, rng, tmp_path):
    traj = Trajectory(30.0, random_states(rng, 12, skeleton.state_dim))
    path = save_trajectory(traj, tmp_path / "motion.csv", skeleton)
    header = pd.read_csv(path, nrows=0).columns.tolist()
    assert header[:4] == ["time_s", "base_pos_x", "base_pos_y", "base_pos_z"]
    assert "joint_right_wrist_z" in header
    loaded = load_trajectory(path, skeleton)
    np.testing.assert_array_equal(loaded.states, traj.states)
    assert loaded.frame_rate == 30.0

    (tmp_path / "motion.json").unlink()
    assert load_trajectory(path).frame_rate == pytest.approx(30.0)


def test_robot_trajectory_files(rng, tmp_path):
    robot = Trajectory(30.0, rng.normal(size=(6, 3)), layout="robot")
    loaded = load_trajectory(save_trajectory(robot, tmp_path / "robot.csv"))
    assert loaded.layout == "robot"
    np.testing.assert_array_equal(loaded.states, robot.states)
    with pytest.raises(DimensionMismatchError):
        save_trajectory(Trajectory(30.0, np.zeros((3, 4)), layout="robot"), tmp_path / "bad.csv")


def test_trajectory_file_errors(skeleton, tmp_path):
    with pytest.raises(MissingReferenceError):
        load_trajectory(tmp_path / "absent.csv")
    no_time = tmp_path / "no_time.csv"
    no_time.write_text("a,b\n1,2\n")
    with pytest.raises(FileFormatError):
        load_trajectory(no_time)
    text = tmp_path / "text.csv"
    text.write_text("time_s,a\n0,hello\n0.1,2\n")
    with pytest.raises(FileFormatError):
        load_trajectory(text)
    short = tmp_path / "short.csv"
    short.write_text("time_s," + ",".join(human_columns(None, 12)) + "\n0," + ",".join(["0"] * 12) + "\n")
    with pytest.raises(FileFormatError):
        load_trajectory(short)
    (tmp_path / "short.json").write_text(json.dumps({"frame_rate": 30.0}))
    with pytest.raises(DimensionMismatchError):
        load_trajectory(short, skeleton)


def test_dataset_round_trip(skeleton, tmp_path):
    dataset = generate_synthetic(SyntheticSpec(kind="obstacle", count=2, duration_s=1.0, seed=5), skeleton)
    loaded = load_dataset(save_dataset(dataset, tmp_path / "data", skeleton), skeleton)
    assert loaded.kind == "obstacle"
    for a, b in zip(dataset.trajectories, loaded.trajectories):
        np.testing.assert_array_equal(a.states, b.states)
    assert loaded.obstacles[1].to_dict() == dataset.obstacles[1].to_dict()
    assert loaded.subset([1]).obstacles[0].to_dict() == dataset.obstacles[1].to_dict()
    assert loaded.subset([1]).goal_for(0).joint == "pelvis"
    np.testing.assert_array_equal(loaded.goals[1], dataset.goals[1])
    with pytest.raises(MissingReferenceError):
        load_dataset(tmp_path / "nowhere")


def test_save_table(tmp_path):
    path = save_table(np.arange(6.0).reshape(3, 2), tmp_path / "delta.csv", ["a", "b"])
    assert path.read_text().splitlines() == ["step,a,b", "1,0,1", "2,2,3", "3,4,5"]
    with pytest.raises(DimensionMismatchError):
        save_table(np.zeros((3, 2)), tmp_path / "bad.csv", ["a"])


def test_bundled_objectives_validate():
    for path in sorted((CONFIGS / "objectives").glob("*.json")):
        assert isinstance(load_objective(path), ObjectiveSpec)


def test_invalid_objective_file(tmp_path):
    path = tmp_path / "objective.json"
    path.write_text(json.dumps({"horizon": 10, "gaol": [0, 0, 1]}))
    with pytest.raises(ConfigurationError):
        load_objective(path)


def test_run_evaluation_reports_every_method(skeleton):
    dataset = generate_synthetic(SyntheticSpec(kind="reaching", count=2, duration_s=2.0, seed=9), skeleton)
    model = tiny_model(skeleton.state_dim, hidden=8, seed=1, output_scale=0.01)
    spec = ObjectiveSpec(optimizer=LbfgsConfig(max_iterations=5), goal=None)
    config = EvaluationConfig(horizons_ms=[125, 250], max_samples=1)
    report = run_evaluation(model, skeleton, dataset, config, spec)
    assert set(report.rows) == {"zerovel", "zerovel (w)", "model", "model (w)", "ours g", "ours g (w)", "interp (w)"}
    assert report["interp (w)"][-1] == pytest.approx(0.0, abs=1e-12)
    assert report.to_frame().shape == (7, 2)


@pytest.fixture(scope="module")
def default_report():
    """Train the default reaching project and score its held-out windows"""
    project = MfoProject("default", CONFIGS)
    config = project.config
    dataset = generate_synthetic(config.synthetic.model_copy(update={"workers": 1}), project.skeleton)
    fit, _ = split_holdout(dataset.trajectories, config.training.holdout_fraction, config.training.seed)
    samples = slice_dataset(fit, config.training).samples
    model = train(PredictorModel.initialize(config.model), samples, config.training).model
    held = dataset.subset(holdout_indices(len(dataset), config.training.holdout_fraction, config.training.seed))
    return run_evaluation(model, project.skeleton, held, config.evaluation, project.objective)


@pytest.mark.slow
def test_trained_model_beats_zero_velocity(default_report):
    assert all(m < z for m, z in zip(default_report["model"], default_report["zerovel"]))


@pytest.mark.slow
def test_goal_refinement_is_no_worse_than_the_model_from_half_a_second(default_report):
    columns = [i for i, h in enumerate(default_report.horizons_ms) if h >= 500]
    for method in ("model", "model (w)"):
        refined = method.replace("model", "ours g")
        assert all(default_report[refined][i] <= default_report[method][i] for i in columns)
    assert default_report["ours g (w)"][-1] < 0.03


def test_limb_coordinates_leave_the_rest_of_the_body_alone(skeleton):
    coords = skeleton.limb_coordinates("right_wrist")
    owners = {skeleton.names[(c - 3) // 3] for c in coords}
    assert owners == {"right_inner_shoulder", "right_shoulder", "right_elbow"}
    assert skeleton.limb_coordinates("pelvis") == []


def test_evaluate_rejects_other_frame_rates(skeleton, rng):
    truth = random_states(rng, 30, skeleton.state_dim)
    report = evaluate({"same": [Trajectory(30.0, truth)]}, [Trajectory(30.0, truth)], skeleton, [1000], 30.0)
    assert report["same"] == [0.0]
    with pytest.raises(EvaluationError):
        evaluate({"fast": [Trajectory(60.0, truth)]}, [truth], skeleton, [500], 30.0)
    with pytest.raises(EvaluationError):
        evaluate({"model": [truth]}, [Trajectory(25.0, truth)], skeleton, [500], 30.0)


def test_run_evaluation_rejects_other_frame_rates(skeleton):
    dataset = generate_synthetic(SyntheticSpec(kind="reaching", count=1, duration_s=2.0, frame_rate=25.0, seed=9),
                                 skeleton)
    model = tiny_model(skeleton.state_dim, hidden=8, seed=1, output_scale=0.01)
    config = EvaluationConfig(horizons_ms=[120], observed_seconds=0.5, max_samples=1)
    spec = ObjectiveSpec(optimizer=LbfgsConfig(max_iterations=2))
    with pytest.raises(EvaluationError):
        run_evaluation(model, skeleton, dataset, config, spec)
