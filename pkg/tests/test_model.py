import numpy as np
import pytest

from src.errors import DimensionMismatchError, MissingReferenceError
from src.model import (
    DeltaInput,
    GruLayerWeights,
    MissingActivationsError,
    ModelError,
    ModelFormatError,
    ModelVersionError,
    PredictorModel,
    TruncatedModelError,
    deserialize,
    grad_delta,
    gru_cell_step,
    load_model,
    rollout,
    save_model,
    serialize,
)
from src.types import ModelConfig
from tests.helpers import central_difference, random_states, relative_error, tiny_model


def test_gru_step_matches_formula(rng):
    weights = GruLayerWeights.random(4, 3, rng)
    x, h = rng.normal(size=4), rng.normal(size=3)

    def sig(a):
        return 1.0 / (1.0 + np.exp(-a))

    z = sig(weights.w_z @ x + weights.u_z @ h + weights.b_z)
    r = sig(weights.w_r @ x + weights.u_r @ h + weights.b_r)
    cand = np.tanh(weights.w_h @ x + weights.u_h @ (r * h) + weights.b_h)
    np.testing.assert_allclose(gru_cell_step(weights, x, h), (1 - z) * h + z * cand, atol=1e-14)


def test_gru_step_checks_shapes(rng):
    weights = GruLayerWeights.random(4, 3, rng)
    with pytest.raises(DimensionMismatchError):
        gru_cell_step(weights, np.zeros(5), np.zeros(3))


def test_zero_model_holds_the_last_frame(rng):
    model = PredictorModel.zeros(ModelConfig(state_dim=12, hidden_size=8, num_layers=2))
    observed = random_states(rng, 6, 12)
    result = rollout(model, observed, horizon=4)
    np.testing.assert_allclose(result.states, np.tile(observed[-1], (4, 1)))
    np.testing.assert_allclose(result.velocities, 0.0)


def test_states_accumulate_velocities(arm_model, rng):
    observed = random_states(rng, 5, 12)
    result = rollout(arm_model, observed, horizon=7)
    np.testing.assert_allclose(result.states[0], observed[-1] + result.velocities[0], atol=1e-12)
    np.testing.assert_allclose(np.diff(result.states, axis=0), result.velocities[1:], atol=1e-12)
    assert result.encoder_predictions.shape == (4, 12)


def test_zero_delta_matches_no_delta(arm_model, rng):
    observed = random_states(rng, 5, 12)
    plain = rollout(arm_model, observed, horizon=6)
    zero = rollout(arm_model, observed, DeltaInput.zeros(6, 12))
    np.testing.assert_array_equal(plain.states, zero.states)


def test_delta_is_causal(arm_model, rng):
    observed = random_states(rng, 5, 12)
    delta = rng.normal(scale=0.01, size=(8, 12))
    base = rollout(arm_model, observed, delta)
    changed = delta.copy()
    changed[4] += 0.05
    moved = rollout(arm_model, observed, changed)
    np.testing.assert_array_equal(base.states[:4], moved.states[:4])
    assert not np.allclose(base.states[4:], moved.states[4:])


def test_base_position_never_enters_the_network(arm_model, rng):
    observed = random_states(rng, 5, 12)
    shifted = observed.copy()
    shifted[:, :3] += np.array([1.5, -0.5, 0.25])
    a = rollout(arm_model, observed, horizon=5)
    b = rollout(arm_model, shifted, horizon=5)
    np.testing.assert_allclose(a.velocities, b.velocities, atol=1e-12)
    np.testing.assert_allclose(b.states[:, :3] - a.states[:, :3], np.tile([1.5, -0.5, 0.25], (5, 1)), atol=1e-12)


def test_delta_mask_zeroes_masked_coordinates(arm_model, rng):
    observed = random_states(rng, 4, 12)
    mask = np.zeros(12, dtype=bool)
    mask[:3] = True
    delta = DeltaInput(rng.normal(scale=0.01, size=(5, 12)), mask)
    masked = rollout(arm_model, observed, delta)
    explicit = rollout(arm_model, observed, delta.values * mask)
    np.testing.assert_array_equal(masked.states, explicit.states)


@pytest.mark.parametrize("layers", [1, 2])
def test_grad_delta_matches_finite_differences(arm, rng, layers):
    model = tiny_model(arm.state_dim, hidden=12, layers=layers, seed=3)
    observed = random_states(rng, 4, 12)
    delta = rng.normal(scale=0.01, size=(5, 12))
    upstream = rng.normal(size=(5, 12))

    def scalar(d):
        return float(np.sum(rollout(model, observed, d, keep_cache=False).states * upstream))

    analytic = grad_delta(model, observed, delta, 5, upstream)
    assert relative_error(analytic, central_difference(scalar, delta)) < 1e-6


def test_grad_delta_needs_cached_activations(arm_model, rng):
    observed = random_states(rng, 4, 12)
    result = rollout(arm_model, observed, horizon=3, keep_cache=False)
    with pytest.raises(MissingActivationsError):
        grad_delta(arm_model, observed, None, 3, np.ones((3, 12)), result=result)


def test_rollout_errors(arm_model, rng):
    with pytest.raises(ModelError):
        rollout(arm_model, random_states(rng, 1, 12), horizon=3)
    with pytest.raises(DimensionMismatchError):
        rollout(arm_model, random_states(rng, 4, 10), horizon=3)
    with pytest.raises(DimensionMismatchError):
        rollout(arm_model, random_states(rng, 4, 12), np.zeros((3, 11)))
    with pytest.raises(ModelError):
        rollout(arm_model, random_states(rng, 4, 12))


def test_save_and_load_keep_predictions(arm_model, rng, tmp_path):
    path = save_model(arm_model, tmp_path / "nested" / "model.mfo")
    loaded = load_model(path)
    assert loaded.config == arm_model.config
    assert loaded.output_weight.dtype == np.float64
    np.testing.assert_array_equal(loaded.output_weight, arm_model.output_weight.astype(np.float32))
    observed = random_states(rng, 5, 12)
    np.testing.assert_allclose(rollout(arm_model, observed, horizon=4).states,
                               rollout(loaded, observed, horizon=4).states, rtol=1e-5, atol=1e-6)
    # a loaded model is already float32-exact, so saving it again is lossless
    assert serialize(loaded) == path.read_bytes()


def test_tensors_are_stored_as_float32(arm_model):
    data = serialize(arm_model)
    manifest = data[:data.find(b"\nend\n")].decode("utf-8").splitlines()
    tensors = [line for line in manifest if line.startswith("tensor ")]
    assert len(tensors) == len(arm_model.parameters())
    assert all(line.endswith(" <f4") for line in tensors)
    with pytest.raises(ModelFormatError):
        deserialize(data.replace(b" <f4\n", b" <f8\n", 1))


def test_float32_models_keep_their_dtype():
    config = ModelConfig(state_dim=12, hidden_size=6, num_layers=1, dtype="float32")
    model = PredictorModel.initialize(config)
    loaded = deserialize(serialize(model))
    assert loaded.input_weight.dtype == np.float32
    np.testing.assert_array_equal(loaded.output_weight, model.output_weight)


def test_model_file_errors(arm_model, tmp_path):
    data = serialize(arm_model)
    with pytest.raises(TruncatedModelError):
        deserialize(data[:-16])
    with pytest.raises(TruncatedModelError):
        deserialize(data[:20])
    with pytest.raises(ModelVersionError):
        deserialize(data.replace(b"mfo-model-v1", b"mfo-model-v9", 1))
    with pytest.raises(MissingReferenceError):
        load_model(tmp_path / "absent.mfo")


def test_parameter_shapes_are_checked():
    config = ModelConfig(state_dim=12, hidden_size=6, num_layers=1)
    params = {name: np.zeros(shape) for name, shape in PredictorModel.parameter_shapes(config).items()}
    params["output_projection.bias"] = np.zeros(11)
    with pytest.raises(DimensionMismatchError):
        PredictorModel.from_parameters(config, params)


def test_zero_gru_halves_the_hidden_state():
    weights = GruLayerWeights.zeros(4, 3)
    np.testing.assert_array_equal(gru_cell_step(weights, np.ones(4), np.zeros(3)), np.zeros(3))
    np.testing.assert_allclose(gru_cell_step(weights, np.ones(4), np.array([1.0, -2.0, 4.0])), [0.5, -1.0, 2.0])


def test_single_step_gradient_of_a_zero_model_is_the_upstream(rng):
    model = PredictorModel.zeros(ModelConfig(state_dim=12, hidden_size=4, num_layers=1))
    upstream = rng.normal(size=(1, 12))
    np.testing.assert_allclose(grad_delta(model, random_states(rng, 3, 12), np.zeros((1, 12)), 1, upstream), upstream)
    np.testing.assert_array_equal(
        grad_delta(model, random_states(rng, 3, 12), None, 4, np.zeros((4, 12))), np.zeros((4, 12)))
