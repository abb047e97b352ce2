from src.model.gru import GruLayerWeights, gru_cell_step
from src.model.predictor import (
    DeltaInput,
    MissingActivationsError,
    ModelError,
    PredictorModel,
    RolloutResult,
    grad_delta,
    rollout,
)
from src.model.serialization import (
    ModelFormatError,
    ModelShapeError,
    ModelVersionError,
    TruncatedModelError,
    deserialize,
    load_model,
    save_model,
    serialize,
)
