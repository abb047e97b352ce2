import json
import logging
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import ValidationError

from src.constants import MODEL_FORMAT_VERSION
from src.errors import FileFormatError, MissingReferenceError
from src.model.predictor import PredictorModel
from src.types import ModelConfig

logger = logging.getLogger("model.serialization")

HEADER_END = b"\nend\n"
# tensors are always stored as little-endian float32 and widened to the config dtype on load
TENSOR_CODE = "<f4"


class ModelFormatError(FileFormatError):
    """Raised when a model file cannot be decoded"""
    code = "model-format"


class ModelVersionError(ModelFormatError):
    code = "model-version"


class ModelShapeError(ModelFormatError):
    code = "model-shape"


class TruncatedModelError(ModelFormatError):
    code = "model-truncated"


def serialize(model: PredictorModel) -> bytes:
    """Plain-text manifest of named tensors followed by their little-endian bytes.

    The manifest is one version line, one config line and one
    `tensor <name> <shape> <offset> <dtype>` line per parameter, closed by `end`.
    Offsets count from the first byte after the manifest. Parameters are
    written as float32 whatever dtype the model computes in.
    """
    code = TENSOR_CODE
    lines = [MODEL_FORMAT_VERSION, "config " + model.config.model_dump_json()]
    blobs = []
    offset = 0
    for name, value in model.parameters().items():
        data = np.ascontiguousarray(value, dtype=np.dtype(code)).tobytes()
        shape = "x".join(str(d) for d in value.shape)
        lines.append(f"tensor {name} {shape} {offset} {code}")
        blobs.append(data)
        offset += len(data)
    header = ("\n".join(lines)).encode("utf-8") + HEADER_END
    return header + b"".join(blobs)


def deserialize(data: bytes) -> PredictorModel:
    end = data.find(HEADER_END)
    if end < 0:
        raise TruncatedModelError("Model manifest is not terminated")
    try:
        lines = data[:end].decode("utf-8").split("\n")
    except UnicodeDecodeError:
        raise ModelFormatError("Model manifest is not valid text")
    blob = data[end + len(HEADER_END):]

    if lines[0] != MODEL_FORMAT_VERSION:
        raise ModelVersionError(f"Unsupported model format '{lines[0][:40]}', expected '{MODEL_FORMAT_VERSION}'")
    if len(lines) < 2 or not lines[1].startswith("config "):
        raise ModelFormatError("Model manifest has no config line")
    try:
        config = ModelConfig.model_validate_json(lines[1][len("config "):])
    except ValidationError as e:
        raise ModelFormatError(f"Model config in manifest is invalid: {e}")

    expected = PredictorModel.parameter_shapes(config)
    code = TENSOR_CODE
    params = {}
    for line in lines[2:]:
        parts = line.split(" ")
        if len(parts) != 5 or parts[0] != "tensor":
            raise ModelFormatError(f"Malformed manifest line: {line[:80]}")
        _, name, shape_text, offset_text, dtype = parts
        try:
            shape = tuple(int(d) for d in shape_text.split("x"))
            offset = int(offset_text)
        except ValueError:
            raise ModelFormatError(f"Malformed manifest line: {line[:80]}")
        if name not in expected:
            raise ModelShapeError(f"Unexpected tensor {name}")
        if shape != expected[name]:
            raise ModelShapeError(f"Tensor {name} has shape {shape}, config implies {expected[name]}")
        if dtype != code:
            raise ModelFormatError(f"Tensor {name} is stored as {dtype}, model files hold {code}")
        size = int(np.prod(shape)) * np.dtype(code).itemsize
        if offset < 0 or offset + size > len(blob):
            raise TruncatedModelError(f"Tensor {name} extends past the end of the stream")
        params[name] = np.frombuffer(blob, dtype=np.dtype(code), count=int(np.prod(shape)),
                                     offset=offset).reshape(shape).astype(config.dtype)

    missing = [name for name in expected if name not in params]
    if missing:
        raise ModelShapeError(f"Model file is missing tensors: {', '.join(missing)}")
    return PredictorModel.from_parameters(config, params)


def save_model(model: PredictorModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize(model))
    logger.debug(f"Saved model ({model.config.num_layers}x{model.hidden_size}) to {path}")
    return path


def load_model(path: Union[str, Path]) -> PredictorModel:
    path = Path(path)
    if not path.exists():
        raise MissingReferenceError(f"Model file not found: {path}")
    return deserialize(path.read_bytes())
