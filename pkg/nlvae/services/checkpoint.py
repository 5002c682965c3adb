"""
JSON checkpoint persistence.

Tensors are stored as base64-encoded little-endian bytes, so a save/load round
trip reproduces every parameter and running statistic bit for bit.
"""

import base64
import json
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from nlvae.core.exceptions import CheckpointError
from nlvae.core.logging import get_logger
from nlvae.engine.tensor import precision
from nlvae.models.config import TrainConfig
from nlvae.models.records import CheckpointDocument, TensorRecord
from nlvae.services.network import NlvaeParams, init_params
from nlvae.utils.constants import CHECKPOINT_VERSION

logger = get_logger(__name__)

_DTYPES = {"float32": "<f4", "float64": "<f8"}


def encode_array(values: np.ndarray) -> TensorRecord:
    name = np.dtype(values.dtype).name
    if name not in _DTYPES:
        raise CheckpointError(f"Unsupported tensor dtype: {name}")
    raw = np.ascontiguousarray(values, dtype=_DTYPES[name]).tobytes()
    return TensorRecord(shape=list(values.shape), dtype=name, data=base64.b64encode(raw).decode("ascii"))


def decode_array(record: TensorRecord) -> np.ndarray:
    raw = base64.b64decode(record.data)
    values = np.frombuffer(raw, dtype=_DTYPES[record.dtype])
    expected = int(np.prod(record.shape)) if record.shape else 1
    if values.size != expected:
        raise CheckpointError("Tensor payload does not match its shape", {"shape": record.shape, "elements": values.size})
    return values.reshape(record.shape).astype(record.dtype)


def save_checkpoint(path: Path, params: NlvaeParams, config: TrainConfig) -> Path:
    """Write parameters, running statistics, and the config echo to `path`."""
    tensors: Dict[str, TensorRecord] = {
        name: encode_array(values) for name, values in params.state_arrays().items()
    }
    document = CheckpointDocument(train_config=json.loads(config.json()), tensors=tensors)
    try:
        Path(path).write_text(document.json(), encoding="utf-8")
    except OSError as e:
        raise CheckpointError(f"Cannot write checkpoint: {path}", {"error": str(e)})
    logger.debug(f"Saved checkpoint with {len(tensors)} tensors to {path}")
    return Path(path)


def load_checkpoint(path: Path) -> Tuple[TrainConfig, NlvaeParams]:
    """Rebuild the config and parameters saved by `save_checkpoint`."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Cannot read checkpoint: {path}", {"error": str(e)})
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            "Unsupported checkpoint version",
            {"found": payload.get("version"), "expected": CHECKPOINT_VERSION},
        )
    try:
        document = CheckpointDocument(**payload)
        config = TrainConfig(**document.train_config)
    except PydanticValidationError as e:
        raise CheckpointError(f"Malformed checkpoint: {path}", {"error": str(e)})
    with precision(config.precision):
        params = init_params(config.model, seed=config.seed)
    params.load_state_arrays({name: decode_array(record) for name, record in document.tensors.items()})
    return config, params
