"""
Helper utility functions for the NLVAE engine.
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Type, TypeVar

from dotenv import dotenv_values
from pydantic import BaseModel
from pydantic import ValidationError as PydanticValidationError

from nlvae.core.exceptions import ConfigurationError, ImageIOError
from nlvae.core.logging import get_logger

logger = get_logger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


def build_model(model_cls: Type[ModelT], **values: Any) -> ModelT:
    """Instantiate a pydantic model, turning validation failures into ConfigurationError."""
    try:
        return model_cls(**values)
    except PydanticValidationError as e:
        raise ConfigurationError(
            f"Invalid {model_cls.__name__}",
            details={"errors": [f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()]},
        )


def load_key_value_config(path: str) -> Dict[str, str]:
    """Read a dotenv-style KEY=VALUE file; keys are lower-cased with dashes mapped to underscores."""
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")
    raw = dotenv_values(config_path)
    values = {}
    for key, value in raw.items():
        if value is None:
            raise ConfigurationError(f"Config key without a value: {key}", {"file": path})
        values[key.strip().lower().replace("-", "_")] = value.strip()
    logger.debug(f"Loaded {len(values)} keys from {path}")
    return values


def parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"Not a boolean value: {value}")


def ensure_dir(path: Optional[str]) -> Optional[Path]:
    """Create `path` (and parents) if given; return it as a Path."""
    if path is None:
        return None
    directory = Path(path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ImageIOError(f"Cannot create output directory: {path}", {"error": str(e)})
    return directory


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def append_csv_row(path: Path, row: Sequence[Any]) -> None:
    with open(path, "a", newline="", encoding="utf-8") as handle:
        csv.writer(handle).writerow(row)


def read_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def write_model_json(path: Path, model: BaseModel) -> Path:
    path.write_text(model.json(indent=2), encoding="utf-8")
    return path


def read_json(path: Path) -> Dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read JSON document: {path}", {"error": str(e)})


def markdown_table(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    for row in rows:
        lines.append("| " + " | ".join(str(cell) for cell in row) + " |")
    return "\n".join(lines) + "\n"
