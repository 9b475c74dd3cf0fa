import hashlib
import math
from pathlib import Path
from typing import Any, Optional, Union

import orjson
from pydantic import BaseModel

from coarse_clt.config import settings

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_APPEND_NEWLINE


def round_floats(value: Any, digits: Optional[int] = None) -> Any:
    """Round every float in a nested structure to significant digits."""
    digits = settings.FLOAT_DIGITS if digits is None else digits
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return None
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {k: round_floats(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v, digits) for v in value]
    return value


def to_jsonable(model: Union[BaseModel, Any]) -> Any:
    if isinstance(model, BaseModel):
        return model.model_dump(mode="json", by_alias=True, exclude_none=True)
    return model


def dumps(model: Union[BaseModel, Any], rounded: bool = True) -> bytes:
    """Serialize a model or plain data with sorted keys and two space indent."""
    data = to_jsonable(model)
    if rounded:
        data = round_floats(data)
    return orjson.dumps(data, option=JSON_OPTIONS)


def sha256_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_bytes(path: Union[str, Path], data: bytes) -> Path:
    target = Path(path)
    target.write_bytes(data)
    return target
