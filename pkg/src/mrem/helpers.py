import datetime
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

log = logging.getLogger(__name__)


def custom_namer(name: str) -> str:
    """Custom namer for a RotatingFileHandler.
    Inserts the date between the stem and the final suffix.

    Args:
        name (str): The name of the file.

    Returns:
        str: The custom name generated for the file.

    Example:
        `mrem.log` → `mrem.2024-10-02.log`
    """
    if not isinstance(name, str):
        raise TypeError(name)
    name_path = Path(name).resolve()
    stem = str(name_path.stem).replace(".log", "")
    if not all([stem, name_path.suffix]):
        raise ValueError(name)
    date = str(datetime.datetime.now().date())
    return str(name_path.parent.joinpath(f"{stem}.{date}.log"))


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Cannot serialise {type(value).__name__}")


def write_json(path: Path, data: Any) -> Path:
    """Write `data` as indented JSON with a trailing newline, creating parents."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, default=_jsonable) + "\n", encoding="utf8")
    log.debug(f"Wrote {path}")
    return path


def parse_shots(value: str) -> int | None:
    """`--shots` argument: a positive count, or `off` for exact energies.

    Returns:
        int | None: The shot count, or None when disabled.
    """
    if value.strip().lower() == "off":
        return None
    shots = int(value)
    if shots < 1:
        raise ValueError(f"shots must be positive, got {shots}")
    return shots
