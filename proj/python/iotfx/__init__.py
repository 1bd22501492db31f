"""Per-device windowed traffic features from packet traces.

The heavy lifting happens in the compiled ``_iotfx`` extension; this package
re-exports it and adds a couple of conveniences around config documents.
"""

import json
import os

from ._iotfx import (  # noqa: F401
    ConfigError,
    EngineError,
    FilterError,
    catalog,
    decode,
    extract,
    filter_matches,
    normalize_config,
    normalize_filter,
    selected_features,
    synthesize,
)

__all__ = [
    "ConfigError",
    "EngineError",
    "FilterError",
    "catalog",
    "decode",
    "extract",
    "filter_matches",
    "load_config",
    "normalize_config",
    "normalize_filter",
    "selected_features",
    "synthesize",
]


def load_config(path: "str | os.PathLike[str]") -> dict:
    """Reads, validates and canonicalizes a config file."""
    with open(path, encoding="utf-8") as fh:
        return json.loads(normalize_config(fh.read()))
