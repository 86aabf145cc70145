from collections.abc import Mapping
from typing import Any


def flatten_nested_dict(d: Mapping[str, Any], sep: str = ".", prefix: str = "") -> dict[str, Any]:
    """Flatten a nested mapping, joining the key path with `sep`.

    >>> flatten_nested_dict({"a": {"b": 1}, "c": 2})
    {'a.b': 1, 'c': 2}
    """
    result: dict[str, Any] = {}
    for k, v in d.items():
        key = f"{prefix}{sep}{k}" if prefix else str(k)
        if isinstance(v, Mapping):
            result.update(flatten_nested_dict(v, sep=sep, prefix=key))
        else:
            result[key] = v
    return result
