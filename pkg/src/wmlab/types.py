import os
from pathlib import Path
from typing import Annotated, TypeAlias

import numpy as np
import numpy.typing as npt
from pydantic import AfterValidator

PathLike = str | Path | os.PathLike[str]

FloatArray: TypeAlias = npt.NDArray[np.float64]

Bits = tuple[int, ...]


def ensure_bit_string(value: str) -> str:
    """Ensures that a string consists only of the characters 0 and 1, raising an error otherwise."""
    if not value or set(value) - {"0", "1"}:
        raise ValueError(f"Invalid bit string: '{value}'")
    return value


BitString = Annotated[str, AfterValidator(ensure_bit_string)]
