from dataclasses import dataclass
from typing import Self

import numpy as np

from wmlab.constants import MESSAGE_BITS
from wmlab.errors import InvalidInputError
from wmlab.types import Bits


@dataclass(frozen=True)
class StegoMessage:
    """The owner's secret bit message."""

    bits: Bits

    def __post_init__(self) -> None:
        bits = tuple(int(b) for b in self.bits)
        if not bits:
            raise InvalidInputError("A message needs at least one bit")
        if any(b not in (0, 1) for b in bits):
            raise InvalidInputError(f"Message bits must be 0 or 1, got {self.bits}")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return self.to_string()

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_string(cls, s: str) -> Self:
        s = s.strip()
        if not s or set(s) - {"0", "1"}:
            raise InvalidInputError(f"Not a bit string: '{s}'")
        return cls(tuple(int(c) for c in s))

    @classmethod
    def random(cls, seed: int, num_bits: int = MESSAGE_BITS) -> Self:
        rng = np.random.default_rng(seed)
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=num_bits)))


@dataclass(frozen=True)
class StegoText:
    """A stego label: word tokens plus the index of the owner-clip group it labels."""

    tokens: tuple[str, ...]
    clip_index: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise InvalidInputError("A stego text must not be empty")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __str__(self) -> str:
        return self.text

    @classmethod
    def from_text(cls, text: str, clip_index: int = 0) -> Self:
        return cls(tuple(text.split()), clip_index)
