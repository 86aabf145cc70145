import re
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

from wmlab.constants import VOCAB_CHARACTERS
from wmlab.errors import InvalidInputError

_WHITESPACE = re.compile(r"\s+")


def normalize_text(text: str, characters: str = VOCAB_CHARACTERS) -> str:
    """Lowercases, drops characters outside the vocabulary and collapses whitespace.

    The same normalization is applied to training transcripts, model outputs and scoring inputs.
    """
    text = _WHITESPACE.sub(" ", text.lower())
    text = "".join(c for c in text if c in characters)
    return _WHITESPACE.sub(" ", text).strip()


@dataclass(frozen=True)
class Vocab:
    """Output alphabet of the recognizer. The CTC blank takes the index after the last character."""

    characters: str = VOCAB_CHARACTERS

    def __post_init__(self) -> None:
        if not self.characters:
            raise InvalidInputError("Vocabulary must not be empty")
        if len(set(self.characters)) != len(self.characters):
            raise InvalidInputError(f"Vocabulary contains duplicates: '{self.characters}'")

    @property
    def blank_index(self) -> int:
        return len(self.characters)

    @property
    def num_classes(self) -> int:
        return len(self.characters) + 1

    @cached_property
    def _index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.characters)}

    def encode(self, text: str) -> list[int]:
        """Maps a normalized text to label indices.

        :raises InvalidInputError: if the text contains a character outside the vocabulary
        """
        try:
            return [self._index[c] for c in text]
        except KeyError as e:
            raise InvalidInputError(f"Character {e.args[0]!r} is not in the vocabulary") from e

    def decode(self, labels: Sequence[int]) -> str:
        return "".join(self.characters[i] for i in labels if i != self.blank_index)

    def normalize(self, text: str) -> str:
        return normalize_text(text, self.characters)
