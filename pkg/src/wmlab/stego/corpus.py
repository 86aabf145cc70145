import hashlib
import re
from enum import Enum
from pathlib import Path

from wmlab.asr.vocab import normalize_text
from wmlab.errors import InvalidInputError
from wmlab.types import PathLike
from wmlab.utils.misc import get_resource_dir

_SENTENCE_END = re.compile(r"(?<=[.!?;:])\s+|\n\s*\n")
_MIN_SENTENCE_TOKENS = 2


class StegoCorpusName(Enum):
    DEFAULT = "default"
    """The prose collection shipped in ``resources/corpus``"""

    def get_dir(self) -> Path:
        match self:
            case StegoCorpusName.DEFAULT:
                return get_resource_dir() / "corpus"
            case _:
                raise ValueError(f"Unknown corpus: {self}")

    def load_sentences(self) -> list[list[str]]:
        return load_corpus_dir(self.get_dir())


def split_sentences(text: str) -> list[list[str]]:
    """Splits raw prose into normalized, tokenized sentences, dropping one-word fragments."""
    text = text.replace("’", "'")
    result = []
    for raw in _SENTENCE_END.split(text):
        tokens = normalize_text(raw).split()
        if len(tokens) >= _MIN_SENTENCE_TOKENS:
            result.append(tokens)
    return result


def load_corpus_dir(corpus_dir: PathLike) -> list[list[str]]:
    """Loads all ``*.txt`` files of the directory in name order."""
    files = sorted(Path(corpus_dir).glob("*.txt"))
    if not files:
        raise InvalidInputError(f"No corpus files found in {corpus_dir}")
    sentences = []
    for f in files:
        sentences.extend(split_sentences(f.read_text(encoding="utf-8")))
    return sentences


def load_corpus(corpus: StegoCorpusName | PathLike) -> list[list[str]]:
    if isinstance(corpus, StegoCorpusName):
        return corpus.load_sentences()
    try:
        return StegoCorpusName(str(corpus)).load_sentences()
    except ValueError:
        return load_corpus_dir(corpus)


def corpus_digest(sentences: list[list[str]]) -> bytes:
    joined = "\n".join(" ".join(s) for s in sentences)
    return hashlib.sha256(joined.encode("utf-8")).digest()
