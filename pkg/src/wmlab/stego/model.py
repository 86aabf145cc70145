"""Keyed word-bigram steganography codec.

A stego text starts with a start word chosen by the encoding seed. Each following token encodes
``bits_per_step`` message bits as its rank among the ``2**bits_per_step`` most frequent continuations
of the previous token (ties broken lexicographically). Contexts with too few continuations fall back
to the unigram ranking. The payload is followed by a fixed terminator bigram.
"""

import json
import logging
import struct
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Self

import numpy as np

from wmlab.constants import BITS_PER_STEP, MESSAGE_BITS
from wmlab.errors import StegoEncodingError, StegoModelFormatError, UndecodableTextError
from wmlab.metrics import levenshtein
from wmlab.stego.corpus import StegoCorpusName, corpus_digest, load_corpus
from wmlab.stego.message import StegoMessage, StegoText
from wmlab.types import PathLike

log = logging.getLogger(__name__)

STEGO_MAGIC = b"WMSTEGO1"
STEGO_FORMAT_VERSION = 1
# version, bits per step, message bits, seed
_HEADER_STRUCT = struct.Struct("<HBHQ")
_LEN_STRUCT = struct.Struct("<I")
_DIGEST_LEN = 32

DEFAULT_TERMINATOR = ("the", "end")


def _ranked(counter: Counter[str]) -> list[str]:
    return [token for token, _ in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))]


class StegoModel:
    def __init__(
        self,
        unigrams: Counter[str],
        bigrams: dict[str, Counter[str]],
        start_contexts: Sequence[str],
        seed: int,
        corpus_hash: bytes,
        bits_per_step: int = BITS_PER_STEP,
        message_bits: int = MESSAGE_BITS,
        terminator: tuple[str, str] = DEFAULT_TERMINATOR,
    ):
        if bits_per_step < 1:
            raise StegoEncodingError(f"Bits per step must be positive, got {bits_per_step}")
        if message_bits % bits_per_step:
            raise StegoEncodingError(
                f"Message length {message_bits} is not a multiple of {bits_per_step} bits per step"
            )
        self.unigrams = unigrams
        self.bigrams = bigrams
        self.start_contexts = list(start_contexts)
        self.seed = seed
        self.corpus_hash = corpus_hash
        self.bits_per_step = bits_per_step
        self.message_bits = message_bits
        self.terminator = tuple(terminator)
        self._num_candidates = 2**bits_per_step
        self._backoff_candidates = _ranked(unigrams)[: self._num_candidates]
        self._candidates = {
            context: ranked[: self._num_candidates]
            for context, counter in bigrams.items()
            if len(ranked := _ranked(counter)) >= self._num_candidates
        }

    @classmethod
    def build(
        cls,
        sentences: Iterable[Sequence[str]],
        seed: int,
        bits_per_step: int = BITS_PER_STEP,
        message_bits: int = MESSAGE_BITS,
    ) -> Self:
        """Counts unigrams and within-sentence bigrams and derives the seeded start contexts."""
        sentences = [list(s) for s in sentences if s]
        unigrams: Counter[str] = Counter()
        bigrams: dict[str, Counter[str]] = defaultdict(Counter)
        for sentence in sentences:
            unigrams.update(sentence)
            for prev, cur in zip(sentence, sentence[1:], strict=False):
                bigrams[prev][cur] += 1
        starts = sorted({s[0] for s in sentences})
        order = np.random.default_rng(seed).permutation(len(starts))
        return cls(
            unigrams=unigrams,
            bigrams=dict(bigrams),
            start_contexts=[starts[i] for i in order],
            seed=seed,
            corpus_hash=corpus_digest(sentences),
            bits_per_step=bits_per_step,
            message_bits=message_bits,
        )

    @classmethod
    def from_corpus(
        cls,
        corpus: StegoCorpusName | PathLike = StegoCorpusName.DEFAULT,
        seed: int = 0,
        bits_per_step: int = BITS_PER_STEP,
        message_bits: int = MESSAGE_BITS,
    ) -> Self:
        return cls.build(load_corpus(corpus), seed, bits_per_step, message_bits)

    @property
    def num_payload_tokens(self) -> int:
        return self.message_bits // self.bits_per_step

    @property
    def text_length(self) -> int:
        """Number of tokens of every stego: start word, payload and terminator."""
        return 1 + self.num_payload_tokens + len(self.terminator)

    def candidates(self, context: str) -> tuple[list[str], bool]:
        """The ranked candidate tokens following `context` and whether the unigram backoff was used."""
        ranked = self._candidates.get(context)
        if ranked is not None:
            return ranked, False
        if len(self._backoff_candidates) < self._num_candidates:
            raise StegoEncodingError(
                f"Context '{context}' has fewer than {self._num_candidates} continuations even after backoff"
            )
        return self._backoff_candidates, True

    def choose_start_contexts(self, n: int, seed: int) -> list[str]:
        if n < 1:
            raise StegoEncodingError(f"Number of stegos must be positive, got {n}")
        if n > len(self.start_contexts):
            raise StegoEncodingError(
                f"Cannot create {n} distinct stegos from {len(self.start_contexts)} start contexts"
            )
        order = np.random.default_rng(seed).permutation(len(self.start_contexts))
        return [self.start_contexts[i] for i in order[:n]]

    def _encode_from(self, start: str, message: StegoMessage) -> tuple[list[str], int]:
        tokens = [start]
        num_backoffs = 0
        r = self.bits_per_step
        for step in range(self.num_payload_tokens):
            chunk = message.bits[step * r : (step + 1) * r]
            rank = int("".join(map(str, chunk)), 2)
            candidates, backed_off = self.candidates(tokens[-1])
            num_backoffs += backed_off
            tokens.append(candidates[rank])
        tokens.extend(self.terminator)
        return tokens, num_backoffs

    def encode_message(self, message: StegoMessage, n: int, seed: int) -> list[StegoText]:
        """Creates n pairwise distinct stego texts hiding the message; text i labels owner clip i."""
        if len(message) != self.message_bits:
            raise StegoEncodingError(
                f"Message has {len(message)} bits, the model encodes {self.message_bits}"
            )
        result = []
        for clip_index, start in enumerate(self.choose_start_contexts(n, seed)):
            tokens, num_backoffs = self._encode_from(start, message)
            if num_backoffs:
                log.warning(
                    f"Stego {clip_index} used the unigram backoff in {num_backoffs} of {self.num_payload_tokens} steps"
                )
            result.append(StegoText(tuple(tokens), clip_index))
        return result

    def decode_text(self, text: StegoText | str) -> StegoMessage:
        """Recovers the message hidden in a stego text.

        :raises UndecodableTextError: if the text cannot have been produced by this model
        """
        tokens = list(text.tokens) if isinstance(text, StegoText) else text.split()
        if len(tokens) != self.text_length:
            raise UndecodableTextError(
                f"Expected {self.text_length} tokens, got {len(tokens)}"
            )
        if tokens[0] not in self.start_contexts:
            raise UndecodableTextError(f"'{tokens[0]}' is not a start context of this model")
        if tuple(tokens[-len(self.terminator) :]) != self.terminator:
            raise UndecodableTextError("Terminator missing")
        bits: list[int] = []
        payload = tokens[1 : 1 + self.num_payload_tokens]
        for prev, token in zip(tokens, payload, strict=False):
            candidates, _ = self.candidates(prev)
            if token not in candidates:
                raise UndecodableTextError(
                    f"Token '{token}' is not among the top {self._num_candidates} continuations of '{prev}'"
                )
            rank = candidates.index(token)
            bits.extend(int(b) for b in format(rank, f"0{self.bits_per_step}b"))
        return StegoMessage(tuple(bits))

    def to_bytes(self) -> bytes:
        payload = json.dumps(
            {
                "unigrams": dict(self.unigrams),
                "bigrams": {k: dict(v) for k, v in self.bigrams.items()},
                "start_contexts": self.start_contexts,
                "terminator": list(self.terminator),
            },
            sort_keys=True,
            separators=(",", ":"),
        ).encode("utf-8")
        return b"".join(
            [
                STEGO_MAGIC,
                _HEADER_STRUCT.pack(
                    STEGO_FORMAT_VERSION, self.bits_per_step, self.message_bits, self.seed
                ),
                self.corpus_hash,
                _LEN_STRUCT.pack(len(payload)),
                payload,
            ]
        )

    @classmethod
    def from_bytes(cls, data: bytes, expected_corpus_hash: bytes | None = None) -> Self:
        """:param expected_corpus_hash: if given, the model must have been built on this corpus"""
        if not data.startswith(STEGO_MAGIC):
            raise StegoModelFormatError("Not a stego model (bad magic bytes)")
        offset = len(STEGO_MAGIC)
        try:
            version, bits_per_step, message_bits, seed = _HEADER_STRUCT.unpack_from(data, offset)
            offset += _HEADER_STRUCT.size
            corpus_hash = data[offset : offset + _DIGEST_LEN]
            offset += _DIGEST_LEN
            (payload_len,) = _LEN_STRUCT.unpack_from(data, offset)
            offset += _LEN_STRUCT.size
        except struct.error as e:
            raise StegoModelFormatError(f"Stego model header is truncated: {e}") from e
        if version != STEGO_FORMAT_VERSION:
            raise StegoModelFormatError(f"Unsupported stego model version {version}")
        if expected_corpus_hash is not None and corpus_hash != expected_corpus_hash:
            raise StegoModelFormatError("Stego model was built on a different corpus")
        if len(data) != offset + payload_len:
            raise StegoModelFormatError("Stego model payload length does not match")
        try:
            payload = json.loads(data[offset:].decode("utf-8"))
            return cls(
                unigrams=Counter(payload["unigrams"]),
                bigrams={k: Counter(v) for k, v in payload["bigrams"].items()},
                start_contexts=payload["start_contexts"],
                seed=seed,
                corpus_hash=corpus_hash,
                bits_per_step=bits_per_step,
                message_bits=message_bits,
                terminator=tuple(payload["terminator"]),
            )
        except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
            raise StegoModelFormatError(f"Malformed stego model payload: {e}") from e

    def save(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def load(cls, path: PathLike, expected_corpus_hash: bytes | None = None) -> Self:
        return cls.from_bytes(Path(path).read_bytes(), expected_corpus_hash)


def stego_cer(transcript: str, stego: StegoText) -> float:
    reference = stego.text
    return levenshtein(reference, transcript) / len(reference)


def nearest_stego(transcript: str, known_stegos: Sequence[StegoText]) -> tuple[StegoText, float]:
    """The known stego closest to the transcript in character error rate, ties to the lowest clip index."""
    if not known_stegos:
        raise StegoEncodingError("At least one known stego is required")
    scored = [(stego_cer(transcript, s), s.clip_index, s) for s in known_stegos]
    cer, _, best = min(scored, key=lambda t: (t[0], t[1]))
    return best, cer


def nearest_stego_decode(
    transcript: str,
    known_stegos: Sequence[StegoText],
    stego_model: StegoModel,
) -> tuple[StegoMessage, float]:
    """Decodes the known stego closest to the transcript in character error rate.

    :return: the message of the closest stego and its character error rate to the transcript
    """
    best, cer = nearest_stego(transcript, known_stegos)
    return stego_model.decode_text(best), cer


def write_stegos(stegos: Sequence[StegoText], path: PathLike) -> Path:
    """Writes one stego per line, line i holding the stego of clip index i."""
    path = Path(path)
    ordered = sorted(stegos, key=lambda s: s.clip_index)
    path.write_text("".join(s.text + "\n" for s in ordered), encoding="utf-8")
    return path


def read_stegos(path: PathLike) -> list[StegoText]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [StegoText.from_text(line, i) for i, line in enumerate(lines) if line.strip()]
