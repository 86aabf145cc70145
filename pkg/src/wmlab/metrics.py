"""Edit-distance based scoring: word, character and bit error rates."""

from collections.abc import Hashable, Sequence
from dataclasses import dataclass, field

import jiwer
import numpy as np

from wmlab.asr.vocab import normalize_text
from wmlab.errors import InvalidInputError, UndefinedRateError
from wmlab.types import Bits

_IDENTITY = jiwer.ReduceToListOfListOfWords()


def _word_edits(reference: str, hypothesis: str) -> int:
    ref_words, hyp_words = reference.split(), hypothesis.split()
    if not ref_words or not hyp_words:
        return max(len(ref_words), len(hyp_words))
    out = jiwer.process_words(
        reference, hypothesis, reference_transform=_IDENTITY, hypothesis_transform=_IDENTITY
    )
    return out.substitutions + out.deletions + out.insertions


def levenshtein(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Minimum number of unit-cost insertions, deletions and substitutions transforming b into a.

    Tokens are renamed to whitespace-free symbols so that any hashable sequence, characters and
    words alike, can be aligned as a word sequence.
    """
    symbols: dict[Hashable, str] = {}
    a_symbols = [symbols.setdefault(t, f"t{len(symbols)}") for t in a]
    b_symbols = [symbols.setdefault(t, f"t{len(symbols)}") for t in b]
    return _word_edits(" ".join(a_symbols), " ".join(b_symbols))


@dataclass(frozen=True)
class PairScore:
    reference: str
    hypothesis: str
    word_edits: int
    word_ref_len: int
    char_edits: int
    char_ref_len: int

    @property
    def wer(self) -> float:
        return self.word_edits / self.word_ref_len if self.word_ref_len else float("nan")

    @property
    def cer(self) -> float:
        return self.char_edits / self.char_ref_len if self.char_ref_len else float("nan")


@dataclass(frozen=True)
class ScoreReport:
    """Corpus-level error rates plus the per-pair breakdown they were pooled from."""

    wer: float
    cer: float
    pairs: list[PairScore] = field(default_factory=list)

    def to_dict(self) -> dict[str, float]:
        return {"wer": self.wer, "cer": self.cer}


def _check_corpora(refs: Sequence[str], hyps: Sequence[str]) -> None:
    if len(refs) != len(hyps):
        raise InvalidInputError(
            f"Reference and hypothesis lists differ in length: {len(refs)} vs. {len(hyps)}"
        )


def _pooled_rate(edits: Sequence[int], ref_lens: Sequence[int], unit: str) -> float:
    total_len = sum(ref_lens)
    if total_len == 0:
        raise UndefinedRateError(f"{unit} error rate is undefined for an empty reference corpus")
    return sum(edits) / total_len


def _char_edits(reference: str, hypothesis: str) -> int:
    if not reference or not hypothesis:
        return max(len(reference), len(hypothesis))
    out = jiwer.process_characters(reference, hypothesis)
    return out.substitutions + out.deletions + out.insertions


def score_pair(reference: str, hypothesis: str) -> PairScore:
    ref = normalize_text(reference)
    hyp = normalize_text(hypothesis)
    return PairScore(
        reference=ref,
        hypothesis=hyp,
        word_edits=_word_edits(ref, hyp),
        word_ref_len=len(ref.split()),
        char_edits=_char_edits(ref, hyp),
        char_ref_len=len(ref),
    )


def wer(refs: Sequence[str], hyps: Sequence[str]) -> float:
    """Corpus-level word error rate: summed word edit distances over summed reference word counts."""
    _check_corpora(refs, hyps)
    pairs = [score_pair(r, h) for r, h in zip(refs, hyps, strict=True)]
    return _pooled_rate([p.word_edits for p in pairs], [p.word_ref_len for p in pairs], "Word")


def cer(refs: Sequence[str], hyps: Sequence[str]) -> float:
    """Corpus-level character error rate; spaces count as characters."""
    _check_corpora(refs, hyps)
    pairs = [score_pair(r, h) for r, h in zip(refs, hyps, strict=True)]
    return _pooled_rate([p.char_edits for p in pairs], [p.char_ref_len for p in pairs], "Character")


def score_corpus(refs: Sequence[str], hyps: Sequence[str]) -> ScoreReport:
    """Computes WER and CER in one pass and keeps the per-pair scores."""
    _check_corpora(refs, hyps)
    pairs = [score_pair(r, h) for r, h in zip(refs, hyps, strict=True)]
    return ScoreReport(
        wer=_pooled_rate([p.word_edits for p in pairs], [p.word_ref_len for p in pairs], "Word"),
        cer=_pooled_rate(
            [p.char_edits for p in pairs], [p.char_ref_len for p in pairs], "Character"
        ),
        pairs=pairs,
    )


def ber(m1: Bits | Sequence[int], m2: Bits | Sequence[int]) -> float:
    """Bit error rate: Hamming distance over message length."""
    if len(m1) != len(m2):
        raise InvalidInputError(f"Bit sequences differ in length: {len(m1)} vs. {len(m2)}")
    if len(m1) == 0:
        raise InvalidInputError("Bit error rate of empty messages is undefined")
    return int(np.count_nonzero(np.asarray(m1) != np.asarray(m2))) / len(m1)
