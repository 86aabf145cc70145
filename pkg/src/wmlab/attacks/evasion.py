"""Output-side evasion attacks: the adversary post-processes the stolen model's transcriptions."""

import hashlib
import logging
from collections.abc import Iterable
from typing import Protocol

import numpy as np

from wmlab.asr.vocab import normalize_text
from wmlab.audio import AudioClip, PredictFn
from wmlab.stego.message import StegoText

log = logging.getLogger(__name__)

_RANDOM_ALPHABET = "abcdefghijklmnopqrstuvwxyz "


def random_replacement(clip: AudioClip, seed: int, length: int) -> str:
    """A random text that depends only on the seed and the clip, not on the query order."""
    seed_bytes = seed.to_bytes(8, "little", signed=True)
    digest = hashlib.sha256(seed_bytes + clip.samples.tobytes()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    chars = rng.integers(len(_RANDOM_ALPHABET), size=max(length, 1))
    text = normalize_text("".join(_RANDOM_ALPHABET[i] for i in chars))
    return text or _RANDOM_ALPHABET[int(chars[0]) % 26]


class LabelDetectionEvasion:
    """Wraps a prediction interface and replaces outputs equal to an intercepted stego by random text."""

    def __init__(
        self,
        predict_fn: PredictFn,
        intercepted_stegos: Iterable[StegoText | str],
        rng_seed: int,
    ):
        self.predict_fn = predict_fn
        self.intercepted = frozenset(
            normalize_text(s.text if isinstance(s, StegoText) else s) for s in intercepted_stegos
        )
        self.rng_seed = rng_seed

    def __call__(self, clip: AudioClip) -> str:
        prediction = self.predict_fn(clip)
        if normalize_text(prediction) in self.intercepted:
            return random_replacement(clip, self.rng_seed, len(prediction))
        return prediction


def label_detection_evasion(
    predict_fn: PredictFn, intercepted_stegos: Iterable[StegoText | str], rng_seed: int
) -> PredictFn:
    return LabelDetectionEvasion(predict_fn, intercepted_stegos, rng_seed)


class SteganalysisDetector(Protocol):
    def is_stego(self, text: str) -> bool:
        """Whether the text is judged to carry hidden information."""


class SteganalysisEvasion:
    """Replaces outputs a steganalysis detector flags. Without a detector, the identity."""

    def __init__(self, predict_fn: PredictFn, detector: SteganalysisDetector | None, rng_seed: int):
        self.predict_fn = predict_fn
        self.detector = detector
        self.rng_seed = rng_seed
        if detector is None:
            log.info("No steganalysis detector configured; outputs are passed through")

    def __call__(self, clip: AudioClip) -> str:
        prediction = self.predict_fn(clip)
        if self.detector is not None and self.detector.is_stego(normalize_text(prediction)):
            return random_replacement(clip, self.rng_seed, len(prediction))
        return prediction
