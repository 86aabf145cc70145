"""Synthetic tone-language corpus and owner clips.

Every character of the alphabet is rendered as a sine segment at its own frequency; an utterance is
the concatenation of its characters' segments plus Gaussian noise. Owner clips are linear chirps in
a band well above the language's frequencies.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from wmlab.asr.data import Utterance, write_manifest
from wmlab.asr.vocab import normalize_text
from wmlab.audio import AudioClip
from wmlab.constants import (
    OWNER_CLIP_MAX_MS,
    OWNER_CLIP_MIN_MS,
    SAMPLE_RATE_HZ,
    VOCAB_CHARACTERS,
)
from wmlab.errors import InvalidInputError
from wmlab.types import FloatArray, PathLike
from wmlab.utils.misc import derive_seed

log = logging.getLogger(__name__)

TRAIN_MANIFEST = "train.tsv"
EVAL_MANIFEST = "eval.tsv"
EVAL_FRACTION_DENOMINATOR = 5


class ToneLanguageSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alphabet: str = VOCAB_CHARACTERS
    base_frequency_hz: float = Field(default=400.0, gt=0)
    frequency_step_hz: float = Field(default=50.0, gt=0)
    symbol_ms: float = Field(default=100.0, ge=50.0)
    """at least two 25 ms frontend frames per symbol"""
    fade_ms: float = Field(default=10.0, ge=0)
    amplitude: float = Field(default=0.5, gt=0, le=1)
    noise_level: float = Field(default=0.01, ge=0)
    sample_rate_hz: int = SAMPLE_RATE_HZ
    seed: int = 0

    @model_validator(mode="after")
    def _check_alphabet(self) -> "ToneLanguageSpec":
        if not self.alphabet:
            raise ValueError("Alphabet must not be empty")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError(f"Alphabet contains duplicates: '{self.alphabet}'")
        if set(self.alphabet) - set(VOCAB_CHARACTERS):
            raise ValueError(f"Alphabet '{self.alphabet}' is not a subset of the vocabulary")
        if not set(self.alphabet) - {" "}:
            raise ValueError("Alphabet needs at least one non-space character")
        if self.max_frequency_hz >= self.sample_rate_hz / 2:
            raise ValueError(
                f"Highest symbol frequency {self.max_frequency_hz} Hz is not below the Nyquist frequency"
            )
        if 2 * self.fade_ms > self.symbol_ms:
            raise ValueError("Fades do not fit into one symbol")
        return self

    def frequency_of(self, char: str) -> float:
        index = self.alphabet.find(char)
        if index < 0:
            raise InvalidInputError(f"Character {char!r} is not in the tone-language alphabet")
        return self.base_frequency_hz + self.frequency_step_hz * index

    @property
    def max_frequency_hz(self) -> float:
        return self.base_frequency_hz + self.frequency_step_hz * (len(self.alphabet) - 1)

    @property
    def symbol_samples(self) -> int:
        return round(self.sample_rate_hz * self.symbol_ms / 1000)

    @property
    def fade_samples(self) -> int:
        return round(self.sample_rate_hz * self.fade_ms / 1000)

    def envelope(self) -> FloatArray:
        env = np.ones(self.symbol_samples)
        fade = self.fade_samples
        if fade:
            ramp = np.linspace(0.0, 1.0, fade, endpoint=False)
            env[:fade] = ramp
            env[-fade:] = ramp[::-1]
        return env


def synth_utterance(
    text: str,
    spec: ToneLanguageSpec,
    seed: int | None = None,
    utterance_id: str = "utt",
) -> Utterance:
    """Renders a text in the tone language.

    :param seed: seed of the additive noise; the language's seed if None
    """
    if not text:
        raise InvalidInputError("Cannot synthesize an empty text")
    frequencies = [spec.frequency_of(c) for c in text]
    if normalize_text(text, spec.alphabet) != text:
        raise InvalidInputError(f"Text is not normalized: '{text}'")
    t = np.arange(spec.symbol_samples) / spec.sample_rate_hz
    envelope = spec.envelope()
    segments = [spec.amplitude * envelope * np.sin(2 * np.pi * f * t) for f in frequencies]
    samples = np.concatenate(segments)
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    samples = samples + spec.noise_level * rng.standard_normal(len(samples))
    return Utterance(
        id=utterance_id,
        audio=AudioClip(samples, spec.sample_rate_hz),
        transcript=text,
    )


def random_text(rng: np.random.Generator, alphabet: str, length: int) -> str:
    """A random normalized text: no leading, trailing or doubled spaces."""
    letters = [c for c in alphabet if c != " "]
    chars: list[str] = []
    for i in range(length):
        at_edge = i == 0 or i == length - 1 or chars[-1] == " "
        pool = letters if at_edge or " " not in alphabet else alphabet
        chars.append(pool[int(rng.integers(len(pool)))])
    return "".join(chars)


@dataclass
class ToneCorpus:
    train: list[Utterance]
    eval: list[Utterance]
    train_manifest: Path | None = None
    eval_manifest: Path | None = None

    @property
    def all_utterances(self) -> list[Utterance]:
        return self.train + self.eval


def gen_corpus(
    spec: ToneLanguageSpec,
    num_utterances: int,
    min_len: int,
    max_len: int,
    output_dir: PathLike | None = None,
    show_progress: bool = False,
) -> ToneCorpus:
    """Generates seeded random utterances split 80/20 into train and eval sets.

    :param output_dir: if given, WAV files and the manifests ``train.tsv`` and ``eval.tsv`` are written there
    """
    if num_utterances < 1:
        raise InvalidInputError(f"Number of utterances must be positive, got {num_utterances}")
    if not 1 <= min_len <= max_len:
        raise InvalidInputError(f"Invalid length range [{min_len}, {max_len}]")
    rng = np.random.default_rng(spec.seed)
    utterances = []
    for i in tqdm(range(num_utterances), desc="Utterances", disable=not show_progress):
        length = int(rng.integers(min_len, max_len + 1))
        utt_id = f"utt{i:05d}"
        utterances.append(
            synth_utterance(
                random_text(rng, spec.alphabet, length),
                spec,
                seed=derive_seed(spec.seed, utt_id),
                utterance_id=utt_id,
            )
        )
    num_eval = num_utterances // EVAL_FRACTION_DENOMINATOR
    corpus = ToneCorpus(
        train=utterances[: num_utterances - num_eval], eval=utterances[num_utterances - num_eval :]
    )
    if output_dir is not None:
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        corpus.train_manifest = write_manifest(corpus.train, output_dir / TRAIN_MANIFEST)
        corpus.eval_manifest = write_manifest(corpus.eval, output_dir / EVAL_MANIFEST)
    log.info(f"Generated {len(corpus.train)} train and {len(corpus.eval)} eval utterances")
    return corpus


class OwnerClipBand(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    low_hz: float = 2500.0
    high_hz: float = 7000.0
    min_ms: float = OWNER_CLIP_MIN_MS
    max_ms: float = OWNER_CLIP_MAX_MS
    amplitude: float = 0.5


def chirp(f0: float, f1: float, num_samples: int, sample_rate_hz: int) -> FloatArray:
    """Linear chirp sweeping from f0 to f1 over the clip."""
    t = np.arange(num_samples) / sample_rate_hz
    duration = num_samples / sample_rate_hz
    return np.sin(2 * np.pi * (f0 * t + (f1 - f0) * t**2 / (2 * duration)))


def gen_owner_clips(
    n: int,
    spec: ToneLanguageSpec,
    seed: int,
    band: OwnerClipBand | None = None,
) -> list[AudioClip]:
    """Generates n distinct chirps whose frequencies lie above the tone-language band."""
    band = band or OwnerClipBand()
    if n < 1:
        raise InvalidInputError(f"Number of owner clips must be positive, got {n}")
    if band.low_hz <= spec.max_frequency_hz or band.high_hz >= spec.sample_rate_hz / 2:
        raise InvalidInputError(
            f"Owner band [{band.low_hz}, {band.high_hz}] Hz must lie between the language band and Nyquist"
        )
    rng = np.random.default_rng(seed)
    clips = []
    for _ in range(n):
        f0, f1 = rng.uniform(band.low_hz, band.high_hz, size=2)
        duration_ms = rng.uniform(band.min_ms, band.max_ms)
        num_samples = round(spec.sample_rate_hz * duration_ms / 1000)
        samples = band.amplitude * chirp(f0, f1, num_samples, spec.sample_rate_hz)
        clips.append(AudioClip(samples, spec.sample_rate_hz))
    return clips
