"""Waveform representation, WAV I/O and trigger-audio synthesis.

A trigger is produced by tiling a short owner clip ``s`` over the full length of a clean input
``x`` and adding it with a weight ``w`` chosen such that the added component carries ``k`` times
the mean power of ``x``::

    u  = s repeated R = ceil(l_x / l_s) times
    u' = u cropped to l_x samples
    w  = sqrt(sum(x^2) * k / l_x) / sqrt(sum(u^2) / l_u)
    x' = x + w * u'
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Self

import numpy as np
import soundfile as sf

from wmlab.constants import PCM_16_SCALE, SAMPLE_RATE_HZ
from wmlab.errors import AudioFormatError, DegeneratePatternError, InvalidInputError
from wmlab.types import FloatArray, PathLike

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AudioClip:
    """An immutable mono waveform in double precision."""

    samples: FloatArray
    sample_rate_hz: int = SAMPLE_RATE_HZ

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("Audio samples must be finite")
        if self.sample_rate_hz <= 0:
            raise InvalidInputError(f"Invalid sample rate: {self.sample_rate_hz}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AudioClip):
            return NotImplemented
        return self.sample_rate_hz == other.sample_rate_hz and np.array_equal(
            self.samples, other.samples
        )

    def __hash__(self) -> int:
        return hash((self.sample_rate_hz, self.samples.tobytes()))

    @property
    def duration_ms(self) -> float:
        return 1000 * len(self) / self.sample_rate_hz

    @property
    def energy(self) -> float:
        return float(np.sum(self.samples**2))

    @property
    def mean_power(self) -> float:
        return self.energy / len(self) if len(self) else 0.0

    def is_empty(self) -> bool:
        return len(self) == 0

    def with_samples(self, samples: FloatArray) -> Self:
        return self.__class__(samples=samples, sample_rate_hz=self.sample_rate_hz)


PredictFn = Callable[[AudioClip], str]
"""Black-box transcription interface: audio in, text out."""


@dataclass(frozen=True)
class TriggerKey:
    """The secret per-owner-clip mixing ratios k_1..k_n (linear added-power over clean-power)."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if not values:
            raise InvalidInputError("A trigger key needs at least one value")
        if any(not math.isfinite(v) or v <= 0 for v in values):
            raise InvalidInputError(f"All key values must be positive and finite, got {values}")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> float:
        return self.values[i]

    @classmethod
    def random(cls, n: int, low: float, high: float, seed: int) -> Self:
        """Draws n values uniformly from [low, high]."""
        if n < 1:
            raise InvalidInputError(f"Number of key values must be positive, got {n}")
        if not 0 < low <= high:
            raise InvalidInputError(f"Invalid key range [{low}, {high}]")
        rng = np.random.default_rng(seed)
        return cls(tuple(float(v) for v in rng.uniform(low, high, size=n)))


class TiledPattern(NamedTuple):
    cropped: FloatArray
    """u', the pattern cropped to the requested length"""
    full: FloatArray
    """u, the uncropped pattern of R whole repetitions"""
    repetitions: int


def tile_owner_clip(s: AudioClip, target_len: int) -> TiledPattern:
    """Repeats the owner clip until it covers `target_len` samples and crops it from the beginning.

    :param s: the owner clip
    :param target_len: number of samples the cropped pattern must have
    :return: the cropped pattern u', the full pattern u and the repetition count R
    """
    if s.is_empty():
        raise InvalidInputError("Cannot tile an empty owner clip")
    if target_len < 1:
        raise InvalidInputError(f"Target length must be positive, got {target_len}")
    repetitions = math.ceil(target_len / len(s))
    full = np.tile(s.samples, repetitions)
    return TiledPattern(cropped=full[:target_len].copy(), full=full, repetitions=repetitions)


def mix_weight(x: AudioClip | FloatArray, u: FloatArray, k: float) -> float:
    """Computes the scalar w placing the mean power of the added pattern at k times that of x.

    The denominator uses the full (uncropped) pattern u.
    """
    x_samples = x.samples if isinstance(x, AudioClip) else np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if k < 0:
        raise InvalidInputError(f"Mixing ratio must be non-negative, got {k}")
    if len(x_samples) == 0 or len(u) == 0:
        raise InvalidInputError("Cannot compute a mixing weight for empty input")
    u_energy = float(np.sum(u**2))
    if u_energy == 0:
        raise DegeneratePatternError("The owner pattern has zero energy")
    x_energy = float(np.sum(x_samples**2))
    return math.sqrt(x_energy * k / len(x_samples)) / math.sqrt(u_energy / len(u))


class SynthesizedTrigger(NamedTuple):
    clip: AudioClip
    weight: float
    is_degenerate: bool
    """True if the clean input has zero energy, in which case the trigger equals the input"""


def synthesize_trigger(x: AudioClip, s: AudioClip, k: float) -> SynthesizedTrigger:
    """Creates the trigger x' = x + w * u' from a clean clip x and an owner clip s."""
    if x.is_empty() or s.is_empty():
        raise InvalidInputError("Trigger synthesis requires non-empty clips")
    if x.sample_rate_hz != s.sample_rate_hz:
        raise InvalidInputError(
            f"Sample rate mismatch: {x.sample_rate_hz} Hz vs. {s.sample_rate_hz} Hz"
        )
    pattern = tile_owner_clip(s, len(x))
    w = mix_weight(x, pattern.full, k)
    is_degenerate = x.energy == 0
    if is_degenerate:
        log.warning("Clean input has zero energy; the trigger equals the input")
    return SynthesizedTrigger(
        clip=x.with_samples(x.samples + w * pattern.cropped),
        weight=w,
        is_degenerate=is_degenerate,
    )


def read_wav(path: PathLike) -> AudioClip:
    """Reads a mono 16-bit PCM WAV file.

    :raises AudioFormatError: if the file is not a readable mono 16-bit PCM WAV file
    """
    path = Path(path)
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise AudioFormatError(f"Cannot read WAV header of {path}: {e}") from e
    if info.format != "WAV":
        raise AudioFormatError(f"{path} is not a WAV file (format {info.format})")
    if info.channels != 1:
        raise AudioFormatError(f"{path} has {info.channels} channels, expected mono")
    if info.subtype != "PCM_16":
        raise AudioFormatError(f"{path} has sample format {info.subtype}, expected PCM_16")
    data, sample_rate = sf.read(str(path), dtype="int16", always_2d=False)
    return AudioClip(samples=data.astype(np.float64) / PCM_16_SCALE, sample_rate_hz=sample_rate)


class WavWriteResult(NamedTuple):
    path: Path
    num_clipped: int


def quantize_pcm16(samples: FloatArray) -> tuple[np.ndarray, int]:
    """Clamps samples to [-1, 1] and quantizes them to int16.

    :return: the int16 samples and the number of samples that had to be clamped
    """
    num_clipped = int(np.count_nonzero(np.abs(samples) > 1.0))
    clamped = np.clip(samples, -1.0, 1.0)
    quantized = np.clip(np.round(clamped * PCM_16_SCALE), -PCM_16_SCALE, PCM_16_SCALE - 1)
    return quantized.astype(np.int16), num_clipped


def write_wav(clip: AudioClip, path: PathLike) -> WavWriteResult:
    """Writes the clip as mono 16-bit PCM WAV, clamping samples outside [-1, 1]."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data, num_clipped = quantize_pcm16(clip.samples)
    if num_clipped:
        log.warning(f"Clamped {num_clipped} samples to [-1, 1] while writing {path}")
    sf.write(str(path), data, clip.sample_rate_hz, subtype="PCM_16", format="WAV")
    return WavWriteResult(path=path, num_clipped=num_clipped)
