"""Log mel filter-bank frontend with per-utterance mean/variance normalization."""

from functools import cache

import librosa
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, model_validator

from wmlab.audio import AudioClip
from wmlab.constants import SAMPLE_RATE_HZ
from wmlab.errors import InvalidInputError
from wmlab.types import FloatArray

LOG_EPS = 1e-10
_MIN_STD = 1e-8


class FrontendConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    sample_rate_hz: int = SAMPLE_RATE_HZ
    frame_len_ms: float = 25.0
    frame_hop_ms: float = 10.0
    num_filters: int = 26
    fft_size: int = 512

    @model_validator(mode="after")
    def _check_consistency(self) -> "FrontendConfig":
        if self.frame_len_samples > self.fft_size:
            raise ValueError(
                f"Frame of {self.frame_len_samples} samples does not fit into an FFT of size {self.fft_size}"
            )
        if self.frame_hop_samples < 1 or self.num_filters < 1:
            raise ValueError("Hop size and number of filters must be positive")
        return self

    @property
    def frame_len_samples(self) -> int:
        return round(self.sample_rate_hz * self.frame_len_ms / 1000)

    @property
    def frame_hop_samples(self) -> int:
        return round(self.sample_rate_hz * self.frame_hop_ms / 1000)

    def num_frames(self, num_samples: int) -> int:
        if num_samples < self.frame_len_samples:
            return 0
        return (num_samples - self.frame_len_samples) // self.frame_hop_samples + 1


@cache
def _mel_filterbank(sample_rate_hz: int, fft_size: int, num_filters: int) -> FloatArray:
    return librosa.filters.mel(
        sr=sample_rate_hz,
        n_fft=fft_size,
        n_mels=num_filters,
        fmin=0.0,
        fmax=sample_rate_hz / 2,
        dtype=np.float64,
    )


def log_filterbank_energies(clip: AudioClip, config: FrontendConfig) -> FloatArray:
    """Unnormalized log mel energies, shape (frames, num_filters)."""
    if clip.sample_rate_hz != config.sample_rate_hz:
        raise InvalidInputError(
            f"Clip sample rate {clip.sample_rate_hz} Hz does not match the frontend's {config.sample_rate_hz} Hz"
        )
    frame_len = config.frame_len_samples
    if len(clip) < frame_len:
        raise InvalidInputError(
            f"Clip of {len(clip)} samples is shorter than one frame ({frame_len} samples)"
        )
    frames = sliding_window_view(clip.samples, frame_len)[:: config.frame_hop_samples]
    windowed = frames * np.hamming(frame_len)
    power = np.abs(np.fft.rfft(windowed, n=config.fft_size, axis=1)) ** 2 / config.fft_size
    mel = _mel_filterbank(config.sample_rate_hz, config.fft_size, config.num_filters)
    return np.log(power @ mel.T + LOG_EPS)


def extract_features(clip: AudioClip, config: FrontendConfig | None = None) -> FloatArray:
    """Computes normalized log filter-bank features of shape (frames, num_filters).

    Each feature dimension is normalized to zero mean and unit variance over the utterance;
    dimensions that are constant over the utterance become exactly zero.
    """
    config = config or FrontendConfig()
    energies = log_filterbank_energies(clip, config)
    mean = energies.mean(axis=0)
    std = energies.std(axis=0)
    constant = std < _MIN_STD
    normalized = (energies - mean) / np.where(constant, 1.0, std)
    normalized[:, constant] = 0.0
    return normalized
