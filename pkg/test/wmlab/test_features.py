import numpy as np
import pytest

from wmlab.asr.features import FrontendConfig, extract_features, log_filterbank_energies
from wmlab.audio import AudioClip
from wmlab.errors import InvalidInputError


@pytest.fixture()
def noise_clip() -> AudioClip:
    return AudioClip(np.random.default_rng(0).uniform(-0.5, 0.5, 16000))


class TestFrontend:
    def test_frame_count_of_one_second(self, noise_clip: AudioClip) -> None:
        features = extract_features(noise_clip)
        assert features.shape == (98, 26)

    def test_frame_count_formula(self) -> None:
        cfg = FrontendConfig()
        assert cfg.frame_len_samples == 400
        assert cfg.frame_hop_samples == 160
        assert cfg.num_frames(16000) == 98
        assert cfg.num_frames(399) == 0

    def test_constant_input(self) -> None:
        clip = AudioClip(np.zeros(4000))
        energies = log_filterbank_energies(clip, FrontendConfig())
        assert np.all(energies == energies[0])
        assert np.all(extract_features(clip) == 0.0)

    def test_normalized_per_dimension(self, noise_clip: AudioClip) -> None:
        features = extract_features(noise_clip)
        np.testing.assert_allclose(features.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(features.std(axis=0), 1.0, atol=1e-6)

    def test_deterministic(self, noise_clip: AudioClip) -> None:
        copy = AudioClip(noise_clip.samples.copy())
        np.testing.assert_array_equal(extract_features(noise_clip), extract_features(copy))

    def test_clip_shorter_than_a_frame(self) -> None:
        with pytest.raises(InvalidInputError):
            extract_features(AudioClip(np.ones(100)))

    def test_sample_rate_mismatch(self) -> None:
        with pytest.raises(InvalidInputError):
            extract_features(AudioClip(np.ones(8000), sample_rate_hz=8000))

    def test_invalid_configuration(self) -> None:
        with pytest.raises(ValueError):
            FrontendConfig(frame_len_ms=50.0, fft_size=512)
