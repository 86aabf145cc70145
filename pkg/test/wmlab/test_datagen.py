from pathlib import Path

import numpy as np
import pytest

from wmlab.asr.data import read_manifest
from wmlab.datagen import (
    EVAL_MANIFEST,
    TRAIN_MANIFEST,
    OwnerClipBand,
    ToneLanguageSpec,
    gen_corpus,
    gen_owner_clips,
    random_text,
    synth_utterance,
)
from wmlab.errors import InvalidInputError


def _dominant_frequency(samples: np.ndarray, sample_rate_hz: int) -> float:
    spectrum = np.abs(np.fft.rfft(samples))
    return float(np.fft.rfftfreq(len(samples), 1 / sample_rate_hz)[np.argmax(spectrum)])


class TestToneLanguageSpec:
    def test_frequencies(self) -> None:
        spec = ToneLanguageSpec()
        assert spec.frequency_of("a") == 400.0
        assert spec.frequency_of("c") == 500.0
        assert spec.max_frequency_hz < spec.sample_rate_hz / 2

    def test_unknown_character(self) -> None:
        with pytest.raises(InvalidInputError):
            ToneLanguageSpec(alphabet="ab ").frequency_of("z")

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"alphabet": "aa"},
            {"alphabet": "a1"},
            {"alphabet": " "},
            {"base_frequency_hz": 7900.0},
            {"symbol_ms": 20.0},
            {"unknown": 1},
        ],
    )
    def test_invalid_specs(self, kwargs: dict) -> None:
        with pytest.raises(ValueError):
            ToneLanguageSpec(**kwargs)


class TestSynthUtterance:
    def test_single_symbol(self) -> None:
        spec = ToneLanguageSpec(noise_level=0.0)
        utt = synth_utterance("a", spec)
        assert len(utt.audio) == spec.symbol_samples
        assert utt.transcript == "a"
        assert _dominant_frequency(utt.audio.samples, spec.sample_rate_hz) == pytest.approx(
            spec.frequency_of("a"), abs=spec.sample_rate_hz / spec.symbol_samples
        )

    def test_empty_text(self) -> None:
        with pytest.raises(InvalidInputError):
            synth_utterance("", ToneLanguageSpec())

    def test_character_outside_the_alphabet(self) -> None:
        with pytest.raises(InvalidInputError):
            synth_utterance("abz", ToneLanguageSpec(alphabet="ab "))

    def test_deterministic(self) -> None:
        spec = ToneLanguageSpec()
        reference = synth_utterance("ab c", spec, seed=4).audio
        assert synth_utterance("ab c", spec, seed=4).audio == reference
        assert synth_utterance("ab c", spec, seed=5).audio != reference

    def test_random_text_is_normalized(self) -> None:
        rng = np.random.default_rng(0)
        for _ in range(200):
            text = random_text(rng, "ab ", int(rng.integers(1, 10)))
            assert text == text.strip()
            assert "  " not in text


class TestGenCorpus:
    def test_split_arithmetic(self) -> None:
        corpus = gen_corpus(ToneLanguageSpec(), num_utterances=10, min_len=3, max_len=3)
        assert len(corpus.train) == 8
        assert len(corpus.eval) == 2
        assert all(len(u.transcript) == 3 for u in corpus.all_utterances)
        assert not {u.id for u in corpus.train} & {u.id for u in corpus.eval}

    def test_manifests_are_reproducible(self, tmp_path: Path) -> None:
        spec = ToneLanguageSpec(seed=5)
        first = gen_corpus(spec, 10, 2, 5, output_dir=tmp_path / "first")
        second = gen_corpus(spec, 10, 2, 5, output_dir=tmp_path / "second")
        for name in (TRAIN_MANIFEST, EVAL_MANIFEST):
            first_bytes = (tmp_path / "first" / name).read_bytes()
            assert first_bytes == (tmp_path / "second" / name).read_bytes()
        assert first.train_manifest is not None
        restored = read_manifest(first.train_manifest)
        assert [u.transcript for u in restored] == [u.transcript for u in second.train]
        assert [u.id for u in restored] == [u.id for u in second.train]

    def test_invalid_length_range(self) -> None:
        with pytest.raises(InvalidInputError):
            gen_corpus(ToneLanguageSpec(), 10, 5, 3)


class TestOwnerClips:
    def test_duration_range(self) -> None:
        (clip,) = gen_owner_clips(1, ToneLanguageSpec(), seed=0)
        assert 100 <= clip.duration_ms <= 300

    def test_distinct(self) -> None:
        clips = gen_owner_clips(10, ToneLanguageSpec(), seed=1)
        assert len(set(clips)) == 10

    def test_outside_the_language_band(self) -> None:
        spec = ToneLanguageSpec()
        for clip in gen_owner_clips(10, spec, seed=2):
            assert _dominant_frequency(clip.samples, spec.sample_rate_hz) > spec.max_frequency_hz

    def test_band_overlapping_the_language(self) -> None:
        with pytest.raises(InvalidInputError):
            gen_owner_clips(2, ToneLanguageSpec(), seed=0, band=OwnerClipBand(low_hz=500.0))
