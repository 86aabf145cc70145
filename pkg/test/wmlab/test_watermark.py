from pathlib import Path

import numpy as np
import pytest

from wmlab.audio import AudioClip, PredictFn, TriggerKey
from wmlab.datagen import ToneCorpus, ToneLanguageSpec, gen_owner_clips
from wmlab.errors import ConfigError, ExtractionQueryError
from wmlab.stego.message import StegoMessage, StegoText
from wmlab.stego.model import StegoModel
from wmlab.watermark.extraction import (
    check_integrity,
    evaluate_predictions,
    extract,
    modal_message,
)
from wmlab.watermark.trigger_set import (
    TriggerSet,
    TriggerSetBuild,
    WatermarkConfig,
    build_trigger_set,
    group_sizes,
)

N = 4


@pytest.fixture(scope="module")
def message() -> StegoMessage:
    return StegoMessage.random(7)


@pytest.fixture(scope="module")
def stegos(stego_model: StegoModel, message: StegoMessage) -> list[StegoText]:
    return stego_model.encode_message(message, N, seed=1)


@pytest.fixture(scope="module")
def wm_config() -> WatermarkConfig:
    return WatermarkConfig(n=N, trigger_set_size=10, max_workers=2)


@pytest.fixture(scope="module")
def trigger_build(
    small_corpus: ToneCorpus,
    small_language: ToneLanguageSpec,
    stegos: list[StegoText],
    wm_config: WatermarkConfig,
) -> TriggerSetBuild:
    owner_clips = gen_owner_clips(N, small_language, seed=0)
    key = TriggerKey.random(N, 0.05, 0.2, seed=0)
    return build_trigger_set(small_corpus.train, owner_clips, key, stegos, wm_config, seed=0)


@pytest.fixture(scope="module")
def trigger_set(trigger_build: TriggerSetBuild) -> TriggerSet:
    return trigger_build.trigger_set


def answering(trigger_set: TriggerSet, answers: dict[int, str] | None = None) -> PredictFn:
    """A black box returning the target stego of each trigger, or the answer given for its group."""
    answers = answers or {}
    table = {s.audio: answers.get(s.clip_index, s.target.text) for s in trigger_set.samples}

    def predict(clip: AudioClip) -> str:
        return table.get(clip, "zz yy xx")

    return predict


class TestTriggerSet:
    def test_group_sizes(self) -> None:
        assert group_sizes(10, 4) == [3, 3, 2, 2]
        assert group_sizes(4, 1) == [4]
        assert group_sizes(8000, 10) == [800] * 10

    def test_groups_carry_their_stego(
        self, trigger_set: TriggerSet, stegos: list[StegoText]
    ) -> None:
        groups = trigger_set.group_indices()
        assert [len(groups[i]) for i in range(N)] == [3, 3, 2, 2]
        for clip_index, indices in groups.items():
            assert {trigger_set.samples[i].target for i in indices} == {stegos[clip_index]}

    def test_mixture_holds_triggers_and_clean_copies(
        self, trigger_build: TriggerSetBuild, small_corpus: ToneCorpus
    ) -> None:
        triggers, clean = trigger_build.mixture[:10], trigger_build.mixture[10:]
        assert len(clean) == 10
        samples = trigger_build.trigger_set.samples
        assert [t.id for t in triggers] == [s.trigger_id for s in samples]
        train_by_id = {u.id: u for u in small_corpus.train}
        for sample, utterance in zip(samples, clean, strict=True):
            assert sample.source_id == utterance.id
            assert train_by_id[utterance.id] == utterance
            assert sample.audio != utterance.audio

    def test_single_group(
        self, small_corpus: ToneCorpus, small_language: ToneLanguageSpec, stegos: list[StegoText]
    ) -> None:
        cfg = WatermarkConfig(n=1, trigger_set_size=4)
        build = build_trigger_set(
            small_corpus.train,
            gen_owner_clips(1, small_language, seed=0),
            TriggerKey((0.1,)),
            stegos[:1],
            cfg,
            seed=0,
        )
        assert len(build.trigger_set) == 4
        assert set(build.trigger_set.targets) == {stegos[0].text}

    def test_too_few_utterances(
        self, small_corpus: ToneCorpus, small_language: ToneLanguageSpec, stegos: list[StegoText]
    ) -> None:
        cfg = WatermarkConfig(n=N, trigger_set_size=len(small_corpus.train) + 1)
        with pytest.raises(ConfigError):
            build_trigger_set(
                small_corpus.train,
                gen_owner_clips(N, small_language, seed=0),
                TriggerKey.random(N, 0.05, 0.2, seed=0),
                stegos,
                cfg,
                seed=0,
            )

    def test_mismatched_materials(
        self,
        small_corpus: ToneCorpus,
        small_language: ToneLanguageSpec,
        stegos: list[StegoText],
        wm_config: WatermarkConfig,
    ) -> None:
        with pytest.raises(ConfigError):
            build_trigger_set(
                small_corpus.train,
                gen_owner_clips(N, small_language, seed=0),
                TriggerKey.random(N - 1, 0.05, 0.2, seed=0),
                stegos,
                wm_config,
                seed=0,
            )

    def test_save_and_load(self, trigger_set: TriggerSet, tmp_path: Path) -> None:
        trigger_set.save(tmp_path / "triggers")
        restored = TriggerSet.load(tmp_path / "triggers")
        assert restored.stegos == trigger_set.stegos
        assert restored.targets == trigger_set.targets
        assert [s.key for s in restored.samples] == [s.key for s in trigger_set.samples]
        assert [s.source_id for s in restored.samples] == [
            s.source_id for s in trigger_set.samples
        ]
        for a, b in zip(restored.samples, trigger_set.samples, strict=True):
            assert np.max(np.abs(a.audio.samples - b.audio.samples)) <= 2.0**-15

    def test_invalid_config(self) -> None:
        with pytest.raises(ValueError):
            WatermarkConfig(n=3, key=(0.1, 0.2))
        with pytest.raises(ValueError):
            WatermarkConfig(n=5, trigger_set_size=4)
        with pytest.raises(ValueError):
            WatermarkConfig(key_min=0.3, key_max=0.2)


class TestExtraction:
    def test_perfect_predictions(
        self,
        trigger_set: TriggerSet,
        stego_model: StegoModel,
        message: StegoMessage,
        wm_config: WatermarkConfig,
    ) -> None:
        report = extract(answering(trigger_set), trigger_set, stego_model, message, wm_config)
        assert report.verdict == "watermarked"
        assert report.wer == 0.0
        assert report.cer == 0.0
        assert report.ber == 0.0
        assert report.succeeded
        assert report.recovered_message == message
        assert report.num_decoded == len(trigger_set)

    def test_unrelated_predictions(
        self,
        trigger_set: TriggerSet,
        stego_model: StegoModel,
        message: StegoMessage,
        wm_config: WatermarkConfig,
    ) -> None:
        report = extract(lambda clip: "zz yy xx", trigger_set, stego_model, message, wm_config)
        assert report.verdict == "not-watermarked"
        assert report.ber is None
        assert not report.succeeded

    def test_wrong_message_gives_nonzero_ber(
        self, trigger_set: TriggerSet, stego_model: StegoModel, wm_config: WatermarkConfig
    ) -> None:
        other = StegoMessage.random(8)
        report = extract(answering(trigger_set), trigger_set, stego_model, other, wm_config)
        assert report.watermarked
        assert report.ber is not None and report.ber > 0
        assert not report.succeeded

    def test_garbled_predictions_are_mapped_to_the_nearest_stego(
        self,
        trigger_set: TriggerSet,
        stego_model: StegoModel,
        message: StegoMessage,
        wm_config: WatermarkConfig,
    ) -> None:
        answers = {i: "q" + s.text[1:] for i, s in enumerate(trigger_set.stegos)}
        predict_fn = answering(trigger_set, answers)
        report = extract(predict_fn, trigger_set, stego_model, message, wm_config)
        assert report.watermarked
        assert report.ber == 0.0

    def test_thresholds_are_strict(
        self,
        trigger_set: TriggerSet,
        stego_model: StegoModel,
        message: StegoMessage,
        wm_config: WatermarkConfig,
    ) -> None:
        mixed = [*trigger_set.targets[:-1], "zz"]
        report = evaluate_predictions(mixed, trigger_set, stego_model, message, wm_config)
        assert 0 < report.wer < wm_config.t_wer
        at_threshold = wm_config.model_copy(update={"t_wer": report.wer})
        assert not evaluate_predictions(
            mixed, trigger_set, stego_model, message, at_threshold
        ).watermarked
        above_threshold = wm_config.model_copy(update={"t_wer": report.wer + 1e-9})
        assert evaluate_predictions(
            mixed, trigger_set, stego_model, message, above_threshold
        ).watermarked

    def test_replacing_a_prediction_by_its_target_keeps_the_verdict(
        self,
        trigger_set: TriggerSet,
        stego_model: StegoModel,
        message: StegoMessage,
        wm_config: WatermarkConfig,
    ) -> None:
        predictions = list(trigger_set.targets)
        predictions[0] = "zz yy"
        assert evaluate_predictions(
            predictions, trigger_set, stego_model, message, wm_config
        ).watermarked
        predictions[0] = trigger_set.targets[0]
        assert evaluate_predictions(
            predictions, trigger_set, stego_model, message, wm_config
        ).watermarked

    def test_group_pooling_survives_broken_groups(
        self,
        trigger_set: TriggerSet,
        stego_model: StegoModel,
        message: StegoMessage,
        wm_config: WatermarkConfig,
    ) -> None:
        predict_fn = answering(trigger_set, {0: "zz yy xx", 1: "ww vv"})
        corpus_report = extract(predict_fn, trigger_set, stego_model, message, wm_config)
        assert not corpus_report.watermarked
        group_cfg = wm_config.model_copy(update={"pooling": "group"})
        group_report = extract(predict_fn, trigger_set, stego_model, message, group_cfg)
        assert group_report.watermarked
        assert group_report.ber == 0.0
        assert [g.passed for g in group_report.group_scores] == [False, False, True, True]
        assert group_report.num_decoded == 4

    def test_modal_message_ties_go_to_the_lowest_clip_index(
        self, stego_model: StegoModel
    ) -> None:
        m_a, m_b = StegoMessage.random(1), StegoMessage.random(2)
        (stego_a,) = stego_model.encode_message(m_a, 1, seed=5)
        (stego_b,) = stego_model.encode_message(m_b, 1, seed=6)
        stego_a = StegoText(stego_a.tokens, clip_index=1)
        stego_b = StegoText(stego_b.tokens, clip_index=0)
        trigger_set = TriggerSet([], [stego_b, stego_a])
        predictions = [stego_a.text, stego_b.text]
        message, num_decoded = modal_message(predictions, trigger_set, stego_model)
        assert message == m_b
        assert num_decoded == 2

    def test_failed_queries_report_completed_ones(
        self,
        trigger_set: TriggerSet,
        stego_model: StegoModel,
        message: StegoMessage,
        wm_config: WatermarkConfig,
    ) -> None:
        failing_audio = trigger_set.samples[4].audio
        inner = answering(trigger_set)

        def flaky(clip: AudioClip) -> str:
            if clip == failing_audio:
                raise RuntimeError("service unavailable")
            return inner(clip)

        with pytest.raises(ExtractionQueryError) as error:
            extract(flaky, trigger_set, stego_model, message, wm_config)
        assert sorted(error.value.completed) == [i for i in range(len(trigger_set)) if i != 4]

    def test_deterministic(
        self,
        trigger_set: TriggerSet,
        stego_model: StegoModel,
        message: StegoMessage,
        wm_config: WatermarkConfig,
    ) -> None:
        predict_fn = answering(trigger_set, {2: "zz yy"})
        first = extract(predict_fn, trigger_set, stego_model, message, wm_config)
        second = extract(predict_fn, trigger_set, stego_model, message, wm_config)
        assert first.to_dict() == second.to_dict()

    def test_integrity_over_unmarked_models(
        self,
        trigger_set: TriggerSet,
        stego_model: StegoModel,
        message: StegoMessage,
        wm_config: WatermarkConfig,
    ) -> None:
        unmarked = [lambda clip: "ab ba", lambda clip: "a"]
        report = check_integrity(unmarked, trigger_set, stego_model, message, wm_config)
        assert not report.any_watermarked
        assert all(r.wer >= 0.9 for r in report.reports)
