"""Black-box watermark extraction.

The verifier only needs a prediction interface (audio in, text out), the trigger set, the stego
model and the original message. The model's weights are never touched.
"""

import logging
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any

from tqdm import tqdm

from wmlab.asr.vocab import normalize_text
from wmlab.audio import PredictFn
from wmlab.errors import ExtractionQueryError, UndecodableTextError
from wmlab.metrics import ScoreReport, ber, score_corpus
from wmlab.stego.message import StegoMessage
from wmlab.stego.model import StegoModel, nearest_stego
from wmlab.watermark.trigger_set import Pooling, TriggerSet, WatermarkConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupScore:
    clip_index: int
    num_triggers: int
    wer: float
    cer: float
    passed: bool


@dataclass
class ExtractionReport:
    predictions: list[str]
    """prediction of every trigger, in trigger-set order"""
    wer: float
    """corpus-level WER of the predictions against the target stegos"""
    cer: float
    t_wer: float
    t_cer: float
    pooling: Pooling
    watermarked: bool
    rationale: str
    group_scores: list[GroupScore] = field(default_factory=list)
    recovered_message: StegoMessage | None = None
    ber: float | None = None
    """only computed if the verdict is watermarked"""
    num_decoded: int = 0

    @property
    def verdict(self) -> str:
        return "watermarked" if self.watermarked else "not-watermarked"

    @property
    def succeeded(self) -> bool:
        """True if ownership is proven: watermarked with a perfectly recovered message."""
        return self.watermarked and self.ber == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "rationale": self.rationale,
            "wer": self.wer,
            "cer": self.cer,
            "t_wer": self.t_wer,
            "t_cer": self.t_cer,
            "pooling": self.pooling,
            "num_triggers": len(self.predictions),
            "recovered_message": (
                self.recovered_message.to_string() if self.recovered_message else "none"
            ),
            "ber": "none" if self.ber is None else self.ber,
            "groups": {
                str(g.clip_index): {
                    "num_triggers": g.num_triggers,
                    "wer": g.wer,
                    "cer": g.cer,
                    "passed": g.passed,
                }
                for g in self.group_scores
            },
        }


def query_predictions(
    predict_fn: PredictFn,
    trigger_set: TriggerSet,
    max_workers: int = 1,
    show_progress: bool = False,
) -> list[str]:
    """Queries the black box on every trigger; results are stored by trigger index.

    :raises ExtractionQueryError: if any query fails, carrying the predictions obtained so far
    """
    completed: dict[int, str] = {}
    errors: dict[int, BaseException] = {}
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {
            executor.submit(predict_fn, sample.audio): i
            for i, sample in enumerate(trigger_set.samples)
        }
        for future in tqdm(
            as_completed(futures), total=len(futures), desc="Queries", disable=not show_progress
        ):
            i = futures[future]
            try:
                completed[i] = normalize_text(future.result())
            except Exception as e:
                errors[i] = e
    if errors:
        first = min(errors)
        raise ExtractionQueryError(
            f"Prediction failed for {len(errors)} triggers, first at index {first}: {errors[first]}",
            completed=completed,
        ) from errors[first]
    return [completed[i] for i in range(len(trigger_set))]


def _passes(score: ScoreReport, cfg: WatermarkConfig) -> bool:
    return score.wer < cfg.t_wer and score.cer < cfg.t_cer


def modal_message(
    predictions: Sequence[str],
    trigger_set: TriggerSet,
    stego_model: StegoModel,
) -> tuple[StegoMessage | None, int]:
    """Most frequent message among the decoded predictions.

    Ties go to the message whose matched stego has the lowest clip index.

    :return: the modal message (None if nothing could be decoded) and the number of decoded predictions
    """
    counts: Counter[StegoMessage] = Counter()
    lowest_clip: dict[StegoMessage, int] = {}
    decoded: dict[int, StegoMessage | None] = {}
    for prediction in predictions:
        stego, _ = nearest_stego(prediction, trigger_set.stegos)
        if stego.clip_index not in decoded:
            try:
                decoded[stego.clip_index] = stego_model.decode_text(stego)
            except UndecodableTextError as e:
                log.warning(f"Stego of clip {stego.clip_index} is not decodable: {e}")
                decoded[stego.clip_index] = None
        message = decoded[stego.clip_index]
        if message is None:
            continue
        counts[message] += 1
        lowest_clip[message] = min(lowest_clip.get(message, stego.clip_index), stego.clip_index)
    if not counts:
        return None, 0
    best = min(counts, key=lambda m: (-counts[m], lowest_clip[m]))
    return best, sum(counts.values())


def evaluate_predictions(
    predictions: Sequence[str],
    trigger_set: TriggerSet,
    stego_model: StegoModel,
    m_original: StegoMessage,
    cfg: WatermarkConfig,
) -> ExtractionReport:
    """Scores given trigger predictions and decides the verdict."""
    predictions = list(predictions)
    pooled = score_corpus(trigger_set.targets, predictions)
    group_scores = []
    for clip_index, indices in trigger_set.group_indices().items():
        if not indices:
            continue
        score = score_corpus(
            [trigger_set.samples[i].target.text for i in indices], [predictions[i] for i in indices]
        )
        group_scores.append(
            GroupScore(clip_index, len(indices), score.wer, score.cer, _passes(score, cfg))
        )

    if cfg.pooling == "corpus":
        watermarked = _passes(pooled, cfg)
        decode_pool = predictions if watermarked else []
        rationale = (
            f"pooled WER {pooled.wer:.4f} {'<' if pooled.wer < cfg.t_wer else '>='} {cfg.t_wer}, "
            f"pooled CER {pooled.cer:.4f} {'<' if pooled.cer < cfg.t_cer else '>='} {cfg.t_cer}"
        )
    else:
        passing = {g.clip_index for g in group_scores if g.passed}
        watermarked = bool(passing)
        decode_pool = [
            p
            for p, s in zip(predictions, trigger_set.samples, strict=True)
            if s.clip_index in passing
        ]
        rationale = f"{len(passing)} of {len(group_scores)} groups below both thresholds"

    report = ExtractionReport(
        predictions=predictions,
        wer=pooled.wer,
        cer=pooled.cer,
        t_wer=cfg.t_wer,
        t_cer=cfg.t_cer,
        pooling=cfg.pooling,
        watermarked=watermarked,
        rationale=rationale,
        group_scores=group_scores,
    )
    if watermarked:
        message, num_decoded = modal_message(decode_pool, trigger_set, stego_model)
        report.recovered_message = message
        report.num_decoded = num_decoded
        report.ber = ber(message.bits, m_original.bits) if message is not None else 1.0
    log.info(
        f"Extraction verdict: {report.verdict} ({rationale})"
        + (f", BER {report.ber:.3f}" if report.ber is not None else "")
    )
    return report


def extract(
    predict_fn: PredictFn,
    trigger_set: TriggerSet,
    stego_model: StegoModel,
    m_original: StegoMessage,
    cfg: WatermarkConfig,
    show_progress: bool = False,
) -> ExtractionReport:
    """Queries the black box on the trigger set and verifies the watermark."""
    predictions = query_predictions(predict_fn, trigger_set, cfg.max_workers, show_progress)
    return evaluate_predictions(predictions, trigger_set, stego_model, m_original, cfg)


@dataclass
class IntegrityReport:
    reports: list[ExtractionReport]

    @property
    def any_watermarked(self) -> bool:
        return any(r.watermarked for r in self.reports)

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_models": len(self.reports),
            "any_watermarked": self.any_watermarked,
            "models": {str(i): r.to_dict() for i, r in enumerate(self.reports)},
        }


def check_integrity(
    predict_fns: Sequence[PredictFn],
    trigger_set: TriggerSet,
    stego_model: StegoModel,
    m_original: StegoMessage,
    cfg: WatermarkConfig,
) -> IntegrityReport:
    """Runs extraction against models that were never watermarked; none of them may pass."""
    reports = [extract(fn, trigger_set, stego_model, m_original, cfg) for fn in predict_fns]
    for i, r in enumerate(reports):
        log.info(f"Integrity model {i}: WER {r.wer:.4f}, CER {r.cer:.4f}, {r.verdict}")
    return IntegrityReport(reports)
