import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

from wmlab.asr.data import Utterance
from wmlab.asr.model import AsrModel
from wmlab.asr.training import evaluate, train
from wmlab.metrics import ScoreReport
from wmlab.watermark.trigger_set import WatermarkConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FidelityReport:
    """Clean-set accuracy before and after embedding."""

    baseline: ScoreReport
    watermarked: ScoreReport

    @property
    def wer_delta_pp(self) -> float:
        """WER change in percentage points; positive means degradation"""
        return 100 * (self.watermarked.wer - self.baseline.wer)

    @property
    def cer_delta_pp(self) -> float:
        return 100 * (self.watermarked.cer - self.baseline.cer)

    def to_dict(self) -> dict[str, float]:
        return {
            "baseline_wer": self.baseline.wer,
            "baseline_cer": self.baseline.cer,
            "watermarked_wer": self.watermarked.wer,
            "watermarked_cer": self.watermarked.cer,
            "wer_delta_pp": self.wer_delta_pp,
            "cer_delta_pp": self.cer_delta_pp,
        }


@dataclass
class EmbeddingResult:
    model: AsrModel
    fidelity: FidelityReport | None
    loss_trace: list[float] = field(default_factory=list)


def embed(
    model: AsrModel,
    mixture: Sequence[Utterance],
    cfg: WatermarkConfig,
    seed: int,
    clean_eval: Sequence[Utterance] | None = None,
    show_progress: bool = False,
) -> EmbeddingResult:
    """Fine-tunes the model on the trigger/clean mixture.

    :param seed: seed of the batch shuffling
    :param clean_eval: if given, clean accuracy is measured before and after for the fidelity report
    """
    baseline = evaluate(model, clean_eval) if clean_eval else None
    log.info(f"Embedding watermark: {len(mixture)} utterances, {cfg.epochs} epochs, lr={cfg.lr}")
    result = train(
        model, mixture, epochs=cfg.epochs, lr=cfg.lr, seed=seed, show_progress=show_progress
    )
    fidelity = None
    if baseline is not None and clean_eval:
        fidelity = FidelityReport(baseline=baseline, watermarked=evaluate(result.model, clean_eval))
        log.info(
            f"Fidelity: clean CER {fidelity.baseline.cer:.4f} -> {fidelity.watermarked.cer:.4f}, "
            f"WER {fidelity.baseline.wer:.4f} -> {fidelity.watermarked.wer:.4f}"
        )
    return EmbeddingResult(model=result.model, fidelity=fidelity, loss_trace=result.loss_trace)
