import logging
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Any

from wmlab.asr.data import Utterance
from wmlab.asr.model import AsrModel
from wmlab.asr.training import evaluate
from wmlab.attacks.evasion import LabelDetectionEvasion, SteganalysisDetector, SteganalysisEvasion
from wmlab.attacks.finetuning import DEFAULT_LR_RATIO, finetune_attack
from wmlab.attacks.overwriting import overwrite_attack
from wmlab.attacks.pruning import prune_attack
from wmlab.attacks.report import AttackKind, AttackReport
from wmlab.audio import AudioClip, PredictFn, TriggerKey
from wmlab.errors import InvalidInputError
from wmlab.metrics import ScoreReport, score_corpus
from wmlab.stego.message import StegoMessage, StegoText
from wmlab.stego.model import StegoModel
from wmlab.utils.misc import derive_seed
from wmlab.watermark.extraction import extract
from wmlab.watermark.trigger_set import TriggerSet, WatermarkConfig

log = logging.getLogger(__name__)


@dataclass
class AttackOutcome:
    report: AttackReport
    model: AsrModel | None
    """the attacked model; None for attacks that only wrap the prediction interface"""


@dataclass
class AttackerMaterials:
    """Everything an overwriting attacker brings: own clips, stego model, message and stegos."""

    clips: list[AudioClip]
    stego_model: StegoModel
    message: StegoMessage
    stegos: list[StegoText]


@dataclass
class AttackHarness:
    """Runs the robustness attacks against a watermarked model and scores each outcome.

    The attacker's clean data is disjoint from the held-out utterances used to measure utility.
    """

    model: AsrModel
    original_lr: float
    attacker_data: list[Utterance]
    clean_eval: list[Utterance]
    trigger_set: TriggerSet
    stego_model: StegoModel
    message: StegoMessage
    cfg: WatermarkConfig
    seed: int = 0
    lr_ratio: float = DEFAULT_LR_RATIO
    utility_tolerance_pp: float = 2.0
    owner_key: TriggerKey | None = None

    def __post_init__(self) -> None:
        if not self.attacker_data or not self.clean_eval:
            raise InvalidInputError("Attacks need non-empty attacker and evaluation data")

    @cached_property
    def clean_before(self) -> ScoreReport:
        return evaluate(self.model, self.clean_eval)

    def _stage_seed(self, stage: str) -> int:
        return derive_seed(self.seed, stage)

    def score_predict_fn(self, predict_fn: PredictFn) -> ScoreReport:
        return score_corpus(
            [u.transcript for u in self.clean_eval], [predict_fn(u.audio) for u in self.clean_eval]
        )

    def report_for_model(
        self,
        kind: AttackKind,
        params: dict[str, Any],
        attacked: AsrModel,
    ) -> AttackReport:
        return AttackReport(
            kind=kind,
            params=params,
            clean_before=self.clean_before,
            clean_after=evaluate(attacked, self.clean_eval),
            extraction=extract(
                attacked.as_predict_fn(), self.trigger_set, self.stego_model, self.message, self.cfg
            ),
            utility_tolerance_pp=self.utility_tolerance_pp,
        )

    def prune(self, sparsity: float, epochs: int = 3) -> AttackOutcome:
        result = prune_attack(
            self.model,
            sparsity,
            self.attacker_data,
            epochs=epochs,
            lr=self.original_lr * self.lr_ratio,
            seed=self._stage_seed(f"attack-prune-{sparsity}"),
        )
        report = self.report_for_model(
            AttackKind.PRUNE, {"sparsity": sparsity, "recovery_epochs": epochs}, result.model
        )
        return AttackOutcome(report, result.model)

    def finetune(self, epochs: int) -> AttackOutcome:
        result = finetune_attack(
            self.model,
            self.attacker_data,
            epochs=epochs,
            original_lr=self.original_lr,
            lr_ratio=self.lr_ratio,
            seed=self._stage_seed(f"attack-finetune-{epochs}"),
        )
        params = {"epochs": epochs, "lr": self.original_lr * self.lr_ratio}
        return AttackOutcome(
            self.report_for_model(AttackKind.FINETUNE, params, result.model), result.model
        )

    def overwrite(self, attacker: AttackerMaterials) -> AttackOutcome:
        """Overwrites with a second watermark and also runs the owner-side fake-trigger check."""
        if self.owner_key is None:
            raise InvalidInputError("The overwriting attack needs the owner's key range")
        result = overwrite_attack(
            self.model,
            self.attacker_data,
            attacker.clips,
            attacker.stegos,
            self.owner_key,
            self.cfg,
            key_seed=self._stage_seed("attack-overwrite-key"),
            subset_seed=self._stage_seed("attack-overwrite-subset"),
            train_seed=self._stage_seed("attack-overwrite-train"),
        )
        report = self.report_for_model(
            AttackKind.OVERWRITE, {"attacker_key": list(result.key.values)}, result.model
        )
        predict_fn = result.model.as_predict_fn()
        owner_stegos = self.trigger_set.stegos
        if len(attacker.stegos) == len(owner_stegos):
            report.extra_extractions["owner_fake_trigger_extraction"] = extract(
                predict_fn,
                result.trigger_set.with_stegos(owner_stegos),
                self.stego_model,
                self.message,
                self.cfg,
            )
        report.extra_extractions["attacker_extraction"] = extract(
            predict_fn, result.trigger_set, attacker.stego_model, attacker.message, self.cfg
        )
        return AttackOutcome(report, result.model)

    def label_detection(self, num_intercepted: int) -> AttackOutcome:
        """Intercepts the stegos of the first `num_intercepted` groups; extraction pools per group."""
        stegos = self.trigger_set.stegos
        if not 0 <= num_intercepted <= len(stegos):
            raise InvalidInputError(
                f"Cannot intercept {num_intercepted} of {len(stegos)} stegos"
            )
        wrapper = LabelDetectionEvasion(
            self.model.as_predict_fn(),
            stegos[:num_intercepted],
            rng_seed=self._stage_seed("attack-evasion"),
        )
        cfg = self.cfg.model_copy(update={"pooling": "group"})
        report = AttackReport(
            kind=AttackKind.LABEL_DETECTION,
            params={"num_intercepted": num_intercepted, "num_stegos": len(stegos)},
            clean_before=self.clean_before,
            clean_after=self.score_predict_fn(wrapper),
            extraction=extract(wrapper, self.trigger_set, self.stego_model, self.message, cfg),
            utility_tolerance_pp=self.utility_tolerance_pp,
        )
        return AttackOutcome(report, None)

    def steganalysis(self, detector: SteganalysisDetector | None = None) -> AttackOutcome:
        wrapper = SteganalysisEvasion(
            self.model.as_predict_fn(), detector, rng_seed=self._stage_seed("attack-steganalysis")
        )
        report = AttackReport(
            kind=AttackKind.STEGANALYSIS,
            params={"detector": type(detector).__name__ if detector else "none"},
            clean_before=self.clean_before,
            clean_after=self.score_predict_fn(wrapper),
            extraction=extract(wrapper, self.trigger_set, self.stego_model, self.message, self.cfg),
            utility_tolerance_pp=self.utility_tolerance_pp,
        )
        return AttackOutcome(report, None)


def split_attacker_data(
    eval_data: Sequence[Utterance], attack_fraction: float
) -> tuple[list[Utterance], list[Utterance]]:
    """The attacker gets the first `attack_fraction` of the held-out split; the rest measures utility."""
    cut = round(attack_fraction * len(eval_data))
    if not 0 < cut < len(eval_data):
        raise InvalidInputError(
            f"attack_fraction={attack_fraction} leaves no data for the attacker or for evaluation"
        )
    return list(eval_data[:cut]), list(eval_data[cut:])
