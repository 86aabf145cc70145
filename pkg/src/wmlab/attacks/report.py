from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from wmlab.metrics import ScoreReport
from wmlab.watermark.extraction import ExtractionReport


class AttackKind(Enum):
    PRUNE = "prune"
    FINETUNE = "finetune"
    OVERWRITE = "overwrite"
    LABEL_DETECTION = "evasion"
    STEGANALYSIS = "steganalysis"


@dataclass
class AttackReport:
    """Outcome of one attack: utility of the attacked model and survival of the owner's watermark."""

    kind: AttackKind
    params: dict[str, Any]
    clean_before: ScoreReport
    clean_after: ScoreReport
    extraction: ExtractionReport
    """the owner's extraction with the original trigger set against the attacked model"""
    extra_extractions: dict[str, ExtractionReport] = field(default_factory=dict)
    utility_tolerance_pp: float = 2.0

    @property
    def cer_delta_pp(self) -> float:
        return 100 * (self.clean_after.cer - self.clean_before.cer)

    @property
    def utility_preserved(self) -> bool:
        return self.cer_delta_pp <= self.utility_tolerance_pp

    @property
    def watermark_survived(self) -> bool:
        return self.extraction.succeeded

    @property
    def attack_wins(self) -> bool:
        """The attacker only wins by removing the watermark without hurting clean accuracy."""
        return not self.watermark_survived and self.utility_preserved

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "params": self.params,
            "clean_before": self.clean_before.to_dict(),
            "clean_after": self.clean_after.to_dict(),
            "cer_delta_pp": self.cer_delta_pp,
            "utility_preserved": self.utility_preserved,
            "watermark_survived": self.watermark_survived,
            "attack_wins": self.attack_wins,
            "owner_extraction": self.extraction.to_dict(),
            **{name: r.to_dict() for name, r in self.extra_extractions.items()},
        }
