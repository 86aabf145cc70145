import json
from pathlib import Path
from typing import Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from wmlab.asr.features import FrontendConfig
from wmlab.asr.hyperparams import AsrTrainingConfig
from wmlab.attacks.finetuning import DEFAULT_LR_RATIO
from wmlab.constants import BITS_PER_STEP, MESSAGE_BITS
from wmlab.datagen import ToneLanguageSpec
from wmlab.errors import ConfigError
from wmlab.stego.corpus import StegoCorpusName
from wmlab.types import BitString, PathLike
from wmlab.utils.misc import derive_seed, read_json
from wmlab.watermark.trigger_set import WatermarkConfig


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class CorpusConfig(_Section):
    num_utterances: int = Field(default=500, ge=1)
    min_len: int = Field(default=20, ge=1)
    max_len: int = Field(default=30, ge=1)

    @model_validator(mode="after")
    def _check_lengths(self) -> Self:
        if self.min_len > self.max_len:
            raise ValueError(f"min_len={self.min_len} exceeds max_len={self.max_len}")
        return self


class StegoConfig(_Section):
    message_bits: int = Field(default=MESSAGE_BITS, ge=1)
    bits_per_step: int = Field(default=BITS_PER_STEP, ge=1)
    corpus: str = StegoCorpusName.DEFAULT.value
    """name of a shipped corpus or a directory of ``*.txt`` files"""
    message: BitString | None = None
    """explicit owner message; drawn from the global seed if None"""

    @model_validator(mode="after")
    def _check_message(self) -> Self:
        if self.message is not None and len(self.message) != self.message_bits:
            raise ValueError(
                f"message has {len(self.message)} bits but message_bits is {self.message_bits}"
            )
        return self


class AttacksConfig(_Section):
    attack_fraction: float = Field(default=0.8, gt=0, lt=1)
    """share of the held-out split given to the attacker; the rest measures clean accuracy"""
    lr_ratio: float = Field(default=DEFAULT_LR_RATIO, gt=0)
    prune_sparsities: list[float] = [0.1, 0.3, 0.5, 0.7, 0.9]
    prune_recovery_epochs: int = Field(default=3, ge=0)
    finetune_epochs: int = Field(default=10, ge=0)
    finetune_epoch_grid: list[int] = [0, 2, 5, 10]
    intercepted: int = Field(default=2, ge=0)
    """number of stegos intercepted by the label-detection evasion"""
    num_integrity_models: int = Field(default=3, ge=1)

    @model_validator(mode="after")
    def _check_grids(self) -> Self:
        if any(not 0 <= s < 1 for s in self.prune_sparsities):
            raise ValueError("prune_sparsities must lie in [0, 1)")
        if any(e < 0 for e in self.finetune_epoch_grid):
            raise ValueError("finetune_epoch_grid must be non-negative")
        return self


class ExperimentConfig(_Section):
    """Complete configuration of a lab run, one section per stage.

    Every stage draws its randomness from ``derive_seed(seed, stage)``, so a run is reproducible from
    this document and the global seed alone.
    """

    seed: int = 0
    output_dir: str | None = None
    language: ToneLanguageSpec = ToneLanguageSpec()
    corpus: CorpusConfig = CorpusConfig()
    frontend: FrontendConfig = FrontendConfig()
    asr: AsrTrainingConfig = AsrTrainingConfig()
    stego: StegoConfig = StegoConfig()
    watermark: WatermarkConfig = WatermarkConfig()
    attacks: AttacksConfig = AttacksConfig()

    @model_validator(mode="after")
    def _check_cross_section(self) -> Self:
        if self.stego.message_bits != self.watermark.message_bits:
            raise ValueError(
                f"stego.message_bits={self.stego.message_bits} differs from watermark.message_bits={self.watermark.message_bits}"
            )
        if self.language.sample_rate_hz != self.frontend.sample_rate_hz:
            raise ValueError("language.sample_rate_hz must equal frontend.sample_rate_hz")
        if self.attacks.intercepted > self.watermark.n:
            raise ValueError(
                f"attacks.intercepted={self.attacks.intercepted} exceeds watermark.n={self.watermark.n}"
            )
        return self

    def stage_seed(self, stage: str) -> int:
        return derive_seed(self.seed, stage)

    def with_seed(self, seed: int | None) -> Self:
        return self if seed is None else self.model_copy(update={"seed": seed})

    @classmethod
    def from_dict(cls, data: dict) -> Self:
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(describe_validation_error(e)) from e

    @classmethod
    def from_file(cls, path: PathLike) -> Self:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Configuration file {path} does not exist")
        try:
            data = read_json(path)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must contain a JSON object")
        return cls.from_dict(data)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


def describe_validation_error(e: ValidationError) -> str:
    """One line per problem, naming the offending key path."""
    problems = []
    for error in e.errors():
        key = ".".join(str(part) for part in error["loc"]) or "<root>"
        if error["type"] == "extra_forbidden":
            problems.append(f"unknown key '{key}'")
        else:
            problems.append(f"invalid value for '{key}': {error['msg']}")
    return "Invalid experiment configuration: " + "; ".join(problems)
