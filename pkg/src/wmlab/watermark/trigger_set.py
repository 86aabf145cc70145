import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from wmlab.asr.data import Utterance
from wmlab.audio import AudioClip, TriggerKey, read_wav, synthesize_trigger, write_wav
from wmlab.constants import MESSAGE_BITS, T_CER, T_WER
from wmlab.errors import ConfigError, MissingArtifactError
from wmlab.schemas import TRIGGER_MANIFEST_COLUMNS, TriggerManifestRowSchema, read_manifest_lines
from wmlab.stego.message import StegoText
from wmlab.types import PathLike

log = logging.getLogger(__name__)

TRIGGER_MANIFEST = "triggers.tsv"

Pooling = Literal["corpus", "group"]


class WatermarkConfig(BaseModel):
    """Parameters of trigger-set construction, embedding and extraction.

    Defaults follow the full-scale setup (10 owner clips, 20-bit message, 8000 triggers,
    learning rate 1e-4); desk-scale runs override them through the experiment configuration.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(default=10, ge=1)
    """number of owner clips, stegos and trigger groups"""
    message_bits: int = Field(default=MESSAGE_BITS, ge=1)
    key: tuple[float, ...] | None = None
    """explicit key; drawn uniformly from [key_min, key_max] if None"""
    key_min: float = Field(default=0.05, gt=0)
    key_max: float = Field(default=0.2, gt=0)
    t_wer: float = Field(default=T_WER, gt=0, lt=1)
    t_cer: float = Field(default=T_CER, gt=0, lt=1)
    trigger_set_size: int = Field(default=8000, ge=1)
    lr: float = Field(default=1e-4, gt=0)
    epochs: int = Field(default=10, ge=0)
    pooling: Pooling = "corpus"
    max_workers: int = Field(default=4, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _check_key(self) -> Self:
        if self.key_min > self.key_max:
            raise ValueError(f"key_min {self.key_min} exceeds key_max {self.key_max}")
        if self.key is not None:
            if len(self.key) != self.n:
                raise ValueError(f"key has {len(self.key)} values but n is {self.n}")
            if any(k <= 0 for k in self.key):
                raise ValueError("key values must be positive")
        if self.n > self.trigger_set_size:
            raise ValueError(
                f"n={self.n} groups cannot be formed from {self.trigger_set_size} triggers"
            )
        return self

    def resolve_key(self, seed: int) -> TriggerKey:
        if self.key is not None:
            return TriggerKey(self.key)
        return TriggerKey.random(self.n, self.key_min, self.key_max, seed)


@dataclass(frozen=True)
class TriggerSample:
    audio: AudioClip
    target: StegoText
    source_id: str
    """id of the clean utterance the trigger was synthesized from"""
    key: float

    @property
    def clip_index(self) -> int:
        return self.target.clip_index

    @property
    def trigger_id(self) -> str:
        return f"{self.source_id}_g{self.clip_index}"


@dataclass
class TriggerSet:
    samples: list[TriggerSample]
    stegos: list[StegoText]
    """the target stego of each group, ordered by clip index"""

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def targets(self) -> list[str]:
        return [s.target.text for s in self.samples]

    def group_indices(self) -> dict[int, list[int]]:
        """Sample indices per clip index."""
        groups: dict[int, list[int]] = {s.clip_index: [] for s in self.stegos}
        for i, sample in enumerate(self.samples):
            groups.setdefault(sample.clip_index, []).append(i)
        return groups

    def with_stegos(self, stegos: Sequence[StegoText]) -> "TriggerSet":
        """The same audio relabelled group-wise with other stegos (matched by clip index)."""
        by_index = {s.clip_index: s for s in stegos}
        samples = [
            TriggerSample(s.audio, by_index[s.clip_index], s.source_id, s.key) for s in self.samples
        ]
        return TriggerSet(samples, sorted(stegos, key=lambda s: s.clip_index))

    def to_utterances(self) -> list[Utterance]:
        return [Utterance(s.trigger_id, s.audio, s.target.text) for s in self.samples]

    def save(self, directory: PathLike) -> Path:
        """Writes every trigger as WAV plus the manifest ``triggers.tsv``.

        :return: the manifest path
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        lines = ["#" + "\t".join(TRIGGER_MANIFEST_COLUMNS)]
        for sample in self.samples:
            relative = Path("wav") / f"{sample.trigger_id}.wav"
            write_wav(sample.audio, directory / relative)
            row = TriggerManifestRowSchema(
                path=relative.as_posix(),
                transcript=sample.target.text,
                source_id=sample.source_id,
                clip_index=sample.clip_index,
                key=sample.key,
            )
            lines.append(row.to_line())
        manifest = directory / TRIGGER_MANIFEST
        manifest.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        log.info(f"Saved trigger set with {len(self)} triggers to {directory}")
        return manifest

    @classmethod
    def load(cls, directory: PathLike) -> Self:
        manifest = Path(directory) / TRIGGER_MANIFEST
        if not manifest.exists():
            raise MissingArtifactError(
                f"Trigger manifest {manifest} does not exist; run 'trigger-synth' first"
            )
        samples = []
        stegos: dict[int, StegoText] = {}
        for line in read_manifest_lines(manifest):
            row = TriggerManifestRowSchema.from_line(line)
            target = stegos.setdefault(
                row.clip_index, StegoText.from_text(row.transcript, row.clip_index)
            )
            samples.append(
                TriggerSample(read_wav(manifest.parent / row.path), target, row.source_id, row.key)
            )
        return cls(samples, [stegos[i] for i in sorted(stegos)])


def group_sizes(total: int, n: int) -> list[int]:
    """Sizes of n nearly equal groups; the remainder goes to the lowest-index groups.

    >>> group_sizes(10, 4)
    [3, 3, 2, 2]
    """
    base, remainder = divmod(total, n)
    return [base + (1 if i < remainder else 0) for i in range(n)]


@dataclass
class TriggerSetBuild:
    trigger_set: TriggerSet
    mixture: list[Utterance]
    """the triggers followed by clean copies of the selected utterances with their true labels"""


def build_trigger_set(
    data: Sequence[Utterance],
    owner_clips: Sequence[AudioClip],
    key: TriggerKey,
    stegos: Sequence[StegoText],
    cfg: WatermarkConfig,
    seed: int,
    show_progress: bool = False,
) -> TriggerSetBuild:
    """Selects a seeded subset of the data, splits it into n groups and turns group i into triggers
    of owner clip i with key value k_i, labelled with stego i.
    """
    n = len(owner_clips)
    if not len(key) == len(stegos) == n:
        raise ConfigError(
            f"Expected equally many owner clips, key values and stegos, got {n}, {len(key)}, {len(stegos)}"
        )
    if cfg.trigger_set_size > len(data):
        raise ConfigError(
            f"watermark.trigger_set_size={cfg.trigger_set_size} exceeds the {len(data)} available utterances"
        )
    if n > cfg.trigger_set_size:
        raise ConfigError(f"watermark.n={n} exceeds watermark.trigger_set_size={cfg.trigger_set_size}")
    stegos_by_index = sorted(stegos, key=lambda s: s.clip_index)

    rng = np.random.default_rng(seed)
    selected = [data[i] for i in rng.choice(len(data), size=cfg.trigger_set_size, replace=False)]
    samples = []
    start = 0
    for group, size in enumerate(group_sizes(len(selected), n)):
        for utt in tqdm(
            selected[start : start + size], desc=f"Group {group}", disable=not show_progress
        ):
            trigger = synthesize_trigger(utt.audio, owner_clips[group], key[group])
            samples.append(TriggerSample(trigger.clip, stegos_by_index[group], utt.id, key[group]))
        start += size
    trigger_set = TriggerSet(samples, stegos_by_index)
    mixture = trigger_set.to_utterances() + list(selected)
    return TriggerSetBuild(trigger_set=trigger_set, mixture=mixture)
