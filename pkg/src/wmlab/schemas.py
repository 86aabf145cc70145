from pathlib import Path
from typing import Self

from pydantic import BaseModel, ConfigDict

from wmlab.asr.features import FrontendConfig
from wmlab.asr.hyperparams import AsrTrainingConfig
from wmlab.types import PathLike


class ParameterSpecSchema(BaseModel):
    name: str
    shape: list[int]

    @property
    def size(self) -> int:
        size = 1
        for dim in self.shape:
            size *= dim
        return size


class CheckpointHeaderSchema(BaseModel):
    """JSON header of an ASR checkpoint. Parameter data follows in the order of `parameters`."""

    model_config = ConfigDict(extra="forbid")

    frontend: FrontendConfig
    characters: str
    blank_index: int
    training: AsrTrainingConfig
    seed: int
    parameters: list[ParameterSpecSchema]


class ManifestRowSchema(BaseModel):
    path: str
    """path of the WAV file, relative to the manifest's directory"""
    transcript: str

    def to_line(self) -> str:
        return f"{self.path}\t{self.transcript}"

    @classmethod
    def from_line(cls, line: str) -> Self:
        path, transcript = line.rstrip("\n").split("\t", 1)
        return cls(path=path, transcript=transcript)


class TriggerManifestRowSchema(ManifestRowSchema):
    source_id: str
    clip_index: int
    key: float

    def to_line(self) -> str:
        return "\t".join(
            [self.path, self.transcript, self.source_id, str(self.clip_index), repr(self.key)]
        )

    @classmethod
    def from_line(cls, line: str) -> Self:
        path, transcript, source_id, clip_index, key = line.rstrip("\n").split("\t")
        return cls(
            path=path,
            transcript=transcript,
            source_id=source_id,
            clip_index=int(clip_index),
            key=float(key),
        )


TRIGGER_MANIFEST_COLUMNS = ("path", "target", "source_id", "clip_index", "key")


def read_manifest_lines(path: PathLike) -> list[str]:
    """Non-empty lines of a UTF-8 manifest, skipping a header line starting with '#'."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line for line in lines if line and not line.startswith("#")]
