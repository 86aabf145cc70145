import logging
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

from wmlab.asr.vocab import normalize_text
from wmlab.audio import AudioClip, read_wav, write_wav
from wmlab.errors import InvalidInputError, MissingArtifactError
from wmlab.schemas import ManifestRowSchema, read_manifest_lines
from wmlab.types import PathLike

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Utterance:
    id: str
    audio: AudioClip
    transcript: str

    def __post_init__(self) -> None:
        if not self.transcript:
            raise InvalidInputError(f"Utterance {self.id} has an empty transcript")
        if normalize_text(self.transcript) != self.transcript:
            raise InvalidInputError(
                f"Transcript of {self.id} is not normalized: '{self.transcript}'"
            )


def write_manifest(
    utterances: Iterable[Utterance],
    manifest_path: PathLike,
    audio_subdir: str = "wav",
) -> Path:
    """Writes the audio of each utterance as WAV next to the manifest and the manifest itself.

    :return: the manifest path
    """
    manifest_path = Path(manifest_path)
    base_dir = manifest_path.parent
    lines = []
    for utt in utterances:
        relative = Path(audio_subdir) / f"{utt.id}.wav"
        write_wav(utt.audio, base_dir / relative)
        row = ManifestRowSchema(path=relative.as_posix(), transcript=utt.transcript)
        lines.append(row.to_line())
    manifest_path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    log.info(f"Wrote manifest with {len(lines)} utterances to {manifest_path}")
    return manifest_path


def read_manifest(manifest_path: PathLike) -> list[Utterance]:
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise MissingArtifactError(f"Manifest {manifest_path} does not exist")
    result = []
    for line in read_manifest_lines(manifest_path):
        row = ManifestRowSchema.from_line(line)
        audio_path = manifest_path.parent / row.path
        result.append(
            Utterance(id=Path(row.path).stem, audio=read_wav(audio_path), transcript=row.transcript)
        )
    return result
