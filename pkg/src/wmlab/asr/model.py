import copy
import hashlib
import logging
import struct
from collections.abc import Sequence
from pathlib import Path
from typing import Self

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from wmlab.asr.ctc import greedy_decode
from wmlab.asr.features import FrontendConfig, extract_features
from wmlab.asr.hyperparams import AsrTrainingConfig
from wmlab.asr.vocab import Vocab
from wmlab.audio import AudioClip, PredictFn
from wmlab.errors import CheckpointFormatError
from wmlab.schemas import CheckpointHeaderSchema, ParameterSpecSchema
from wmlab.types import FloatArray, PathLike

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"WMLABASR"
CHECKPOINT_VERSION = 1
_HEADER_STRUCT = struct.Struct("<II")
_HASH_LEN = hashlib.sha256().digest_size


class AcousticNetwork(nn.Module):
    """One unidirectional GRU layer followed by an affine layer over characters plus blank."""

    def __init__(self, num_features: int, hidden_size: int, num_classes: int):
        super().__init__()
        self.rnn = nn.GRU(num_features, hidden_size, num_layers=1, batch_first=True)
        self.output = nn.Linear(hidden_size, num_classes)

    def forward(self, features: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """:param features: padded batch of shape (batch, frames, features)
        :param lengths: number of valid frames per batch element
        :return: log probabilities of shape (batch, frames, classes); padded frames are meaningless
        """
        packed = pack_padded_sequence(features, lengths, batch_first=True, enforce_sorted=False)
        hidden, _ = self.rnn(packed)
        hidden, _ = pad_packed_sequence(hidden, batch_first=True, total_length=features.shape[1])
        return torch.log_softmax(self.output(hidden), dim=-1)


def features_to_batch(
    feature_list: Sequence[FloatArray],
) -> tuple[torch.Tensor, torch.Tensor]:
    lengths = torch.tensor([len(f) for f in feature_list], dtype=torch.int64)
    batch = torch.zeros(
        len(feature_list), int(lengths.max()), feature_list[0].shape[1], dtype=torch.float64
    )
    for i, f in enumerate(feature_list):
        batch[i, : len(f)] = torch.from_numpy(f)
    return batch, lengths


class AsrModel:
    """A small CTC recognizer: frontend configuration, vocabulary and network weights."""

    def __init__(
        self,
        frontend: FrontendConfig,
        vocab: Vocab,
        training: AsrTrainingConfig,
        network: AcousticNetwork,
        seed: int,
    ):
        self.frontend = frontend
        self.vocab = vocab
        self.training = training
        self.network = network.double()
        self.seed = seed

    @classmethod
    def create(
        cls,
        seed: int,
        frontend: FrontendConfig | None = None,
        vocab: Vocab | None = None,
        training: AsrTrainingConfig | None = None,
    ) -> Self:
        """Creates an untrained model whose initial weights depend only on the seed."""
        frontend = frontend or FrontendConfig()
        vocab = vocab or Vocab()
        training = training or AsrTrainingConfig()
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            network = AcousticNetwork(frontend.num_filters, training.hidden_size, vocab.num_classes)
        return cls(frontend, vocab, training, network, seed)

    def copy(self) -> Self:
        return copy.deepcopy(self)

    def features(self, clip: AudioClip) -> FloatArray:
        return extract_features(clip, self.frontend)

    def log_probs_batch(self, clips: Sequence[AudioClip]) -> list[FloatArray]:
        """Per-clip log probability matrices of shape (frames, classes)."""
        feature_list = [self.features(c) for c in clips]
        batch, lengths = features_to_batch(feature_list)
        self.network.eval()
        with torch.no_grad():
            out = self.network(batch, lengths)
        return [out[i, : int(n)].numpy() for i, n in enumerate(lengths)]

    def log_probs(self, clip: AudioClip) -> FloatArray:
        return self.log_probs_batch([clip])[0]

    def predict(self, clip: AudioClip) -> str:
        """Transcribes a clip: features, forward pass, greedy decoding."""
        return greedy_decode(self.log_probs(clip), self.vocab)

    def predict_batch(self, clips: Sequence[AudioClip]) -> list[str]:
        return [greedy_decode(lp, self.vocab) for lp in self.log_probs_batch(clips)]

    def as_predict_fn(self) -> PredictFn:
        """The black-box view of the model: audio in, text out."""
        return self.predict

    def named_parameters(self) -> list[tuple[str, torch.Tensor]]:
        return list(self.network.named_parameters())

    def parameter_arrays(self) -> dict[str, FloatArray]:
        return {name: p.detach().numpy().copy() for name, p in self.named_parameters()}

    def has_same_weights(self, other: "AsrModel") -> bool:
        mine, theirs = self.parameter_arrays(), other.parameter_arrays()
        return mine.keys() == theirs.keys() and all(
            np.array_equal(mine[k], theirs[k]) for k in mine
        )

    def to_bytes(self) -> bytes:
        # name order, independent of the order in which parameters were (re-)registered
        params = sorted(self.named_parameters(), key=lambda item: item[0])
        header = CheckpointHeaderSchema(
            frontend=self.frontend,
            characters=self.vocab.characters,
            blank_index=self.vocab.blank_index,
            training=self.training,
            seed=self.seed,
            parameters=[ParameterSpecSchema(name=n, shape=list(p.shape)) for n, p in params],
        )
        header_bytes = header.model_dump_json().encode("utf-8")
        parts = [
            CHECKPOINT_MAGIC,
            _HEADER_STRUCT.pack(CHECKPOINT_VERSION, len(header_bytes)),
            header_bytes,
            *(p.detach().numpy().astype("<f8").tobytes(order="C") for _, p in params),
        ]
        body = b"".join(parts)
        return body + hashlib.sha256(body).digest()

    @classmethod
    def from_bytes(cls, data: bytes) -> Self:
        if len(data) < len(CHECKPOINT_MAGIC) + _HEADER_STRUCT.size + _HASH_LEN:
            raise CheckpointFormatError("Checkpoint is truncated")
        if not data.startswith(CHECKPOINT_MAGIC):
            raise CheckpointFormatError("Not an ASR checkpoint (bad magic bytes)")
        body, digest = data[:-_HASH_LEN], data[-_HASH_LEN:]
        if hashlib.sha256(body).digest() != digest:
            raise CheckpointFormatError("Checkpoint content hash does not match")
        offset = len(CHECKPOINT_MAGIC)
        version, header_len = _HEADER_STRUCT.unpack_from(body, offset)
        if version != CHECKPOINT_VERSION:
            raise CheckpointFormatError(f"Unsupported checkpoint version {version}")
        offset += _HEADER_STRUCT.size
        header = CheckpointHeaderSchema.model_validate_json(body[offset : offset + header_len])
        offset += header_len

        vocab = Vocab(header.characters)
        if vocab.blank_index != header.blank_index:
            raise CheckpointFormatError(
                f"Blank index {header.blank_index} inconsistent with vocabulary of size {len(vocab.characters)}"
            )
        network = AcousticNetwork(
            header.frontend.num_filters, header.training.hidden_size, vocab.num_classes
        ).double()
        state = {}
        for spec in header.parameters:
            end = offset + 8 * spec.size
            if end > len(body):
                raise CheckpointFormatError(f"Parameter data of '{spec.name}' is truncated")
            values = np.frombuffer(body, dtype="<f8", count=spec.size, offset=offset)
            state[spec.name] = torch.from_numpy(values.reshape(spec.shape).astype(np.float64))
            offset = end
        if offset != len(body):
            raise CheckpointFormatError("Trailing data after the last parameter")
        try:
            network.load_state_dict(state, strict=True)
        except RuntimeError as e:
            raise CheckpointFormatError(f"Parameters do not match the architecture: {e}") from e
        return cls(header.frontend, vocab, header.training, network, header.seed)

    def save(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        log.info(f"Saved ASR checkpoint to {path}")
        return path

    @classmethod
    def load(cls, path: PathLike) -> Self:
        return cls.from_bytes(Path(path).read_bytes())

