import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import torch
from tqdm import tqdm

from wmlab.asr.ctc import ctc_loss_torch, min_frames_for_target
from wmlab.asr.data import Utterance
from wmlab.asr.model import AsrModel, features_to_batch
from wmlab.errors import InvalidInputError, TrainingDivergedError
from wmlab.metrics import ScoreReport, score_corpus
from wmlab.types import FloatArray

log = logging.getLogger(__name__)


@dataclass
class TrainingResult:
    model: AsrModel
    loss_trace: list[float] = field(default_factory=list)
    """mean per-utterance CTC loss of each epoch"""
    skipped_utterance_ids: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class _Example:
    id: str
    features: FloatArray
    target: tuple[int, ...]


def _prepare_examples(
    model: AsrModel, data: Sequence[Utterance]
) -> tuple[list[_Example], list[str]]:
    examples, skipped = [], []
    for utt in data:
        features = model.features(utt.audio)
        target = tuple(model.vocab.encode(utt.transcript))
        if len(features) < min_frames_for_target(target):
            log.warning(
                f"Skipping utterance {utt.id}: {len(features)} frames cannot emit its {len(target)} labels"
            )
            skipped.append(utt.id)
            continue
        examples.append(_Example(utt.id, features, target))
    return examples, skipped


def train(
    model: AsrModel,
    data: Sequence[Utterance],
    epochs: int,
    lr: float,
    seed: int = 0,
    show_progress: bool = False,
) -> TrainingResult:
    """Trains a copy of the model with momentum SGD on the summed per-utterance CTC losses.

    The same loop serves initial training, watermark embedding and the fine-tuning based attacks.
    The input model is never modified.

    :param model: the model to start from
    :param data: training utterances; those too long for their frame count are skipped
    :param epochs: number of passes over the data; 0 returns an unchanged copy
    :param lr: learning rate
    :param seed: seed of the batch shuffling
    :param show_progress: whether to show a progress bar over epochs
    :return: the trained copy and the per-epoch loss trace
    """
    if not data:
        raise InvalidInputError("Cannot train on an empty dataset")
    if lr <= 0:
        raise InvalidInputError(f"Learning rate must be positive, got {lr}")
    if epochs < 0:
        raise InvalidInputError(f"Number of epochs must be non-negative, got {epochs}")

    model = model.copy()
    if epochs == 0:
        return TrainingResult(model=model)

    examples, skipped = _prepare_examples(model, data)
    if not examples:
        raise InvalidInputError("None of the utterances can be aligned to its transcript")

    hyper = model.training
    blank = model.vocab.blank_index
    params = [p for _, p in model.named_parameters()]
    optimizer = torch.optim.SGD(params, lr=lr, momentum=hyper.momentum)
    rng = np.random.default_rng(seed)

    loss_trace = []
    model.network.train()
    for epoch in tqdm(range(epochs), desc="Epoch", disable=not show_progress):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for batch_index, start in enumerate(range(0, len(order), hyper.batch_size)):
            batch_examples = [examples[i] for i in order[start : start + hyper.batch_size]]
            features, lengths = features_to_batch([ex.features for ex in batch_examples])
            log_probs = model.network(features, lengths)
            losses = [
                ctc_loss_torch(log_probs[i, : int(lengths[i])], ex.target, blank)
                for i, ex in enumerate(batch_examples)
            ]
            loss = torch.stack(losses).sum() / len(batch_examples)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"Non-finite training loss {loss.item()}",
                    epoch=epoch,
                    batch_index=batch_index,
                    utterance_ids=[ex.id for ex in batch_examples],
                )
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(params, hyper.clip_norm)
            optimizer.step()
            epoch_loss += loss.item() * len(batch_examples)
        loss_trace.append(epoch_loss / len(examples))
        log.info(f"Epoch {epoch + 1}/{epochs}: mean CTC loss {loss_trace[-1]:.4f}")
    model.network.eval()
    return TrainingResult(model=model, loss_trace=loss_trace, skipped_utterance_ids=skipped)


def train_from_scratch(
    data: Sequence[Utterance],
    init_seed: int,
    shuffle_seed: int,
    template: AsrModel | None = None,
    show_progress: bool = False,
) -> TrainingResult:
    """Creates a freshly initialized model and trains it with its own hyperparameters.

    :param template: model whose frontend, vocabulary and hyperparameters are reused; defaults apply if None
    """
    if template is None:
        model = AsrModel.create(init_seed)
    else:
        model = AsrModel.create(init_seed, template.frontend, template.vocab, template.training)
    return train(
        model,
        data,
        epochs=model.training.epochs,
        lr=model.training.lr,
        seed=shuffle_seed,
        show_progress=show_progress,
    )


def transcribe(model: AsrModel, data: Sequence[Utterance], batch_size: int = 64) -> list[str]:
    predictions: list[str] = []
    for start in range(0, len(data), batch_size):
        predictions.extend(model.predict_batch([u.audio for u in data[start : start + batch_size]]))
    return predictions


def evaluate(model: AsrModel, data: Sequence[Utterance]) -> ScoreReport:
    """Corpus-level WER and CER of the model's transcriptions against the true transcripts."""
    return score_corpus([u.transcript for u in data], transcribe(model, data))
