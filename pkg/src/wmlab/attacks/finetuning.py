from collections.abc import Sequence

from wmlab.asr.data import Utterance
from wmlab.asr.model import AsrModel
from wmlab.asr.training import TrainingResult, train

DEFAULT_LR_RATIO = 0.1


def finetune_attack(
    model: AsrModel,
    clean_data: Sequence[Utterance],
    epochs: int,
    original_lr: float,
    lr_ratio: float = DEFAULT_LR_RATIO,
    seed: int = 0,
) -> TrainingResult:
    """Retrains the model on clean data at a fraction of the original learning rate."""
    return train(model, clean_data, epochs=epochs, lr=original_lr * lr_ratio, seed=seed)
