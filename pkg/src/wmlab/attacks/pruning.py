import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn.utils import prune as torch_prune

from wmlab.asr.data import Utterance
from wmlab.asr.model import AsrModel
from wmlab.asr.training import train
from wmlab.errors import InvalidInputError

log = logging.getLogger(__name__)

PRUNABLE_PARAMETERS = ("rnn.weight_ih_l0", "output.weight")
"""the affine maps of the network: the recurrent layer's input projection and the output layer"""


def magnitude_prune_mask(weights: np.ndarray, sparsity: float) -> np.ndarray:
    """Binary mask zeroing the floor(sparsity * size) smallest-magnitude weights.

    Ties at the cutoff are broken by flat index order.
    """
    if not 0 <= sparsity < 1:
        raise InvalidInputError(f"Sparsity must be in [0, 1), got {sparsity}")
    flat = np.abs(np.asarray(weights, dtype=np.float64)).reshape(-1)
    count = int(np.floor(sparsity * flat.size))
    mask = np.ones(flat.size, dtype=np.float64)
    mask[np.argsort(flat, kind="stable")[:count]] = 0.0
    return mask.reshape(np.shape(weights))


@dataclass
class PruneResult:
    model: AsrModel
    masks: dict[str, torch.Tensor]

    def num_zeroed(self) -> dict[str, int]:
        return {name: int((mask == 0).sum()) for name, mask in self.masks.items()}


def _owning_module(model: AsrModel, parameter_name: str) -> tuple[nn.Module, str]:
    module_name, attr = parameter_name.rsplit(".", 1)
    return model.network.get_submodule(module_name), attr


def _attach_masks(model: AsrModel, masks: Mapping[str, torch.Tensor]) -> None:
    # under no_grad the masked weights stay graph leaves, which deepcopy requires
    with torch.no_grad():
        for name, mask in masks.items():
            torch_prune.custom_from_mask(*_owning_module(model, name), mask=mask)


def _make_permanent(model: AsrModel, masks: Mapping[str, torch.Tensor]) -> None:
    for name in masks:
        torch_prune.remove(*_owning_module(model, name))


def _magnitude_masks(
    model: AsrModel, sparsity: float, parameter_names: Sequence[str]
) -> dict[str, torch.Tensor]:
    params = dict(model.named_parameters())
    return {
        name: torch.from_numpy(magnitude_prune_mask(params[name].detach().numpy(), sparsity))
        for name in parameter_names
    }


def prune(
    model: AsrModel,
    sparsity: float,
    parameter_names: Sequence[str] = PRUNABLE_PARAMETERS,
) -> PruneResult:
    """Zeroes the smallest-magnitude weights of the given parameters in a copy of the model."""
    masks = _magnitude_masks(model, sparsity, parameter_names)
    model = model.copy()
    _attach_masks(model, masks)
    _make_permanent(model, masks)
    return PruneResult(model, masks)


def prune_attack(
    model: AsrModel,
    sparsity: float,
    recover_data: Sequence[Utterance],
    epochs: int = 3,
    lr: float | None = None,
    seed: int = 0,
    parameter_names: Sequence[str] = PRUNABLE_PARAMETERS,
) -> PruneResult:
    """Magnitude pruning followed by sparse recovery fine-tuning on the attacker's clean data.

    During recovery the masks stay attached as a pruning reparametrization, so the pruned weights
    receive no updates. The returned model holds plain weights.

    :param lr: recovery learning rate; the model's own learning rate if None
    """
    masks = _magnitude_masks(model, sparsity, parameter_names)
    masked = model.copy()
    _attach_masks(masked, masks)
    log.info(f"Pruned {PruneResult(masked, masks).num_zeroed()} weights at sparsity {sparsity}")
    if epochs > 0:
        masked = train(
            masked,
            recover_data,
            epochs=epochs,
            lr=lr if lr is not None else model.training.lr,
            seed=seed,
        ).model
    _make_permanent(masked, masks)
    return PruneResult(masked, masks)
