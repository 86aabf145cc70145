"""CTC forward-backward in log space, the matching torch autograd bridge, and greedy decoding.

The target is extended with blanks, ``[blank, y_1, blank, y_2, ..., y_L, blank]``; a path may skip
a blank between two labels only when those labels differ.
"""

from collections.abc import Sequence
from typing import Any, NamedTuple

import numpy as np
import torch

from wmlab.asr.vocab import Vocab
from wmlab.errors import InvalidInputError
from wmlab.types import FloatArray


class CtcResult(NamedTuple):
    loss: float
    """negative log likelihood of the target, +inf if no alignment exists"""
    grad: FloatArray
    """gradient of the loss with respect to the log probabilities, shape (frames, classes)"""
    feasible: bool


def min_frames_for_target(target: Sequence[int]) -> int:
    """Minimum number of frames that can emit the target: one per label plus one blank per repeat."""
    repeats = sum(1 for prev, cur in zip(target, target[1:], strict=False) if prev == cur)
    return len(target) + repeats


def _extend_with_blanks(target: Sequence[int], blank: int) -> np.ndarray:
    ext = np.full(2 * len(target) + 1, blank, dtype=np.int64)
    ext[1::2] = target
    return ext


def _skip_allowed(ext: np.ndarray, blank: int) -> np.ndarray:
    """skip[s] is True if state s may be entered directly from state s - 2."""
    skip = np.zeros(len(ext), dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    return skip


def ctc_loss(log_probs: FloatArray, target: Sequence[int], blank: int) -> CtcResult:
    """Negative log likelihood of `target` under per-frame log distributions and its gradient.

    :param log_probs: array of shape (frames, classes); each row a log distribution
    :param target: label indices, without blanks
    :param blank: index of the blank class
    """
    log_probs = np.asarray(log_probs, dtype=np.float64)
    if log_probs.ndim != 2 or log_probs.shape[0] == 0:
        raise InvalidInputError(f"Expected a non-empty (frames, classes) array, got {log_probs.shape}")
    num_frames, num_classes = log_probs.shape
    target = list(target)
    if any(not 0 <= c < num_classes or c == blank for c in target):
        raise InvalidInputError(f"Target contains blanks or out-of-range labels: {target}")
    if num_frames < min_frames_for_target(target):
        return CtcResult(loss=float("inf"), grad=np.zeros_like(log_probs), feasible=False)

    ext = _extend_with_blanks(target, blank)
    skip = _skip_allowed(ext, blank)
    num_states = len(ext)
    emit = log_probs[:, ext]  # (frames, states)

    alpha = np.full((num_frames, num_states), -np.inf)
    alpha[0, 0] = emit[0, 0]
    if num_states > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, num_frames):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + emit[t]

    beta = np.full((num_frames, num_states), -np.inf)
    beta[-1, -1] = emit[-1, -1]
    if num_states > 1:
        beta[-1, -2] = emit[-1, -2]
    for t in range(num_frames - 2, -1, -1):
        nxt = beta[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc + emit[t]

    final_states = alpha[-1, -2:] if num_states > 1 else alpha[-1, -1:]
    log_likelihood = float(np.logaddexp.reduce(final_states))
    if not np.isfinite(log_likelihood):
        return CtcResult(loss=float("inf"), grad=np.zeros_like(log_probs), feasible=False)

    # emission at frame t is counted in both alpha and beta
    with np.errstate(invalid="ignore"):
        log_occupancy = alpha + beta - emit - log_likelihood
    log_occupancy[np.isnan(log_occupancy)] = -np.inf
    grad = np.zeros_like(log_probs)
    np.add.at(grad.T, ext, -np.exp(log_occupancy).T)
    return CtcResult(loss=-log_likelihood, grad=grad, feasible=True)


class CtcLossFunction(torch.autograd.Function):
    """Exposes the numpy forward-backward to torch autograd for one utterance."""

    @staticmethod
    def forward(  # type: ignore[override]
        ctx: Any,
        log_probs: torch.Tensor,
        target: tuple[int, ...],
        blank: int,
    ) -> torch.Tensor:
        result = ctc_loss(log_probs.detach().cpu().numpy(), target, blank)
        ctx.grad = torch.from_numpy(result.grad).to(log_probs.dtype)
        return log_probs.new_tensor(result.loss)

    @staticmethod
    def backward(ctx: Any, grad_output: torch.Tensor) -> tuple[torch.Tensor, None, None]:  # type: ignore[override]
        return grad_output * ctx.grad, None, None


def ctc_loss_torch(log_probs: torch.Tensor, target: Sequence[int], blank: int) -> torch.Tensor:
    return CtcLossFunction.apply(log_probs, tuple(target), blank)


def best_path(log_probs: FloatArray, blank: int) -> list[int]:
    """Frame-wise argmax (lowest index wins ties), repeats collapsed and blanks removed."""
    best = np.argmax(np.asarray(log_probs), axis=1)
    labels: list[int] = []
    prev = None
    for c in best.tolist():
        if c != prev and c != blank:
            labels.append(c)
        prev = c
    return labels


def greedy_decode(log_probs: FloatArray, vocab: Vocab) -> str:
    return vocab.decode(best_path(log_probs, vocab.blank_index))
