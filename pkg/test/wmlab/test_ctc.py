import itertools
import math

import numpy as np
import pytest
import torch

from wmlab.asr.ctc import best_path, ctc_loss, ctc_loss_torch, greedy_decode, min_frames_for_target
from wmlab.asr.vocab import Vocab
from wmlab.errors import InvalidInputError


def _collapse(path: tuple[int, ...], blank: int) -> tuple[int, ...]:
    labels = []
    prev = None
    for c in path:
        if c != prev and c != blank:
            labels.append(c)
        prev = c
    return tuple(labels)


def _brute_force_probability(log_probs: np.ndarray, target: tuple[int, ...], blank: int) -> float:
    num_frames, num_classes = log_probs.shape
    total = 0.0
    for path in itertools.product(range(num_classes), repeat=num_frames):
        if _collapse(path, blank) == target:
            total += math.exp(sum(log_probs[t, c] for t, c in enumerate(path)))
    return total


def _random_log_probs(rng: np.random.Generator, num_frames: int, num_classes: int) -> np.ndarray:
    logits = rng.standard_normal((num_frames, num_classes))
    return logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))


class TestCtcLoss:
    def test_single_frame(self) -> None:
        p = 0.3
        log_probs = np.log([[p, 1 - p]])
        result = ctc_loss(log_probs, [0], blank=1)
        assert result.feasible
        assert result.loss == pytest.approx(-math.log(p), abs=1e-12)

    def test_two_frames_uniform(self) -> None:
        log_probs = np.log(np.full((2, 2), 0.5))
        assert ctc_loss(log_probs, [0], blank=1).loss == pytest.approx(-math.log(0.75), abs=1e-12)

    def test_infeasible_target(self) -> None:
        log_probs = np.log(np.full((1, 3), 1 / 3))
        result = ctc_loss(log_probs, [0, 1], blank=2)
        assert not result.feasible
        assert result.loss == math.inf
        assert np.all(result.grad == 0)

    def test_repeated_labels_need_a_separating_blank(self) -> None:
        assert min_frames_for_target([0, 0]) == 3
        log_probs = np.log(np.full((2, 2), 0.5))
        assert not ctc_loss(log_probs, [0, 0], blank=1).feasible

    def test_blank_in_target_is_rejected(self) -> None:
        with pytest.raises(InvalidInputError):
            ctc_loss(np.zeros((2, 2)), [1], blank=1)

    def test_matches_enumeration_of_alignments(self) -> None:
        rng = np.random.default_rng(0)
        for num_classes in (2, 3):
            blank = num_classes - 1
            labels = [c for c in range(num_classes) if c != blank]
            targets = [()] + [
                tuple(t) for length in (1, 2) for t in itertools.product(labels, repeat=length)
            ]
            for num_frames in range(1, 5):
                log_probs = _random_log_probs(rng, num_frames, num_classes)
                for target in targets:
                    expected = _brute_force_probability(log_probs, target, blank)
                    result = ctc_loss(log_probs, target, blank)
                    if expected == 0:
                        assert not result.feasible
                    else:
                        assert result.loss == pytest.approx(-math.log(expected), abs=1e-9)

    def test_gradient_matches_finite_differences(self) -> None:
        rng = np.random.default_rng(1)
        eps = 1e-6
        for _ in range(50):
            num_frames = int(rng.integers(2, 7))
            num_classes = int(rng.integers(2, 5))
            blank = num_classes - 1
            target = list(rng.integers(0, blank, size=int(rng.integers(1, num_frames // 2 + 2))))
            if min_frames_for_target(target) > num_frames:
                continue
            log_probs = _random_log_probs(rng, num_frames, num_classes)
            grad = ctc_loss(log_probs, target, blank).grad
            numeric = np.zeros_like(log_probs)
            for t, c in itertools.product(range(num_frames), range(num_classes)):
                plus, minus = log_probs.copy(), log_probs.copy()
                plus[t, c] += eps
                minus[t, c] -= eps
                numeric[t, c] = (
                    ctc_loss(plus, target, blank).loss - ctc_loss(minus, target, blank).loss
                ) / (2 * eps)
            np.testing.assert_allclose(grad, numeric, rtol=1e-4, atol=1e-7)

    def test_torch_bridge_backpropagates_the_gradient(self) -> None:
        rng = np.random.default_rng(2)
        log_probs_np = _random_log_probs(rng, 5, 3)
        log_probs = torch.tensor(log_probs_np, requires_grad=True)
        loss = ctc_loss_torch(log_probs, [0, 1], blank=2)
        loss.backward()
        expected = ctc_loss(log_probs_np, [0, 1], blank=2)
        assert loss.item() == pytest.approx(expected.loss)
        assert log_probs.grad is not None
        np.testing.assert_allclose(log_probs.grad.numpy(), expected.grad)


def _one_hot_log_probs(path: list[int], num_classes: int) -> np.ndarray:
    probs = np.full((len(path), num_classes), 0.01)
    probs[np.arange(len(path)), path] = 1.0
    return np.log(probs / probs.sum(axis=1, keepdims=True))


class TestGreedyDecode:
    vocab = Vocab("ab")

    @pytest.mark.parametrize(
        ("path", "expected"),
        [([0, 0, 2, 1], "ab"), ([2, 2, 2], ""), ([0, 2, 0], "aa")],
    )
    def test_collapse_rules(self, path: list[int], expected: str) -> None:
        assert greedy_decode(_one_hot_log_probs(path, 3), self.vocab) == expected

    def test_ties_go_to_the_lowest_class(self) -> None:
        assert best_path(np.log(np.full((1, 3), 1 / 3)), blank=2) == [0]

    def test_never_more_labels_than_frames(self) -> None:
        rng = np.random.default_rng(4)
        for _ in range(200):
            num_frames = int(rng.integers(1, 12))
            log_probs = _random_log_probs(rng, num_frames, 3)
            assert len(best_path(log_probs, blank=2)) <= num_frames
            assert len(greedy_decode(log_probs, self.vocab)) <= num_frames
