"""Objectness loss and metric of the toy detector."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from fctl.core.exceptions import ShapeError

POSITIVE_WEIGHT = 10.0


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check_levels(logits: Sequence[np.ndarray], masks: Sequence[np.ndarray]) -> None:
    if len(logits) != len(masks):
        raise ShapeError("Logit and mask level counts differ", expected=(len(masks),), actual=(len(logits),))
    for z, y in zip(logits, masks):
        if np.shape(z) != np.shape(y):
            raise ShapeError("Logits and mask differ in shape", expected=np.shape(y), actual=np.shape(z))


def detection_loss(
    logits: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    *,
    with_grad: bool = False,
) -> tuple[float, list[np.ndarray] | None]:
    """Weighted binary cross-entropy with logits, averaged over cells and levels.

    Positive cells weigh ``POSITIVE_WEIGHT``. Each level's cells (batch
    included) are averaged first and the level means are then averaged, so
    every level carries the same share of the loss whatever its resolution.

    Returns:
        ``(loss, grads)``; grads is ``None`` unless ``with_grad``

    Raises:
        ShapeError: If the logits and masks do not line up
    """
    _check_levels(logits, masks)
    levels = sum(1 for z in logits if np.size(z))
    if levels == 0:
        return 0.0, [np.zeros(np.shape(z)) for z in logits] if with_grad else None

    loss = 0.0
    grads: list[np.ndarray] = []
    for z, y in zip(logits, masks):
        cells = int(np.size(z))
        if cells == 0:
            grads.append(np.zeros(np.shape(z)))
            continue
        scale = 1.0 / (cells * levels)
        z = np.asarray(z, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        weight = np.where(y > 0.5, POSITIVE_WEIGHT, 1.0)
        # softplus(z) - y*z, stable for large |z|
        bce = np.logaddexp(0.0, z) - y * z
        loss += float(np.sum(weight * bce, dtype=np.float64)) * scale
        if with_grad:
            grads.append(weight * (sigmoid(z) - y) * scale)
    return loss, grads if with_grad else None


@dataclass(frozen=True)
class ObjectnessScore:
    """Cell-level detection counts and derived rates."""

    true_positives: int
    false_positives: int
    false_negatives: int

    @property
    def precision(self) -> float:
        predicted = self.true_positives + self.false_positives
        return self.true_positives / predicted if predicted else 0.0

    @property
    def recall(self) -> float:
        actual = self.true_positives + self.false_negatives
        return self.true_positives / actual if actual else 0.0

    @property
    def f1(self) -> float:
        if self.true_positives == 0:
            return 0.0
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r)

    def __add__(self, other: "ObjectnessScore") -> "ObjectnessScore":
        return ObjectnessScore(
            self.true_positives + other.true_positives,
            self.false_positives + other.false_positives,
            self.false_negatives + other.false_negatives,
        )


def objectness_f1(
    logits: Sequence[np.ndarray], masks: Sequence[np.ndarray], threshold: float = 0.5
) -> ObjectnessScore:
    """Count cells whose probability exceeds ``threshold`` against the masks."""
    _check_levels(logits, masks)
    tp = fp = fn = 0
    for z, y in zip(logits, masks):
        predicted = sigmoid(np.asarray(z, dtype=np.float64)) > threshold
        actual = np.asarray(y) > 0.5
        tp += int(np.sum(predicted & actual))
        fp += int(np.sum(predicted & ~actual))
        fn += int(np.sum(~predicted & actual))
    return ObjectnessScore(tp, fp, fn)
