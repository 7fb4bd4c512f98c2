"""Combined FCTL objective and its full-network gradient check.

``total = detection_loss(dynamic logits) + lambda_fs * eansdl_pyramid(dynamic
pyramid, ideal pyramid)``. The ideal pyramid is a constant: no gradient ever
reaches the parameters that produced it.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from fctl.core.exceptions import DomainError, GradientCheckError
from fctl.degrade.rng import Rng, derive_seed
from fctl.loss.eansdl import EansdlParams, LossBreakdown, eansdl_pyramid_arrays
from fctl.loss.gradcheck import GradCheckResult, max_relative_error
from fctl.net.detection import detection_loss
from fctl.net.toynet import ToyNetParams, backward, forward, init_params

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectiveValue:
    """Parts of one objective evaluation."""

    det_loss: float
    eansdl_term: float
    lambda_fs: float
    breakdowns: tuple[LossBreakdown, ...] = ()

    @property
    def total(self) -> float:
        return self.det_loss + self.lambda_fs * self.eansdl_term

    @property
    def attenuation(self) -> float:
        return self.breakdowns[0].attenuation if self.breakdowns else 1.0


def combined_objective(
    params: ToyNetParams,
    images: np.ndarray,
    masks: Sequence[np.ndarray],
    ideal_levels: Sequence[np.ndarray] | None = None,
    eansdl_params: EansdlParams | None = None,
    lambda_fs: float = 0.0,
    *,
    with_grad: bool = True,
) -> tuple[ObjectiveValue, ToyNetParams | None]:
    """Evaluate the objective on one batch and optionally its parameter gradients.

    Without ``ideal_levels`` the objective is detection-only. With
    ``lambda_fs == 0`` the correction term is still evaluated for reporting
    but contributes no gradient.
    """
    result = forward(params, images)
    det, grad_logits = detection_loss(result.logits, masks, with_grad=with_grad)

    eansdl_term = 0.0
    breakdowns: tuple[LossBreakdown, ...] = ()
    grad_pyramid = None
    if ideal_levels is not None:
        correcting = with_grad and lambda_fs > 0
        eansdl_term, level_breakdowns, level_grads = eansdl_pyramid_arrays(
            result.levels,
            list(ideal_levels),
            eansdl_params or EansdlParams(),
            with_grad=correcting,
        )
        breakdowns = tuple(level_breakdowns)
        if correcting and level_grads is not None:
            grad_pyramid = [lambda_fs * g for g in level_grads]

    value = ObjectiveValue(det_loss=det, eansdl_term=eansdl_term, lambda_fs=lambda_fs, breakdowns=breakdowns)
    if not with_grad:
        return value, None
    assert grad_logits is not None
    return value, backward(params, result.cache, grad_logits, grad_pyramid)


def network_gradient_check(
    params: ToyNetParams,
    images: np.ndarray,
    masks: Sequence[np.ndarray],
    ideal_levels: Sequence[np.ndarray] | None = None,
    eansdl_params: EansdlParams | None = None,
    lambda_fs: float = 0.1,
    *,
    samples: int = 200,
    eps: float = 1e-6,
    tolerance: float = 1e-3,
    seed: int = 0,
    raise_on_failure: bool = False,
) -> GradCheckResult:
    """Compare backprop gradients with central differences on sampled weights.

    Raises:
        DomainError: If eps is not positive
        GradientCheckError: If ``raise_on_failure`` and the check fails
    """
    if eps <= 0:
        raise DomainError("eps", eps, "positive")
    _, analytic = combined_objective(params, images, masks, ideal_levels, eansdl_params, lambda_fs)
    assert analytic is not None

    count = min(samples, params.num_parameters)
    picks = Rng.derived(seed, "gradcheck-weights").permutation(params.num_parameters)[:count]
    perturbed = params.copy()
    numeric = np.zeros(count)
    expected = np.zeros(count)
    for slot, flat in enumerate(picks):
        name, index = perturbed.flat_index(int(flat))
        original = perturbed.tensors[name][index]
        perturbed.tensors[name][index] = original + eps
        plus, _ = combined_objective(perturbed, images, masks, ideal_levels, eansdl_params, lambda_fs, with_grad=False)
        perturbed.tensors[name][index] = original - eps
        minus, _ = combined_objective(perturbed, images, masks, ideal_levels, eansdl_params, lambda_fs, with_grad=False)
        perturbed.tensors[name][index] = original
        numeric[slot] = (plus.total - minus.total) / (2.0 * eps)
        expected[slot] = analytic.tensors[name][index]

    result = GradCheckResult(
        max_relative_error=max_relative_error(expected, numeric),
        checked=count,
        skipped=0,
        tolerance=tolerance,
    )
    logger.info(f"Network gradient check: max relative error {result.max_relative_error:.3e} over {count} weights")
    if raise_on_failure and not result.passed:
        raise GradientCheckError(result.max_relative_error, tolerance, count)
    return result


def network_check_inputs(
    seed: int, image_size: int = 16, batch: int = 2
) -> tuple[ToyNetParams, np.ndarray, list[np.ndarray], list[np.ndarray], EansdlParams, float]:
    """Small seeded problem for :func:`network_gradient_check`.

    Returns:
        ``(params, images, masks, ideal_levels, eansdl_params, lambda_fs)``
    """
    params = init_params(derive_seed(seed, "netcheck", "dynamic"), image_size)
    ideal = init_params(derive_seed(seed, "netcheck", "ideal"), image_size)
    rng = Rng.derived(seed, "netcheck", "data")
    images = rng.uniform(batch * 3 * image_size * image_size).reshape(batch, 3, image_size, image_size)
    clean = np.clip(images + 0.1 * rng.normal(images.size).reshape(images.shape), 0.0, 1.0)
    masks = []
    for stride in (1, 2, 4):
        side = image_size // stride
        masks.append((rng.uniform(batch * side * side) < 0.1).astype(np.float64).reshape(batch, 1, side, side))
    ideal_levels = forward(ideal, clean).levels
    return params, images, masks, ideal_levels, EansdlParams(delta=0.3), 0.5
