"""The FCTL protocol: ideal pretraining, corrected training and the baseline.

All three trainers share one pipeline. Scenes, the train/eval split, the
per-epoch batch order and the dynamic init all derive from ``cfg.seed``, so
``train_fctl`` with ``lambda_fs == 0`` runs exactly the steps of
``train_baseline``.
"""

import csv
import logging
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from fctl.core.tensor import ImageRGB, images_to_batch
from fctl.degrade.rng import Rng, derive_seed
from fctl.degrade.transforms import DegradeSpec, degrade_image, spec_for_image
from fctl.loss.eansdl import attenuation
from fctl.net.detection import ObjectnessScore, detection_loss, objectness_f1
from fctl.net.scenes import Scene, stack_masks, synthesize_scene
from fctl.net.toynet import ToyNetParams, forward, init_params, sgd_step
from fctl.training.config import TrainConfig
from fctl.training.objective import combined_objective

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ("epoch", "det_loss", "eansdl_term", "attenuation")


@dataclass(frozen=True)
class SceneDataset:
    """Deterministic train/eval split of synthesized scenes."""

    train: tuple[Scene, ...]
    eval: tuple[Scene, ...]


@dataclass(frozen=True)
class DegradedScene:
    """A non-ideal image and the id of the scene it was rendered from."""

    scene_id: int
    image: ImageRGB


@dataclass(frozen=True)
class StepRecord:
    """Instrumentation of one optimizer step.

    ``non_ideal_inputs`` is the ``(N, 3, W, H)`` batch the dynamic model was
    fed, in the order of ``non_ideal_scene_ids``.
    """

    epoch: int
    step: int
    ideal_scene_ids: tuple[int, ...]
    non_ideal_scene_ids: tuple[int, ...]
    delta: float
    attenuation: float
    det_loss: float
    eansdl_term: float
    total: float
    non_ideal_inputs: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class EpochRecord:
    """Per-epoch means of the step losses."""

    epoch: int
    det_loss: float
    eansdl_term: float
    attenuation: float


@dataclass
class TrainResult:
    """Trained parameters and the recorded loss trajectory."""

    params: ToyNetParams
    curve: list[EpochRecord] = field(default_factory=list)


@dataclass(frozen=True)
class EvalMetrics:
    """Held-out detection loss and objectness counts."""

    det_loss: float
    score: ObjectnessScore
    scenes: int

    @property
    def f1(self) -> float:
        return self.score.f1

    @property
    def precision(self) -> float:
        return self.score.precision

    @property
    def recall(self) -> float:
        return self.score.recall


StepHook = Callable[[StepRecord], None]
Predictor = Callable[[list[Scene], np.ndarray], list[np.ndarray]]


def build_dataset(cfg: TrainConfig) -> SceneDataset:
    """Synthesize ``cfg.dataset_size`` scenes and split them by a seeded shuffle."""
    scenes = [
        replace(synthesize_scene(derive_seed(cfg.seed, "scene", i), cfg.image_size), scene_id=i)
        for i in range(cfg.dataset_size)
    ]
    order = Rng.derived(cfg.seed, "split").permutation(cfg.dataset_size)
    train = tuple(scenes[int(i)] for i in order[: cfg.train_count])
    held_out = tuple(scenes[int(i)] for i in order[cfg.train_count :])
    return SceneDataset(train=train, eval=held_out)


def degraded_images(
    scenes: Sequence[Scene], spec: DegradeSpec, cfg: TrainConfig
) -> dict[int, DegradedScene]:
    """Non-ideal counterpart of every scene, keyed by scene id."""
    return {
        scene.scene_id: DegradedScene(
            scene_id=scene.scene_id,
            image=degrade_image(
                scene.image,
                spec_for_image(spec, scene.scene_id, mixed_intensity=cfg.mixed_intensity),
                cfg.degrade_constants,
            ),
        )
        for scene in scenes
    }


def initial_dynamic_params(cfg: TrainConfig, theta_ideal: ToyNetParams | None = None) -> ToyNetParams:
    """Start point shared by the baseline and the corrected model."""
    if cfg.warm_start and theta_ideal is not None:
        return theta_ideal.copy()
    return init_params(derive_seed(cfg.seed, "init", "dynamic"), cfg.image_size)


def _batches(cfg: TrainConfig, scenes: Sequence[Scene], epoch: int) -> Iterator[list[Scene]]:
    order = Rng.derived(cfg.seed, "order", epoch).permutation(len(scenes))
    for start in range(0, len(scenes), cfg.batch_size):
        yield [scenes[int(i)] for i in order[start : start + cfg.batch_size]]


def _delta_checkpoints(epochs: int) -> set[int]:
    return {0, epochs // 2, epochs - 1}


def _run(
    params: ToyNetParams,
    cfg: TrainConfig,
    scenes: Sequence[Scene],
    inputs: dict[int, DegradedScene] | None,
    *,
    label: str,
    theta_ideal: ToyNetParams | None = None,
    hook: StepHook | None = None,
) -> TrainResult:
    """SGD over ``cfg.epochs``; ``inputs`` replaces the clean images when given."""
    curve: list[EpochRecord] = []
    lambda_fs = cfg.lambda_fs if theta_ideal is not None else 0.0
    checkpoints = _delta_checkpoints(cfg.epochs)

    for epoch in range(cfg.epochs):
        delta = epoch / cfg.epochs
        eansdl_params = cfg.eansdl.model_copy(update={"lambda_fs": cfg.lambda_fs}).at_delta(delta)
        att = attenuation(delta, eansdl_params.alpha, eansdl_params.beta)
        if theta_ideal is not None and epoch in checkpoints:
            logger.info(f"[{label}] epoch {epoch}: delta={delta!r} attenuation={att!r}")

        det_sum = eansdl_sum = 0.0
        steps = 0
        for step, batch in enumerate(_batches(cfg, scenes, epoch)):
            ideal_batch = images_to_batch([scene.image for scene in batch])
            if inputs is None:
                batch_inputs = ideal_batch
                input_ids = tuple(scene.scene_id for scene in batch)
            else:
                fed = [inputs[scene.scene_id] for scene in batch]
                batch_inputs = images_to_batch([record.image for record in fed])
                input_ids = tuple(record.scene_id for record in fed)
            masks = stack_masks(batch)

            ideal_levels = None
            if theta_ideal is not None:
                ideal_levels = forward(theta_ideal, ideal_batch).levels

            value, grads = combined_objective(
                params, batch_inputs, masks, ideal_levels, eansdl_params, lambda_fs
            )
            assert grads is not None
            params = sgd_step(params, grads, cfg.lr)

            det_sum += value.det_loss
            eansdl_sum += value.eansdl_term
            steps += 1
            if hook is not None:
                hook(
                    StepRecord(
                        epoch=epoch,
                        step=step,
                        ideal_scene_ids=tuple(scene.scene_id for scene in batch),
                        non_ideal_scene_ids=input_ids,
                        delta=delta,
                        attenuation=att,
                        det_loss=value.det_loss,
                        eansdl_term=value.eansdl_term,
                        total=value.total,
                        non_ideal_inputs=batch_inputs,
                    )
                )

        record = EpochRecord(
            epoch=epoch,
            det_loss=det_sum / max(steps, 1),
            eansdl_term=eansdl_sum / max(steps, 1),
            attenuation=att if theta_ideal is not None else 1.0,
        )
        curve.append(record)
        logger.info(
            f"[{label}] epoch {epoch + 1}/{cfg.epochs}: det_loss={record.det_loss:.6f} "
            f"eansdl={record.eansdl_term:.6f} attenuation={record.attenuation:.6f}"
        )
    return TrainResult(params=params, curve=curve)


def train_ideal(
    cfg: TrainConfig, *, dataset: SceneDataset | None = None, hook: StepHook | None = None
) -> TrainResult:
    """Detection-only training on clean images; the result is the static backbone."""
    dataset = dataset or build_dataset(cfg)
    params = init_params(derive_seed(cfg.seed, "init", "ideal"), cfg.image_size)
    return _run(params, cfg, dataset.train, None, label="ideal", hook=hook)


def train_baseline(
    cfg: TrainConfig,
    theta_ideal: ToyNetParams | None = None,
    *,
    dataset: SceneDataset | None = None,
    hook: StepHook | None = None,
) -> TrainResult:
    """Detection-only training on degraded images.

    ``theta_ideal`` only matters with ``cfg.warm_start``, where it is the start point.
    """
    dataset = dataset or build_dataset(cfg)
    inputs = degraded_images(dataset.train, cfg.degrade, cfg)
    params = initial_dynamic_params(cfg, theta_ideal)
    return _run(params, cfg, dataset.train, inputs, label="baseline", hook=hook)


def train_fctl(
    theta_ideal: ToyNetParams,
    cfg: TrainConfig,
    *,
    dataset: SceneDataset | None = None,
    hook: StepHook | None = None,
) -> TrainResult:
    """Train the dynamic model on degraded images, corrected toward the frozen ideal pyramid.

    Each step pairs a degraded batch with the clean images of the same
    scenes; the clean images go through ``theta_ideal`` only to provide the
    target pyramid. ``theta_ideal`` is never updated.

    Raises:
        ShapeError: If ``theta_ideal`` does not fit the configured image size
    """
    dataset = dataset or build_dataset(cfg)
    inputs = degraded_images(dataset.train, cfg.degrade, cfg)
    params = initial_dynamic_params(cfg, theta_ideal)
    return _run(params, cfg, dataset.train, inputs, label="fctl", theta_ideal=theta_ideal, hook=hook)


def evaluate(
    params: ToyNetParams,
    degrade: DegradeSpec | None,
    cfg: TrainConfig,
    *,
    dataset: SceneDataset | None = None,
    predictor: Predictor | None = None,
) -> EvalMetrics:
    """Mean detection loss and objectness F1 on the held-out scenes.

    Args:
        params: Model to evaluate
        degrade: Degradation of the held-out images, or None for clean images
        cfg: Config that defines the split
        dataset: Pre-built dataset for ``cfg``
        predictor: Replaces the model's logits, e.g. with oracle logits
    """
    dataset = dataset or build_dataset(cfg)
    scenes = list(dataset.eval)
    inputs = degraded_images(scenes, degrade, cfg) if degrade is not None else None

    loss_sum = 0.0
    score = ObjectnessScore(0, 0, 0)
    for start in range(0, len(scenes), cfg.batch_size):
        batch = scenes[start : start + cfg.batch_size]
        if inputs is None:
            images = images_to_batch([scene.image for scene in batch])
        else:
            images = images_to_batch([inputs[scene.scene_id].image for scene in batch])
        masks = stack_masks(batch)
        logits = predictor(batch, images) if predictor else forward(params, images).logits
        loss, _ = detection_loss(logits, masks)
        loss_sum += loss * len(batch)
        score = score + objectness_f1(logits, masks)

    metrics = EvalMetrics(det_loss=loss_sum / len(scenes), score=score, scenes=len(scenes))
    logger.debug(f"Evaluated {len(scenes)} scenes: det_loss={metrics.det_loss:.6f} f1={metrics.f1:.4f}")
    return metrics


def write_curves_csv(curve: Sequence[EpochRecord], path: str | Path) -> Path:
    """Write ``epoch,det_loss,eansdl_term,attenuation`` rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CURVE_COLUMNS)
        for record in curve:
            writer.writerow([record.epoch, repr(record.det_loss), repr(record.eansdl_term), repr(record.attenuation)])
    logger.debug(f"Wrote {len(curve)} curve rows to {path}")
    return path
