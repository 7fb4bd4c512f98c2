"""Training configuration and the key=value config file loader.

A config file holds one ``key=value`` per line. Blank lines and lines
starting with ``#`` are ignored; nested models use dotted keys::

    epochs=20
    lambda_fs=0.1
    eansdl.alpha=3.0
    degrade.kind=fog
    degrade.intensity=0.6
    degrade_constants.fog_airlight=0.9

Values are validated by :class:`TrainConfig`. Precedence is command-line
flags over file values over defaults.
"""

import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from fctl.core.exceptions import ConfigurationError
from fctl.degrade.rng import MASK64
from fctl.degrade.transforms import DegradeConstants, DegradeSpec
from fctl.loss.eansdl import EansdlParams

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """Hyperparameters of one FCTL run (desk-scale defaults).

    Attributes:
        epochs: Passes over the training split
        lr: SGD learning rate
        batch_size: Scenes per step
        lambda_fs: Weight of the feature-correction loss next to detection
        eansdl: Loss hyperparameters; ``delta`` is set per epoch by the trainer
        seed: Root seed of scenes, split, init and batch order
        dataset_size: Number of synthesized scenes
        image_size: Scene side length, 64 or 128
        degrade: Degradation applied to produce the non-ideal images
        degrade_constants: Synthesizer constants
        eval_fraction: Share of scenes held out for evaluation
        mixed_intensity: Give each scene one of seven intensity levels up to
            ``degrade.intensity``
        warm_start: Start baseline and dynamic models as a copy of the ideal
            model; off gives them a fresh seeded init
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    epochs: int = Field(20, ge=0)
    lr: float = Field(0.005, ge=0)
    batch_size: int = Field(8, ge=1)
    lambda_fs: float = Field(0.1, ge=0)
    eansdl: EansdlParams = EansdlParams()
    seed: int = Field(0, ge=0, le=MASK64)
    dataset_size: int = Field(200, ge=2)
    image_size: int = 64
    degrade: DegradeSpec = DegradeSpec()
    degrade_constants: DegradeConstants = DegradeConstants()
    eval_fraction: float = Field(0.2, gt=0, lt=1)
    mixed_intensity: bool = False
    warm_start: bool = True

    @model_validator(mode="after")
    def _check_split(self) -> "TrainConfig":
        if self.image_size not in (64, 128):
            raise ValueError("image_size must be 64 or 128")
        if self.eval_count < 1 or self.train_count < 1:
            raise ValueError("dataset_size and eval_fraction leave an empty split")
        return self

    @property
    def eval_count(self) -> int:
        return max(1, int(self.dataset_size * self.eval_fraction + 0.5))

    @property
    def train_count(self) -> int:
        return self.dataset_size - self.eval_count

    def with_overrides(self, **values: Any) -> "TrainConfig":
        """Return a validated copy with nested dotted or plain overrides."""
        return build_config(self.model_dump(), flatten(values))


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key=value`` lines into a flat dict.

    Raises:
        ConfigurationError: If a non-comment line has no ``=``
    """
    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"Expected key=value at {source}:{number}: {raw!r}")
        values[key.strip()] = value.strip()
    return values


def load_config_file(path: str | Path) -> dict[str, str]:
    """Read a key=value config file."""
    path = Path(path)
    values = parse_config_text(path.read_text(encoding="utf-8"), source=str(path))
    logger.debug(f"Read {len(values)} config values from {path}")
    return values


def flatten(values: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    """Flatten nested mappings into dotted keys."""
    flat: dict[str, Any] = {}
    for key, value in values.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten(value, f"{name}."))
        elif isinstance(value, BaseModel):
            flat.update(flatten(value.model_dump(), f"{name}."))
        else:
            flat[name] = value
    return flat


def _nest(flat: Mapping[str, Any]) -> dict[str, Any]:
    """Turn dotted keys into nested dicts, rejecting unknown names."""
    nested: dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.split(".")
        model: type[BaseModel] = TrainConfig
        target = nested
        for depth, part in enumerate(parts):
            field = model.model_fields.get(part)
            if field is None:
                raise ConfigurationError(key=key)
            last = depth == len(parts) - 1
            annotation = field.annotation
            is_model = isinstance(annotation, type) and issubclass(annotation, BaseModel)
            if last:
                if is_model and not isinstance(value, (Mapping, BaseModel)):
                    raise ConfigurationError(f"Key {key} names a group; set one of its fields", key=key)
                target[part] = value
            else:
                if not is_model:
                    raise ConfigurationError(key=key)
                assert isinstance(annotation, type)
                model = annotation
                target = target.setdefault(part, {})
    return nested


def build_config(*layers: Mapping[str, Any] | None) -> TrainConfig:
    """Merge flat or nested value layers (later layers win) into a config.

    Example:
        >>> cfg = build_config({"epochs": "2"}, {"degrade.kind": "rain"})
        >>> cfg.epochs, cfg.degrade.kind.value
        (2, 'rain')

    Raises:
        ConfigurationError: On unknown keys or invalid values
    """
    merged: dict[str, Any] = {}
    for layer in layers:
        if layer:
            merged.update(flatten(layer))
    try:
        return TrainConfig.model_validate(_nest(merged))
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigurationError(f"Invalid configuration: {problems}") from exc


def load_train_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> TrainConfig:
    """Defaults, then ``path`` (if any), then ``overrides``."""
    file_values = load_config_file(path) if path is not None else None
    return build_config(file_values, overrides)
