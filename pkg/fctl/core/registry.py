"""Registry for degradation synthesizers."""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from fctl.core.tensor import ImageRGB

logger = logging.getLogger(__name__)

Degrader = Callable[..., "ImageRGB"]


@dataclass
class DegraderMetadata:
    """Metadata for registered degraders."""

    kind: str
    func: Degrader
    uses_intensity: bool = True
    uses_seed: bool = False


# Global registry, keyed by degradation kind value ("fog", "rain", ...)
_degrader_registry: dict[str, DegraderMetadata] = {}


def register_degrader(
    kind: str, *, uses_intensity: bool = True, uses_seed: bool = False
) -> Callable[[Degrader], Degrader]:
    """Register a synthesizer for one degradation kind.

    Args:
        kind: The kind value the synthesizer handles
        uses_intensity: Whether the synthesizer takes an ``intensity`` argument
        uses_seed: Whether the synthesizer takes a ``seed`` argument

    Returns:
        Decorator returning the function unchanged
    """

    def decorator(func: Degrader) -> Degrader:
        if kind in _degrader_registry:
            logger.debug(f"Re-registering degrader for kind '{kind}'")
        _degrader_registry[kind] = DegraderMetadata(
            kind=kind, func=func, uses_intensity=uses_intensity, uses_seed=uses_seed
        )
        logger.debug(f"Registered degrader: {kind} -> {func.__name__}")
        return func

    return decorator


def get_degrader(kind: str) -> DegraderMetadata:
    """Look up the synthesizer registered for ``kind``.

    Raises:
        KeyError: If no synthesizer is registered for the kind
    """
    return _degrader_registry[kind]


def get_all_degraders() -> dict[str, DegraderMetadata]:
    """Return a copy of the registry."""
    return dict(_degrader_registry)


def call_degrader(kind: str, image: "ImageRGB", intensity: float, seed: int, **kwargs: Any) -> "ImageRGB":
    """Dispatch to the registered synthesizer, passing only the arguments it takes."""
    meta = get_degrader(kind)
    call_kwargs: dict[str, Any] = dict(kwargs)
    if meta.uses_intensity:
        call_kwargs["intensity"] = intensity
    if meta.uses_seed:
        call_kwargs["seed"] = seed
    return meta.func(image, **call_kwargs)
