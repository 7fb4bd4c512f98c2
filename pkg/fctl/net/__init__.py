"""The toy detector: layers, parameters, scenes and detection loss."""

from fctl.net.detection import ObjectnessScore, detection_loss, objectness_f1
from fctl.net.scenes import Scene, synthesize_scene
from fctl.net.toynet import ARCHITECTURE, ToyNetParams, backward, forward, init_params, sgd_step

__all__ = [
    "ARCHITECTURE",
    "ObjectnessScore",
    "Scene",
    "ToyNetParams",
    "backward",
    "detection_loss",
    "forward",
    "init_params",
    "objectness_f1",
    "sgd_step",
    "synthesize_scene",
]
