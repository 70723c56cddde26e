"""Learnable components: layers, EdgeConv, the projection gate and the classifier."""

from .checkpoint import load_checkpoint, save_checkpoint
from .edgeconv import EdgeConv
from .gradcheck import GradCheckReport, check_layer, grad_check
from .layers import (
    LEAKY_SLOPE,
    BatchNorm,
    Dropout,
    GlobalMaxPool,
    LeakyReLU,
    Linear,
    Parameter,
    leaky_relu,
    softmax,
    softmax_cross_entropy,
)
from .model import AUGMENTATIONS, ArchitectureSpec, PointManifoldNet, build_model
from .mp import MPGate

__all__ = [
    "AUGMENTATIONS",
    "ArchitectureSpec",
    "BatchNorm",
    "Dropout",
    "EdgeConv",
    "GlobalMaxPool",
    "GradCheckReport",
    "LEAKY_SLOPE",
    "LeakyReLU",
    "Linear",
    "MPGate",
    "Parameter",
    "PointManifoldNet",
    "build_model",
    "check_layer",
    "grad_check",
    "leaky_relu",
    "load_checkpoint",
    "save_checkpoint",
    "softmax",
    "softmax_cross_entropy",
]
