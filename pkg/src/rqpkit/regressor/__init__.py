"""Compact convolutional regressor mapping feature stacks to model coefficients.

Implemented from first principles on numpy: four convolution stages with
rectifier activations and average pooling, one dense output layer, trained
with an adaptive-moment optimizer on a mean-squared parameter loss.
"""

from .layers import AvgPool2d, Conv2d, Dense, Flatten, ReLU
from .network import ConvLayerSpec, Network, NetworkConfig, default_config
from .training import (
    Adam,
    DegenerateLabelsError,
    TargetScaler,
    TrainConfig,
    TrainingError,
    TrainResult,
    mean_predictor_mse,
    mse_loss,
    normalize_stack,
    predict_params,
    train,
)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Adam",
    "AvgPool2d",
    "Conv2d",
    "ConvLayerSpec",
    "DegenerateLabelsError",
    "Dense",
    "Flatten",
    "Network",
    "NetworkConfig",
    "ReLU",
    "TargetScaler",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "default_config",
    "load_checkpoint",
    "mean_predictor_mse",
    "mse_loss",
    "normalize_stack",
    "predict_params",
    "save_checkpoint",
    "train",
]
