"""Training loop, scalers, loss, and the adaptive-moment optimizer.

Inputs are normalized from [0, 255] to [0, 1]; target coefficients are
standardized per parameter with mean/deviation taken from the training
labels only.  The loss is the mean squared difference between predicted
and fitted coefficients in standardized space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..features import FeatureStack
from ..model import ModelParams, ModelSpec
from .network import Network

INPUT_SCALE = 1.0 / 255.0


class DegenerateLabelsError(ValueError):
    """Training labels have zero variance in some coefficient."""


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss)."""


def normalize_stack(stack: FeatureStack) -> np.ndarray:
    """Affine map of the 8-bit planes onto [0, 1] as float64 (C, H, W)."""
    return stack.planes.astype(np.float64) * INPUT_SCALE


class TargetScaler:
    """Per-coefficient standardizer fitted on training labels.

    A coefficient with zero deviation is an error when there are several
    samples (it cannot be standardized); with a single sample the scale
    falls back to 1 and only the mean is removed, which is what the
    usual standard-scaler implementations do.
    """

    def __init__(self, mean: np.ndarray | None = None, scale: np.ndarray | None = None):
        self.mean = None if mean is None else np.asarray(mean, dtype=float)
        self.scale = None if scale is None else np.asarray(scale, dtype=float)

    @property
    def fitted(self) -> bool:
        return self.mean is not None and self.scale is not None

    def fit(self, labels: np.ndarray) -> "TargetScaler":
        labels = np.asarray(labels, dtype=float)
        if labels.ndim != 2 or labels.shape[0] < 1:
            raise ValueError(f"labels must be (samples, coefficients), got {labels.shape}")
        self.mean = labels.mean(axis=0)
        std = labels.std(axis=0)
        if labels.shape[0] > 1 and np.any(std == 0):
            flat = [i for i, s in enumerate(std) if s == 0]
            raise DegenerateLabelsError(
                f"coefficients {flat} are constant across the {labels.shape[0]} training labels"
            )
        self.scale = np.where(std == 0, 1.0, std)
        return self

    def _check(self):
        if not self.fitted:
            raise ValueError("scaler has not been fitted")

    def transform(self, values: np.ndarray) -> np.ndarray:
        self._check()
        return (np.asarray(values, dtype=float) - self.mean) / self.scale

    def inverse(self, values: np.ndarray) -> np.ndarray:
        self._check()
        return np.asarray(values, dtype=float) * self.scale + self.mean


def mse_loss(predicted: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared coefficient error and its gradient w.r.t. the prediction."""
    diff = predicted - target
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / diff.size
    return loss, grad


class Adam:
    """Adaptive-moment gradient descent with bias correction."""

    def __init__(self, params, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads) -> None:
        grads = list(grads)
        if len(grads) != len(self.params):
            raise ValueError(f"expected {len(self.params)} gradients, got {len(grads)}")
        self.t += 1
        correct1 = 1.0 - self.beta1 ** self.t
        correct2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / correct1) / (np.sqrt(v / correct2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 10
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")


@dataclass
class TrainResult:
    network: Network
    scaler: TargetScaler
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)


def _dataset_arrays(items, config) -> tuple[np.ndarray, np.ndarray]:
    stacks, labels = [], []
    template = None
    for stack, params in items:
        if stack.height != config.input_size or stack.width != config.input_size:
            raise ValueError(
                f"stack is {stack.width}x{stack.height}, network expects "
                f"{config.input_size}x{config.input_size}"
            )
        if len(stack.channels) != config.input_channels:
            raise ValueError(
                f"stack has {len(stack.channels)} channels, network expects "
                f"{config.input_channels}"
            )
        key = (params.spec.form, params.spec.fastened)
        if template is None:
            template = key
        elif key != template:
            raise ValueError(f"labels mix model specs: {template} vs {key}")
        stacks.append(normalize_stack(stack))
        labels.append(params.coeffs)
    y = np.array(labels, dtype=float)
    if y.shape[1] != config.outputs:
        raise ValueError(f"labels have {y.shape[1]} coefficients, network emits {config.outputs}")
    return np.stack(stacks), y


def _batched_loss(network: Network, x: np.ndarray, y: np.ndarray, batch: int = 64) -> float:
    total = 0.0
    for start in range(0, len(x), batch):
        out = network.forward(x[start : start + batch])
        diff = out - y[start : start + batch]
        total += float(np.sum(diff * diff))
    return total / y.size


def train(network: Network, train_items, cfg: TrainConfig, val_items=None) -> TrainResult:
    """Train on (FeatureStack, ModelParams) pairs; returns per-epoch losses.

    The scaler is fitted on the training labels only; validation items,
    when given, are scored each epoch with the same scaler.
    """
    if not train_items:
        raise ValueError("training set is empty")
    x, y_raw = _dataset_arrays(train_items, network.config)
    scaler = TargetScaler().fit(y_raw)
    y = scaler.transform(y_raw)
    x_val = y_val = None
    if val_items:
        x_val, y_val_raw = _dataset_arrays(val_items, network.config)
        y_val = scaler.transform(y_val_raw)

    optimizer = Adam(network.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(network=network, scaler=scaler)
    n = len(x)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        squared_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            # Sorting inside the batch keeps summation order canonical, so
            # frozen weights give a bit-identical loss regardless of shuffle.
            idx = np.sort(order[start : start + cfg.batch_size])
            out = network.forward(x[idx])
            loss, grad = mse_loss(out, y[idx])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss {loss} in epoch {epoch}, batch at {start}; "
                    "lower the learning rate or inspect the labels"
                )
            squared_sum += loss * grad.size
            network.backward(grad)
            optimizer.step(network.gradients())
        result.train_loss.append(squared_sum / y.size)
        if x_val is not None:
            result.val_loss.append(_batched_loss(network, x_val, y_val))
    return result


def mean_predictor_mse(scaler: TargetScaler, val_items) -> float:
    """Standardized-space MSE of always predicting the training-label mean."""
    labels = np.array([params.coeffs for _, params in val_items], dtype=float)
    standardized = scaler.transform(labels)
    return float(np.mean(standardized * standardized))


def predict_params(network: Network, scaler: TargetScaler, stack: FeatureStack,
                   spec: ModelSpec) -> ModelParams:
    """Forward pass plus inverse standardization, tagged with the target spec."""
    if not scaler.fitted:
        raise ValueError("scaler has not been fitted; train first")
    if spec.param_count != network.config.outputs:
        raise ValueError(
            f"{spec.label()} takes {spec.param_count} coefficients but the network "
            f"emits {network.config.outputs}"
        )
    out = network.forward(normalize_stack(stack)[None])[0]
    coeffs = scaler.inverse(out)
    return ModelParams(spec, tuple(float(c) for c in coeffs))
