"""Feedforward regression network trained with Adam on mean squared error.

Architecture is fixed at two ReLU hidden layers sized (feature count,
100) feeding a linear output unit.  Weights start from a zero-mean
normal with variance 2/fan_in per layer (the scaling that keeps ReLU
activations from shrinking or exploding), biases start at zero.

Training runs seeded shuffled mini-batches; everything is plain numpy,
so a fixed seed reproduces the final parameters bit for bit.  Inputs are
assumed standardized; the pipeline layer owns the transforms, mirroring
the SVR setup.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import Diverged, ShapeMismatch
from .preprocess import Scaler

DEFAULT_HIDDEN2 = 100


@dataclass
class NnConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 200
    seed: int = 0
    hidden2: int = DEFAULT_HIDDEN2


@dataclass
class NnModel:
    """Layer parameters plus the transforms the net was fit under."""

    weights: list[np.ndarray]  # [(p, p), (p, h2), (h2, 1)]
    biases: list[np.ndarray]   # [(p,), (h2,), (1,)]
    config: NnConfig
    feature_scaler: Scaler | None = None
    target_center: float = 0.0
    target_scale: float = 1.0
    loss_history: list[float] = field(default_factory=list, repr=False)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


def init_nn(p: int, seed: int = 0, hidden2: int = DEFAULT_HIDDEN2,
            config: NnConfig | None = None) -> NnModel:
    """Fresh network with He-scaled normal weights and zero biases."""
    if p < 1:
        raise ValueError("need at least one input feature")
    rng = np.random.default_rng(seed)
    sizes = [p, p, hidden2, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        std = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    cfg = replace(config, seed=seed, hidden2=hidden2) if config else NnConfig(
        seed=seed, hidden2=hidden2)
    return NnModel(weights, biases, cfg)


def _forward_batch(model: NnModel, X: np.ndarray):
    """Pre-activations and activations for every layer of a batch."""
    z1 = X @ model.weights[0] + model.biases[0]
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ model.weights[1] + model.biases[1]
    h2 = np.maximum(z2, 0.0)
    out = (h2 @ model.weights[2] + model.biases[2])[:, 0]
    return z1, h1, z2, h2, out


def forward(model: NnModel, x) -> np.ndarray | float:
    """Network output for one sample or a batch."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.weights[0].shape[0]:
        raise ShapeMismatch(
            f"expected {model.weights[0].shape[0]} inputs, got {X.shape[1]}")
    out = _forward_batch(model, X)[4]
    return float(out[0]) if single else out


def gradients(model: NnModel, X: np.ndarray, y: np.ndarray):
    """Exact MSE gradients over the batch for every weight and bias."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y) or X.shape[0] == 0:
        raise ShapeMismatch(f"X {X.shape} does not match y {y.shape}")
    if X.shape[1] != model.weights[0].shape[0]:
        raise ShapeMismatch(
            f"expected {model.weights[0].shape[0]} inputs, got {X.shape[1]}")
    z1, h1, z2, h2, out = _forward_batch(model, X)
    batch = X.shape[0]

    d_out = (2.0 / batch) * (out - y)          # d MSE / d output
    g_w3 = h2.T @ d_out[:, None]
    g_b3 = np.array([d_out.sum()])
    d_h2 = d_out[:, None] @ model.weights[2].T
    d_z2 = d_h2 * (z2 > 0.0)
    g_w2 = h1.T @ d_z2
    g_b2 = d_z2.sum(axis=0)
    d_h1 = d_z2 @ model.weights[1].T
    d_z1 = d_h1 * (z1 > 0.0)
    g_w1 = X.T @ d_z1
    g_b1 = d_z1.sum(axis=0)
    return [g_w1, g_w2, g_w3], [g_b1, g_b2, g_b3]


def adam_step(model: NnModel, state: AdamState, grads, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[NnModel, AdamState]:
    """One bias-corrected Adam update, applied in place."""
    grad_w, grad_b = grads
    params = model.weights + model.biases
    gs = list(grad_w) + list(grad_b)
    if len(state.m) != len(params):
        raise ShapeMismatch("optimizer state does not match the model")
    state.t += 1
    correction1 = 1.0 - beta1 ** state.t
    correction2 = 1.0 - beta2 ** state.t
    for param, g, m, v in zip(params, gs, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        param -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return model, state


def fresh_adam_state(model: NnModel) -> AdamState:
    params = model.weights + model.biases
    return AdamState([np.zeros_like(p) for p in params],
                     [np.zeros_like(p) for p in params])


def mse(model: NnModel, X: np.ndarray, y: np.ndarray) -> float:
    diff = _forward_batch(model, X)[4] - y
    return float((diff * diff).mean())


def train_nn(X: np.ndarray, y: np.ndarray, config: NnConfig | None = None) -> NnModel:
    """Train on standardized data; deterministic for a fixed config."""
    cfg = config or NnConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ShapeMismatch(f"X {X.shape} does not match y {y.shape}")
    n = X.shape[0]
    if n < cfg.batch_size:
        raise ShapeMismatch(f"need at least batch_size={cfg.batch_size} rows, got {n}")

    model = init_nn(X.shape[1], seed=cfg.seed, hidden2=cfg.hidden2, config=cfg)
    state = fresh_adam_state(model)
    # Batch shuffling draws from its own stream so init stays seed-stable.
    shuffle_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))
    for _ in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            grads = gradients(model, X[idx], y[idx])
            adam_step(model, state, grads, cfg.learning_rate,
                      cfg.beta1, cfg.beta2, cfg.adam_eps)
        epoch_loss = mse(model, X, y)
        model.loss_history.append(epoch_loss)
        if not np.isfinite(epoch_loss):
            raise Diverged(f"training loss became {epoch_loss} "
                           f"after epoch {len(model.loss_history)}")
    return model


def predict_nn(model: NnModel, x) -> np.ndarray | float:
    """Evaluate the network; applies the model's stored transforms."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.weights[0].shape[0]:
        raise ShapeMismatch(
            f"expected {model.weights[0].shape[0]} features, got {X.shape[1]}")
    if model.feature_scaler is not None:
        X = model.feature_scaler.transform(X)
    out = _forward_batch(model, X)[4]
    out = out * model.target_scale + model.target_center
    return float(out[0]) if single else out
