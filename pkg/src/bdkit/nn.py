"""Dense feed-forward network with a Gaussian NLL head.

Hand-derived gradients, Adam, and deterministic training: everything runs in
float64 numpy with seeded RNG so identical seeds reproduce identical weights
bit for bit.  The architecture is fixed at six hidden layers of 128 units
with a two-component output (mu, log sigma).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, DivergedLoss, TooFewSamples

HIDDEN_DIMS = (128, 128, 128, 128, 128, 128)
OUTPUT_DIM = 2
LOG_2PI = math.log(2.0 * math.pi)

DEFAULT_LOG_SIGMA_CLAMP = (-10.0, 5.0)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 400
    patience: int = 20
    seed: int = 0
    log_sigma_clamp: Tuple[float, float] = DEFAULT_LOG_SIGMA_CLAMP
    validation_fraction: float = 0.1
    #: halve the learning rate after this many epochs without validation
    #: improvement (0 disables the decay)
    lr_decay_patience: int = 8
    min_learning_rate: float = 1e-5

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.validation_fraction < 0.5:
            raise ValueError("validation_fraction must be in (0, 0.5)")
        if not self.log_sigma_clamp[0] < self.log_sigma_clamp[1]:
            raise ValueError("log_sigma_clamp lo must be < hi")


@dataclass
class MLP:
    """Weights stored per layer as (out x in) matrices plus bias vectors."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    log_sigma_clamp: Tuple[float, float] = DEFAULT_LOG_SIGMA_CLAMP
    #: post-hoc variance calibration: predicted sigma is multiplied by this
    #: factor (fitted on held-out validation data, never below 1.0)
    sigma_scale: float = 1.0

    @property
    def layer_dims(self) -> Tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MLP":
        return MLP(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            log_sigma_clamp=self.log_sigma_clamp,
            sigma_scale=self.sigma_scale,
        )


def init_mlp(
    input_dim: int,
    rng: np.random.Generator,
    hidden_dims: Sequence[int] = HIDDEN_DIMS,
    log_sigma_clamp: Tuple[float, float] = DEFAULT_LOG_SIGMA_CLAMP,
) -> MLP:
    """Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    dims = [input_dim, *hidden_dims, OUTPUT_DIM]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MLP(weights=weights, biases=biases, log_sigma_clamp=log_sigma_clamp)


def _forward_batch(model: MLP, X: np.ndarray):
    """Returns (mu, log_sigma_clamped, cache) for a (B, d) input batch."""
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"expected input width {model.input_dim}, got shape {X.shape}"
        )
    acts = [X]
    a = X
    n_layers = len(model.weights)
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        if i < n_layers - 1:
            a = np.maximum(z, 0.0)
        else:
            a = z
        acts.append(a)
    out = acts[-1]
    lo, hi = model.log_sigma_clamp
    mu = out[:, 0]
    raw_ls = out[:, 1]
    log_sigma = np.clip(raw_ls, lo, hi)
    if model.sigma_scale != 1.0:
        log_sigma = log_sigma + math.log(model.sigma_scale)
    return mu, log_sigma, (acts, raw_ls)


def forward(model: MLP, inputs) -> Tuple[float, float]:
    """Single-sample forward pass; returns (mu, clamped log sigma)."""
    x = np.asarray(inputs, dtype=float).reshape(1, -1)
    mu, log_sigma, _ = _forward_batch(model, x)
    return float(mu[0]), float(log_sigma[0])


def nll_loss(mu: float, log_sigma: float, target: float) -> float:
    """Negative log density of N(mu, e^{2 log_sigma}) at the target."""
    z2 = (target - mu) ** 2 * math.exp(-2.0 * log_sigma)
    return 0.5 * LOG_2PI + log_sigma + 0.5 * z2


def _batch_loss_and_grads(model: MLP, X: np.ndarray, targets: np.ndarray):
    """Mean NLL over the batch and its gradient w.r.t. every parameter."""
    mu, log_sigma, (acts, raw_ls) = _forward_batch(model, X)
    inv_var = np.exp(-2.0 * log_sigma)
    resid = targets - mu
    losses = 0.5 * LOG_2PI + log_sigma + 0.5 * resid * resid * inv_var
    loss = float(np.mean(losses))

    B = X.shape[0]
    lo, hi = model.log_sigma_clamp
    d_mu = -resid * inv_var
    d_ls = (1.0 - resid * resid * inv_var) * ((raw_ls >= lo) & (raw_ls <= hi))
    d_out = np.stack([d_mu, d_ls], axis=1) / B

    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    delta = d_out
    for i in range(len(model.weights) - 1, -1, -1):
        a_prev = acts[i]
        grads_w[i] = delta.T @ a_prev
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (acts[i] > 0.0)
    return loss, grads_w, grads_b


def backward(model: MLP, inputs, target: float):
    """Analytic gradient of nll_loss(forward(model, inputs), target)."""
    x = np.asarray(inputs, dtype=float).reshape(1, -1)
    _, gw, gb = _batch_loss_and_grads(model, x, np.array([target], dtype=float))
    return gw, gb


@dataclass
class AdamState:
    m_w: List[np.ndarray]
    v_w: List[np.ndarray]
    m_b: List[np.ndarray]
    v_b: List[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: MLP) -> "AdamState":
        return cls(
            m_w=[np.zeros_like(w) for w in model.weights],
            v_w=[np.zeros_like(w) for w in model.weights],
            m_b=[np.zeros_like(b) for b in model.biases],
            v_b=[np.zeros_like(b) for b in model.biases],
        )


def adam_step(
    model: MLP,
    grads_w: List[np.ndarray],
    grads_b: List[np.ndarray],
    state: AdamState,
    learning_rate: float,
):
    """In-place bias-corrected Adam update."""
    state.step += 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for i in range(len(model.weights)):
        for p, g, m, v in (
            (model.weights[i], grads_w[i], state.m_w[i], state.v_w[i]),
            (model.biases[i], grads_b[i], state.m_b[i], state.v_b[i]),
        ):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= learning_rate * (m / c1) / (np.sqrt(v / c2) + eps)


def train_category(samples, config: TrainConfig):
    """Train one category MLP on (input, normalized target) pairs.

    Returns (best-validation model, report dict).  Deterministic given
    (seed, data order, config).
    """
    pairs = list(samples)
    if len(pairs) < 1000:
        raise TooFewSamples(f"need >= 1000 samples, got {len(pairs)}")
    X = np.array([p[0] for p in pairs], dtype=float)
    t = np.array([p[1] for p in pairs], dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("all inputs must have the same length")

    rng = np.random.Generator(np.random.PCG64(config.seed))
    model = init_mlp(X.shape[1], rng, log_sigma_clamp=config.log_sigma_clamp)
    state = AdamState.for_model(model)

    n_val = max(1, int(round(len(pairs) * config.validation_fraction)))
    perm = rng.permutation(len(pairs))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    X_tr, t_tr = X[train_idx], t[train_idx]
    X_val, t_val = X[val_idx], t[val_idx]

    def val_nll(m: MLP) -> float:
        mu, ls, _ = _forward_batch(m, X_val)
        losses = 0.5 * LOG_2PI + ls + 0.5 * (t_val - mu) ** 2 * np.exp(-2.0 * ls)
        return float(np.mean(losses))

    best_model = model.copy()
    best_val = val_nll(model)
    bad_epochs = 0
    lr_bad_epochs = 0
    learning_rate = config.learning_rate
    epochs_run = 0
    last_train = math.nan
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(X_tr))
        epoch_losses = []
        for start in range(0, len(X_tr), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, gw, gb = _batch_loss_and_grads(model, X_tr[idx], t_tr[idx])
            if not math.isfinite(loss):
                raise DivergedLoss(
                    f"non-finite training loss at epoch {epoch}, step {start}"
                )
            adam_step(model, gw, gb, state, learning_rate)
            epoch_losses.append(loss)
        last_train = float(np.mean(epoch_losses))
        epochs_run = epoch + 1
        v = val_nll(model)
        if not math.isfinite(v):
            raise DivergedLoss(f"non-finite validation loss at epoch {epoch}")
        if v < best_val - 1e-12:
            best_val = v
            best_model = model.copy()
            bad_epochs = 0
            lr_bad_epochs = 0
        else:
            bad_epochs += 1
            lr_bad_epochs += 1
            if bad_epochs >= config.patience:
                break
            if (
                config.lr_decay_patience > 0
                and lr_bad_epochs >= config.lr_decay_patience
                and learning_rate > config.min_learning_rate
            ):
                learning_rate = max(
                    learning_rate * 0.5, config.min_learning_rate
                )
                lr_bad_epochs = 0

    # Variance calibration on the held-out split: if the standardized
    # residuals (t - mu) / sigma have RMS above 1 the network is
    # overconfident, so widen every predicted sigma by that factor.
    # The scale never shrinks below 1 to avoid over-tightening on a
    # lucky validation draw.
    mu_val, ls_val, _ = _forward_batch(best_model, X_val)
    z_val = (t_val - mu_val) * np.exp(-ls_val)
    best_model.sigma_scale = max(1.0, float(np.sqrt(np.mean(z_val * z_val))))

    report = {
        "epochs_run": epochs_run,
        "final_train_nll": last_train,
        "best_val_nll": best_val,
        "final_learning_rate": learning_rate,
        "batch_size": config.batch_size,
        "sigma_scale": best_model.sigma_scale,
        "n_train": int(len(X_tr)),
        "n_val": int(len(X_val)),
    }
    return best_model, report
