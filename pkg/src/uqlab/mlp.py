"""Small dense binary classifier: ReLU hidden layers, two output logits.

Training is plain batched gradient descent with Adam (bias-corrected
moments, classic L2 weight decay folded into the gradient) on a softmax
cross-entropy loss. One dropout site sits before the final layer; when a
spectral bound is set, every hidden weight matrix is rescaled after each
optimizer step using a persistent power-iteration vector pair, so the
bound holds at every epoch boundary, not only at the end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .data import Dataset
from .errors import ConfigError, DataError, NumericalError, SchemaVersionError
from .rng import make_rng

__all__ = [
    "Layer",
    "MlpClassifier",
    "TrainConfig",
    "init_mlp",
    "train",
    "forward_logits",
    "softmax",
    "cross_entropy",
    "n_parameters",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_FORMAT = "uqlab-mlp"
CHECKPOINT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Power-iteration schedule: a long warm-up when the persistent vectors are
# created, then one iteration per optimizer step.
SN_WARMUP_ITERS = 50


@dataclass
class Layer:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str  # "relu" or "linear"


@dataclass
class MlpClassifier:
    layers: list[Layer]
    dropout_rate: float
    spectral_bound: float | None
    seed: int
    trained: bool = False
    sn_state: list[linalg.PowerIterState] | None = field(default=None, repr=False)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.layers[0].weights.shape[0]] + [l.weights.shape[1] for l in self.layers]

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    epochs: int = 100
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


def init_mlp(
    layer_sizes: list[int],
    dropout_rate: float = 0.0,
    spectral_bound: float | None = None,
    seed: int = 0,
) -> MlpClassifier:
    """Build an untrained classifier with He-initialized weights.

    Weights are drawn from N(0, 2 / fan_in) and biases start at zero; the
    last entry of ``layer_sizes`` must be 2 (one logit per class).
    """
    if len(layer_sizes) < 2:
        raise ConfigError(f"need at least input and output sizes, got {layer_sizes}")
    if layer_sizes[-1] != 2:
        raise ConfigError(f"final layer must output 2 logits, got {layer_sizes[-1]}")
    if any(s < 1 for s in layer_sizes):
        raise ConfigError(f"layer sizes must be positive, got {layer_sizes}")
    if not 0.0 <= dropout_rate <= 1.0:
        raise ConfigError(f"dropout_rate must be in [0, 1], got {dropout_rate}")
    if spectral_bound is not None and not spectral_bound > 0:
        raise ConfigError(f"spectral_bound must be positive, got {spectral_bound}")
    rng = make_rng(seed)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        w = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        activation = "linear" if i == len(layer_sizes) - 2 else "relu"
        layers.append(Layer(w, np.zeros(fan_out), activation))
    return MlpClassifier(layers, dropout_rate, spectral_bound, seed)


def n_parameters(model: MlpClassifier) -> int:
    return sum(l.weights.size + l.bias.size for l in model.layers)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for stability."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericalError("softmax input contains non-finite logits")
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of the true class."""
    p = np.take_along_axis(probs, labels.reshape(-1, 1), axis=1).ravel()
    with np.errstate(divide="ignore"):
        return float(np.mean(-np.log(p)))


def _forward_stack(layers: list[Layer], x: np.ndarray):
    """Forward through a list of layers; returns (activations, preactivations)."""
    acts = [x]
    pres = []
    for layer in layers:
        pre = acts[-1] @ layer.weights + layer.bias
        pres.append(pre)
        acts.append(np.maximum(pre, 0.0) if layer.activation == "relu" else pre)
    return acts, pres


def _backward_stack(layers: list[Layer], acts, pres, d_out):
    """Backprop a gradient at the stack output; returns (grads, d_input)."""
    grads = [None] * len(layers)
    d_act = d_out
    for i in range(len(layers) - 1, -1, -1):
        d_pre = d_act * (pres[i] > 0) if layers[i].activation == "relu" else d_act
        grads[i] = (acts[i].T @ d_pre, d_pre.sum(axis=0))
        d_act = d_pre @ layers[i].weights.T
    return grads, d_act


def _dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-scaling mask: kept units are divided by the keep probability."""
    if rate >= 1.0:
        return np.zeros(shape)
    keep = 1.0 - rate
    return (rng.random(shape) >= rate) / keep


def forward_logits(
    model: MlpClassifier,
    x: np.ndarray,
    mode: str = "deterministic",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Compute output logits for one sample (d,) or a batch (n, d).

    ``mode`` is "deterministic" (no dropout) or "dropout-active" (a fresh
    mask per call on the activation feeding the final layer, with inverted
    scaling). A model with dropout_rate 0 behaves identically in both.
    """
    if mode not in ("deterministic", "dropout-active"):
        raise ConfigError(f"unknown mode {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x.reshape(1, -1) if single else x
    if xb.shape[1] != model.input_dim:
        raise DataError(f"input has {xb.shape[1]} features, model expects {model.input_dim}")
    acts, _ = _forward_stack(model.layers[:-1], xb)
    h = acts[-1]
    if mode == "dropout-active" and model.dropout_rate > 0.0:
        if rng is None:
            raise ConfigError("dropout-active mode requires an rng")
        h = h * _dropout_mask(h.shape, model.dropout_rate, rng)
    final = model.layers[-1]
    logits = h @ final.weights + final.bias
    return logits[0] if single else logits


class _Adam:
    """Adam over a list of parameter arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float, weight_decay: float):
        self.params = params
        self.lr = lr
        self.wd = weight_decay
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1**self.t
        bc2 = 1.0 - ADAM_BETA2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = g + self.wd * p
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def _renormalize_hidden(model: MlpClassifier, converge: bool = False) -> None:
    """Rescale hidden weights in place using the persistent power vectors.

    Per optimizer step a single tracking iteration is enough; at epoch
    boundaries ``converge=True`` iterates to convergence so the bound
    holds under an exact-SVD check at every epoch checkpoint.
    """
    bound = model.spectral_bound
    for layer, state in zip(model.layers[:-1], model.sn_state):
        if converge:
            sigma = linalg.power_iter_converge(layer.weights, state)
        else:
            sigma = linalg.power_iter_step(layer.weights, state)
        if sigma > bound:
            layer.weights *= bound / sigma


def train(
    model: MlpClassifier,
    data: Dataset,
    cfg: TrainConfig,
    on_epoch_end=None,
) -> MlpClassifier:
    """Train a copy of ``model`` on ``data`` and return it.

    The input model is left untouched. ``on_epoch_end(epoch, model)`` is
    called after each epoch with the in-progress model (treat it as
    read-only). Raises NumericalError naming the epoch if the training
    loss stops being finite.
    """
    if len(data) == 0:
        raise DataError("cannot train on an empty dataset")
    if data.features.shape[1] != model.input_dim:
        raise DataError(
            f"data has {data.features.shape[1]} features, model expects {model.input_dim}"
        )
    model = MlpClassifier(
        [Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in model.layers],
        model.dropout_rate,
        model.spectral_bound,
        model.seed,
    )
    rng = make_rng(cfg.seed)
    if model.spectral_bound is not None:
        model.sn_state = [
            linalg.power_iter_init(l.weights, rng, warmup=SN_WARMUP_ITERS)
            for l in model.layers[:-1]
        ]
        _renormalize_hidden(model, converge=True)

    params = []
    for layer in model.layers:
        params.extend([layer.weights, layer.bias])
    opt = _Adam(params, cfg.learning_rate, cfg.weight_decay)

    x_all = data.features
    y_all = data.labels
    n = len(data)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        try:
            epoch_loss = _train_epoch(model, opt, x_all, y_all, perm, cfg, rng)
        except NumericalError as exc:
            raise NumericalError(f"epoch {epoch}: {exc}") from None
        if not np.isfinite(epoch_loss):
            raise NumericalError(f"training loss became non-finite at epoch {epoch}")
        if model.spectral_bound is not None:
            _renormalize_hidden(model, converge=True)
        if on_epoch_end is not None:
            on_epoch_end(epoch, model)
    model.trained = True
    return model


def _train_epoch(model, opt, x_all, y_all, perm, cfg, rng) -> float:
    epoch_loss = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, len(perm), cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb, yb = x_all[idx], y_all[idx]
            b = len(idx)

            acts, pres = _forward_stack(model.layers[:-1], xb)
            h = acts[-1]
            if model.dropout_rate > 0.0:
                mask = _dropout_mask(h.shape, model.dropout_rate, rng)
                h_in = h * mask
            else:
                mask = None
                h_in = h
            final = model.layers[-1]
            logits = h_in @ final.weights + final.bias
            probs = softmax(logits)
            epoch_loss += cross_entropy(probs, yb) * b

            d_logits = probs.copy()
            d_logits[np.arange(b), yb] -= 1.0
            d_logits /= b
            g_wf = h_in.T @ d_logits
            g_bf = d_logits.sum(axis=0)
            d_h = d_logits @ final.weights.T
            if mask is not None:
                d_h = d_h * mask
            hidden_grads, _ = _backward_stack(model.layers[:-1], acts, pres, d_h)

            grads = []
            for gw, gb in hidden_grads:
                grads.extend([gw, gb])
            grads.extend([g_wf, g_bf])
            opt.step(grads)
            if model.spectral_bound is not None:
                _renormalize_hidden(model)
    return epoch_loss


def save_checkpoint(model: MlpClassifier, path) -> None:
    """Write the model as versioned JSON (row-major weights, full precision)."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_sizes": model.layer_sizes,
        "weights": [l.weights.ravel().tolist() for l in model.layers],
        "biases": [l.bias.tolist() for l in model.layers],
        "dropout_rate": model.dropout_rate,
        "spectral_bound": model.spectral_bound,
        "seed": model.seed,
        "trained": model.trained,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> MlpClassifier:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise SchemaVersionError(f"not a {CHECKPOINT_FORMAT} checkpoint: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise SchemaVersionError(f"unsupported checkpoint version {doc.get('version')}")
    sizes = doc["layer_sizes"]
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        w = np.array(doc["weights"][i], dtype=np.float64).reshape(fan_in, fan_out)
        b = np.array(doc["biases"][i], dtype=np.float64)
        activation = "linear" if i == len(sizes) - 2 else "relu"
        layers.append(Layer(w, b, activation))
    return MlpClassifier(
        layers,
        doc["dropout_rate"],
        doc["spectral_bound"],
        doc["seed"],
        trained=bool(doc.get("trained", False)),
    )


