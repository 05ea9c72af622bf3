"""The four uncertainty-estimation heads.

Every head turns a dataset into a :class:`PredictionSet`: a predictive
probability pair and a scalar uncertainty per sample, plus provenance.
Uncertainty scores: the softmax baseline uses one minus the maximum
probability; the multi-pass heads (dropout, ensembles) and the GP head
use the predictive entropy of the mean distribution, so every entropy
score lives in [0, ln 2].

The GP head combines a contraction-constrained feature extractor
(spectral normalization on the hidden layers) with a random-cosine
approximation of the RBF kernel, a scalar logit mean trained jointly
with the network, and a Laplace posterior over the feature weights whose
variance widens prediction intervals away from the training data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import linalg, mlp
from .data import Dataset
from .errors import ConfigError, DataError, NumericalError, StateError
from .mlp import MlpClassifier, TrainConfig, softmax
from .rng import derive_seed, make_rng

__all__ = [
    "PredictionSet",
    "SngpHead",
    "EnsembleSpec",
    "predictive_entropy",
    "msp_predict",
    "mc_dropout_predict",
    "ensemble_predict",
    "init_sngp_head",
    "rff_features",
    "sngp_fit",
    "sngp_predict",
    "train_sngp",
    "with_score",
    "MC_PASSES",
    "ENSEMBLE_MEMBERS",
    "RFF_DIM",
    "RFF_LENGTH_SCALE",
    "RIDGE",
    "MEAN_FIELD_LAMBDA",
]

logger = logging.getLogger(__name__)

# Method defaults: 32 stochastic passes, 4 ensemble members, 1024 random
# features with length scale 2.0 and unit ridge, pi/8 mean-field factor.
MC_PASSES = 32
ENSEMBLE_MEMBERS = 4
RFF_DIM = 1024
RFF_LENGTH_SCALE = 2.0
RIDGE = 1.0
MEAN_FIELD_LAMBDA = float(np.pi / 8.0)

PROB_ATOL = 1e-9


@dataclass(frozen=True)
class PredictionSet:
    """Per-sample predictive distributions with provenance.

    ``component_logits`` holds the raw per-pass (or per-member) logit
    pairs the distribution was built from; single-pass methods carry one
    component with index -1. ``probs`` and ``uncertainty`` are always
    derived from the logits through :func:`scores_from_logits`, so a
    saved-and-reloaded set reproduces them bit for bit.
    """

    method: str
    seed: int
    tag: str
    labels: np.ndarray  # (n,)
    component_logits: np.ndarray  # (k, n, 2)
    component_indices: np.ndarray  # (k,)
    sample_ids: np.ndarray  # (n,)
    probs: np.ndarray  # (n, 2)
    uncertainty: np.ndarray  # (n,)

    def __post_init__(self):
        k, n, two = self.component_logits.shape
        if two != 2:
            raise DataError("component logits must be pairs")
        if self.labels.shape != (n,) or self.sample_ids.shape != (n,):
            raise DataError("labels/sample_ids do not match the number of samples")
        if self.component_indices.shape != (k,):
            raise DataError("component_indices do not match the number of components")
        if n and np.max(np.abs(self.probs.sum(axis=1) - 1.0)) > PROB_ATOL:
            raise DataError("probabilities do not sum to 1")
        if n and np.any(self.uncertainty < 0):
            raise DataError("uncertainty must be non-negative")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def component_probs(self) -> np.ndarray:
        """Raw per-pass probabilities, shape (k, n, 2)."""
        return softmax(self.component_logits)


def predictive_entropy(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy (nats) per row, exact at hard 0/1 probabilities."""
    p = np.asarray(probs, dtype=np.float64)
    terms = np.where(p > 0.0, -p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)


def scores_from_logits(method: str, component_logits: np.ndarray):
    """Derive (probs, uncertainty) from per-component logits.

    "msp" scores one minus the maximum softmax probability of its single
    pass; every other method averages the per-component softmax outputs
    and scores the predictive entropy of the mean.
    """
    comp_probs = softmax(component_logits)
    probs = comp_probs.mean(axis=0)
    if method == "msp":
        if component_logits.shape[0] != 1:
            raise DataError("msp carries exactly one component")
        uncertainty = 1.0 - probs.max(axis=1)
    else:
        uncertainty = predictive_entropy(probs)
    return probs, uncertainty


def _build_set(method, seed, data: Dataset, component_logits, component_indices) -> PredictionSet:
    component_logits = np.asarray(component_logits, dtype=np.float64)
    probs, uncertainty = scores_from_logits(method, component_logits)
    return PredictionSet(
        method=method,
        seed=int(seed),
        tag=data.tag,
        labels=data.labels.copy(),
        component_logits=component_logits,
        component_indices=np.asarray(component_indices, dtype=np.int64),
        sample_ids=np.arange(len(data), dtype=np.int64),
        probs=probs,
        uncertainty=uncertainty,
    )


def _require_trained(model: MlpClassifier) -> None:
    if not model.trained:
        raise StateError("model has not been trained")


def msp_predict(model: MlpClassifier, data: Dataset, seed: int = 0) -> PredictionSet:
    """Single deterministic pass; uncertainty = 1 - max softmax probability."""
    _require_trained(model)
    logits = mlp.forward_logits(model, data.features)
    return _build_set("msp", seed, data, logits[None, :, :], [-1])


def mc_dropout_predict(
    model: MlpClassifier,
    data: Dataset,
    n_samples: int = MC_PASSES,
    rng: np.random.Generator | None = None,
    seed: int = 0,
) -> PredictionSet:
    """Average ``n_samples`` dropout-active passes; score their mean entropy.

    Each pass draws its mask stream from a pass-indexed child of ``rng``
    (or of ``seed`` when no rng is given), so results do not depend on
    evaluation order.
    """
    _require_trained(model)
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    base = int(rng.integers(2**62)) if rng is not None else int(seed)
    logits = np.stack(
        [
            mlp.forward_logits(
                model, data.features, "dropout-active", make_rng(derive_seed(base, "pass", i))
            )
            for i in range(n_samples)
        ]
    )
    return _build_set("dropout", seed, data, logits, np.arange(n_samples))


@dataclass(frozen=True)
class EnsembleSpec:
    """Independently initialized copies of one architecture."""

    members: list[MlpClassifier]
    member_seeds: list[int]

    def __post_init__(self):
        if len(self.members) < 2:
            raise ConfigError("an ensemble needs at least 2 members")
        sizes = self.members[0].layer_sizes
        if any(m.layer_sizes != sizes for m in self.members):
            raise ConfigError("ensemble members must share one architecture")
        if len(self.member_seeds) != len(self.members):
            raise ConfigError("one seed per member required")


def ensemble_predict(spec: EnsembleSpec, data: Dataset, seed: int = 0) -> PredictionSet:
    """Mean of member softmax outputs; uncertainty = entropy of the mean."""
    for member in spec.members:
        _require_trained(member)
    logits = np.stack([mlp.forward_logits(m, data.features) for m in spec.members])
    return _build_set("ensemble", seed, data, logits, np.arange(len(spec.members)))


@dataclass
class SngpHead:
    """Random-feature GP output layer with a Laplace posterior.

    phi(x) = sqrt(2/D) cos(W x + b) approximates an RBF kernel with the
    length scale folded into W. ``beta`` is the logit-mean weight vector;
    ``precision``/``covariance`` hold the posterior over feature weights.
    """

    rff_weights: np.ndarray  # (D, feature_dim)
    rff_phases: np.ndarray  # (D,)
    beta: np.ndarray  # (D,)
    precision: np.ndarray  # (D, D)
    covariance: np.ndarray  # (D, D)
    ridge: float
    mean_field_lambda: float = MEAN_FIELD_LAMBDA
    fitted: bool = False

    @property
    def rff_dim(self) -> int:
        return self.rff_weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.rff_weights.shape[1]


def init_sngp_head(
    feature_dim: int,
    rff_dim: int = RFF_DIM,
    length_scale: float = RFF_LENGTH_SCALE,
    ridge: float = RIDGE,
    rng: np.random.Generator | None = None,
) -> SngpHead:
    """Draw frozen random features and a prior-only posterior."""
    if rff_dim < 1:
        raise ConfigError(f"rff_dim must be >= 1, got {rff_dim}")
    if not length_scale > 0:
        raise ConfigError(f"length_scale must be positive, got {length_scale}")
    if not ridge > 0:
        raise ConfigError(f"ridge must be positive, got {ridge}")
    if rng is None:
        rng = make_rng(0)
    w = rng.standard_normal((rff_dim, feature_dim)) / length_scale
    phases = rng.uniform(0.0, 2.0 * np.pi, size=rff_dim)
    return SngpHead(
        rff_weights=w,
        rff_phases=phases,
        beta=np.zeros(rff_dim),
        precision=ridge * np.eye(rff_dim),
        covariance=np.eye(rff_dim) / ridge,
        ridge=ridge,
    )


def rff_features(x: np.ndarray, head: SngpHead) -> np.ndarray:
    """phi(x) = sqrt(2/D) cos(W x + b) for one vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x.reshape(1, -1) if single else x
    if xb.shape[1] != head.feature_dim:
        raise DataError(f"input has {xb.shape[1]} features, head expects {head.feature_dim}")
    phi = np.sqrt(2.0 / head.rff_dim) * np.cos(xb @ head.rff_weights.T + head.rff_phases)
    return phi[0] if single else phi


def sngp_fit(
    head: SngpHead, train_features: np.ndarray, train_probs: np.ndarray, ridge: float
) -> SngpHead:
    """Laplace posterior from training features and fitted probabilities.

    precision = ridge * I + sum_n p_n (1 - p_n) phi_n phi_n^T, covariance
    its inverse (symmetrized). Zero training rows leave the prior.
    """
    if not ridge > 0:
        raise ConfigError(f"ridge must be positive, got {ridge}")
    phi = np.asarray(train_features, dtype=np.float64).reshape(-1, head.rff_dim)
    p = np.asarray(train_probs, dtype=np.float64).ravel()
    if phi.shape[0] != p.shape[0]:
        raise DataError("one probability per feature row required")
    precision = ridge * np.eye(head.rff_dim)
    if phi.shape[0]:
        weighted = phi * (p * (1.0 - p))[:, None]
        precision += phi.T @ weighted
    precision = (precision + precision.T) / 2.0
    covariance = np.linalg.inv(precision)
    covariance = (covariance + covariance.T) / 2.0
    if not np.all(np.isfinite(covariance)):
        raise NumericalError("posterior covariance is not finite")
    return SngpHead(
        rff_weights=head.rff_weights,
        rff_phases=head.rff_phases,
        beta=head.beta.copy(),
        precision=precision,
        covariance=covariance,
        ridge=ridge,
        mean_field_lambda=head.mean_field_lambda,
        fitted=True,
    )


def _sigmoid(m: np.ndarray) -> np.ndarray:
    """Overflow-safe logistic function."""
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    e = np.exp(m[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _hidden_features(model: MlpClassifier, x: np.ndarray) -> np.ndarray:
    """Deterministic activation of the last hidden layer."""
    acts, _ = mlp._forward_stack(model.layers[:-1], np.asarray(x, dtype=np.float64))
    return acts[-1]


def sngp_variances(model: MlpClassifier, head: SngpHead, x: np.ndarray) -> np.ndarray:
    """Posterior logit variance phi^T Sigma phi per sample."""
    phi = rff_features(_hidden_features(model, x), head)
    return np.einsum("nd,de,ne->n", phi, head.covariance, phi)


def sngp_predict(model: MlpClassifier, head: SngpHead, data: Dataset, seed: int = 0) -> PredictionSet:
    """Mean-field-adjusted GP prediction with entropy uncertainty.

    The scalar logit mean m = beta^T phi is shrunk by 1/sqrt(1 + lambda v)
    before the logistic link; v = 0 reproduces the unadjusted prediction
    and large v pulls the probability toward one half. Tiny negative
    variances from the matrix inversion are clamped to zero.
    """
    if not head.fitted:
        raise StateError("GP head has not been fitted")
    phi = rff_features(_hidden_features(model, data.features), head)
    m = phi @ head.beta
    v = np.einsum("nd,de,ne->n", phi, head.covariance, phi)
    if np.any(v < -1e-9):
        raise NumericalError(f"negative posterior variance {v.min():.3e}")
    if np.any(v < 0):
        logger.warning("clamping %d tiny negative variances to 0", int(np.sum(v < 0)))
        v = np.maximum(v, 0.0)
    adjusted = m / np.sqrt(1.0 + head.mean_field_lambda * v)
    logits = np.column_stack([np.zeros_like(adjusted), adjusted])
    return _build_set("sngp", seed, data, logits[None, :, :], [-1])


def train_sngp(
    data: Dataset,
    cfg: TrainConfig,
    hidden_sizes: tuple[int, ...] = (64, 64),
    spectral_bound: float | None = 4.0,
    rff_dim: int = RFF_DIM,
    length_scale: float = RFF_LENGTH_SCALE,
    ridge: float = RIDGE,
) -> tuple[MlpClassifier, SngpHead]:
    """Train the GP stack end to end and fit its Laplace posterior.

    The hidden stack (with spectral normalization) feeds the frozen random
    features; ``beta`` is trained jointly with the hidden weights by
    cross-entropy on the scalar logit. The model's dense output layer is
    kept for structural compatibility but is not part of the GP function.
    The posterior is accumulated in one pass over the training data after
    training.
    """
    if len(data) == 0:
        raise DataError("cannot train on an empty dataset")
    d = data.features.shape[1]
    model = mlp.init_mlp([d, *hidden_sizes, 2], 0.0, spectral_bound, seed=cfg.seed)
    model = MlpClassifier(
        [mlp.Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in model.layers],
        model.dropout_rate,
        model.spectral_bound,
        model.seed,
    )
    rng = make_rng(derive_seed(cfg.seed, "sngp-train"))
    head = init_sngp_head(hidden_sizes[-1], rff_dim, length_scale, ridge,
                          make_rng(derive_seed(cfg.seed, "sngp-head")))

    if model.spectral_bound is not None:
        model.sn_state = [
            linalg.power_iter_init(l.weights, rng, warmup=mlp.SN_WARMUP_ITERS)
            for l in model.layers[:-1]
        ]
        mlp._renormalize_hidden(model, converge=True)

    hidden = model.layers[:-1]
    params = []
    for layer in hidden:
        params.extend([layer.weights, layer.bias])
    params.append(head.beta)
    opt = mlp._Adam(params, cfg.learning_rate, cfg.weight_decay)

    x_all, y_all = data.features, data.labels.astype(np.float64)
    n = len(data)
    scale = np.sqrt(2.0 / head.rff_dim)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, cfg.batch_size):
                idx = perm[start : start + cfg.batch_size]
                xb, yb = x_all[idx], y_all[idx]
                b = len(idx)

                acts, pres = mlp._forward_stack(hidden, xb)
                h = acts[-1]
                angles = h @ head.rff_weights.T + head.rff_phases
                phi = scale * np.cos(angles)
                m = phi @ head.beta
                p = _sigmoid(m)
                signed = np.where(yb == 1.0, -m, m)
                epoch_loss += float(np.sum(np.logaddexp(0.0, signed)))

                d_m = (p - yb) / b
                g_beta = phi.T @ d_m
                d_phi = d_m[:, None] * head.beta[None, :]
                d_h = (-scale * np.sin(angles) * d_phi) @ head.rff_weights
                hidden_grads, _ = mlp._backward_stack(hidden, acts, pres, d_h)

                grads = []
                for gw, gb in hidden_grads:
                    grads.extend([gw, gb])
                grads.append(g_beta)
                opt.step(grads)
                if model.spectral_bound is not None:
                    mlp._renormalize_hidden(model)
        if not np.isfinite(epoch_loss):
            raise NumericalError(f"training loss became non-finite at epoch {epoch}")
        if model.spectral_bound is not None:
            mlp._renormalize_hidden(model, converge=True)
    model.trained = True

    phi_train = rff_features(_hidden_features(model, x_all), head)
    p_train = _sigmoid(phi_train @ head.beta)
    return model, sngp_fit(head, phi_train, p_train, ridge)


def with_score(pred: PredictionSet, kind: str) -> PredictionSet:
    """Recompute the uncertainty column under an alternative score.

    ``kind`` is "one_minus_max" or "entropy"; probabilities and provenance
    are untouched. Useful for sensitivity analyses of OOD detection.
    """
    if kind == "one_minus_max":
        uncertainty = 1.0 - pred.probs.max(axis=1)
    elif kind == "entropy":
        uncertainty = predictive_entropy(pred.probs)
    else:
        raise ConfigError(f"unknown score kind {kind!r}")
    return PredictionSet(
        method=pred.method,
        seed=pred.seed,
        tag=pred.tag,
        labels=pred.labels,
        component_logits=pred.component_logits,
        component_indices=pred.component_indices,
        sample_ids=pred.sample_ids,
        probs=pred.probs,
        uncertainty=uncertainty,
    )
