"""Spectral-norm estimation and weight rescaling, checked against SVD.

Walks through the power-iteration estimator on known matrices, shows the
rescaling step that caps a matrix's largest singular value, and then
trains a small classifier under a hard spectral constraint while
recording the exact (SVD) norm of every hidden layer after every epoch.
"""

import numpy as np

from uqlab.data import make_two_moons
from uqlab.linalg import normalize_spectral, spectral_norm_estimate
from uqlab.mlp import TrainConfig, init_mlp, train
from uqlab.rng import make_rng


def svd_norm(w):
    return np.linalg.svd(w, compute_uv=False)[0]


print("== estimator sanity on matrices with known spectra ==")
print(f"identity 3x3      -> {spectral_norm_estimate(np.eye(3), 50, make_rng(0)):.12f}")
print(f"diag(3, 1)        -> {spectral_norm_estimate(np.diag([3.0, 1.0]), 50, make_rng(0)):.12f}")

w = make_rng(1).standard_normal((40, 30))
est = spectral_norm_estimate(w, 50, make_rng(2))
print(f"random 40x30      -> power iteration {est:.9f}  vs SVD {svd_norm(w):.9f}")

print("\n== rescaling into a bound ==")
for bound in (2.0, 1.0, 0.5):
    scaled = normalize_spectral(w, bound, 50, make_rng(3))
    print(f"bound {bound:4.2f}: norm after rescaling = {svd_norm(scaled):.6f}")

print("\n== constraint held throughout training ==")
data = make_two_moons(1000, 0.1, make_rng(4))
model = init_mlp([2, 64, 64, 2], spectral_bound=0.95, seed=5)
worst = []


def record(epoch, m):
    worst.append(max(svd_norm(layer.weights) for layer in m.layers[:-1]))


train(model, data, TrainConfig(epochs=30, seed=6), on_epoch_end=record)
print(f"30 epochs with bound 0.95; per-epoch max SVD norm in "
      f"[{min(worst):.6f}, {max(worst):.6f}]")
print("every checkpoint satisfies norm <= 0.951:", max(worst) <= 0.951)
