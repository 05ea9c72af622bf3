"""Synthetic datasets and parametric distribution-shift ladders.

The in-distribution generator is the classic two-interleaved-half-circles
("two moons") construction. Shifted variants are produced by an affine
transform plus optional fresh coordinate noise, and a disjoint third
cluster stands in for a novel class that the classifier has never seen.
Together they form a ladder: id-train / id-val / ood-near / ood-far /
ood-novel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ParseError

__all__ = [
    "Dataset",
    "ShiftConfig",
    "JitterConfig",
    "make_two_moons",
    "apply_shift",
    "make_novel_class",
    "make_ladder",
    "save_dataset",
    "load_dataset",
    "NEAR_SHIFT",
    "FAR_SHIFT",
    "NOVEL_CENTER",
    "NOVEL_STD",
    "MOON_NOISE",
]

# Default moon noise scale; "noise width" for the novel-class separation rule.
MOON_NOISE = 0.1

# Novel-class generator constants: cluster center and spread, chosen so the
# cluster mean sits far outside both moons (>= 5 noise widths by a wide margin).
NOVEL_CENTER = (-2.5, 2.5)
NOVEL_STD = 0.25

# Tumor share of novel-class labels: 7 normal to 1 tumor.
NOVEL_TUMOR_DIVISOR = 8


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, binary labels, and a distribution tag."""

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64, values in {0, 1}
    tag: str

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise DataError(
                f"labels length {labels.shape} does not match {features.shape[0]} feature rows"
            )
        if features.size and not np.all(np.isfinite(features)):
            raise DataError("features contain non-finite entries")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        if not self.tag:
            raise DataError("tag must be non-empty")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class ShiftConfig:
    """Affine shift: scale, then rotate, then translate, then add noise.

    ``noise_inflation`` is a ratio; 1.0 adds nothing, values above 1 add
    fresh i.i.d. Gaussian noise of scale (noise_inflation - 1) per
    coordinate, in feature units. The all-default config is the identity.
    """

    translation: tuple[float, ...] = (0.0, 0.0)
    rotation: float = 0.0
    scale: float = 1.0
    noise_inflation: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigError(f"scale must be positive, got {self.scale}")
        if not self.noise_inflation > 0:
            raise ConfigError(f"noise_inflation must be positive, got {self.noise_inflation}")

    def is_identity(self) -> bool:
        return (
            all(t == 0 for t in self.translation)
            and self.rotation == 0.0
            and self.scale == 1.0
            and self.noise_inflation == 1.0
        )


@dataclass(frozen=True)
class JitterConfig:
    """Color-jitter ranges carried as metadata for external image pipelines.

    No image code lives in this package; these values are simply recorded
    in experiment configs so an external pipeline can apply them.
    """

    brightness: float = 0.0
    contrast: float = 0.0
    saturation: float = 0.1
    hue: float = 0.1

    def __post_init__(self):
        for name in ("brightness", "contrast", "saturation", "hue"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


def make_two_moons(n: int, noise: float, rng: np.random.Generator, tag: str = "id-train") -> Dataset:
    """Sample ``n`` points on two interleaved half circles.

    Class 0 sits on the upper arc (cos t, sin t) and class 1 on the lower
    arc (1 - cos t, 1/2 - sin t), t evenly spaced on [0, pi]; classes are
    balanced as ceil(n/2) / floor(n/2). Gaussian noise of scale ``noise``
    is added per coordinate.
    """
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    if noise < 0:
        raise ConfigError(f"noise must be >= 0, got {noise}")
    n0 = (n + 1) // 2
    n1 = n // 2
    t0 = np.linspace(0.0, math.pi, n0)
    t1 = np.linspace(0.0, math.pi, n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    features = np.concatenate([upper, lower], axis=0)
    if noise > 0 and n > 0:
        features = features + rng.normal(scale=noise, size=features.shape)
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return Dataset(features, labels, tag)


def moon_class_means() -> np.ndarray:
    """Noise-free per-class mean of the half-circle parametrization."""
    m = 2.0 / math.pi
    return np.array([[0.0, m], [1.0, 0.5 - m]])


def apply_shift(
    data: Dataset, cfg: ShiftConfig, new_tag: str, rng: np.random.Generator
) -> Dataset:
    """Transform features by scale -> rotate -> translate (+ fresh noise).

    Labels are kept; the tag is replaced. Rotation is only defined for
    2-D features; higher dimensions rotate in the first two coordinates.
    """
    if len(data) == 0:
        raise DataError("cannot shift an empty dataset")
    x = data.features * cfg.scale
    if cfg.rotation != 0.0:
        c, s = math.cos(cfg.rotation), math.sin(cfg.rotation)
        rot = np.eye(data.features.shape[1])
        rot[0, 0], rot[0, 1], rot[1, 0], rot[1, 1] = c, -s, s, c
        x = x @ rot.T
    t = np.asarray(cfg.translation, dtype=np.float64)
    if t.shape != (x.shape[1],):
        raise DataError(
            f"translation has {t.shape[0]} components, features have {x.shape[1]}"
        )
    x = x + t
    extra = cfg.noise_inflation - 1.0
    if extra > 0:
        x = x + rng.normal(scale=extra, size=x.shape)
    return Dataset(x, data.labels.copy(), new_tag)


def make_novel_class(n: int, rng: np.random.Generator, tag: str = "ood-novel") -> Dataset:
    """Sample a cluster disjoint from both moons, labelled 7:1 normal:tumor.

    The cluster is an isotropic Gaussian at NOVEL_CENTER with scale
    NOVEL_STD; its mean is separated from either moon mean by far more
    than 5x the default moon noise width. The first n - n//8 samples are
    labelled 0 and the remaining n//8 are labelled 1; features are i.i.d.,
    so label order carries no information.
    """
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    features = rng.normal(loc=NOVEL_CENTER, scale=NOVEL_STD, size=(n, 2))
    n_tumor = n // NOVEL_TUMOR_DIVISOR
    labels = np.concatenate(
        [np.zeros(n - n_tumor, dtype=np.int64), np.ones(n_tumor, dtype=np.int64)]
    )
    return Dataset(features, labels, tag)


# Default shift ladder. "near" is a small translation with mildly inflated
# noise; "far" is a large translation plus rotation. Magnitudes were tuned
# once on the default two-moons layout and then frozen.
NEAR_SHIFT = ShiftConfig(translation=(0.4, 0.2), noise_inflation=1.15)
FAR_SHIFT = ShiftConfig(translation=(2.4, 1.2), rotation=math.pi / 6)


@dataclass(frozen=True)
class LadderSpec:
    """Sizes and shift parameters for the default dataset ladder."""

    n_train: int = 1000
    n_val: int = 1000
    n_ood: int = 1000
    n_novel: int = 800
    noise: float = MOON_NOISE
    near: ShiftConfig = field(default_factory=lambda: NEAR_SHIFT)
    far: ShiftConfig = field(default_factory=lambda: FAR_SHIFT)


def make_ladder(spec: LadderSpec, seed: int) -> dict[str, Dataset]:
    """Build the id-train / id-val / ood-near / ood-far / ood-novel ladder.

    Every dataset draws from its own seed-derived stream, so changing one
    size never perturbs the others.
    """
    from .rng import spawn

    train = make_two_moons(spec.n_train, spec.noise, spawn(seed, "data", "id-train"), "id-train")
    val = make_two_moons(spec.n_val, spec.noise, spawn(seed, "data", "id-val"), "id-val")
    base_near = make_two_moons(spec.n_ood, spec.noise, spawn(seed, "data", "ood-near"), "base")
    base_far = make_two_moons(spec.n_ood, spec.noise, spawn(seed, "data", "ood-far"), "base")
    near = apply_shift(base_near, spec.near, "ood-near", spawn(seed, "shift", "ood-near"))
    far = apply_shift(base_far, spec.far, "ood-far", spawn(seed, "shift", "ood-far"))
    novel = make_novel_class(spec.n_novel, spawn(seed, "data", "ood-novel"))
    return {d.tag: d for d in (train, val, near, far, novel)}


def save_dataset(data: Dataset, path) -> None:
    """Write a dataset as CSV: x0,...,x{d-1},label,tag (UTF-8, LF)."""
    d = data.features.shape[1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j}" for j in range(d)] + ["label", "tag"])
        for row, label in zip(data.features, data.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label), data.tag])


def load_dataset(path) -> Dataset:
    """Read a dataset CSV written by :func:`save_dataset`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", line=1) from None
        d = len(header) - 2
        if d < 1 or header != [f"x{j}" for j in range(d)] + ["label", "tag"]:
            raise ParseError(f"unrecognized header {header!r}", line=1)
        rows, labels, tags = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 2:
                raise ParseError(f"expected {d + 2} fields, got {len(row)}", line=lineno)
            try:
                rows.append([float(v) for v in row[:d]])
                labels.append(int(row[d]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            tags.append(row[d + 1])
    if not rows:
        raise ParseError("file contains a header but no samples", line=1)
    if len(set(tags)) != 1:
        raise DataError(f"file mixes tags {sorted(set(tags))}; one dataset per file")
    return Dataset(np.array(rows), np.array(labels), tags[0])
