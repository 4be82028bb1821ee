"""Toy datasets: the Gaussian-mixture "original" data, scarce imbalanced
collected samples, inflation by repetition and hybrid mixing.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

PROVENANCES = ("original", "collected", "synthetic", "hybrid")


@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    num_classes: int
    provenance: str = "original"

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        y = np.array(self.y, dtype=np.int64)
        if x.ndim != 2:
            x = x.reshape(len(y), -1)
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.num_classes)

    def subset(self, index, provenance=None) -> "Dataset":
        return Dataset(self.x[index], self.y[index], self.num_classes,
                       provenance or self.provenance)


@dataclass(frozen=True, eq=False)
class HybridDataset:
    base: Dataset
    alpha: float
    inflation_factor: int
    n_collected: int
    n_synthetic: int
    seed: int

    def __len__(self) -> int:
        return len(self.base)


def corner_means(num_classes: int, separation: float = 2.5) -> np.ndarray:
    """Class centres on a circle; for four classes these are the square corners (+-s, +-s)."""
    angles = np.pi / 4 + 2 * np.pi * np.arange(num_classes) / num_classes
    r = separation * np.sqrt(2.0)
    return np.stack([r * np.cos(angles), r * np.sin(angles)], axis=1)


def make_gaussian_mixture(num_classes: int, n_per_class, means=None,
                          covariance_scale: float = 1.0, seed: int = 0) -> Dataset:
    """Draw ``n_per_class[c]`` points from an isotropic Gaussian around ``means[c]``."""
    if num_classes < 2:
        raise ValueError("need at least two classes")
    counts = np.broadcast_to(np.asarray(n_per_class, dtype=np.int64), (num_classes,))
    if (counts <= 0).any():
        raise ValueError("class counts must be positive")
    if not covariance_scale > 0 or not np.isfinite(covariance_scale):
        raise ValueError(f"covariance_scale must be positive, got {covariance_scale}")
    means = corner_means(num_classes) if means is None else np.asarray(means, dtype=np.float64)
    if means.shape[0] != num_classes:
        raise ValueError(f"{means.shape[0]} means for {num_classes} classes")
    rng = np.random.default_rng(seed)
    std = np.sqrt(covariance_scale)
    xs, ys = [], []
    for c in range(num_classes):
        noise = rng.standard_normal((counts[c], means.shape[1]))
        xs.append(means[c] + std * noise)
        ys.append(np.full(counts[c], c))
    return Dataset(np.concatenate(xs), np.concatenate(ys), num_classes, "original")


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified split: each class contributes round(test_fraction * n_c) test points."""
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in range(ds.num_classes):
        idx = np.flatnonzero(ds.y == c)
        idx = idx[rng.permutation(idx.size)]
        k = int(round(test_fraction * idx.size))
        test_idx.append(np.sort(idx[:k]))
        train_idx.append(np.sort(idx[k:]))
    return ds.subset(np.concatenate(train_idx)), ds.subset(np.concatenate(test_idx))


def allocate(total: int, weights) -> np.ndarray:
    """Largest-remainder apportionment of ``total`` items by ``weights``.

    Ties in the remainder go to the lower class index.
    """
    w = np.asarray(weights, dtype=np.float64)
    if (w < 0).any() or w.sum() <= 0:
        raise ValueError("weights must be non-negative and not all zero")
    quota = total * w / w.sum()
    base = np.floor(quota).astype(np.int64)
    short = total - int(base.sum())
    order = sorted(range(w.size), key=lambda i: (-(quota[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def geometric_profile(num_classes: int, ratio: float = 2.0) -> np.ndarray:
    """Long-tail weights ratio^(C-1), ..., ratio, 1."""
    return ratio ** np.arange(num_classes - 1, -1, -1, dtype=np.float64)


def sample_collected(original: Dataset, rho: float, weights, seed: int) -> Dataset:
    """Sample round(rho * |original|) examples, per class by largest remainder, without replacement."""
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    total = int(round(rho * len(original)))
    want = allocate(total, weights)
    have = original.class_counts
    if want.size != original.num_classes:
        raise ValueError(f"{want.size} weights for {original.num_classes} classes")
    short = np.flatnonzero(want > have)
    if short.size:
        c = int(short[0])
        raise ValueError(f"class {c} needs {want[c]} examples but holds only {have[c]}")
    rng = np.random.default_rng(seed)
    picks = []
    for c in range(original.num_classes):
        idx = np.flatnonzero(original.y == c)
        picks.append(np.sort(rng.choice(idx, size=want[c], replace=False)))
    return original.subset(np.concatenate(picks), "collected")


def default_inflation(n_synthetic: int, n_collected: int) -> int:
    """floor(|D_s| / |D_c|), never below 1."""
    if n_collected <= 0:
        raise ValueError("collected data is empty")
    return max(1, n_synthetic // n_collected)


def inflate(collected: Dataset, factor: int) -> Dataset:
    """N contiguous copies of the collected sequence."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"inflation factor must be a positive integer, got {factor}")
    n = int(factor)
    return Dataset(np.tile(collected.x, (n, 1)), np.tile(collected.y, n),
                   collected.num_classes, collected.provenance)


def mix(inflated: Dataset, synthetic: Dataset, seed: int, inflation_factor: int = 1) -> HybridDataset:
    """Concatenate and shuffle; alpha = |inflated| / (|inflated| + |synthetic|)."""
    if len(synthetic) == 0:
        raise ValueError("synthetic dataset is empty")
    if len(inflated) == 0:
        raise ValueError("collected dataset is empty")
    if inflated.dim != synthetic.dim or inflated.num_classes != synthetic.num_classes:
        raise ValueError("inflated and synthetic data differ in dimension or class count")
    if len(inflated) % inflation_factor:
        raise ValueError(f"{len(inflated)} examples are not {inflation_factor} copies of a set")
    x = np.concatenate([inflated.x, synthetic.x])
    y = np.concatenate([inflated.y, synthetic.y])
    perm = np.random.default_rng(seed).permutation(len(y))
    base = Dataset(x[perm], y[perm], inflated.num_classes, "hybrid")
    n_inf, n_syn = len(inflated), len(synthetic)
    return HybridDataset(base, n_inf / (n_inf + n_syn), int(inflation_factor),
                         n_inf // inflation_factor, n_syn, seed)


def write_csv(ds: Dataset, path) -> None:
    """Header ``y,x0,x1,...``; 17 significant digits so floats round-trip exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"] + [f"x{i}" for i in range(ds.dim)])
        for xi, yi in zip(ds.x, ds.y):
            w.writerow([int(yi)] + [format(v, ".17g") for v in xi])


def read_csv(path, num_classes: int, provenance: str = "original") -> Dataset:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[0] != "y":
        raise ValueError(f"{path}: expected header starting with 'y'")
    dim = len(header) - 1
    y = np.array([int(r[0]) for r in body], dtype=np.int64)
    x = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64).reshape(len(body), dim)
    return Dataset(x, y, num_classes, provenance)


def batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled index batches covering ``range(n)``; the last batch may be short."""
    perm = rng.permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


def concat_datasets(parts: Sequence[Dataset], provenance: str) -> Dataset:
    return Dataset(np.concatenate([p.x for p in parts]), np.concatenate([p.y for p in parts]),
                   parts[0].num_classes, provenance)
