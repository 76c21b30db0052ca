"""Synthetic observation sets: generation, splitting, target scaling, CSV I/O."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .physics import N_FREQUENCIES, PhysicsParams, feature_vector

TEMPERATURES = (5.0, 15.0, 25.0, 35.0, 45.0)
O2_RANGE = (0.0, 100.0)
T_RANGE = (5.0, 45.0)
CSV_HEADER = [f"r{i}" for i in range(1, N_FREQUENCIES + 1)] + ["o2_pct_air", "temp_c"]


@dataclass(frozen=True)
class Normalization:
    """Affine target scaling onto [0, 1] using the fixed domain bounds."""
    o2_min: float = O2_RANGE[0]
    o2_max: float = O2_RANGE[1]
    t_min: float = T_RANGE[0]
    t_max: float = T_RANGE[1]

    @property
    def spans(self) -> np.ndarray:
        return np.array([self.o2_max - self.o2_min, self.t_max - self.t_min])

    @property
    def lows(self) -> np.ndarray:
        return np.array([self.o2_min, self.t_min])

    def normalize(self, y):
        return (np.asarray(y, dtype=float) - self.lows) / self.spans

    def denormalize(self, y_norm):
        return np.asarray(y_norm, dtype=float) * self.spans + self.lows


@dataclass(frozen=True)
class Dataset:
    """Ordered observations; ``features`` is (m, 16), ``o2``/``temp`` are (m,).

    ``index`` holds each row's position in the originally generated set so
    partitions can be checked against each other.
    """
    features: np.ndarray
    o2: np.ndarray
    temp: np.ndarray
    index: np.ndarray = None
    split_tag: str = "all"
    normalization: Normalization = field(default_factory=Normalization)

    def __post_init__(self):
        if self.index is None:
            object.__setattr__(self, "index", np.arange(len(self.o2)))

    def __len__(self):
        return len(self.o2)

    @property
    def targets(self) -> np.ndarray:
        """Physical targets as an (m, 2) [O2, T] matrix."""
        return np.column_stack([self.o2, self.temp])

    def take(self, rows, split_tag) -> "Dataset":
        return replace(self, features=self.features[rows], o2=self.o2[rows],
                       temp=self.temp[rows], index=self.index[rows], split_tag=split_tag)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for feats, o2, t in zip(self.features, self.o2, self.temp):
                w.writerow([f"{v:.17g}" for v in feats] + [f"{o2:.17g}", f"{t:.17g}"])

    @classmethod
    def from_csv(cls, path, split_tag="all") -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != CSV_HEADER:
                raise ValueError(f"{path}: unexpected header {header[:3]}...")
            rows = np.array([[float(v) for v in row] for row in reader], dtype=float)
        rows = rows.reshape(-1, len(CSV_HEADER))
        return cls(rows[:, :N_FREQUENCIES].copy(), rows[:, -2].copy(), rows[:, -1].copy(),
                   split_tag=split_tag)


def generate(params: PhysicsParams, m: int, seed: int, noise_sigma: float = 0.0) -> Dataset:
    """Draw ``m`` observations: O2 ~ U[0, 100] % air, T uniform over the five levels."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    o2 = rng.uniform(*O2_RANGE, size=m)
    temp = np.asarray(TEMPERATURES)[rng.integers(0, len(TEMPERATURES), size=m)]
    features = feature_vector(params, temp, o2)
    if noise_sigma > 0:
        features = features + rng.normal(0.0, noise_sigma, size=features.shape)
    return Dataset(features, o2, temp)


def split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random permutation; the first floor(fraction*m) rows go to train."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    m = len(ds)
    n_train = int(np.floor(train_fraction * m))
    if n_train == 0 or n_train == m:
        raise ValueError(f"split of {m} observations at {train_fraction} leaves a partition empty")
    perm = np.random.default_rng(seed).permutation(m)
    return ds.take(perm[:n_train], "train"), ds.take(perm[n_train:], "dev")


def normalize_targets(ds: Dataset) -> np.ndarray:
    """Targets scaled to [0, 1]: o2/100 and (temp - 5)/40."""
    return ds.normalization.normalize(ds.targets)
