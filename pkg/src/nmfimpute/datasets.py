"""Labeled numeric datasets: CSV ingestion, scaling, splitting and corruption."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, MaskError

MASK_RETRY_CAP = 100


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # N x d
    labels: np.ndarray
    attribute_names: tuple[str, ...] | None = None
    name: str = ""

    def __post_init__(self):
        F = np.asarray(self.features, dtype=np.float64)
        if F.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {F.shape}")
        if not np.all(np.isfinite(F)):
            raise DataError("features contain non-finite values")
        labels = np.asarray(self.labels)
        if labels.shape != (F.shape[0],):
            raise DataError(f"{labels.shape[0]} labels for {F.shape[0]} rows")
        object.__setattr__(self, "features", F)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, index) -> "Dataset":
        return replace(self, features=self.features[index], labels=self.labels[index])


def load_csv(path, label_column: int = -1, delimiter: str = ",",
             has_header: bool = False, name: str | None = None) -> Dataset:
    """Read a CSV with one labeled point per row.

    ``label_column`` may be negative to count from the right. Labels are
    kept as strings.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh, delimiter=delimiter) if row]
    header = None
    if has_header:
        if not rows:
            raise DataError(f"{path}: header expected but file is empty")
        header, rows = rows[0], rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    if not -width <= label_column < width:
        raise DataError(f"{path}: label column {label_column} outside {width} columns")
    lc = label_column % width
    feats, labels = [], []
    for i, row in enumerate(rows):
        line = i + 1 + (1 if has_header else 0)
        if len(row) != width:
            raise DataError(f"{path}: line {line} has {len(row)} fields, expected {width}")
        values = []
        for j, cell in enumerate(row):
            if j == lc:
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise DataError(f"{path}: line {line}, column {j}: cannot parse {cell!r}") from None
        feats.append(values)
        labels.append(row[lc].strip())
    names = None
    if header is not None:
        names = tuple(h.strip() for j, h in enumerate(header) if j != lc)
    return Dataset(np.array(feats, dtype=np.float64), np.array(labels),
                   names, name if name is not None else path.stem)


@dataclass(frozen=True)
class NormalizationStats:
    minimum: np.ndarray
    maximum: np.ndarray


def fit_normalizer(train: Dataset) -> NormalizationStats:
    return NormalizationStats(train.features.min(axis=0), train.features.max(axis=0))


def apply_normalizer(stats: NormalizationStats, data: Dataset) -> tuple[Dataset, int]:
    """Min-max scale with training statistics.

    Constant training attributes map to 0. Values above the training max
    are left above 1; values below the training min are clamped to 0.

    Returns the scaled dataset and the number of clamped entries.
    """
    span = stats.maximum - stats.minimum
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (data.features - stats.minimum) / safe, 0.0)
    clamped = int(np.count_nonzero(scaled < 0))
    scaled = np.maximum(scaled, 0.0)
    return replace(data, features=scaled), clamped


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0


def split(ds: Dataset, spec: SplitSpec, rng: np.random.Generator | None = None):
    """Seeded shuffle, then the first ``round(N * train_fraction)`` rows train."""
    n = len(ds)
    if n < 2:
        raise ConfigError(f"need at least 2 points to split, got {n}")
    if not 0 < spec.train_fraction < 1:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {spec.train_fraction}")
    n_train = int(round(n * spec.train_fraction))
    if n_train < 1 or n_train >= n:
        raise ConfigError(f"train_fraction {spec.train_fraction} leaves an empty side for N={n}")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    order = rng.permutation(n)
    return ds.subset(np.sort(order[:n_train])), ds.subset(np.sort(order[n_train:]))


def generate_mask(d: int, t: float, rng: np.random.Generator) -> np.ndarray:
    """Attribute ``i`` is missing iff its uniform draw falls below ``t``.

    Fully missing outcomes are redrawn up to :data:`MASK_RETRY_CAP` times.
    """
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    if not 0 <= t <= 1:
        raise ConfigError(f"threshold must lie in [0, 1], got {t}")
    for _ in range(MASK_RETRY_CAP):
        mask = rng.random(d) >= t
        if mask.any():
            return mask
    raise MaskError(f"could not draw a mask with an observed attribute in {MASK_RETRY_CAP} tries (t={t})")


class Substitution(str, enum.Enum):
    ZERO = "zero"
    MEAN = "mean"
    RANDOM = "random"


def substitute(values, mask, strategy: Substitution, train_means=None,
               rng: np.random.Generator | None = None) -> np.ndarray:
    """Return a copy of ``values`` with the missing entries filled in."""
    out = np.array(values, dtype=np.float64)
    missing = ~np.asarray(mask, dtype=bool)
    strategy = Substitution(strategy)
    if strategy is Substitution.ZERO:
        out[missing] = 0.0
    elif strategy is Substitution.MEAN:
        if train_means is None:
            raise ConfigError("mean substitution needs training means")
        out[missing] = np.asarray(train_means, dtype=np.float64)[missing]
    else:
        if rng is None:
            raise ConfigError("random substitution needs a generator")
        draws = rng.random(out.shape[0])
        out[missing] = draws[missing]
    return out


# Synthetic fixtures

def make_scurve(n: int = 500, seed: int = 0, noise: float = 0.0) -> np.ndarray:
    """3 x n nonnegative S-shaped point cloud (shifted into the positive octant)."""
    rng = np.random.default_rng(seed)
    t = 3 * np.pi * (rng.random(n) - 0.5)
    x = np.sin(t)
    y = 2.0 * rng.random(n)
    z = np.sign(t) * (np.cos(t) - 1)
    P = np.vstack([x + 1.0, y, z + 2.0])
    if noise:
        P = P + noise * rng.standard_normal(P.shape)
    return np.maximum(P, 0.0)


def make_planted_classes(n: int = 300, d: int = 12, r: int = 4, seed: int = 0,
                         separation: float = 1.0, noise: float = 0.02) -> Dataset:
    """Two classes whose nonnegative features share a planted low-rank basis.

    Each class draws coefficients around its own center; features are the
    basis times the coefficients plus a little clipped noise.
    """
    rng = np.random.default_rng(seed)
    basis = rng.random((d, r))
    centers = rng.random((2, r)) * separation
    labels = rng.integers(0, 2, n)
    coef = np.abs(centers[labels] + 0.25 * rng.standard_normal((n, r)))
    X = coef @ basis.T + noise * rng.standard_normal((n, d))
    return Dataset(np.maximum(X, 0.0), labels.astype(str), name="planted")
