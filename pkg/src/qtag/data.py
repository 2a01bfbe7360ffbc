"""Event ingestion, standardisation, PCA, subsampling and synthetic events."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ConfigError, ParseError


class Event(NamedTuple):
    features: np.ndarray
    label: int


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled events stored column-wise: ``X`` is (count, F), ``y`` in {-1, +1}."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, 0)
        if X.ndim != 2:
            raise ConfigError("features must be a 2-D array")
        y = np.asarray(self.y).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise ConfigError("feature and label counts differ")
        if not np.all(np.isfinite(X)):
            raise ConfigError("features contain NaN or Inf")
        if y.size and not np.all(np.isin(y, (-1, 1))):
            raise ConfigError("labels must be -1 or +1")
        object.__setattr__(self, "X", _frozen(X, np.float64))
        object.__setattr__(self, "y", _frozen(y, np.int64))

    @classmethod
    def empty(cls, feature_count: int) -> "Dataset":
        return cls(np.zeros((0, feature_count)), np.zeros(0, dtype=np.int64))

    @property
    def feature_count(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]

    def __iter__(self) -> Iterator[Event]:
        for x, label in zip(self.X, self.y):
            yield Event(x, int(label))

    def take(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[indices], self.y[indices])

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.X.shape, dtype="<u8").tobytes())
        h.update(np.ascontiguousarray(self.X, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.y, dtype="<i8").tobytes())
        return h.hexdigest()


def _require_nonempty(d: Dataset):
    if len(d) == 0:
        raise ConfigError("dataset is empty")


def load_events(path) -> Dataset:
    """Read the event CSV format (``label,f0,...,f{F-1}`` header)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("missing header", line=1, path=str(path)) from None
        if not header or header[0].strip() != "label":
            raise ParseError("header must start with 'label'", line=1, path=str(path))
        width = len(header)
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(
                    f"expected {width} columns, got {len(row)}", line=lineno, path=str(path)
                )
            try:
                label = int(row[0])
                feats = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ParseError(f"non-numeric cell ({exc})", line=lineno, path=str(path)) from None
            if label not in (-1, 1):
                raise ParseError(f"label {label} not in {{-1, 1}}", line=lineno, path=str(path))
            if not all(np.isfinite(feats)):
                raise ParseError("non-finite feature", line=lineno, path=str(path))
            labels.append(label)
            rows.append(feats)
    if not rows:
        return Dataset.empty(width - 1)
    return Dataset(np.array(rows), np.array(labels))


def write_events(d: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["label"] + [f"f{i}" for i in range(d.feature_count)]) + "\n")
        for x, label in zip(d.X, d.y):
            fh.write(f"{int(label)}," + ",".join(repr(float(v)) for v in x) + "\n")


@dataclass(frozen=True, eq=False)
class ScalerParams:
    means: np.ndarray
    stdevs: np.ndarray


def fit_standardizer(d: Dataset) -> ScalerParams:
    _require_nonempty(d)
    means = d.X.mean(axis=0)
    stdevs = d.X.std(axis=0)
    # constant columns would divide by zero
    stdevs = np.where(stdevs > 0, stdevs, 1.0)
    return ScalerParams(_frozen(means, np.float64), _frozen(stdevs, np.float64))


def apply_standardizer(d: Dataset, s: ScalerParams) -> Dataset:
    if d.feature_count != s.means.shape[0]:
        raise ConfigError(
            f"dataset has {d.feature_count} features, scaler expects {s.means.shape[0]}"
        )
    return Dataset((d.X - s.means) / s.stdevs, d.y)


@dataclass(frozen=True, eq=False)
class PcaTransform:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]


def fit_pca(d: Dataset, k: int) -> PcaTransform:
    """Top-``k`` principal axes from the SVD of the mean-centred data.

    Each component is signed so its largest-magnitude entry is positive.
    Explained variances use the population (1/count) normalisation.
    """
    _require_nonempty(d)
    count, F = d.X.shape
    if not 1 <= k <= min(F, count):
        raise ConfigError(f"k={k} outside [1, {min(F, count)}]", path="pca_k")
    mean = d.X.mean(axis=0)
    _, s, vt = np.linalg.svd(d.X - mean, full_matrices=False)
    comps = vt[:k].copy()
    pivots = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), pivots])
    comps *= signs[:, None]
    var = s[:k] ** 2 / count
    return PcaTransform(_frozen(mean, np.float64), _frozen(comps, np.float64), _frozen(var, np.float64))


def apply_pca(d: Dataset, t: PcaTransform) -> Dataset:
    if d.feature_count != t.mean.shape[0]:
        raise ConfigError(
            f"dataset has {d.feature_count} features, transform expects {t.mean.shape[0]}"
        )
    if len(d) == 0:
        return Dataset.empty(t.k)
    return Dataset((d.X - t.mean) @ t.components.T, d.y)


@dataclass(frozen=True)
class SyntheticSpec:
    feature_count: int
    informative_count: int
    class_separation: float
    seed: int
    count: int

    def __post_init__(self):
        if self.feature_count < 1:
            raise ConfigError("must be >= 1", path="feature_count")
        if not 0 <= self.informative_count <= self.feature_count:
            raise ConfigError("must lie in [0, feature_count]", path="informative_count")
        if not (np.isfinite(self.class_separation) and self.class_separation >= 0):
            raise ConfigError("must be finite and >= 0", path="class_separation")
        if self.count < 1:
            raise ConfigError("must be >= 1", path="count")


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Class-conditional unit Gaussians, means at +-separation/2 on the informative axes."""
    rng = np.random.default_rng(spec.seed)
    y = rng.choice(np.array([-1, 1]), size=spec.count)
    X = rng.standard_normal((spec.count, spec.feature_count))
    X[:, : spec.informative_count] += 0.5 * spec.class_separation * y[:, None]
    return Dataset(X, y)


def subsample_indices(count: int, n: int, seed: int) -> np.ndarray:
    if not 1 <= n <= count:
        raise ConfigError(f"cannot draw {n} events from {count}", path="n_train_per_member")
    rng = np.random.default_rng(seed)
    return rng.choice(count, size=n, replace=False)


def subsample(d: Dataset, n: int, seed: int) -> Dataset:
    return d.take(subsample_indices(len(d), n, seed))


def train_test_split(d: Dataset, test_size: int, seed: int) -> tuple[Dataset, Dataset]:
    if not 1 <= test_size < len(d):
        raise ConfigError(f"test size {test_size} must be in [1, {len(d) - 1}]", path="evaluation.test_size")
    perm = np.random.default_rng(seed).permutation(len(d))
    return d.take(np.sort(perm[test_size:])), d.take(np.sort(perm[:test_size]))
