"""Labeled datasets: synthetic Gaussian classes, IDX image files, contamination,
stratified splits, normalization, and CSV round-trips.

Class labels are positive integers 1..L; the reserved label 0 marks outlier
rows (``OUTLIER``). IDX digit labels 0..9 therefore load as 1..10. CSV files
carry the header ``label,f_1,...,f_p`` and feature values with 17 significant
digits, so a save/load round-trip is exact. Tags record where rows came from
(in memory only; the CSV schema does not carry them).
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "OUTLIER",
    "LabeledDataset",
    "SyntheticSpec",
    "ContaminationSpec",
    "gen_gaussian_classes",
    "inject_contamination",
    "load_idx_images",
    "load_idx_labels",
    "load_idx_dataset",
    "split_stratified",
    "Normalizer",
    "fit_normalizer",
    "save_dataset_csv",
    "load_dataset_csv",
]

OUTLIER = 0

_IDX_IMAGE_MAGIC = 0x00000803
_IDX_LABEL_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    """Feature matrix with integer labels (0 = outlier, 1..L = classes)."""

    features: np.ndarray
    labels: np.ndarray
    tags: tuple[str, ...] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels.ndim != 1:
            raise DataError(f"labels must be 1-D, got shape {self.labels.shape}")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"row count mismatch: {self.features.shape[0]} feature rows, "
                f"{self.labels.shape[0]} labels"
            )
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if np.any(self.labels < 0):
            raise DataError("labels must be >= 0 (0 is the outlier token)")
        if self.tags is not None:
            self.tags = tuple(self.tags)
            if len(self.tags) != self.features.shape[0]:
                raise DataError("one tag per row is required when tags are given")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_labels(self) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unique(self.labels) if v != OUTLIER)

    def rows_for(self, label: int) -> np.ndarray:
        return self.features[self.labels == label]

    def take(self, idx: np.ndarray) -> "LabeledDataset":
        tags = tuple(self.tags[i] for i in idx) if self.tags is not None else None
        return LabeledDataset(self.features[idx], self.labels[idx], tags)


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian mixture description: one mean (and optional covariance) per class."""

    means: tuple
    n_per_class: int
    seed: int = 0
    covariances: tuple | None = None
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        means = tuple(np.asarray(m, dtype=np.float64).ravel() for m in self.means)
        object.__setattr__(self, "means", means)
        if not means:
            raise ConfigError("at least one class mean is required")
        p = means[0].shape[0]
        if any(m.shape[0] != p for m in means):
            raise ConfigError("all class means must share one dimension")
        if self.n_per_class < 1:
            raise ConfigError(f"n_per_class must be >= 1, got {self.n_per_class}")
        if self.covariances is not None:
            covs = tuple(np.asarray(c, dtype=np.float64) for c in self.covariances)
            if len(covs) != len(means):
                raise ConfigError("one covariance per class is required when given")
            for i, cov in enumerate(covs):
                if cov.shape != (p, p):
                    raise ConfigError(f"covariance {i} shape {cov.shape} != ({p}, {p})")
                if not np.allclose(cov, cov.T, atol=1e-10):
                    raise ConfigError(f"covariance {i} is not symmetric")
                try:
                    np.linalg.cholesky(cov)
                except np.linalg.LinAlgError:
                    raise ConfigError(f"covariance {i} is not positive definite") from None
            object.__setattr__(self, "covariances", covs)
        if self.labels is not None:
            labels = tuple(int(v) for v in self.labels)
            if len(labels) != len(means) or any(v <= 0 for v in labels):
                raise ConfigError("labels must be positive, one per class")
            if len(set(labels)) != len(labels):
                raise ConfigError(f"duplicate class labels {labels}")
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.means[0].shape[0]

    @property
    def class_labels(self) -> tuple[int, ...]:
        return self.labels if self.labels is not None else tuple(range(1, len(self.means) + 1))


def gen_gaussian_classes(spec: SyntheticSpec) -> LabeledDataset:
    """Draw spec.n_per_class points per class; classes labeled 1..L by default."""
    rng = np.random.default_rng(spec.seed)
    p = spec.dim
    covs = spec.covariances if spec.covariances is not None else [np.eye(p)] * len(spec.means)
    feats = []
    labs = []
    tags = []
    for mean, cov, label in zip(spec.means, covs, spec.class_labels):
        feats.append(rng.multivariate_normal(mean, cov, size=spec.n_per_class))
        labs.append(np.full(spec.n_per_class, label, dtype=np.int64))
        tags.extend([f"synthetic-class-{label}"] * spec.n_per_class)
    return LabeledDataset(np.vstack(feats), np.concatenate(labs), tuple(tags))


@dataclass(frozen=True)
class ContaminationSpec:
    """Contamination rate plus the pool outlier rows are drawn from."""

    rate: float
    outlier_features: np.ndarray
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"contamination rate must lie in [0, 1), got {self.rate}")
        pool = np.asarray(self.outlier_features, dtype=np.float64)
        if pool.ndim != 2:
            raise ConfigError(f"outlier pool must be 2-D, got shape {pool.shape}")
        object.__setattr__(self, "outlier_features", pool)


def inject_contamination(inliers: LabeledDataset, spec: ContaminationSpec) -> LabeledDataset:
    """Append outliers so they form ``spec.rate`` of the result, then shuffle.

    The outlier count solves o / (m + o) = rate, rounded to the nearest
    integer; outlier rows get label 0. Row order is shuffled even at rate 0.
    """
    if np.any(inliers.labels == OUTLIER):
        raise DataError("inlier dataset already contains outlier-labeled rows")
    rng = np.random.default_rng(spec.seed)
    m = inliers.n
    o = int(round(spec.rate * m / (1.0 - spec.rate)))
    if o == 0:
        return inliers.take(rng.permutation(m))
    pool = spec.outlier_features
    if pool.shape[1] != inliers.dim:
        raise DataError(
            f"outlier pool dim {pool.shape[1]} != inlier feature dim {inliers.dim}"
        )
    if o > pool.shape[0]:
        raise DataError(f"need {o} outlier rows but the pool holds {pool.shape[0]}")
    picks = rng.choice(pool.shape[0], size=o, replace=False)
    feats = np.vstack([inliers.features, pool[picks]])
    labs = np.concatenate([inliers.labels, np.full(o, OUTLIER, dtype=np.int64)])
    tags = None
    if inliers.tags is not None:
        tags = inliers.tags + ("outlier",) * o
    combined = LabeledDataset(feats, labs, tags)
    return combined.take(rng.permutation(combined.n))


# -- IDX binary files -----------------------------------------------------------

def _read_idx(path: str, expect_magic: int) -> bytes:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise DataError(f"{path}: truncated file, no room for the magic number")
    (magic,) = struct.unpack(">i", raw[:4])
    if magic != expect_magic:
        raise DataError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expect_magic:08x}"
        )
    return raw


def load_idx_images(path: str) -> np.ndarray:
    """Read an IDX image file into an (n, rows*cols) float array scaled to [0, 1]."""
    raw = _read_idx(path, _IDX_IMAGE_MAGIC)
    if len(raw) < 16:
        raise DataError(f"{path}: truncated file, header incomplete")
    count, rows, cols = struct.unpack(">iii", raw[4:16])
    if count < 0 or rows <= 0 or cols <= 0:
        raise DataError(f"{path}: implausible dimensions ({count}, {rows}, {cols})")
    need = 16 + count * rows * cols
    if len(raw) < need:
        raise DataError(
            f"{path}: truncated file, payload holds {len(raw) - 16} bytes "
            f"but the header promises {need - 16}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def load_idx_labels(path: str) -> np.ndarray:
    """Read an IDX label file into an int array of raw labels."""
    raw = _read_idx(path, _IDX_LABEL_MAGIC)
    if len(raw) < 8:
        raise DataError(f"{path}: truncated file, header incomplete")
    (count,) = struct.unpack(">i", raw[4:8])
    if count < 0:
        raise DataError(f"{path}: implausible count {count}")
    if len(raw) < 8 + count:
        raise DataError(
            f"{path}: truncated file, payload holds {len(raw) - 8} labels "
            f"but the header promises {count}"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8).astype(np.int64)


def load_idx_dataset(images_path: str, labels_path: str) -> LabeledDataset:
    """Pair image and label files; raw labels shift up by 1 (0 stays the outlier token)."""
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DataError(
            f"image/label count mismatch: {images.shape[0]} images, {labels.shape[0]} labels"
        )
    return LabeledDataset(images, labels + 1, ("idx",) * images.shape[0])


# -- splits and normalization ---------------------------------------------------

def split_stratified(
    ds: LabeledDataset,
    fractions: tuple[float, float, float],
    seed,
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Shuffle and split per class by fractions summing to 1.

    Outlier-labeled rows, if present, all land in the last (test) split.
    ``seed`` may be an int or a numpy Generator.
    """
    fracs = tuple(float(f) for f in fractions)
    if len(fracs) != 3 or any(f < 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must be 3 non-negative values summing to 1, got {fracs}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for label in ds.class_labels():
        idx = np.flatnonzero(ds.labels == label)
        idx = idx[rng.permutation(idx.shape[0])]
        n = idx.shape[0]
        b1 = int(round(fracs[0] * n))
        b2 = int(round((fracs[0] + fracs[1]) * n))
        parts[0].append(idx[:b1])
        parts[1].append(idx[b1:b2])
        parts[2].append(idx[b2:])
    out_idx = np.flatnonzero(ds.labels == OUTLIER)
    if out_idx.size:
        parts[2].append(out_idx)
    result = []
    for chunk in parts:
        sel = np.concatenate(chunk) if chunk else np.empty(0, dtype=np.int64)
        result.append(ds.take(sel) if sel.size else
                      LabeledDataset(np.empty((0, ds.dim)), np.empty(0, dtype=np.int64)))
    return result[0], result[1], result[2]


@dataclass(frozen=True)
class Normalizer:
    """Per-feature affine transform fit on training data, reused at test time."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.mean.shape[0]:
            raise DataError(
                f"feature shape {x.shape} incompatible with normalizer dim {self.mean.shape[0]}"
            )
        return (x - self.mean) / self.std

    def invert(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.mean.shape[0]:
            raise DataError(
                f"feature shape {x.shape} incompatible with normalizer dim {self.mean.shape[0]}"
            )
        return x * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Normalizer":
        return cls(
            np.asarray(doc["mean"], dtype=np.float64),
            np.asarray(doc["std"], dtype=np.float64),
        )


def fit_normalizer(features: np.ndarray) -> Normalizer:
    """Per-feature mean/std; zero-variance features keep unit scale (with a warning)."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError("normalizer needs a 2-D array with at least 2 rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    flat = std < 1e-12
    if np.any(flat):
        warnings.warn(
            f"{int(flat.sum())} zero-variance feature(s) centered but not scaled",
            stacklevel=2,
        )
        std = np.where(flat, 1.0, std)
    return Normalizer(mean, std)


# -- CSV round-trips --------------------------------------------------------------

def save_dataset_csv(ds: LabeledDataset, path: str) -> None:
    cols = ",".join(f"f_{j + 1}" for j in range(ds.dim))
    lines = [f"label,{cols}"]
    for label, row in zip(ds.labels, ds.features):
        vals = ",".join(format(v, ".17g") for v in row)
        lines.append(f"{int(label)},{vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset_csv(path: str) -> LabeledDataset:
    with open(path) as fh:
        header = fh.readline().strip()
        fields = header.split(",")
        if not fields or fields[0] != "label":
            raise DataError(f"{path}: expected header starting with 'label', got {header!r}")
        p = len(fields) - 1
        if p < 1 or fields[1:] != [f"f_{j + 1}" for j in range(p)]:
            raise DataError(f"{path}: malformed feature columns in header {header!r}")
        labels = []
        rows = []
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != p + 1:
                raise DataError(f"{path}:{ln}: expected {p + 1} fields, got {len(parts)}")
            try:
                labels.append(int(parts[0]))
                rows.append([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{ln}: {exc}") from exc
    if not rows:
        return LabeledDataset(np.empty((0, p)), np.empty(0, dtype=np.int64))
    return LabeledDataset(np.asarray(rows), np.asarray(labels, dtype=np.int64))
