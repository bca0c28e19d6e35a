"""Classifier-based predictive-set baselines: probability scaling and APS.

Both consume per-class probability rows from a shared softmax classifier.
Scaling adds classes in descending probability until the retained mass
reaches 1 - alpha. APS calibrates a mass threshold on held-out labeled rows:
the calibration score of a row is the cumulative sorted probability through
its true class, the threshold is the ceil((n+1)(1-alpha))-th smallest score
(clamped to 1 when that index exceeds n), and test sets include classes until
the cumulative mass reaches the threshold. Neither baseline can return an
empty set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .conformal import PredictiveSet
from .errors import ConfigError, DataError
from .nn import Adam, Mlp, MlpSpec

__all__ = [
    "ClassifierConfig",
    "SoftmaxClassifier",
    "train_softmax_classifier",
    "scaling_set",
    "ApsCalibration",
    "aps_calibrate",
    "aps_set",
    "save_prob_matrix",
    "load_prob_matrix",
]

_PROB_TOL = 1e-9


@dataclass(frozen=True)
class ClassifierConfig:
    hidden: tuple[int, ...] = (32,)
    epochs: int = 60
    batch_size: int = 128
    lr: float = 5e-3

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")


@dataclass
class SoftmaxClassifier:
    """Logit network plus the class labels its output columns refer to."""

    net: Mlp
    class_labels: tuple[int, ...]

    def __post_init__(self):
        self.class_labels = tuple(int(v) for v in self.class_labels)
        if len(self.class_labels) != self.net.spec.output_dim:
            raise ConfigError("one output column per class label is required")
        if len(set(self.class_labels)) != len(self.class_labels):
            raise ConfigError(f"duplicate class labels {self.class_labels}")

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits = self.net.predict(np.asarray(x, dtype=np.float64))
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)


def train_softmax_classifier(
    features: np.ndarray,
    labels: np.ndarray,
    config: ClassifierConfig,
    seed: int,
) -> SoftmaxClassifier:
    """Cross-entropy training of an MLP over the observed class labels."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise DataError("features and labels must be non-empty and aligned")
    class_labels = tuple(int(v) for v in np.unique(y))
    if len(class_labels) < 2:
        raise DataError(f"need at least 2 classes, got {class_labels}")
    col = {label: j for j, label in enumerate(class_labels)}
    onehot = np.zeros((x.shape[0], len(class_labels)))
    onehot[np.arange(x.shape[0]), [col[int(v)] for v in y]] = 1.0

    rng = np.random.default_rng(seed)
    spec = MlpSpec((x.shape[1], *config.hidden, len(class_labels)),
                   ("relu",) * len(config.hidden), "identity")
    net = Mlp(spec, rng=rng)
    opt = Adam(net.parameters(), lr=config.lr)
    n = x.shape[0]
    batch = min(config.batch_size, n)
    steps = max(n // batch, 1)
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        for step in range(steps):
            sel = perm[step * batch:(step + 1) * batch]
            logits = net(Tensor(x[sel]))
            shift = Tensor(logits.data.max(axis=1, keepdims=True))
            centered = logits - shift
            log_norm = centered.exp().sum(axis=1, keepdims=True).log()
            log_probs = centered - log_norm
            loss = -((log_probs * Tensor(onehot[sel])).sum(axis=1).mean())
            if not np.isfinite(loss.data):
                raise FloatingPointError(f"non-finite classifier loss {float(loss.data)}")
            loss.backward()
            opt.step()
    return SoftmaxClassifier(net, class_labels)


def _check_prob_row(row: np.ndarray) -> np.ndarray:
    row = np.asarray(row, dtype=np.float64).ravel()
    if row.size == 0:
        raise DataError("probability row is empty")
    if np.any(row < -_PROB_TOL) or np.any(row > 1 + _PROB_TOL):
        raise DataError(f"probabilities must lie in [0, 1], got {row}")
    if abs(row.sum() - 1.0) > _PROB_TOL:
        raise DataError(f"probability row sums to {row.sum()}, expected 1")
    return np.clip(row, 0.0, 1.0)


def _descending_order(row: np.ndarray) -> np.ndarray:
    # stable sort on negated values: ties break toward the lower column index
    return np.argsort(-row, kind="stable")


def scaling_set(row: np.ndarray, class_labels, alpha: float) -> PredictiveSet:
    """Top classes until retained probability mass reaches 1 - alpha; never empty."""
    if not 0.0 <= alpha < 1.0:
        raise ConfigError(f"alpha must lie in [0, 1), got {alpha}")
    row = _check_prob_row(row)
    labels = tuple(int(v) for v in class_labels)
    if len(labels) != row.size:
        raise DataError(f"{row.size} probabilities for {len(labels)} labels")
    order = _descending_order(row)
    total = 0.0
    keep = []
    for j in order:
        keep.append(labels[j])
        total += row[j]
        if total >= 1.0 - alpha:
            break
    return PredictiveSet(tuple(keep))


@dataclass(frozen=True)
class ApsCalibration:
    threshold: float
    n_cal: int
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_cal < 1:
            raise ConfigError(f"n_cal must be >= 1, got {self.n_cal}")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in (0, 1], got {self.threshold}")


def aps_calibrate(probs: np.ndarray, labels: np.ndarray, class_labels,
                  alpha: float) -> ApsCalibration:
    """Mass threshold from held-out rows' cumulative scores at their true class."""
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    probs = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    class_labels = tuple(int(v) for v in class_labels)
    if probs.ndim != 2 or probs.shape[0] != y.shape[0] or probs.shape[0] == 0:
        raise DataError("calibration probabilities and labels must be non-empty and aligned")
    if probs.shape[1] != len(class_labels):
        raise DataError(f"{probs.shape[1]} columns for {len(class_labels)} labels")
    col = {label: j for j, label in enumerate(class_labels)}
    scores = np.empty(probs.shape[0])
    for i in range(probs.shape[0]):
        row = _check_prob_row(probs[i])
        true_col = col.get(int(y[i]))
        if true_col is None:
            raise DataError(f"calibration label {int(y[i])} not among {class_labels}")
        order = _descending_order(row)
        csum = 0.0
        for j in order:
            csum += row[j]
            if j == true_col:
                break
        scores[i] = csum
    n = scores.size
    k = int(np.ceil((n + 1) * (1.0 - alpha)))
    if k > n:
        threshold = 1.0
    else:
        threshold = float(np.sort(scores)[k - 1])
    return ApsCalibration(threshold=threshold, n_cal=n, alpha=alpha)


def aps_set(row: np.ndarray, class_labels, cal: ApsCalibration) -> PredictiveSet:
    """Top classes until cumulative mass reaches the calibrated threshold."""
    row = _check_prob_row(row)
    labels = tuple(int(v) for v in class_labels)
    if len(labels) != row.size:
        raise DataError(f"{row.size} probabilities for {len(labels)} labels")
    order = _descending_order(row)
    total = 0.0
    keep = []
    for j in order:
        keep.append(labels[j])
        total += row[j]
        if total >= cal.threshold:
            break
    return PredictiveSet(tuple(keep))


# -- CSV round-trip ---------------------------------------------------------------

def save_prob_matrix(path: str, class_labels, matrix: np.ndarray, sample_ids=None) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    labels = [int(v) for v in class_labels]
    if matrix.ndim != 2 or matrix.shape[1] != len(labels):
        raise DataError(f"probability matrix shape {matrix.shape} != (n, {len(labels)})")
    if sample_ids is None:
        sample_ids = range(matrix.shape[0])
    cols = ",".join(f"p_{v}" for v in labels)
    lines = [f"sample_id,{cols}"]
    for sid, row in zip(sample_ids, matrix):
        vals = ",".join(format(v, ".17g") for v in row)
        lines.append(f"{int(sid)},{vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_prob_matrix(path: str):
    """Returns (class_labels, sample_ids, matrix); rows must sum to 1."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "sample_id" or len(header) < 2:
            raise DataError(f"{path}: malformed probability header {header!r}")
        labels = []
        for colname in header[1:]:
            if not colname.startswith("p_"):
                raise DataError(f"{path}: malformed probability column {colname!r}")
            labels.append(int(colname[2:]))
        ids = []
        rows = []
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise DataError(f"{path}:{ln}: expected {len(header)} fields")
            ids.append(int(parts[0]))
            row = np.asarray([float(v) for v in parts[1:]])
            rows.append(_check_prob_row(row))
    return tuple(labels), np.asarray(ids, dtype=np.int64), np.asarray(rows, dtype=np.float64)
