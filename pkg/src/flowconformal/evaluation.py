"""Evaluation metrics: coverage, size errors, p-value uniformity, chi-square
moment checks, and report/histogram emission.

Coverage counts a test point as covered when its true class is in the
predictive set (inliers) or the set is empty (outliers). Two size-error
conventions are reported: ``size_error_paper`` is the literal mean of
|set| - 1{outlier} (which scores 1, not 0, for ideal singleton inlier sets
and can go negative on outliers), and ``size_error_excess`` charges
|set| - 1 on inliers and |set| on outliers so the ideal value is 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import OUTLIER
from .errors import ConfigError, DataError
from .nn import to_json
from .special import chi2_cdf

__all__ = [
    "coverage",
    "size_error_paper",
    "size_error_excess",
    "KsResult",
    "ks_statistic",
    "ks_critical_value",
    "ks_uniformity",
    "empirical_type1",
    "Chi2MomentReport",
    "chi2_moment_check",
    "EvalReport",
    "build_report",
    "emit_report",
    "emit_histogram",
]


def _check_aligned(sets, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or len(sets) != labels.shape[0]:
        raise DataError(
            f"got {len(sets)} predictive sets for {labels.shape[0]} labels"
        )
    if labels.shape[0] == 0:
        raise DataError("need at least one test point")
    return labels


def coverage(sets, labels) -> float:
    """Mean of [inlier and label in set] + [outlier and empty set]."""
    labels = _check_aligned(sets, labels)
    hits = 0
    for ps, label in zip(sets, labels):
        if label == OUTLIER:
            hits += ps.is_outlier
        else:
            hits += int(label) in ps
    return hits / labels.shape[0]


def size_error_paper(sets, labels) -> float:
    """Literal mean of |set| - 1{outlier}; may be negative."""
    labels = _check_aligned(sets, labels)
    total = 0.0
    for ps, label in zip(sets, labels):
        total += ps.size - (1 if label == OUTLIER else 0)
    return total / labels.shape[0]


def size_error_excess(sets, labels) -> float:
    """Mean of |set| - 1 on inliers and |set| on outliers; 0 is ideal."""
    labels = _check_aligned(sets, labels)
    total = 0.0
    for ps, label in zip(sets, labels):
        total += ps.size if label == OUTLIER else ps.size - 1
    return total / labels.shape[0]


# -- uniformity and distributional checks ---------------------------------------

@dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int
    level: float
    critical_value: float
    reject: bool


def ks_statistic(sample: np.ndarray, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov distance between a sample and a CDF."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    if n == 0:
        raise DataError("KS statistic needs a non-empty sample")
    f = np.asarray([cdf(v) for v in x], dtype=np.float64)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def ks_critical_value(n: int, level: float) -> float:
    """Asymptotic two-sided critical value c(level)/sqrt(n)."""
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must lie in (0, 1), got {level}")
    return math.sqrt(-math.log(level / 2.0) / 2.0) / math.sqrt(n)


def ks_uniformity(p_values: np.ndarray, level: float = 0.01) -> KsResult:
    """KS test of p-values against Uniform(0, 1)."""
    x = np.asarray(p_values, dtype=np.float64)
    if x.ndim != 1 or x.size < 20:
        raise DataError(f"uniformity test needs at least 20 p-values, got {x.size}")
    if np.any((x < 0) | (x > 1)):
        raise DataError("p-values must lie in [0, 1]")
    stat = ks_statistic(x, lambda v: min(max(v, 0.0), 1.0))
    crit = ks_critical_value(x.size, level)
    return KsResult(stat, int(x.size), level, crit, stat > crit)


def empirical_type1(p_values: np.ndarray, alpha: float) -> float:
    """Fraction of p-values at or below alpha."""
    x = np.asarray(p_values, dtype=np.float64)
    if x.size == 0:
        raise DataError("need at least one p-value")
    return float(np.mean(x <= alpha))


@dataclass(frozen=True)
class Chi2MomentReport:
    mean: float
    variance: float
    ks: KsResult
    d: int


def chi2_moment_check(scores: np.ndarray, d: int, level: float = 0.01) -> Chi2MomentReport:
    """Sample moments and KS distance of scores against chi-square with d dof."""
    if d < 1:
        raise ConfigError(f"degrees of freedom must be >= 1, got {d}")
    x = np.asarray(scores, dtype=np.float64)
    if x.ndim != 1 or x.size < 100:
        raise DataError(f"moment check needs at least 100 scores, got {x.size}")
    stat = ks_statistic(x, lambda v: chi2_cdf(float(v), d))
    crit = ks_critical_value(x.size, level)
    ks = KsResult(stat, int(x.size), level, crit, stat > crit)
    return Chi2MomentReport(float(x.mean()), float(x.var(ddof=1)), ks, d)


# -- reports -------------------------------------------------------------------

@dataclass
class EvalReport:
    coverage: float
    size_error_paper: float
    size_error_excess: float
    type1_per_class: list[dict] = field(default_factory=list)
    outlier_detection_rate: float | None = None
    ks: list[dict] = field(default_factory=list)
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "coverage": self.coverage,
            "size_error_paper": self.size_error_paper,
            "size_error_excess": self.size_error_excess,
            "type1_per_class": self.type1_per_class,
            "outlier_detection_rate": self.outlier_detection_rate,
            "ks": self.ks,
            "counts": self.counts,
        }


def build_report(sets, labels, alpha: float,
                 class_labels=None, p_matrix: np.ndarray | None = None,
                 ks_level: float = 0.01) -> EvalReport:
    """Assemble the full metric report for one test arm.

    When a p-value matrix is available (columns aligned with class_labels),
    per-class type-I rates and KS uniformity checks come from the p-values of
    each class's own test rows; otherwise type-I rates fall back to set
    membership and the KS section stays empty.
    """
    labels = _check_aligned(sets, labels)
    inlier = labels != OUTLIER
    report = EvalReport(
        coverage=coverage(sets, labels),
        size_error_paper=size_error_paper(sets, labels),
        size_error_excess=size_error_excess(sets, labels),
    )
    if class_labels is None:
        class_labels = tuple(int(v) for v in np.unique(labels[inlier]))
    else:
        class_labels = tuple(int(v) for v in class_labels)

    if p_matrix is not None:
        p_matrix = np.asarray(p_matrix, dtype=np.float64)
        if p_matrix.shape != (labels.shape[0], len(class_labels)):
            raise DataError(
                f"p-value matrix shape {p_matrix.shape} != "
                f"({labels.shape[0]}, {len(class_labels)})"
            )
    for j, cls in enumerate(class_labels):
        own = labels == cls
        if not np.any(own):
            continue
        if p_matrix is not None:
            own_p = p_matrix[own, j]
            report.type1_per_class.append(
                {"class": cls, "rate": empirical_type1(own_p, alpha)}
            )
            if own_p.size >= 20:
                res = ks_uniformity(own_p, ks_level)
                report.ks.append(
                    {"class": cls, "stat": res.statistic, "reject": res.reject}
                )
        else:
            miss = [cls not in ps for ps, is_own in zip(sets, own) if is_own]
            report.type1_per_class.append(
                {"class": cls, "rate": float(np.mean(miss))}
            )

    n_out = int(np.sum(~inlier))
    if n_out > 0:
        detected = [ps.is_outlier for ps, is_in in zip(sets, inlier) if not is_in]
        report.outlier_detection_rate = float(np.mean(detected))
    per_class = {str(cls): int(np.sum(labels == cls)) for cls in class_labels}
    report.counts = {
        "n_test": int(labels.shape[0]),
        "n_inliers": int(np.sum(inlier)),
        "n_outliers": n_out,
        "per_class": per_class,
    }
    return report


def emit_report(report: EvalReport, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(to_json(report.to_dict()) + "\n")


def emit_histogram(p_values, path: str, bins: int = 20) -> None:
    """CSV histogram of p-values over [0, 1]: bin_left,bin_right,count."""
    if bins < 1:
        raise ConfigError(f"bins must be >= 1, got {bins}")
    x = np.asarray(list(p_values), dtype=np.float64)
    if x.size and np.any((x < 0) | (x > 1)):
        raise DataError("p-values must lie in [0, 1]")
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(x, bins=edges) if x.size else (np.zeros(bins, dtype=int), edges)
    lines = ["bin_left,bin_right,count"]
    for i in range(bins):
        lines.append(
            f"{format(edges[i], '.17g')},{format(edges[i + 1], '.17g')},{int(counts[i])}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
