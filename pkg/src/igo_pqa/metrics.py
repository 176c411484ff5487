"""Correlation and error metrics for score evaluation.

PLCC is the plain Pearson coefficient.  SRCC is Pearson applied to
average ranks, which stays valid in the presence of ties (the classic
sum-of-squared-rank-differences shortcut does not).  All arithmetic is
64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, ZeroVariance


@dataclass(frozen=True)
class MetricReport:
    plcc: float
    srcc: float
    mean_l1: float
    n: int

    def to_dict(self) -> dict:
        return {"plcc": self.plcc, "srcc": self.srcc,
                "mean_l1": self.mean_l1, "n": self.n}


def _pair(a, b, min_len):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape[0] != b.shape[0]:
        raise LengthMismatch(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < min_len:
        raise LengthMismatch(f"need at least {min_len} samples, got {a.shape[0]}")
    return a, b


def plcc(a, b) -> float:
    """Pearson linear correlation coefficient."""
    a, b = _pair(a, b, 2)
    da = a - a.mean()
    db = b - b.mean()
    va = float(da @ da)
    vb = float(db @ db)
    if va == 0.0 or vb == 0.0:
        raise ZeroVariance("correlation undefined for a constant input")
    return float((da @ db) / np.sqrt(va * vb))


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    x = np.asarray(x, dtype=np.float64).ravel()
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    return starts[inverse] + (counts[inverse] - 1) / 2.0 + 1.0


def srcc(a, b) -> float:
    """Spearman rank correlation: Pearson on average ranks."""
    a, b = _pair(a, b, 2)
    return plcc(average_ranks(a), average_ranks(b))


def mean_l1(a, b) -> float:
    a, b = _pair(a, b, 1)
    return float(np.abs(a - b).mean())


def metric_report(predicted, target) -> MetricReport:
    a, b = _pair(predicted, target, 2)
    return MetricReport(
        plcc=plcc(a, b),
        srcc=srcc(a, b),
        mean_l1=mean_l1(a, b),
        n=a.shape[0],
    )
