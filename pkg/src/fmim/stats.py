"""Evaluation statistics: correlation, error metrics, and rater agreement.

Conventions chosen to match the reporting style of the modeling
results being reproduced: explained variation is the square of the
Pearson correlation, and inter-rater reliability is the two-way
mixed-effects intraclass correlation for average measures of
consistency, ICC(C,k) = (MS_rows - MS_error) / MS_rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstantInput,
    DegenerateVariance,
    EmptyInput,
    LengthMismatch,
    MisalignedParticipants,
    ZeroVariance,
)
from .landmark_io import IM_DIMENSIONS, IMScores, RaterTable

SCORE_BANDS = ((1.0, 2.0), (2.0, 3.0), (3.0, 4.0), (4.0, 5.0))


def _paired(x, y, min_len: int = 1):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise LengthMismatch(f"paired inputs must be equal-length vectors, got {x.shape} vs {y.shape}")
    if x.size < min_len:
        raise LengthMismatch(f"need at least {min_len} pairs, got {x.size}")
    return x, y


def pearson_r(x, y) -> float:
    """Sample Pearson correlation coefficient."""
    x, y = _paired(x, y, min_len=2)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ConstantInput("correlation undefined for a constant input")
    r = float(np.sum(dx * dy) / (sx * sy))
    return max(-1.0, min(1.0, r))


def rmse(pred, target) -> float:
    pred, target = _paired(pred, target)
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def rmse_sd_ratio(pred, target) -> float:
    """RMSE over the sample standard deviation of the targets; < 1 beats the mean predictor."""
    pred, target = _paired(pred, target, min_len=2)
    sd = float(np.std(target, ddof=1))
    if sd == 0.0:
        raise ZeroVariance("target standard deviation is zero")
    return rmse(pred, target) / sd


def cronbach_alpha(items) -> float:
    """Internal consistency of a participants-by-items score matrix."""
    m = np.asarray(items, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise LengthMismatch(f"need at least 2 participants and 2 items, got {m.shape}")
    k = m.shape[1]
    item_vars = np.var(m, axis=0, ddof=1)
    total_var = float(np.var(m.sum(axis=1), ddof=1))
    if total_var == 0.0:
        raise DegenerateVariance("total-score variance is zero")
    return float(k / (k - 1) * (1.0 - float(item_vars.sum()) / total_var))


def icc_consistency_avg(ratings) -> float:
    """ICC(C,k): two-way mixed-effects, consistency, average measures.

    Rows are rated targets, columns raters; the matrix must be complete.
    """
    m = np.asarray(ratings, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise LengthMismatch(f"need at least 2 targets and 2 raters, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DegenerateVariance("rating matrix contains non-finite cells")
    n, k = m.shape
    grand = m.mean()
    row_means = m.mean(axis=1)
    col_means = m.mean(axis=0)
    ss_rows = k * float(np.sum((row_means - grand) ** 2))
    ss_cols = n * float(np.sum((col_means - grand) ** 2))
    ss_total = float(np.sum((m - grand) ** 2))
    ss_err = ss_total - ss_rows - ss_cols
    ms_rows = ss_rows / (n - 1)
    ms_err = ss_err / ((n - 1) * (k - 1))
    if ms_rows == 0.0:
        raise DegenerateVariance("between-target mean square is zero")
    return (ms_rows - ms_err) / ms_rows


@dataclass(frozen=True)
class DescriptiveSummary:
    mean: float
    sd: float
    minimum: float
    maximum: float
    band_counts: tuple[int, int, int, int]
    n: int


def descriptive_summary(values) -> DescriptiveSummary:
    """Mean, sample SD, range, and banded distribution over the score scale.

    Bands are [1,2), [2,3), [3,4), [4,5] with the top band closed.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise EmptyInput("descriptive summary needs a nonempty vector")
    counts = []
    for i, (lo, hi) in enumerate(SCORE_BANDS):
        if i == len(SCORE_BANDS) - 1:
            counts.append(int(np.sum((v >= lo) & (v <= hi))))
        else:
            counts.append(int(np.sum((v >= lo) & (v < hi))))
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return DescriptiveSummary(mean=float(v.mean()), sd=sd,
                              minimum=float(v.min()), maximum=float(v.max()),
                              band_counts=tuple(counts), n=int(v.size))


@dataclass(frozen=True)
class MetricReport:
    """Model-vs-label metrics for one score dimension."""

    dimension: str
    r: float | None
    r_squared: float | None
    rmse: float
    rmse_sd_ratio: float | None
    n: int
    degenerate: str | None = None


def metric_report(dimension: str, predictions, targets) -> MetricReport:
    """R, R^2 (= R*R), RMSE and RMSE/SD with degenerate cases flagged."""
    pred, targ = _paired(predictions, targets, min_len=1)
    err = rmse(pred, targ)
    degenerate = None
    r = rsq = ratio = None
    try:
        r = pearson_r(pred, targ)
        rsq = r * r
    except (ConstantInput, LengthMismatch) as exc:
        degenerate = str(exc)
    try:
        ratio = rmse_sd_ratio(pred, targ)
    except (ZeroVariance, LengthMismatch) as exc:
        degenerate = degenerate or str(exc)
    return MetricReport(dimension=dimension, r=r, r_squared=rsq, rmse=err,
                        rmse_sd_ratio=ratio, n=pred.size, degenerate=degenerate)


@dataclass(frozen=True)
class DimensionComparison:
    dimension: str
    r_self_ai: float
    r_self_human: float
    icc_raters: float
    scatter: list[tuple[str, float, float, float]]  # participant, self, ai, human mean


@dataclass(frozen=True)
class ComparisonReport:
    dimensions: list[DimensionComparison] = field(default_factory=list)

    def table(self) -> str:
        lines = [f"{'dimension':<28} {'R(self,AI)':>11} {'R(self,human)':>14} {'ICC':>8}"]
        for d in self.dimensions:
            lines.append(f"{d.dimension:<28} {d.r_self_ai:>11.4f} {d.r_self_human:>14.4f} "
                         f"{d.icc_raters:>8.4f}")
        return "\n".join(lines)


def compare_ai_human(self_reports: dict[str, IMScores], ai_predictions: dict[str, IMScores],
                     rater_table: RaterTable) -> ComparisonReport:
    """Concurrent-validity comparison of model scores and rater means.

    Per dimension: correlation of self-reports with the model, with the
    3-rater mean, and the raters' ICC(C,k); rater scores are averaged
    per participant before correlating.
    """
    participants = sorted(self_reports)
    if sorted(ai_predictions) != participants:
        missing = sorted(set(participants) ^ set(ai_predictions))
        raise MisalignedParticipants(f"self/AI participant mismatch, first: {missing[0]}")
    rater_table.validate()
    if rater_table.participants() != participants:
        missing = sorted(set(participants) ^ set(rater_table.participants()))
        raise MisalignedParticipants(f"self/rater participant mismatch, first: {missing[0]}")
    dims = []
    for dim in IM_DIMENSIONS:
        self_v = np.array([self_reports[p].get(dim) for p in participants])
        ai_v = np.array([ai_predictions[p].get(dim) for p in participants])
        ratings = rater_table.matrix(dim, participants)
        human_mean = ratings.mean(axis=1)
        scatter = [(p, float(s), float(a), float(hm))
                   for p, s, a, hm in zip(participants, self_v, ai_v, human_mean)]
        dims.append(DimensionComparison(
            dimension=dim,
            r_self_ai=pearson_r(self_v, ai_v),
            r_self_human=pearson_r(self_v, human_mean),
            icc_raters=icc_consistency_avg(ratings),
            scatter=scatter,
        ))
    return ComparisonReport(dimensions=dims)
