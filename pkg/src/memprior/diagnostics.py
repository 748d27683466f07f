"""Memorization and calibration diagnostics over sample batches.

The central quantity is the nearest-neighbor ratio r: distance to the
closest training example divided by the mean distance to the remaining
ones. Samples with r below a threshold (default 0.5) count as memorized.
"""

import numpy as np

from .errors import DimensionMismatchError, UndefinedRatioError
from .validation import check_training_set

MEMORIZATION_THRESHOLD = 0.5

RATIO_CSV_HEADER = ["sample_id", "nearest_idx", "d1", "dbar", "ratio", "memorized"]
CALIBRATION_CSV_HEADER = ["coord", "abs_error", "std"]


def nearest_neighbor_ratio(sample, training, k=None):
    """r = d1 / mean(d2..dk) with stable index tie-breaking.

    Returns (r, nearest_idx, sorted_distances). k defaults to N (all
    remaining examples enter the mean). Requires N >= 2.
    """
    training = check_training_set(training)
    n = training.shape[0]
    if n < 2:
        raise UndefinedRatioError("nearest-neighbor ratio needs at least 2 training examples")
    sample = np.asarray(sample, dtype=float).ravel()
    if sample.size != training.shape[1]:
        raise DimensionMismatchError(
            f"sample has dimension {sample.size}, training has {training.shape[1]}"
        )
    if k is None:
        k = n
    if not 2 <= k <= n:
        raise ValueError(f"k must lie in [2, {n}], got {k}")
    dist = np.linalg.norm(training - sample, axis=1)
    order = np.argsort(dist, kind="stable")
    d_sorted = dist[order]
    d1 = d_sorted[0]
    dbar = d_sorted[1:k].mean()
    if dbar == 0.0:
        # every counted distance vanishes: the sample sits on duplicated atoms
        r = 0.0
    else:
        r = float(d1 / dbar)
    return r, int(order[0]), d_sorted


def memorization_rate(samples, training, threshold=MEMORIZATION_THRESHOLD, k=None):
    """Fraction of samples with r < threshold, plus the per-sample table.

    The table rows follow RATIO_CSV_HEADER ordering.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    records = []
    memorized = 0
    for i, s in enumerate(samples):
        r, nearest, d_sorted = nearest_neighbor_ratio(s, training, k=k)
        kk = training.shape[0] if k is None else k
        dbar = float(d_sorted[1:kk].mean())
        flag = r < threshold
        memorized += int(flag)
        records.append(
            {
                "sample_id": i,
                "nearest_idx": nearest,
                "d1": float(d_sorted[0]),
                "dbar": dbar,
                "ratio": r,
                "memorized": int(flag),
            }
        )
    return memorized / samples.shape[0], records


def posterior_summary(samples, basis=None):
    """Sample mean and unbiased pointwise std, optionally pushed through a KL basis.

    Returns a dict with coefficient-space "mean" and "std"; when a basis is
    given, also "field_mean" and "field_std" on the synthesized grid.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] < 2:
        raise ValueError("posterior summary needs at least 2 samples")
    out = {
        "mean": samples.mean(axis=0),
        "std": samples.std(axis=0, ddof=1),
    }
    if basis is not None:
        fields = basis.inverse_transform(samples)
        out["field_mean"] = fields.mean(axis=0)
        out["field_std"] = fields.std(axis=0, ddof=1)
    return out


def calibration_pairs(samples, truth):
    """Per-coordinate (|posterior-mean error|, posterior std) pairs.

    Overconfidence in the memorized regime shows up as std far exceeding the
    actual error for many coordinates.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    truth = np.asarray(truth, dtype=float).ravel()
    if truth.size != samples.shape[1]:
        raise DimensionMismatchError(
            f"truth has dimension {truth.size}, samples have {samples.shape[1]}"
        )
    abs_error = np.abs(samples.mean(axis=0) - truth)
    std = samples.std(axis=0, ddof=1)
    return abs_error, std


def overconfident_fraction(abs_error, std, factor=2.0):
    """Fraction of coordinates whose std exceeds factor * |error|."""
    abs_error = np.asarray(abs_error, dtype=float)
    std = np.asarray(std, dtype=float)
    # where the error is exactly zero, any positive std counts as overconfident
    with np.errstate(divide="ignore"):
        ratio = np.where(abs_error > 0, std / np.where(abs_error > 0, abs_error, 1.0), np.inf)
    ratio = np.where((abs_error == 0) & (std == 0), 0.0, ratio)
    return float(np.mean(ratio > factor))
