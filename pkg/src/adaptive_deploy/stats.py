"""Small estimators shared by the run loops and the tests."""
from __future__ import annotations

import math

import numpy as np


def trailing_window_stats(series, window: int) -> tuple[float, float]:
    """Mean and least-squares slope (per sample) of the last ``window`` values.

    A window of one sample has slope 0 by convention.
    """
    x = np.asarray(series, float)
    if x.size == 0:
        raise ValueError("empty series")
    if not 1 <= window <= x.size:
        raise ValueError("window must be between 1 and the series length")
    tail = x[-window:]
    if window == 1:
        return float(tail[0]), 0.0
    k = np.arange(window, dtype=float)
    kc = k - k.mean()
    slope = float(np.dot(kc, tail - tail.mean()) / np.dot(kc, kc))
    return float(tail.mean()), slope


def batch_means(x, batches: int = 20) -> np.ndarray:
    x = np.asarray(x, float)
    size = len(x) // batches
    if size < 1:
        raise ValueError("not enough samples for the requested batches")
    return x[: size * batches].reshape(batches, size).mean(axis=1)


def batch_means_se(x, batches: int = 20) -> float:
    """Standard error of the mean of a correlated series by non-overlapping batch means."""
    b = batch_means(x, batches)
    return float(b.std(ddof=1) / math.sqrt(len(b)))


def slope_with_stderr(x, batches: int = 20) -> tuple[float, float]:
    """Per-sample trend of a correlated series and its standard error.

    The series is cut into ``batches`` consecutive blocks and the block means
    are regressed on the block centers, which removes most of the serial
    correlation from the residuals.
    """
    x = np.asarray(x, float)
    b = batch_means(x, batches)
    size = len(x) // batches
    t = (np.arange(batches) + 0.5) * size
    tc = t - t.mean()
    sxx = float(np.dot(tc, tc))
    slope = float(np.dot(tc, b - b.mean()) / sxx)
    resid = b - b.mean() - slope * tc
    s2 = float(np.dot(resid, resid) / (batches - 2))
    return slope, math.sqrt(s2 / sxx)
