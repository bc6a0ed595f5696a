"""Tukey box-and-whisker statistics over trial values."""
from typing import Sequence

import numpy as np

from app.core.errors import InsufficientDataError
from app.schemas.results import BoxStats

WHISKER_FACTOR = 1.5


def tukey_hinges(sorted_values: np.ndarray) -> tuple:
    """Median of each half; with an odd count the median belongs to both halves."""
    n = len(sorted_values)
    half = n // 2
    if n % 2:
        lower, upper = sorted_values[:half + 1], sorted_values[half:]
    else:
        lower, upper = sorted_values[:half], sorted_values[half:]
    return float(np.median(lower)), float(np.median(upper))


def aggregate_trials(values: Sequence[float]) -> BoxStats:
    """
    Five-number summary with whiskers at the most extreme points inside
    1.5 IQR of the hinges; everything beyond is an outlier.

    Raises:
        InsufficientDataError: If values is empty
    """
    if len(values) == 0:
        raise InsufficientDataError("box statistics")
    data = np.sort(np.asarray(values, dtype=float))
    hinge_lo, hinge_hi = tukey_hinges(data)
    spread = WHISKER_FACTOR * (hinge_hi - hinge_lo)
    low_fence, high_fence = hinge_lo - spread, hinge_hi + spread
    inside = data[(data >= low_fence) & (data <= high_fence)]
    return BoxStats(
        min=float(data[0]),
        hinge_lo=hinge_lo,
        median=float(np.median(data)),
        hinge_hi=hinge_hi,
        max=float(data[-1]),
        whisker_lo=float(inside[0]),
        whisker_hi=float(inside[-1]),
        outliers=[float(v) for v in data if v < low_fence or v > high_fence],
        count=len(data),
    )
