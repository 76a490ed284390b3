"""Two-sided Kolmogorov-Smirnov distance."""
from __future__ import annotations

import numpy as np

from ..errors import DomainError


def ks_statistic(samples, cdf):
    """``sup_x |F_n(x) - F(x)|`` for the empirical distribution of ``samples``.

    ``cdf`` must accept an array. The supremum is attained at a sample, just
    before or just after its jump.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n < 1000:
        raise DomainError("at least 1000 samples are required")
    f = np.asarray(cdf(x), dtype=float)
    if np.any(np.diff(f) < -1e-12):
        raise DomainError("cdf is not monotone on the sample range")
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
