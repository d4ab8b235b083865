"""Small estimator helpers with a fixed reduction order."""

from __future__ import annotations

import numpy as np


def mean_and_se(values):
    """Sample mean and its standard error.

    ``np.sum`` on a contiguous float array uses pairwise summation, so the
    result depends only on the values and their order.
    """
    x = np.ascontiguousarray(values, dtype=np.float64)
    n = x.size
    if n == 0:
        raise ValueError("cannot average an empty sample")
    mean = np.sum(x) / n
    if n == 1:
        return float(mean), 0.0
    var = np.sum((x - mean) ** 2) / (n - 1)
    return float(mean), float(np.sqrt(var / n))


def complex_mean_and_se(values):
    """Complex sample mean with separate standard errors for re and im."""
    z = np.asarray(values, dtype=np.complex128)
    re, se_re = mean_and_se(z.real)
    im, se_im = mean_and_se(z.imag)
    return complex(re, im), se_re, se_im
