"""Shared test utilities."""

import numpy as np
from scipy import stats


def poisson_gof_pvalue(draws, mean):
    """Chi-square goodness-of-fit p-value against the Poisson pmf.

    Bins are merged from both ends until every expected count is at
    least 5, with the upper tail folded into the last bin.
    """
    n = draws.size
    max_k = int(draws.max())
    observed = np.bincount(draws.astype(int), minlength=max_k + 1).astype(float)
    expected = stats.poisson.pmf(np.arange(max_k + 1), mean) * n
    expected[-1] += n - expected.sum()
    while len(expected) > 2 and expected[-1] < 5.0:
        expected[-2] += expected[-1]
        observed[-2] += observed[-1]
        expected = expected[:-1]
        observed = observed[:-1]
    while len(expected) > 2 and expected[0] < 5.0:
        expected[1] += expected[0]
        observed[1] += observed[0]
        expected = expected[1:]
        observed = observed[1:]
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    return float(stats.chi2.sf(chi2, df=len(expected) - 1))
