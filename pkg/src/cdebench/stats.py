"""Significance testing for benchmark comparisons.

One-sided Welch tests with the conservative pooled-SE variance, and the
Holm step-down multiple-comparison rule.
"""

from __future__ import annotations

import numpy as np
from scipy import stats as sps


def welch_one_sided(mean_f, se_f, n_f, mean_c, se_c, n_c, direction="lower"):
    """Test whether the first (focal) method beats the competitor.

    Takes per-method summary statistics: mean, standard error of the mean,
    and the number of replicates behind each. `direction` names which way
    the focal metric is better ("lower" or "higher"). Returns (t, p) where
    p is the upper tail at Welch-Satterthwaite degrees of freedom.
    """
    if direction not in ("lower", "higher"):
        raise ValueError(f"direction must be 'lower' or 'higher', not {direction!r}")
    if se_f < 0 or se_c < 0:
        raise ValueError("standard errors must be non-negative")
    vf, vc = se_f**2, se_c**2
    if vf + vc == 0.0:
        raise ValueError("both standard errors are zero, the gap has no scale")
    den = 0.0
    if vf > 0:
        if n_f < 2:
            raise ValueError("a positive SE needs at least 2 replicates behind it")
        den += vf**2 / (n_f - 1)
    if vc > 0:
        if n_c < 2:
            raise ValueError("a positive SE needs at least 2 replicates behind it")
        den += vc**2 / (n_c - 1)
    df = (vf + vc) ** 2 / den
    gap = mean_c - mean_f if direction == "lower" else mean_f - mean_c
    t = gap / np.sqrt(vf + vc)
    return float(t), float(sps.t.sf(t, df))


def holm_bonferroni(pvalues, alpha=0.1):
    """Step-down rejection flags, in the input order.

    Sorts ascending and rejects the i-th smallest while p <= alpha/(m-i),
    stopping at the first failure.
    """
    p = np.asarray(pvalues, dtype=float)
    if p.ndim != 1:
        raise ValueError("pvalues must be a flat sequence")
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    reject = np.zeros(m, dtype=bool)
    for i, idx in enumerate(np.argsort(p, kind="stable")):
        if p[idx] > alpha / (m - i):
            break
        reject[idx] = True
    return reject
