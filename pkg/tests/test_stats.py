import numpy as np
import pytest
from scipy import stats as sps

from cdebench.stats import holm_bonferroni, welch_one_sided


def _welch_oracle(mean_f, se_f, n_f, mean_c, se_c, n_c):
    """Independent recomputation: explicit Welch-Satterthwaite df plus t tail."""
    vf, vc = se_f**2, se_c**2
    t = (mean_c - mean_f) / np.sqrt(vf + vc)
    den = 0.0
    if vf > 0:
        den += vf**2 / (n_f - 1)
    if vc > 0:
        den += vc**2 / (n_c - 1)
    df = (vf + vc) ** 2 / den
    return t, df, float(sps.t.sf(t, df))


def test_welch_worked_example():
    # mean_F=-1.00, se_F=0.02 vs mean_C=-0.90, se_C=0.02, five reps each
    t, p = welch_one_sided(-1.00, 0.02, 5, -0.90, 0.02, 5, "lower")
    assert t == pytest.approx(3.535533905932737, rel=1e-12)
    assert p == pytest.approx(0.0038348640104771355, abs=1e-12)
    t_ref, df_ref, p_ref = _welch_oracle(-1.00, 0.02, 5, -0.90, 0.02, 5)
    assert df_ref == pytest.approx(8.0, rel=1e-12)
    assert t == pytest.approx(t_ref, rel=1e-12)
    assert p == pytest.approx(p_ref, rel=1e-12)


def test_welch_equal_means_gives_half():
    t, p = welch_one_sided(1.0, 0.1, 5, 1.0, 0.2, 5, "lower")
    assert t == 0.0
    assert p == pytest.approx(0.5, rel=1e-12)


def test_welch_matches_oracle_on_grid():
    rng = np.random.default_rng(42)
    for _ in range(50):
        mean_f, mean_c = rng.normal(size=2)
        se_f, se_c = rng.uniform(0.01, 0.5, size=2)
        n_f, n_c = rng.integers(2, 30, size=2)
        t, p = welch_one_sided(mean_f, se_f, n_f, mean_c, se_c, n_c, "lower")
        t_ref, _, p_ref = _welch_oracle(mean_f, se_f, n_f, mean_c, se_c, n_c)
        assert t == pytest.approx(t_ref, rel=1e-12)
        assert p == pytest.approx(p_ref, rel=1e-12)


def test_welch_higher_direction_mirrors_lower():
    a = welch_one_sided(-1.0, 0.05, 5, -0.8, 0.03, 7, "lower")
    b = welch_one_sided(1.0, 0.05, 5, 0.8, 0.03, 7, "higher")
    assert a == pytest.approx(b, rel=1e-12)


def test_welch_one_zero_se_collapses_df():
    # only the competitor varies, so df falls back to its n - 1 = 4
    t, p = welch_one_sided(0.0, 0.0, 5, 1.0, 0.1, 5, "lower")
    assert t == pytest.approx(10.0, rel=1e-12)
    assert p == pytest.approx(0.00028100181135799556, rel=1e-10)


def test_welch_p_monotone_in_gap_and_se():
    gaps = [0.0, 0.05, 0.1, 0.2, 0.5]
    ps = [welch_one_sided(-1.0 - g, 0.05, 5, -1.0, 0.05, 5, "lower")[1] for g in gaps]
    assert all(a > b for a, b in zip(ps, ps[1:]))
    ses = [0.01, 0.05, 0.1, 0.3]
    ps = [welch_one_sided(-1.1, s, 5, -1.0, s, 5, "lower")[1] for s in ses]
    assert all(a < b for a, b in zip(ps, ps[1:]))


def test_welch_rejects_bad_inputs():
    with pytest.raises(ValueError, match="both standard errors are zero"):
        welch_one_sided(0.0, 0.0, 5, 1.0, 0.0, 5, "lower")
    with pytest.raises(ValueError, match="non-negative"):
        welch_one_sided(0.0, -0.1, 5, 1.0, 0.1, 5, "lower")
    with pytest.raises(ValueError, match="at least 2 replicates"):
        welch_one_sided(0.0, 0.1, 1, 1.0, 0.1, 5, "lower")
    with pytest.raises(ValueError, match="direction"):
        welch_one_sided(0.0, 0.1, 5, 1.0, 0.1, 5, "sideways")


def _holm_oracle(pvalues, alpha):
    """Largest valid step-down prefix, found by checking every prefix length."""
    p = np.asarray(pvalues, dtype=float)
    m = p.size
    sorted_p = np.sort(p)
    k = 0
    for cand in range(m, 0, -1):
        if all(sorted_p[i] <= alpha / (m - i) for i in range(cand)):
            k = cand
            break
    if k == 0:
        return np.zeros(m, dtype=bool)
    # the cut never splits a tie: equal values share one threshold outcome
    return p <= sorted_p[k - 1]


def test_holm_hand_worked_examples():
    assert holm_bonferroni([0.01, 0.04, 0.03], alpha=0.1).tolist() == [True, True, True]
    assert holm_bonferroni([0.2], alpha=0.1).tolist() == [False]
    assert holm_bonferroni([0.03, 0.06], alpha=0.1).tolist() == [True, True]
    # first sorted failure stops everything after it
    assert holm_bonferroni([0.2, 0.001], alpha=0.1).tolist() == [False, True]
    assert holm_bonferroni([0.06, 0.001, 0.2], alpha=0.1).tolist() == [False, True, False]


def test_holm_matches_enumeration_oracle():
    rng = np.random.default_rng(7)
    for trial in range(300):
        m = int(rng.integers(1, 7))
        # coarse values force ties through the step-down thresholds
        p = rng.choice(np.linspace(0.0, 1.0, 21), size=m)
        alpha = float(rng.choice([0.05, 0.1, 0.3]))
        got = holm_bonferroni(p, alpha)
        want = _holm_oracle(p, alpha)
        assert got.tolist() == want.tolist(), f"trial {trial}: p={p}, alpha={alpha}"


def test_holm_empty_and_domain():
    assert holm_bonferroni([], alpha=0.1).size == 0
    with pytest.raises(ValueError, match="lie in"):
        holm_bonferroni([0.5, 1.5])
    with pytest.raises(ValueError, match="flat"):
        holm_bonferroni([[0.1, 0.2]])
