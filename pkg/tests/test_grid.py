import numpy as np
import pytest

from cdebench.grid import (
    GRID_SIZE,
    CdfCurve,
    EvalGrid,
    GridDensity,
    cdf_at,
    cdf_quantile,
    density_at,
    density_to_cdf,
    make_eval_grid,
    normalize_density,
    response_range,
    trapz_uniform,
)


def test_make_eval_grid_margins():
    y = np.array([0.0, 10.0])
    g = make_eval_grid(y)
    assert g.lo == pytest.approx(-0.5)
    assert g.hi == pytest.approx(10.5)
    assert g.points.size == GRID_SIZE
    # training extremes strictly inside
    assert g.lo < 0.0 and g.hi > 10.0


def test_make_eval_grid_degenerate_range():
    g = make_eval_grid(np.array([5.0, 5.0, 5.0]))
    assert g.lo == pytest.approx(4.75)
    assert g.hi == pytest.approx(5.25)


def test_make_eval_grid_contains_data_many_draws():
    rng = np.random.default_rng(7)
    for _ in range(25):
        y = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 10), size=50)
        g = make_eval_grid(y)
        assert g.lo < y.min() and g.hi > y.max()
        steps = np.diff(g.points)
        assert np.allclose(steps, steps[0], rtol=1e-9)


def test_make_eval_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        make_eval_grid(np.array([]))
    with pytest.raises(ValueError):
        make_eval_grid(np.array([1.0, np.nan]))


def test_eval_grid_validation():
    with pytest.raises(ValueError):
        EvalGrid(np.linspace(0, 1, 100))
    pts = np.linspace(0, 1, GRID_SIZE)
    pts[50] += 0.01
    with pytest.raises(ValueError):
        EvalGrid(pts)
    with pytest.raises(ValueError):
        EvalGrid(np.linspace(1, 0, GRID_SIZE))


def test_response_range_substitute():
    assert response_range(np.array([5.0, 5.0])) == pytest.approx(0.5)
    assert response_range(np.array([0.0, 0.0])) == pytest.approx(0.1)
    assert response_range(np.array([2.0, 4.0])) == pytest.approx(2.0)


def test_normalize_density_unit_integral_and_idempotent():
    g = make_eval_grid(np.array([-3.0, 3.0]))
    rng = np.random.default_rng(0)
    for _ in range(20):
        raw = GridDensity(g, rng.uniform(0, 2, GRID_SIZE))
        nd = normalize_density(raw)
        assert abs(nd.integral() - 1.0) <= 1e-9
        again = normalize_density(nd)
        assert np.allclose(again.values, nd.values, rtol=0, atol=1e-15)


def test_normalize_density_clamps_negatives():
    g = EvalGrid(np.linspace(0.0, 1.0, GRID_SIZE))
    vals = np.ones(GRID_SIZE)
    vals[10] = -0.1
    nd = normalize_density(GridDensity(g, vals))
    assert nd.values[10] == 0.0
    assert nd.values.min() >= 0.0
    assert abs(nd.integral() - 1.0) <= 1e-9


def test_normalize_density_all_zero_raises():
    g = EvalGrid(np.linspace(0.0, 1.0, GRID_SIZE))
    with pytest.raises(ValueError):
        normalize_density(GridDensity(g, np.zeros(GRID_SIZE)))


def test_density_at_zero_outside():
    g = EvalGrid(np.linspace(0.0, 1.0, GRID_SIZE))
    nd = normalize_density(GridDensity(g, np.ones(GRID_SIZE)))
    assert density_at(nd, -0.5) == 0.0
    assert density_at(nd, 1.5) == 0.0
    assert density_at(nd, 0.5) == pytest.approx(1.0)


def test_density_to_cdf_uniform():
    g = EvalGrid(np.linspace(0.0, 1.0, GRID_SIZE))
    nd = normalize_density(GridDensity(g, np.ones(GRID_SIZE)))
    c = density_to_cdf(nd)
    assert c.values[0] == 0.0
    assert c.values[-1] == pytest.approx(1.0, abs=1e-9)
    # uniform density: CDF(t) = t
    assert np.allclose(c.values, g.points, atol=1e-9)


def test_density_to_cdf_requires_normalization():
    g = EvalGrid(np.linspace(0.0, 1.0, GRID_SIZE))
    with pytest.raises(ValueError):
        density_to_cdf(GridDensity(g, np.full(GRID_SIZE, 2.0)))


def test_cdf_quantile_inverse_of_uniform():
    g = EvalGrid(np.linspace(0.0, 1.0, GRID_SIZE))
    c = density_to_cdf(normalize_density(GridDensity(g, np.ones(GRID_SIZE))))
    for q in (0.05, 0.25, 0.5, 0.9, 0.95):
        assert cdf_quantile(c, q) == pytest.approx(q, abs=1e-9)
    with pytest.raises(ValueError):
        cdf_quantile(c, 0.0)
    with pytest.raises(ValueError):
        cdf_quantile(c, 1.0)


def test_cdf_quantile_flat_segment_left_endpoint():
    # density supported on [0,2] and [3,5] with a hole; CDF flat at 0.5 on the hole
    g = EvalGrid(np.linspace(0.0, 5.0, GRID_SIZE))
    vals = np.where((g.points <= 2.0) | (g.points >= 3.0), 1.0, 0.0)
    c = density_to_cdf(normalize_density(GridDensity(g, vals)))
    level = float(cdf_at(c, 2.0))
    q = cdf_quantile(c, level)
    # left endpoint of the flat run, not anywhere inside the hole
    assert q <= 2.0 + g.dx + 1e-12


def test_cdf_quantile_matches_scan_oracle():
    rng = np.random.default_rng(3)
    g = EvalGrid(np.linspace(-2.0, 2.0, GRID_SIZE))
    for _ in range(10):
        raw = rng.uniform(0, 1, GRID_SIZE) ** 2
        c = density_to_cdf(normalize_density(GridDensity(g, raw)))
        for level in rng.uniform(0.02, 0.98, 5):
            q = cdf_quantile(c, float(level))
            # oracle: first grid point whose cdf >= level brackets q from above
            k = int(np.argmax(c.values >= level))
            assert g.points[max(k - 1, 0)] - 1e-12 <= q <= g.points[k] + 1e-12


def test_trapz_uniform_matches_numpy():
    rng = np.random.default_rng(1)
    v = rng.uniform(0, 3, (4, GRID_SIZE))
    x = np.linspace(0, 2, GRID_SIZE)
    want = np.trapezoid(v, x, axis=-1)
    got = trapz_uniform(v, x[1] - x[0])
    assert np.allclose(got, want, rtol=1e-12)


def test_cdf_curve_validation():
    g = EvalGrid(np.linspace(0.0, 1.0, GRID_SIZE))
    bad = np.linspace(0, 1, GRID_SIZE)
    bad[100] = bad[99] - 0.01
    with pytest.raises(ValueError):
        CdfCurve(g, bad)
    with pytest.raises(ValueError):
        CdfCurve(g, np.linspace(0.0, 1.5, GRID_SIZE))
