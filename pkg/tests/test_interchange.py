import json

import numpy as np
import pytest
from scipy.stats import norm

from cdebench.convert import STANDARD_QUANTILE_LEVELS, BarDistribution, QuantileFunction
from cdebench.grid import GRID_SIZE, EvalGrid, GridDensity, make_eval_grid, normalize_density
from cdebench.interchange import (
    InterchangeHeader,
    PredictionRecord,
    read_predictions,
    record_to_cdf,
    record_to_density,
    write_predictions,
)


def _header():
    return InterchangeHeader("MDN", "toy", 0, 100, 1.25, 0.03125)


def _records(rng):
    g = EvalGrid(np.linspace(-4.0, 4.0, GRID_SIZE))
    dens = normalize_density(GridDensity(g, norm.pdf(g.points, rng.normal(), 1.0)))
    bar = BarDistribution(np.linspace(-3, 3, 11), np.full(10, 0.1))
    q = QuantileFunction(STANDARD_QUANTILE_LEVELS, norm.ppf(STANDARD_QUANTILE_LEVELS, 0.5, 2.0))
    return [
        PredictionRecord("grid", dens),
        PredictionRecord("bar", bar),
        PredictionRecord("quantiles", q),
    ]


def test_round_trip_exact(tmp_path):
    rng = np.random.default_rng(4)
    header = _header()
    records = _records(rng)
    path = tmp_path / "preds.jsonl"
    write_predictions(header, records, path)
    h2, r2 = read_predictions(path)
    assert h2 == header
    assert len(r2) == len(records)
    assert np.array_equal(r2[0].payload.values, records[0].payload.values)
    assert np.array_equal(r2[0].payload.grid.points, records[0].payload.grid.points)
    assert np.array_equal(r2[1].payload.edges, records[1].payload.edges)
    assert np.array_equal(r2[1].payload.masses, records[1].payload.masses)
    assert np.array_equal(r2[2].payload.levels, records[2].payload.levels)
    assert np.array_equal(r2[2].payload.values, records[2].payload.values)
    # write(read(x)) is byte identical
    path2 = tmp_path / "again.jsonl"
    write_predictions(h2, r2, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_read_assigns_indices(tmp_path):
    path = tmp_path / "preds.jsonl"
    write_predictions(_header(), _records(np.random.default_rng(0)), path)
    _, recs = read_predictions(path)
    assert [r.index for r in recs] == [0, 1, 2]


def test_malformed_line_reports_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    write_predictions(_header(), _records(np.random.default_rng(1)), path)
    lines = path.read_text().splitlines()
    lines[2] = "{not json"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="line 3"):
        read_predictions(path)


def test_unknown_type_rejected(tmp_path):
    path = tmp_path / "bad.jsonl"
    write_predictions(_header(), [], path)
    with open(path, "a") as fh:
        fh.write(json.dumps({"type": "spline", "knots": [1, 2]}) + "\n")
    with pytest.raises(ValueError, match="unknown record type"):
        read_predictions(path)


def test_header_missing_field(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"method": "x", "dataset": "d", "rep": 0}) + "\n")
    with pytest.raises(ValueError, match="missing"):
        read_predictions(path)


def test_extra_header_keys_tolerated(tmp_path):
    path = tmp_path / "ok.jsonl"
    head = {
        "method": "tabicl",
        "dataset": "d",
        "rep": 1,
        "n_train": 50,
        "fit_time_s": 0.5,
        "predict_time_s": 0.1,
        "model_version": "1.2.3",
    }
    path.write_text(json.dumps(head) + "\n")
    header, recs = read_predictions(path)
    assert header.method == "tabicl"
    assert recs == []


def test_bar_mass_sum_violation(tmp_path):
    path = tmp_path / "bad.jsonl"
    write_predictions(_header(), [], path)
    with open(path, "a") as fh:
        fh.write(json.dumps({"type": "bar", "edges": [0, 1, 2], "masses": [0.25, 0.25]}) + "\n")
    with pytest.raises(ValueError, match="line 2.*sum"):
        read_predictions(path)


def test_unnormalized_grid_record_rejected(tmp_path):
    g = EvalGrid(np.linspace(0.0, 1.0, GRID_SIZE))
    path = tmp_path / "bad.jsonl"
    write_predictions(_header(), [], path)
    with open(path, "a") as fh:
        fh.write(json.dumps({"type": "grid", "grid": g.points.tolist(), "density": [2.0] * GRID_SIZE}) + "\n")
    with pytest.raises(ValueError, match="integrates"):
        read_predictions(path)


def test_empty_line_rejected(tmp_path):
    path = tmp_path / "bad.jsonl"
    write_predictions(_header(), _records(np.random.default_rng(2)), path)
    text = path.read_text().splitlines()
    text.insert(2, "")
    path.write_text("\n".join(text) + "\n")
    with pytest.raises(ValueError, match="line 3: empty"):
        read_predictions(path)


def test_record_to_density_and_cdf_consistency():
    rng = np.random.default_rng(8)
    grid = make_eval_grid(rng.normal(0, 2, 2000))
    for rec in _records(rng):
        gd = record_to_density(rec, grid)
        assert abs(gd.integral() - 1.0) <= 1e-6
        c = record_to_cdf(rec, grid)
        assert c.values[-1] <= 1.0 + 1e-9


def test_grid_record_resampled_onto_other_grid():
    g1 = EvalGrid(np.linspace(-5.0, 5.0, GRID_SIZE))
    dens = normalize_density(GridDensity(g1, norm.pdf(g1.points, 0, 1)))
    rec = PredictionRecord("grid", dens)
    g2 = EvalGrid(np.linspace(-6.0, 6.0, GRID_SIZE))
    out = record_to_density(rec, g2)
    assert abs(out.integral() - 1.0) <= 1e-6
    mid = np.interp(0.0, g2.points, out.values)
    assert mid == pytest.approx(norm.pdf(0), rel=1e-2)


def test_prediction_record_validation():
    with pytest.raises(ValueError):
        PredictionRecord("spline", None)
    with pytest.raises(ValueError):
        PredictionRecord("bar", QuantileFunction(np.array([0.1, 0.9]), np.array([0.0, 1.0])))
