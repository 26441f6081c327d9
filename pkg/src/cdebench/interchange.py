"""JSON Lines interchange for per-test-point predictive distributions.

Line 1 is a header object; every following line is one prediction record in
test-row order. Three encodings are accepted:

    {"type": "grid", "grid": [...200...], "density": [...200...]}
    {"type": "bar", "edges": [...], "masses": [...]}
    {"type": "quantiles", "levels": [...], "values": [...]}

Floats are written as shortest round-trip decimals (at most 17 significant
digits), so read(write(x)) reproduces x bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .convert import BarDistribution, QuantileFunction, bar_to_density, quantiles_to_cdf, quantiles_to_density
from .grid import CdfCurve, EvalGrid, GridDensity, density_to_cdf, normalize_density

HEADER_FIELDS = ("method", "dataset", "rep", "n_train", "fit_time_s", "predict_time_s")

RECORD_KINDS = ("grid", "bar", "quantiles")


@dataclass(frozen=True)
class InterchangeHeader:
    method: str
    dataset: str
    rep: int
    n_train: int
    fit_time_s: float
    predict_time_s: float

    def __post_init__(self):
        if not isinstance(self.method, str) or not isinstance(self.dataset, str):
            raise ValueError("header method and dataset must be strings")
        if self.rep < 0 or self.n_train < 1:
            raise ValueError("header rep must be >= 0 and n_train >= 1")
        if not (np.isfinite(self.fit_time_s) and np.isfinite(self.predict_time_s)):
            raise ValueError("header timings must be finite")


@dataclass(frozen=True)
class PredictionRecord:
    """One test point's predictive distribution in one of three encodings."""

    kind: str
    payload: object
    index: int | None = None

    def __post_init__(self):
        expected = {"grid": GridDensity, "bar": BarDistribution, "quantiles": QuantileFunction}
        if self.kind not in expected:
            raise ValueError(f"unknown encoding tag {self.kind!r}")
        if not isinstance(self.payload, expected[self.kind]):
            raise ValueError(f"{self.kind!r} record needs a {expected[self.kind].__name__} payload")


def _float_list(obj, key, line_no):
    if key not in obj:
        raise ValueError(f"line {line_no}: record is missing {key!r}")
    arr = np.asarray(obj[key], dtype=float)
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ValueError(f"line {line_no}: {key!r} must be a flat list of finite numbers")
    return arr


def _parse_record(obj, line_no, index) -> PredictionRecord:
    kind = obj.get("type")
    if kind not in RECORD_KINDS:
        raise ValueError(f"line {line_no}: unknown record type {kind!r}")
    try:
        if kind == "grid":
            grid = EvalGrid(_float_list(obj, "grid", line_no))
            dens = GridDensity(grid, _float_list(obj, "density", line_no))
            if dens.values.min() < 0:
                raise ValueError("grid density has negative entries")
            if abs(dens.integral() - 1.0) > 1e-6:
                raise ValueError(f"grid density integrates to {dens.integral():.8f}, expected 1")
            return PredictionRecord("grid", dens, index)
        if kind == "bar":
            bar = BarDistribution(_float_list(obj, "edges", line_no), _float_list(obj, "masses", line_no))
            return PredictionRecord("bar", bar, index)
        q = QuantileFunction(_float_list(obj, "levels", line_no), _float_list(obj, "values", line_no))
        return PredictionRecord("quantiles", q, index)
    except ValueError as err:
        msg = str(err)
        if msg.startswith(f"line {line_no}:"):
            raise
        raise ValueError(f"line {line_no}: {msg}") from None


def read_predictions(path):
    """Read an interchange file: (InterchangeHeader, list of PredictionRecord).

    Extra header keys are tolerated (exporters echo model versions); every
    malformed line is reported with its 1-based line number.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file, expected a header line")
    try:
        head_obj = json.loads(lines[0])
    except json.JSONDecodeError as err:
        raise ValueError(f"line 1: malformed JSON header ({err.msg})") from None
    if not isinstance(head_obj, dict):
        raise ValueError("line 1: header must be a JSON object")
    missing = [k for k in HEADER_FIELDS if k not in head_obj]
    if missing:
        raise ValueError(f"line 1: header is missing {missing}")
    header = InterchangeHeader(
        method=head_obj["method"],
        dataset=head_obj["dataset"],
        rep=int(head_obj["rep"]),
        n_train=int(head_obj["n_train"]),
        fit_time_s=float(head_obj["fit_time_s"]),
        predict_time_s=float(head_obj["predict_time_s"]),
    )
    records = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise ValueError(f"line {line_no}: empty line inside an interchange file")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise ValueError(f"line {line_no}: malformed JSON ({err.msg})") from None
        if not isinstance(obj, dict):
            raise ValueError(f"line {line_no}: record must be a JSON object")
        records.append(_parse_record(obj, line_no, index=line_no - 2))
    return header, records


def _record_obj(rec: PredictionRecord) -> dict:
    p = rec.payload
    if rec.kind == "grid":
        return {"type": "grid", "grid": p.grid.points.tolist(), "density": p.values.tolist()}
    if rec.kind == "bar":
        return {"type": "bar", "edges": p.edges.tolist(), "masses": p.masses.tolist()}
    return {"type": "quantiles", "levels": p.levels.tolist(), "values": p.values.tolist()}


def write_predictions(header: InterchangeHeader, records, path):
    """Write an interchange file; records go out in the given (test-row) order."""
    head = {
        "method": header.method,
        "dataset": header.dataset,
        "rep": header.rep,
        "n_train": header.n_train,
        "fit_time_s": header.fit_time_s,
        "predict_time_s": header.predict_time_s,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(head, allow_nan=False, separators=(",", ":")) + "\n")
        for rec in records:
            fh.write(json.dumps(_record_obj(rec), allow_nan=False, separators=(",", ":")) + "\n")


def record_to_density(rec: PredictionRecord, grid: EvalGrid) -> GridDensity:
    """Any record as a normalized density on the target grid.

    Grid records carrying a different grid are resampled by linear
    interpolation (zero outside their own span) and renormalized.
    """
    if rec.kind == "grid":
        gd = rec.payload
        if gd.grid.same_as(grid):
            return normalize_density(gd)
        vals = np.interp(grid.points, gd.grid.points, gd.values, left=0.0, right=0.0)
        return normalize_density(GridDensity(grid, vals))
    if rec.kind == "bar":
        return bar_to_density(rec.payload, grid)
    return quantiles_to_density(rec.payload, grid)


def record_to_cdf(rec: PredictionRecord, grid: EvalGrid) -> CdfCurve:
    """Any record as a CDF curve; quantile records skip the density detour."""
    if rec.kind == "quantiles":
        return quantiles_to_cdf(rec.payload, grid)
    return density_to_cdf(record_to_density(rec, grid))
