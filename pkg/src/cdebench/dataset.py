"""CSV ingestion into a fully numeric design matrix."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

# Cell contents treated as missing, after stripping and lowercasing.
MISSING_TOKENS = {"", "na", "nan", "null"}


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, numeric response, and the expanded feature names."""

    features: np.ndarray
    response: np.ndarray
    feature_names: tuple

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.response, dtype=float)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
            raise ValueError("features must be (n, d) with a matching response vector")
        if len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names must match the number of columns")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.response[rows], self.feature_names)


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _try_float(cell: str):
    try:
        v = float(cell)
    except ValueError:
        return None
    return v


def load_csv_dataset(path, target: str, impute: bool = False) -> Dataset:
    """Load a UTF-8 comma-separated file with a header row into a Dataset.

    The target column must be numeric and complete. Non-numeric feature
    columns are expanded into one indicator column per observed category
    (sorted for determinism). Missing numeric cells are an error unless
    `impute` is set, in which case they become the column mean and a
    missingness indicator column is appended.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    header = [h.strip() for h in header]
    if target not in header:
        raise ValueError(f"{path}: target column {target!r} not in header {header}")
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least 2 data rows, got {len(rows)}")
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise ValueError(f"{path}: row {i + 2} has {len(r)} cells, expected {len(header)}")

    t_pos = header.index(target)
    y = np.empty(len(rows))
    for i, r in enumerate(rows):
        cell = r[t_pos]
        if _is_missing(cell):
            raise ValueError(f"{path}: missing target value in row {i + 2}")
        v = _try_float(cell)
        if v is None or not np.isfinite(v):
            raise ValueError(f"{path}: non-numeric target value {cell!r} in row {i + 2}")
        y[i] = v

    cols = []
    names = []
    for j, col_name in enumerate(header):
        if j == t_pos:
            continue
        cells = [r[j] for r in rows]
        missing = np.array([_is_missing(c) for c in cells])
        parsed = [None if m else _try_float(c) for c, m in zip(cells, missing)]
        numeric = all(v is not None and np.isfinite(v) for v, m in zip(parsed, missing) if not m)
        if numeric and not missing.all():
            vals = np.array([0.0 if v is None else v for v in parsed])
            if missing.any():
                if not impute:
                    row = int(np.flatnonzero(missing)[0]) + 2
                    raise ValueError(
                        f"{path}: missing value in numeric column {col_name!r} (row {row}); "
                        "pass impute=True to mean-impute"
                    )
                mean = vals[~missing].mean()
                vals = np.where(missing, mean, vals)
                cols.append(vals)
                names.append(col_name)
                cols.append(missing.astype(float))
                names.append(f"{col_name}__missing")
            else:
                cols.append(vals)
                names.append(col_name)
        else:
            # categorical: one indicator per observed category, sorted
            if missing.any() and not impute:
                row = int(np.flatnonzero(missing)[0]) + 2
                raise ValueError(
                    f"{path}: missing value in column {col_name!r} (row {row}); "
                    "pass impute=True to treat missing as its own category"
                )
            values = ["" if m else c.strip() for c, m in zip(cells, missing)]
            for cat in sorted(set(values)):
                cols.append(np.array([1.0 if v == cat else 0.0 for v in values]))
                names.append(f"{col_name}={cat}")

    X = np.column_stack(cols) if cols else np.empty((len(rows), 0))
    return Dataset(X, y, tuple(names))


def kfold_indices(n: int, n_folds: int, rng: np.random.Generator):
    """Deterministic K-fold split of range(n): list of (train_idx, val_idx)."""
    if n_folds < 2 or n < n_folds:
        raise ValueError(f"cannot make {n_folds} folds out of {n} rows")
    perm = rng.permutation(n)
    blocks = np.array_split(perm, n_folds)
    out = []
    for k in range(n_folds):
        val = blocks[k]
        train = np.concatenate([blocks[i] for i in range(n_folds) if i != k])
        out.append((train, val))
    return out
