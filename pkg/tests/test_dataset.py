import numpy as np
import pytest

from cdebench.dataset import Dataset, kfold_indices, load_csv_dataset


def _write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_numeric_and_categorical(tmp_path):
    p = _write(
        tmp_path,
        "x1,color,y\n"
        "1.0,red,10\n"
        "2.0,blue,20\n"
        "3.5,red,30\n",
    )
    ds = load_csv_dataset(p, "y")
    assert ds.n == 3
    assert ds.feature_names == ("x1", "color=blue", "color=red")
    assert np.allclose(ds.features[:, 0], [1.0, 2.0, 3.5])
    assert np.allclose(ds.features[:, 1], [0.0, 1.0, 0.0])
    assert np.allclose(ds.features[:, 2], [1.0, 0.0, 1.0])
    assert np.allclose(ds.response, [10, 20, 30])


def test_missing_numeric_without_impute_raises(tmp_path):
    p = _write(tmp_path, "x1,y\n1.0,1\n,2\n3.0,3\n")
    with pytest.raises(ValueError, match="missing value"):
        load_csv_dataset(p, "y")


def test_missing_numeric_with_impute(tmp_path):
    p = _write(tmp_path, "x1,y\n1.0,1\nNA,2\n3.0,3\n")
    ds = load_csv_dataset(p, "y", impute=True)
    assert ds.feature_names == ("x1", "x1__missing")
    assert ds.features[1, 0] == pytest.approx(2.0)  # mean of 1 and 3
    assert np.allclose(ds.features[:, 1], [0.0, 1.0, 0.0])


def test_missing_target_always_raises(tmp_path):
    p = _write(tmp_path, "x1,y\n1.0,1\n2.0,\n")
    with pytest.raises(ValueError, match="target"):
        load_csv_dataset(p, "y", impute=True)


def test_non_numeric_target_raises(tmp_path):
    p = _write(tmp_path, "x1,y\n1.0,a\n2.0,b\n")
    with pytest.raises(ValueError, match="non-numeric target"):
        load_csv_dataset(p, "y")


def test_absent_target_column(tmp_path):
    p = _write(tmp_path, "x1,y\n1.0,1\n2.0,2\n")
    with pytest.raises(ValueError, match="not in header"):
        load_csv_dataset(p, "z")


def test_too_few_rows(tmp_path):
    p = _write(tmp_path, "x1,y\n1.0,1\n")
    with pytest.raises(ValueError, match="at least 2"):
        load_csv_dataset(p, "y")


def test_missing_file():
    with pytest.raises(OSError):
        load_csv_dataset("/nonexistent/nope.csv", "y")


def test_deterministic_category_order(tmp_path):
    p = _write(tmp_path, "c,y\nzeta,1\nalpha,2\nmid,3\n")
    ds = load_csv_dataset(p, "y")
    assert ds.feature_names == ("c=alpha", "c=mid", "c=zeta")


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.ones((3, 2)), np.ones(2), ("a", "b"))
    with pytest.raises(ValueError):
        Dataset(np.full((2, 1), np.nan), np.ones(2), ("a",))


def test_subset_keeps_names():
    ds = Dataset(np.arange(8.0).reshape(4, 2), np.arange(4.0), ("a", "b"))
    sub = ds.subset([2, 0])
    assert sub.n == 2
    assert np.allclose(sub.response, [2.0, 0.0])
    assert sub.feature_names == ("a", "b")


def test_kfold_partitions():
    rng = np.random.default_rng(0)
    folds = kfold_indices(25, 3, rng)
    assert len(folds) == 3
    all_val = np.sort(np.concatenate([v for _, v in folds]))
    assert np.array_equal(all_val, np.arange(25))
    for tr, va in folds:
        assert np.intersect1d(tr, va).size == 0
        assert tr.size + va.size == 25
