import json

import numpy as np
import pytest

from cdebench.cli import main
from cdebench.dgp import DGP_REGISTRY, synthetic_pool
from cdebench.grid import GridDensity, make_eval_grid, trapz_uniform
from cdebench.harness import SplitPlan, make_splits, read_records
from cdebench.interchange import InterchangeHeader, PredictionRecord, write_predictions


def _write_config(tmp_path, **overrides):
    cfg = {
        "datasets": ["bimodal"],
        "methods": ["Oracle", "LinearGauss-Homo"],
        "sizes": [40],
        "seed": 11,
        "out": str(tmp_path / "store"),
    }
    cfg.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_command(tmp_path, capsys):
    assert main(["run", "--config", str(_write_config(tmp_path))]) == 0
    out = capsys.readouterr().out
    assert "wrote 10 records (0 failed)" in out
    records = read_records(tmp_path / "store" / "records.jsonl")
    assert len(records) == 10


def test_report_command(tmp_path, capsys):
    main(["run", "--config", str(_write_config(tmp_path))])
    capsys.readouterr()
    assert main(["report", "--store", str(tmp_path / "store"), "--metric", "crps"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("method,bimodal@40")
    assert (tmp_path / "store" / "heatmap_crps.csv").read_text() == out


def test_significance_command(tmp_path, capsys):
    main(["run", "--config", str(_write_config(tmp_path))])
    capsys.readouterr()
    rc = main(["significance", "--store", str(tmp_path / "store"),
               "--foundation", "Oracle", "--alpha", "0.1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "foundation,competitor,dataset,n,metric,t,p,reject"
    assert (tmp_path / "store" / "significance.csv").read_text() == out
    # only the requested foundation appears
    assert all(line.startswith("Oracle,") for line in out.splitlines()[1:])


def test_splits_command_schema_and_determinism(tmp_path, capsys):
    out_dir = tmp_path / "sp"
    assert main(["splits", "--dataset", "bimodal", "--n", "40", "--seed", "11",
                 "--out", str(out_dir)]) == 0
    assert "wrote 5 split files" in capsys.readouterr().out
    files = sorted(p.name for p in out_dir.iterdir())
    assert files == [f"splits_40_{rep}.json" for rep in range(5)]
    obj = json.loads((out_dir / "splits_40_0.json").read_text())
    assert obj["dataset"] == "bimodal"
    assert obj["n_train"] == 40 and obj["rep"] == 0 and obj["master_seed"] == 11
    assert len(obj["train"]) == 40 and len(obj["test"]) == 14
    assert not set(obj["train"]) & set(obj["test"])
    # the files must agree with the library splits a run would use
    pool = synthetic_pool("bimodal", 11)
    train_idx, test_idx = make_splits(pool, SplitPlan(40, 11))[0]
    assert obj["train"] == train_idx.tolist()
    assert obj["test"] == test_idx.tolist()

    again = tmp_path / "sp2"
    main(["splits", "--dataset", "bimodal", "--n", "40", "--seed", "11", "--out", str(again)])
    for name in files:
        assert (out_dir / name).read_bytes() == (again / name).read_bytes()


def test_splits_command_with_csv(tmp_path, capsys):
    rng = np.random.default_rng(0)
    path = tmp_path / "toy.csv"
    with open(path, "w") as fh:
        fh.write("a,y\n")
        for _ in range(60):
            a = float(rng.normal())
            fh.write(f"{a!r},{a + float(rng.normal())!r}\n")
    assert main(["splits", "--dataset", str(path), "--n", "30", "--out", str(tmp_path / "sp")]) == 0
    obj = json.loads((tmp_path / "sp" / "splits_30_0.json").read_text())
    assert obj["dataset"] == "toy" and obj["master_seed"] == 0


def test_score_command_prints_six_metrics(tmp_path, capsys):
    pool = synthetic_pool("bimodal", 11)
    train_idx, test_idx = make_splits(pool, SplitPlan(40, 11))[0]
    grid = make_eval_grid(pool.response[train_idx])
    dens = DGP_REGISTRY["bimodal"].density_matrix(pool.features[test_idx], grid)
    dens = dens / trapz_uniform(dens, grid.dx)[:, None]
    pred = tmp_path / "pred.jsonl"
    write_predictions(
        InterchangeHeader("Ext", "bimodal", 0, 40, 2.0, 0.5),
        [PredictionRecord("grid", GridDensity(grid, row)) for row in dens],
        pred,
    )
    truth = tmp_path / "truth.csv"
    with open(truth, "w") as fh:
        fh.write("x0,y\n")
        for xr, yr in zip(pool.features[test_idx], pool.response[test_idx]):
            fh.write(f"{float(xr[0])!r},{float(yr)!r}\n")

    assert main(["score", "--pred", str(pred), "--truth", str(truth), "--target", "y"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    names = [line.split(":")[0] for line in lines]
    assert names == ["cde_loss", "log_lik", "crps", "pit_ks", "coverage90", "total_time_s"]
    values = [float(line.split(":")[1]) for line in lines]
    assert all(np.isfinite(values))
    assert values[5] == 2.5  # header fit + predict time


def test_cli_reports_errors_with_exit_code_one(tmp_path, capsys):
    rc = main(["score", "--pred", str(tmp_path / "missing.jsonl"),
               "--truth", str(tmp_path / "missing.csv"), "--target", "y"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"datasets": ["bimodal"]}))
    assert main(["run", "--config", str(bad)]) == 1
    assert "missing" in capsys.readouterr().err


def test_cli_rejects_unknown_metric(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["report", "--store", str(tmp_path), "--metric", "sharpness"])
    assert exc.value.code == 2
