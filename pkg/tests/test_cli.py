import csv
import io
import os

import numpy as np
import pytest

import pagecast as pc
from pagecast.cli import main


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _write_series_csv(path, n_steps=400, n_series=2, seed=0, noise=0.05):
    rng = np.random.default_rng(seed)
    t = np.arange(1, n_steps + 1, dtype=float)
    rows = [["t"] + [f"s{i}" for i in range(n_series)]]
    for i, ti in enumerate(t):
        vals = [np.cos(2 * np.pi * ti / 80) * (1 + 0.1 * j)
                + noise * rng.normal() for j in range(n_series)]
        rows.append([int(ti)] + [f"{v:.8f}" for v in vals])
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


class TestCreatePredict:
    def test_create_then_predict(self, tmp_path, capsys):
        data = tmp_path / "data.csv"
        _write_series_csv(data)
        model_dir = tmp_path / "model"
        code, out, err = _run(capsys, [
            "create", "--input", str(data), "--model", str(model_dir),
            "--T0", "80", "--Tprime", "100000"])
        assert code == 0
        assert model_dir.is_dir()
        assert "us/record" in err

        code, out, err = _run(capsys, [
            "predict", "--model", str(model_dir), "--series", "s0",
            "--t", "500", "--format", "csv"])
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 1
        assert rows[0]["kind"] == "forecast"
        assert float(rows[0]["lo"]) <= float(rows[0]["mean"]) <= float(rows[0]["hi"])

    def test_predict_range_and_no_uq(self, tmp_path, capsys):
        data = tmp_path / "data.csv"
        _write_series_csv(data)
        model_dir = tmp_path / "model"
        assert _run(capsys, ["create", "--input", str(data), "--model",
                             str(model_dir), "--T0", "80"])[0] == 0
        code, out, _ = _run(capsys, [
            "predict", "--model", str(model_dir), "--series", "s1",
            "--range", "10:12", "--no-uq", "--format", "csv"])
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 3
        assert "variance" not in rows[0]
        assert all(r["kind"] == "imputed" for r in rows)

    def test_t_and_range_mutually_exclusive(self, tmp_path, capsys):
        code, _, err = _run(capsys, [
            "predict", "--model", str(tmp_path / "x"), "--series", "a",
            "--t", "3", "--range", "1:5"])
        assert code == 1 and "exactly one" in err

    def test_create_empty_csv_fails(self, tmp_path, capsys):
        data = tmp_path / "empty.csv"
        data.write_text("t,a\n")
        code, _, err = _run(capsys, [
            "create", "--input", str(data), "--model", str(tmp_path / "m")])
        assert code == 1
        assert "EmptyFile" in err

    def test_no_overwrite_without_flag(self, tmp_path, capsys):
        data = tmp_path / "data.csv"
        _write_series_csv(data, n_steps=200)
        model_dir = tmp_path / "model"
        assert _run(capsys, ["create", "--input", str(data), "--model",
                             str(model_dir), "--T0", "50"])[0] == 0
        code, _, err = _run(capsys, ["create", "--input", str(data),
                                     "--model", str(model_dir)])
        assert code == 1 and "exists" in err
        assert _run(capsys, ["create", "--input", str(data), "--model",
                             str(model_dir), "--T0", "50", "--overwrite"])[0] == 0

    def test_insert_extends_model(self, tmp_path, capsys):
        data = tmp_path / "data.csv"
        _write_series_csv(data, n_steps=300)
        model_dir = tmp_path / "model"
        assert _run(capsys, ["create", "--input", str(data), "--model",
                             str(model_dir), "--T0", "80"])[0] == 0
        more = tmp_path / "more.csv"
        _write_series_csv(more, n_steps=50, seed=9)
        assert _run(capsys, ["insert", "--input", str(more), "--model",
                             str(model_dir)])[0] == 0
        model = pc.load_model(model_dir)
        assert model.n_steps == 350


class TestSynthCli:
    def test_synth1_writes_files(self, tmp_path, capsys):
        out_dir = tmp_path / "synth"
        code, _, err = _run(capsys, [
            "synth", "--preset", "synth1", "--out", str(out_dir),
            "--T", "200", "--n", "2", "--m", "2", "--seed", "5"])
        assert code == 0
        for tag in ("obs", "mean", "var"):
            assert (out_dir / f"synth1_{tag}.csv").is_file()
        batch = pc.load_csv(out_dir / "synth1_obs.csv", "t")
        assert batch.values.shape == (4, 200)

    def test_lrf_preset(self, tmp_path, capsys):
        out_dir = tmp_path / "lrf"
        code, _, _ = _run(capsys, [
            "synth", "--preset", "lrf", "--out", str(out_dir),
            "--T", "300", "--n", "3", "--K", "2", "--R-max", "2"])
        assert code == 0
        batch = pc.load_csv(out_dir / "lrf_obs.csv", "t")
        assert batch.values.shape == (3, 300)


class TestBenchCli:
    def test_sizes_table(self, tmp_path, capsys):
        code, out, _ = _run(capsys, [
            "bench", "--sizes", "2e3,4e3", "--N", "4", "--queries", "20",
            "--T0", "80", "--format", "csv"])
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 2
        assert {"total_obs", "train_s", "us_per_obs", "p50_ms",
                "p99_ms", "nrmse"} <= set(rows[0])

    def test_vary_n(self, tmp_path, capsys):
        code, out, _ = _run(capsys, [
            "bench", "--vary-N", "1,4", "--steps", "600", "--queries", "10",
            "--T0", "80", "--format", "csv"])
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [r["N"] for r in rows] == ["1", "4"]

    def test_compare_kernels(self, capsys):
        code, out, _ = _run(capsys, [
            "bench", "--compare-kernels", "--repeat", "1", "--format", "csv"])
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        kernels_seen = {r["kernel"] for r in rows}
        assert kernels_seen == {"ar_recurrence", "reconstruct_points"}
        impls = {r["impl"] for r in rows}
        assert "numpy" in impls


class TestEvalCli:
    def test_wbc_table(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        truth = rng.normal(size=(1, 60))
        ones = np.ones_like(truth, dtype=bool)
        pc.write_csv(pc.TimeSeriesBatch(["a"], truth, ones),
                     tmp_path / "truth.csv")
        pc.write_csv(pc.TimeSeriesBatch(["a"], truth + 0.01, ones),
                     tmp_path / "good.csv")
        pc.write_csv(pc.TimeSeriesBatch(["a"], truth + 1.0, ones),
                     tmp_path / "bad.csv")
        manifest = tmp_path / "exp.csv"
        manifest.write_text(
            "algorithm,experiment,pred,truth\n"
            "good,x1,good.csv,truth.csv\n"
            "bad,x1,bad.csv,truth.csv\n")
        code, out, _ = _run(capsys, ["eval", "--manifest", str(manifest),
                                     "--format", "csv"])
        assert code == 0
        rows = {r["algorithm"]: r for r in csv.DictReader(io.StringIO(out))}
        assert float(rows["good"]["wbc"]) > 0.9
        assert float(rows["good"]["wbc"]) + float(rows["bad"]["wbc"]) == pytest.approx(1.0)

    def test_bad_manifest(self, tmp_path, capsys):
        manifest = tmp_path / "exp.csv"
        manifest.write_text("foo,bar\n1,2\n")
        code, _, err = _run(capsys, ["eval", "--manifest", str(manifest)])
        assert code == 1 and "columns" in err
