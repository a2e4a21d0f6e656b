import json

import pytest

from zsecg import io as zio
from zsecg.cli import main
from zsecg.ingest import BeatSet
from zsecg.pipeline.results import FILES, read_csv

SMALL = ["--synthetic", "2", "--synthetic-patients", "3", "--synthetic-beats", "300",
         "--runs", "1", "--max-epochs", "2", "--patience", "2"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "fast.json").write_text(json.dumps({"dict-iters": 3, "epochs": 3}))
    return d


@pytest.fixture(scope="module")
def beat_file(workdir):
    assert main(["synth", "--seed", "1", "--patients", "3", "--beats", "300",
                 "--out", str(workdir / "csv")]) == 0
    out = workdir / "beats.bin"
    assert main(["ingest", "--data-dir", str(workdir / "csv"), "--format", "csv",
                 "--out", str(out)]) == 0
    return out


def test_ingest_writes_beats(beat_file):
    beats = BeatSet.load(beat_file)
    assert sorted(set(beats.patient_id)) == ["S000", "S001", "S002"]
    assert beats.single.shape[1] == 128


def test_learn_dict_and_mtm(beat_file, workdir, capsys):
    d = workdir / "dict.json"
    assert main(["sparse", "learn-dict", "--in", str(beat_file), "--patient", "S000",
                 "--iters", "3", "--out", str(d)]) == 0
    D = zio.load(d, "dictionary")
    assert D.atoms.shape == (128, 20) and D.patient_id == "S000"
    assert zio.provenance(d)["patient_id"] == "S000"
    q = workdir / "mtm.json"
    assert main(["adapt", "learn-mtm", "--dict", str(d), "--in", str(beat_file),
                 "--source", "S001", "--epochs", "3", "--out", str(q)]) == 0
    mtm = zio.load(q, "mtm")
    assert (mtm.source_id, mtm.target_id, mtm.epochs) == ("S001", "S000", 3)
    assert "MTM S001 -> S000" in capsys.readouterr().out


@pytest.mark.parametrize("strategy", ["baseline", "abs"])
def test_build_dataset_and_train(beat_file, workdir, strategy, capsys):
    ds = workdir / f"{strategy}.bin"
    assert main(["build-dataset", "--in", str(beat_file), "--target", "S000",
                 "--strategy", strategy, "--out", str(ds)]) == 0
    data = BeatSet.load(ds)
    assert 0 < data.y.sum() < len(data)
    model = workdir / f"{strategy}.json"
    assert main(["train-cnn", "--dataset", str(ds), "--max-epochs", "2",
                 "--out", str(model)]) == 0
    assert zio.provenance(model)["epochs_run"] <= 2
    assert "val accuracy" in capsys.readouterr().out


def test_run_emits_results(workdir, capsys):
    out = workdir / "run"
    assert main(["run", *SMALL, "--config", str(workdir / "fast.json"),
                 "--strategy", "baseline", "--out", str(out)]) == 0
    for name in FILES:
        assert (out / name).exists()
    rows = read_csv(out / "metrics_per_run.csv")
    assert {r["patient_id"] for r in rows} == {"S000", "S001", "S002"}
    cfg = json.loads((out / "config.json").read_text())["experiments"]["baseline"]
    assert cfg["config"]["strategy"]["dict_iters"] == 3 and cfg["seeds"] == [0]
    assert "[baseline] ensemble" in capsys.readouterr().out


def test_cascade_and_sweeps(workdir, capsys):
    cfg = ["--config", str(workdir / "fast.json"), "--patients", "S000"]
    assert main(["cascade", *SMALL, *cfg, "--fraction", "0.4",
                 "--out", str(workdir / "cas")]) == 0
    assert "NPE-only fraction" in capsys.readouterr().out
    eff = read_csv(workdir / "cas" / "efficiency.csv")
    assert [float(r["fraction_target"]) for r in eff] == [0.0, 0.4]
    assert main(["sweep-confidence", *SMALL, *cfg, "--out", str(workdir / "conf")]) == 0
    assert len(read_csv(workdir / "conf" / "f1_vs_confidence.csv")) == 50
    assert main(["sweep-threshold", "--synthetic", "2", "--synthetic-patients", "3",
                 "--synthetic-beats", "900", "--patients", "S000",
                 "--out", str(workdir / "thr")]) == 0
    out = capsys.readouterr().out
    assert "NPE: mean AUC" in out
    assert len(read_csv(workdir / "thr" / "f1_vs_threshold.csv")) == 3 * 101


def test_errors_exit_nonzero(workdir, capsys):
    assert main(["run", "--out", str(workdir / "x")]) == 1
    assert "give --data-dir or --synthetic" in capsys.readouterr().err
    assert main(["sparse", "learn-dict", "--in", str(workdir / "missing.bin")]) == 1
    with pytest.raises(SystemExit):
        main(["run", "--strategy", "bogus"])
