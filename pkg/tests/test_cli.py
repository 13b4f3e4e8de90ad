import json

import pytest

from tandem_ru import cli
from tandem_ru.config import ExperimentConfig, save_config

SMALL = {"ue_grid": {"pitch_m": 1.0}, "train": {"epochs": 15}}


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "small.json"
    save_config(ExperimentConfig.from_dict(SMALL), cfg)
    assert cli.main(["generate", "--config", str(cfg), "--out", str(root / "data")]) == 0
    ds = str(root / "data" / "dataset.csv")
    assert cli.main(["train", "--dataset", ds, "--algo", "all", "--out", str(root / "models")]) == 0
    return root, ds


def test_generate_prints_counts(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    save_config(ExperimentConfig.from_dict(SMALL), cfg)
    assert cli.main(["generate", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    # pitch 1 m with 0.5 m margins: 8 x 5 grid points, 4 IBBCs each
    assert "samples: 160" in out and "best_ru histogram" in out
    manifest = json.loads((tmp_path / "o" / "dataset.manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["n_samples"] == 160


def test_invalid_config_exits_2_with_violations(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"freq_high_hz": 0, "rus": [{"position": [1, 1, 9], "facing": [0, 0, -1]}]}))
    assert cli.main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "freq_high_hz" in err and "rus[0].position" in err


def test_unknown_key_exits_2(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"bogus": 1}')
    assert cli.main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file_exits_3(tmp_path):
    assert cli.main(["generate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 3


def test_train_outputs(small_run):
    root, _ = small_run
    names = sorted(p.name for p in (root / "models").iterdir())
    assert [n for n in names if n.startswith("algo")] == ["algo1.json", "algo2.json", "algo3.json"]
    rows = (root / "models" / "accuracy_algo3.csv").read_text().splitlines()
    assert len(rows) == 16
    assert all(0 <= float(r.split(",")[3]) <= 1 for r in rows[1:])


def test_train_rerun_identical(small_run, tmp_path):
    root, ds = small_run
    assert cli.main(["train", "--dataset", ds, "--algo", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "algo2.json").read_bytes() == (root / "models" / "algo2.json").read_bytes()
    assert not (tmp_path / "algo1.json").exists()


def test_eval_outputs(small_run, capsys):
    root, ds = small_run
    out = root / "report"
    assert cli.main(["eval", "--dataset", ds, "--models", str(root / "models"), "--out", str(out)]) == 0
    assert "p10 gap ThreeStep - Algo3Only" in capsys.readouterr().out
    assert len(list(out.glob("cdf_*.csv"))) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    data_manifest = json.loads((root / "data" / "dataset.manifest.json").read_text())
    assert manifest["config_hash"] == data_manifest["config_hash"]
    assert manifest["dataset_sha256"] == data_manifest["csv_sha256"]


def test_eval_missing_model_names_algorithm(small_run, tmp_path, capsys):
    root, ds = small_run
    for a in (1, 3):
        (tmp_path / f"algo{a}.json").write_bytes((root / "models" / f"algo{a}.json").read_bytes())
    assert cli.main(["eval", "--dataset", ds, "--models", str(tmp_path), "--out", str(tmp_path / "r")]) == 3
    assert "algorithm 2" in capsys.readouterr().err


def test_eval_dataset_mismatch_exits_4(small_run, tmp_path):
    root, _ = small_run
    cfg = tmp_path / "c.json"
    save_config(ExperimentConfig.from_dict(SMALL), cfg)
    assert cli.main(["generate", "--config", str(cfg), "--seed", "99", "--out", str(tmp_path / "d")]) == 0
    other = str(tmp_path / "d" / "dataset.csv")
    assert cli.main(["eval", "--dataset", other, "--models", str(root / "models"), "--out", str(tmp_path / "r")]) == 4


def test_ablate(small_run, tmp_path, capsys):
    root, ds = small_run
    args = ["ablate", "--dataset", ds, "--models", str(root / "models"), "--out"]
    assert cli.main(args + [str(tmp_path / "a")]) == 0
    summary = json.loads((tmp_path / "a" / "ablation.json").read_text())
    assert summary["one_to_many_low_band_pdps"] >= 0 and summary["ambiguous_val_samples"] >= 0
    assert "algo3 accuracy (ambiguous)" in capsys.readouterr().out
    assert cli.main(args + [str(tmp_path / "b")]) == 0
    for name in ("ablation.csv", "ablation.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_ablate_trains_its_own_model(small_run, tmp_path):
    _, ds = small_run
    assert cli.main(["ablate", "--dataset", ds, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "ablation.csv").read_text().startswith("subset,n_samples,algo3_accuracy")


def test_help_per_command(capsys):
    for cmd in ("generate", "train", "eval", "ablate"):
        with pytest.raises(SystemExit) as exc:
            cli.main([cmd, "--help"])
        assert exc.value.code == 0
        assert "--out" in capsys.readouterr().out
