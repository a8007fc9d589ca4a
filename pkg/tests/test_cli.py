import json

import pytest

from ailad.cli import main
from conftest import tiny_overrides


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--no-such-flag"])
    assert exc.value.code == 2


def test_bad_override_and_unknown_column_exit_2(tmp_path, capsys):
    assert main(["train", "--run-dir", str(tmp_path / "a"), "bogus=1"]) == 2
    assert main(["ablate", "--run-dir", str(tmp_path / "b"), "--columns", "AILAD,Nope"]) == 2
    assert main(["evaluate", "--run-dir", str(tmp_path / "missing")]) == 2
    assert "error" in capsys.readouterr().err


def test_train_is_byte_identical_on_rerun(tmp_path, capsys):
    ov = tiny_overrides()
    for name in ("a", "b"):
        assert main(["train", "--run-dir", str(tmp_path / name), "--seed", "2", *ov]) == 0
    a = (tmp_path / "a" / "eval" / "summary.json").read_bytes()
    b = (tmp_path / "b" / "eval" / "summary.json").read_bytes()
    assert a == b
    assert json.loads(a)["seed"] == 2
    assert "JSD All train" in capsys.readouterr().out


def test_gen_experts_then_train_then_report(tmp_path, capsys):
    ov = tiny_overrides()
    data = tmp_path / "data"
    assert main(["gen-experts", "--run-dir", str(data), *ov]) == 0
    assert (data / "expert_extended.csv").exists()
    run = tmp_path / "run"
    run.mkdir()
    (run / "expert.csv").write_bytes((data / "expert.csv").read_bytes())
    assert main(["train-carmi", "--run-dir", str(run), *ov]) == 0
    assert main(["evaluate", "--run-dir", str(run)]) == 0
    out = tmp_path / "report"
    assert main(["report", str(run), str(data), "--out", str(out)]) == 2
    assert main(["report", str(run), "--out", str(out)]) == 0
    header = (out / "jsd.csv").read_text().splitlines()[0]
    assert header == "split,metric,CARMI"
    assert len((out / "averages.csv").read_text().splitlines()) == 16


def test_ablate_table_shape(tmp_path, capsys):
    ov = tiny_overrides() + ["step_budget=150"]
    assert main(["ablate", "--run-dir", str(tmp_path), "--columns", "D_E=0,AILAD", *ov]) == 0
    rows = (tmp_path / "ablation_jsd.csv").read_text().splitlines()
    assert rows[0] == "split,metric,D_E=0,AILAD"
    assert len(rows) == 1 + 2 * 8
