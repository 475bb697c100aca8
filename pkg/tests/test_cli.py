import io
import json
import math

import pytest

from semfuse.cli import build_config, build_parser, main, read_threshold, run_dir_for, write_threshold
from semfuse.config import RunConfig

TINY = ["--d-enc", "16", "--n-layers", "1", "--n-heads", "2", "--d-ff", "24", "--m", "2", "--epochs", "1", "--batch-size", "16"]


@pytest.fixture(autouse=True)
def run_root(tmp_path, monkeypatch):
    monkeypatch.setenv("SEMFUSE_RUN_DIR", str(tmp_path / "runs"))
    return tmp_path / "runs"


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def table(text):
    lines = [ln.split("\t") for ln in text.strip().splitlines()]
    return [dict(zip(lines[0], row)) for row in lines[1:]]


def test_tokenize_dorm_sentence():
    code, out = run("tokenize", "Reconstructing dormitories will not be approved by cavanaugh")
    assert code == 0
    assert out.strip().splitlines()[-1] == (
        "#subwords\t[CLS] rec ##ons ##tructing dorm ##itor ##ies will not be approved by ca ##vana ##ugh [SEP]"
    )


def test_validate_data(fixtures, tmp_path, capsys):
    code, out = run("validate-data", fixtures / "nli_train.jsonl")
    assert code == 0 and table(out)[0]["examples"] == "64"
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": 1}\n{oops\n', encoding="utf-8")
    code, _ = run("validate-data", bad)
    err = capsys.readouterr().err
    assert code == 2 and "line 1" in err and "line 2" in err


def test_config_file_then_flags(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"m": 4, "seed": 3, "epochs": 7}), encoding="utf-8")
    args = build_parser().parse_args(["train", "--train", "x", "--config", str(path), "--epochs", "2", "--d-w", "none"])
    cfg = build_config(args)
    assert (cfg.m, cfg.seed, cfg.epochs, cfg.d_w) == (4, 3, 2, None)
    args = build_parser().parse_args(["train", "--train", "x", "--config", str(path), "--seed", "9", "--no-lowercase"])
    cfg = build_config(args)
    assert cfg.seed == 9 and cfg.lowercase is False


def test_every_command_has_seed_and_config():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) == {"tokenize", "validate-data", "train", "eval", "tune-threshold", "sweep-m", "sweep-noise", "ablate"}
    for name, p in sub.choices.items():
        flags = {opt for a in p._actions for opt in a.option_strings}
        assert {"--seed", "--config"} <= flags, name


def test_bad_config_exit_code(capsys):
    code, _ = run("tokenize", "hi", "--epochs", "0")
    assert code == 2 and "epochs" in capsys.readouterr().err


def test_run_dir_deterministic(run_root):
    cfg = RunConfig(seed=3)
    assert run_dir_for("train", cfg) == run_dir_for("train", RunConfig(seed=3))
    assert run_dir_for("train", cfg) != run_dir_for("train", RunConfig(seed=4))
    assert run_dir_for("train", cfg).parent == run_root


def test_threshold_file_infinities(tmp_path):
    for tau in (-math.inf, math.inf, 0.25):
        write_threshold(tmp_path / "t.json", tau)
        json.loads((tmp_path / "t.json").read_text())  # strict JSON
        assert read_threshold(tmp_path / "t.json") == tau


def test_train_eval_tune_cycle(fixtures, run_root, tmp_path):
    common = TINY + ["--task-kind", "span", "--seed", "1"]
    code, out = run("train", "--train", fixtures / "span_train.jsonl", "--dev", fixtures / "span_dev.jsonl", "--run-name", "sp", *common)
    assert code == 0
    rows = table(out)
    assert len(rows) == 1 and set(rows[0]) == {"epoch", "train_loss", "train_metric", "dev_metric"}
    ckpt = run_root / "sp" / "checkpoint.json"
    log_before = (run_root / "sp" / "log.json").read_bytes()
    run("train", "--train", fixtures / "span_train.jsonl", "--dev", fixtures / "span_dev.jsonl", "--run-name", "sp", *common)
    assert (run_root / "sp" / "log.json").read_bytes() == log_before

    tau_file = tmp_path / "tau.json"
    code, out = run("tune-threshold", "--checkpoint", ckpt, "--data", fixtures / "span_dev.jsonl", "--out", tau_file)
    assert code == 0
    tuned = table(out)[0]
    assert float(tuned["tau"]) == pytest.approx(read_threshold(tau_file), abs=1e-4)

    preds = tmp_path / "preds.jsonl"
    code, out = run("eval", "--checkpoint", ckpt, "--data", fixtures / "span_dev.jsonl", "--threshold", tau_file, "--predictions", preds)
    assert code == 0
    assert table(out)[0]["f1"] == tuned["f1"]
    rows = [json.loads(line) for line in preds.read_text().splitlines()]
    assert len(rows) == 15
    assert set(rows[0]) == {"id", "pred", "score", "null_score"}


@pytest.mark.parametrize(
    "command, extra, n_rows",
    [("sweep-m", ["--m-values", "1", "2"], 2), ("sweep-noise", [], 3), ("ablate", [], 3)],
)
def test_harness_commands(fixtures, run_root, command, extra, n_rows):
    code, out = run(command, "--train", fixtures / "nli_dev.jsonl", *extra, *TINY)
    assert code == 0
    rows = table(out)
    assert len(rows) == n_rows
    (run_dir,) = list(run_root.iterdir())
    assert json.loads((run_dir / "table.json").read_text())[0].keys() == rows[0].keys()
