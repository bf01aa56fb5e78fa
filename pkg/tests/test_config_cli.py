import re
import warnings

import numpy as np
import pytest

from cistgcn import cli
from cistgcn.config import ConfigError, RunConfig, parse_lines
from cistgcn.data import load_pseq, save_pseq

SMALL = ["--set", "model.t1=6", "--set", "model.t2=5", "--set", "model.joints=4",
         "--set", "model.hidden=8", "--set", "model.encoder_depth=2"]


# --- config -----------------------------------------------------------------

def test_parse_lines_strips_comments_and_blanks():
    lines = ["# header", "", "model.F = 16  # hidden width", "train.epochs=3"]
    assert parse_lines(lines) == {"model.F": "16", "train.epochs": "3"}


def test_parse_lines_reports_line_number():
    with pytest.raises(ConfigError, match="cfg:2"):
        parse_lines(["seed=1", "not a pair"], "cfg")


def test_aliases_and_coercion(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("model.F=16\ntrain.learning_rate=0.01\neval.averaged=yes\n", encoding="utf-8")
    cfg = RunConfig.load(path, env={})
    assert cfg["model.hidden"] == 16 and cfg["train.learning_rate"] == 0.01 and cfg["eval.averaged"] is True
    assert cfg.model_config().hidden == 16


@pytest.mark.parametrize("values", [{"model.width": 3}, {"train.epochs": "many"}, {"eval.averaged": "maybe"}])
def test_bad_keys_and_values_are_rejected(values):
    with pytest.raises(ConfigError):
        RunConfig(values)


def test_seed_from_environment_flows_into_model_and_training():
    cfg = RunConfig.load(env={"CISTGCN_SEED": "17"})
    assert cfg["seed"] == cfg["model.seed"] == cfg["train.seed"] == 17
    explicit = RunConfig.load(overrides={"seed": 3, "train.seed": 9}, env={"CISTGCN_SEED": "17"})
    assert (explicit["seed"], explicit["model.seed"], explicit["train.seed"]) == (3, 3, 9)


def test_preset_conflicts_with_explicit_hidden():
    assert RunConfig({"model.preset": "M16"}).model_config().hidden == 16
    with pytest.raises(ConfigError, match="not both"):
        RunConfig({"model.preset": "M16", "model.hidden": 8}).model_config()


def test_resolved_lines_cover_every_key():
    cfg = RunConfig()
    assert [line.split("=", 1)[0] for line in cfg.lines()] == list(cfg.values)


# --- command line -----------------------------------------------------------

def _error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return err[0]


def test_missing_command_is_usage_error(capsys):
    assert cli.main([]) == 2
    assert _error_line(capsys).startswith("error: usage: ")


@pytest.mark.parametrize("argv", [["train", "--out", "x"], ["synth", "--out", "x", "--set", "model.width=3"],
                                  ["synth", "--out", "x", "--classes", "jumping"],
                                  ["synth", "--out", "x", "--workers", "0"]])
def test_usage_errors_exit_two(argv, capsys):
    assert cli.main(argv) == 2
    assert _error_line(capsys).startswith("error: usage: ")


def test_missing_data_exits_three(tmp_path, capsys):
    assert cli.main(["train", "--data", str(tmp_path / "absent"), "--out", str(tmp_path / "run")]) == 3
    assert _error_line(capsys).startswith("error: data: ")


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth, train one epoch, and return the working directory."""
    root = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "--count", "30", "--frames", "40", "--joints", "4",
                     "--out", str(root / "data"), "--seed", "2"]) == 0
    assert cli.main(["train", "--data", str(root / "data"), "--out", str(root / "run"), "--epochs", "1",
                     "--seed", "2", *SMALL]) == 0
    return root


def test_synth_and_train_write_outputs(pipeline):
    assert (pipeline / "data" / "config.resolved").exists()
    resolved = (pipeline / "run" / "config.resolved").read_text().splitlines()
    assert "model.hidden=8" in resolved and "seed=2" in resolved
    assert any(p.suffix == ".ckpt" for p in (pipeline / "run").iterdir())
    assert (pipeline / "run" / "train.log").read_text().strip()


def _checkpoint(pipeline):
    return str(sorted((pipeline / "run").glob("*.ckpt"))[-1])


def test_eval_sweep_and_interpret(pipeline, capsys):
    ckpt, data = _checkpoint(pipeline), str(pipeline / "data")
    common = ["--checkpoint", ckpt, "--data", data, "--set", "eval.window_stride=5"]
    assert cli.main(["eval", *common, "--horizons", "40,200", "--out", str(pipeline / "h.tsv")]) == 0
    assert (pipeline / "h.tsv").read_text().startswith("action\thorizon_ms")
    assert cli.main(["eval", *common, "--horizons", "40,200", "--baseline", "--format", "jsonl",
                     "--out", str(pipeline / "h.jsonl")]) == 0
    assert cli.main(["sweep", *common, "--kind", "rotation_y", "--grid", "0:360:90",
                     "--out", str(pipeline / "s.tsv")]) == 0
    assert len((pipeline / "s.tsv").read_text().splitlines()) == 1 + 5
    assert cli.main(["interpret", "--checkpoint", ckpt, "--data", data, "--out", str(pipeline / "interp"),
                     "--set", "interpret.bundles=2"]) == 0
    names = {p.name for p in (pipeline / "interp").iterdir()}
    assert {"importance.tsv", "centroids.tsv", "pca.tsv", "bundles"} <= names
    out = capsys.readouterr().out
    assert "average MPJPE at 200 ms" in out and "rotation_y sweep" in out


def test_eval_rejects_horizon_beyond_output(pipeline, capsys):
    code = cli.main(["eval", "--checkpoint", _checkpoint(pipeline), "--data", str(pipeline / "data"),
                     "--horizons", "400", "--out", str(pipeline / "bad.tsv")])
    assert code == 2 and "outside" in _error_line(capsys)


def test_predict_output_round_trips(pipeline):
    data = pipeline / "data"
    source = load_pseq(sorted(data.glob("*.pseq"))[0])
    out = pipeline / "pred.pseq"
    assert cli.main(["predict", "--checkpoint", _checkpoint(pipeline), "--input",
                     str(sorted(data.glob("*.pseq"))[0]), "--out", str(out)]) == 0
    pred = load_pseq(out)
    assert pred.frames.shape == (5, 4, 3) and pred.action_label == source.action_label
    save_pseq(pred, pipeline / "again.pseq")
    assert (pipeline / "again.pseq").read_bytes() == out.read_bytes()


def test_predict_rejects_short_input(pipeline, capsys):
    short = load_pseq(sorted((pipeline / "data").glob("*.pseq"))[0])
    short.frames = short.frames[:3]
    save_pseq(short, pipeline / "short.pseq")
    code = cli.main(["predict", "--checkpoint", _checkpoint(pipeline), "--input", str(pipeline / "short.pseq"),
                     "--out", str(pipeline / "x.pseq")])
    assert code == 3 and _error_line(capsys).startswith("error: data: ")


def test_non_finite_data_exits_three(pipeline, capsys):
    bad = pipeline / "bad"
    assert cli.main(["synth", "--count", "30", "--frames", "40", "--joints", "4", "--out", str(bad)]) == 0
    path = sorted(bad.glob("*.pseq"))[0]
    seq = load_pseq(path)
    seq.frames = seq.frames.copy()
    seq.frames[5, 0, 0] = np.inf
    save_pseq(seq, path)
    capsys.readouterr()
    code = cli.main(["train", "--data", str(bad), "--out", str(pipeline / "inf"), "--epochs", "1", *SMALL])
    assert code == 3 and "non-finite" in _error_line(capsys)


def test_divergent_training_exits_four(pipeline, capsys):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        code = cli.main(["train", "--data", str(pipeline / "data"), "--out", str(pipeline / "nan"),
                         "--epochs", "1", "--no-val", "--set", "model.input_scale=1e38",
                         *SMALL])
    assert code == 4
    assert re.fullmatch(r"error: numeric: .*epoch \d+ batch \d+ .*", _error_line(capsys))


def test_gradcheck_command_passes(capsys):
    assert cli.main(["gradcheck", "--samples", "20", *SMALL]) == 0
    assert "gradcheck passed" in capsys.readouterr().out


def test_gradcheck_failure_exits_five(monkeypatch, capsys):
    from cistgcn import verification
    monkeypatch.setattr(verification, "run_suite",
                        lambda *a, **k: (False, [("matmul", type("R", (), {"passed": False})())], 0.0))
    assert cli.main(["gradcheck", *SMALL]) == 5
    assert _error_line(capsys) == "error: verification: gradient mismatch in matmul"
