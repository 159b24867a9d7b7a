import io
import json
import os
import subprocess
import sys

import jsonschema
import pytest

from hopfdeg import __version__
from hopfdeg.cli import load_schema, main


def run(tmp_path, capsys, cfg, *flags, name="cfg.json"):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    code = main([flags[0], "--config", str(path), *flags[1:]])
    out, err = capsys.readouterr()
    lines = [l for l in out.splitlines() if l.strip()]
    return code, lines, err


def test_schema_is_valid_draft_2020_12():
    schema = load_schema()
    jsonschema.Draft202012Validator.check_schema(schema)
    assert schema["additionalProperties"] is False


def test_gen_map(tmp_path, capsys):
    code, lines, _ = run(tmp_path, capsys, {"family": {"family": "bubble", "params": {"n": 2, "d": 3}}}, "gen-map")
    assert code == 0 and len(lines) == 1
    out = json.loads(lines[0])
    assert out["expected_degree"] == 3 and out["descriptor"]["family"] == "bubble"


def test_degree_bubble(tmp_path, capsys):
    cfg = {"command": "degree", "family": {"family": "bubble", "params": {"n": 2, "d": 3}}}
    code, lines, _ = run(tmp_path, capsys, cfg, "degree")
    out = json.loads(lines[0])
    assert code == 0 and out["rounded"] == 3 and out["agreement"] is True
    assert out["integral"]["rounded"] == 3 and out["count"]["rounded"] == 3


def test_degree_nonregular_value_exit_2(tmp_path, capsys):
    cfg = {"family": {"family": "bubble", "params": {"n": 1, "d": 2}}, "params": {"y": [0.0, 1.0]}}
    code, lines, err = run(tmp_path, capsys, cfg, "degree")
    assert code == 2 and json.loads(lines[0])["inconclusive"] is True
    assert "inconclusive" in err


def test_hopf_whitehead(tmp_path, capsys):
    cfg = {"family": {"family": "whitehead", "params": {"n": 1, "k": 1}}, "params": {"N": 64}}
    code, lines, _ = run(tmp_path, capsys, cfg, "hopf", "--out", str(tmp_path / "o"))
    out = json.loads(lines[0])
    assert code == 0 and abs(out["rounded"]) == 2 and out["agreement"] is True
    assert os.path.exists(out["file"])


@pytest.mark.parametrize("cfg", [
    {"family": {"family": "bubble", "params": {"n": 2, "d": 3}}, "bogus": 1},
    {"family": {"family": "bubble", "params": {"n": 2, "d": 3, "extra": 0}}},
    {"family": {"family": "bubble", "params": {"n": 2, "d": 3}}, "command": "hopf"},
    {"params": {"s": 0.5}},
    "{not json",
])
def test_malformed_config_exit_1_without_files(tmp_path, capsys, cfg):
    od = tmp_path / "out"
    code, lines, err = run(tmp_path, capsys, cfg, "degree", "--out", str(od))
    assert code == 1 and lines == [] and err.startswith("hopfdeg:")
    assert not od.exists()


def test_bad_family_params_exit_1(tmp_path, capsys):
    code, _, _ = run(tmp_path, capsys, {"family": {"family": "bubble", "params": {"n": 2}}}, "degree")
    assert code == 1


def test_dry_run_resolves_overrides(tmp_path, capsys):
    cfg = {"family": {"family": "hopf", "params": {"capped": True}}, "seed": 5}
    code, lines, _ = run(tmp_path, capsys, cfg, "hopf", "--dry-run", "--seed", str(2 ** 64 - 1),
                         "--threads", "2", "--format", "csv")
    out = json.loads(lines[0])
    assert code == 0 and out["dry_run"]
    assert out["config"]["seed"] == 2 ** 64 - 1 and out["config"]["threads"] == 2
    assert out["config"]["output"]["format"] == "csv"


def test_negative_seed_rejected(tmp_path, capsys):
    cfg = {"family": {"family": "hopf", "params": {}}}
    code, _, _ = run(tmp_path, capsys, cfg, "hopf", "--dry-run", "--seed", "-1")
    assert code == 1


def test_config_from_stdin(monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.StringIO(json.dumps({"family": {"family": "identity", "params": {"m": 2}}})))
    assert main(["gen-map", "--config", "-"]) == 0
    assert json.loads(capsys.readouterr().out)["m"] == 2


def test_seminorm_csv(tmp_path, capsys):
    cfg = {"family": {"family": "bubble", "params": {"n": 1, "d": 2}}, "params": {"s": 0.6, "resolution": 256}}
    code, lines, _ = run(tmp_path, capsys, cfg, "seminorm", "--out", str(tmp_path / "o"), "--format", "csv")
    out = json.loads(lines[0])
    assert code == 0 and out["method"] == "full-pair-sum" and out["value"] > 0
    with open(out["file"], "rb") as fh:
        text = fh.read().decode()
    assert text.count("\r\n") == 2 and text.startswith("command,")


def test_experiment_outputs_deterministic(tmp_path, capsys):
    cfg = {"command": "experiment", "experiment": "degree_sharpness",
           "options": {"s_list": [0.6], "d_list": [1, 2, 3, 4, 5], "resolution": 256},
           "output": {"plot": True}}
    texts = []
    for i in range(2):
        od = tmp_path / f"run{i}"
        code, lines, _ = run(tmp_path, capsys, cfg, "experiment", "--out", str(od))
        out = json.loads(lines[0])
        assert code == 0 and out["members"] == 5
        assert os.path.exists(out["plot_script"]) and os.path.exists(out["json"])
        with open(out["csv"], "rb") as fh:
            texts.append(fh.read())
    assert texts[0] == texts[1]


def test_experiment_unknown_option(tmp_path, capsys):
    cfg = {"experiment": "degree_blowup", "options": {"frequency_list": [1, 2]}}
    code, _, err = run(tmp_path, capsys, cfg, "experiment")
    assert code == 1 and "frequency_list" in err


def test_console_script_version():
    r = subprocess.run([sys.executable, "-m", "hopfdeg.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
