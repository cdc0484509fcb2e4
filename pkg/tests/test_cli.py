"""End-to-end CLI subcommand tests (in-process via cli.main)."""
import json

import pytest
import yaml

from fairmdp import healthcare_single_step, save_scm
from fairmdp.cli import main


SCM_YAML = """
nodes:
  - {id: X, domain: binary}
  - {id: Y, domain: continuous}
edges:
  - [X, Y]
mechanisms:
  X: u
  Y: 2*X + u
noises:
  X: {kind: bernoulli, params: [0.5]}
  Y: {kind: gaussian, params: [0.0, 1.0]}
"""

EXPERIMENT_YAML = """
env:
  name: healthcare-single
seed: 0
principles:
  - kind: group_procedural
    sensitive: [G]
    threshold: 0.2
solver:
  method: lp
  episodes: 500
sweep:
  thresholds: [0.05, 0.2, 1.0]
"""


@pytest.fixture
def scm_path(tmp_path):
    path = tmp_path / "model.yaml"
    path.write_text(SCM_YAML)
    return str(path)


@pytest.fixture
def experiment_path(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text(EXPERIMENT_YAML)
    return str(path)


def test_validate_ok(scm_path, capsys):
    assert main(["validate", "--config", scm_path]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_reports_problems(tmp_path, capsys):
    raw = yaml.safe_load(SCM_YAML)
    raw["mechanisms"]["Y"] = "2*X + Z + u"
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(raw))
    assert main(["validate", "--config", str(path)]) == 1
    assert "unknown reference 'Z'" in capsys.readouterr().out


def test_missing_config_is_an_error(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "nope.yaml")]) == 1
    assert "error:" in capsys.readouterr().err


def test_sample_deterministic(scm_path, tmp_path, capsys):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["sample", "--config", scm_path, "--n", "50", "--seed", "3",
                 "--out", str(out1)]) == 0
    assert main(["sample", "--config", scm_path, "--n", "50", "--seed", "3",
                 "--out", str(out2)]) == 0
    a = (out1 / "samples.csv").read_bytes()
    b = (out2 / "samples.csv").read_bytes()
    assert a == b
    header = a.decode().splitlines()[0]
    assert header == "X,Y"
    assert main(["sample", "--config", scm_path, "--n", "50", "--seed", "4",
                 "--out", str(out2)]) == 0
    assert (out2 / "samples.csv").read_bytes() != a


def test_effect_inline_model(tmp_path, capsys):
    config = {
        "model": yaml.safe_load(SCM_YAML),
        "query": {
            "treatment": "X", "outcome": "Y", "x0": 0.0, "x1": 1.0,
            "transform": "identity",
            "estimator": {"kind": "mc", "samples": 20000, "seed": 1},
        },
    }
    path = tmp_path / "effect.yaml"
    path.write_text(yaml.safe_dump(config))
    out = tmp_path / "out"
    assert main(["effect", "--config", str(path), "--out", str(out)]) == 0
    with open(out / "effect.json") as fh:
        report = json.load(fh)
    assert abs(report["value"] - 2.0) <= 4 * report["standard_error"]
    assert report["samples_used"] == 20000
    assert report["query"]["treatment"] == "X"


def test_effect_model_by_path_and_seed_override(tmp_path):
    model_path = tmp_path / "model.yaml"
    # multiplicative noise: the coupled estimate varies with the draw, so the
    # seed override is observable in the output
    model_path.write_text(SCM_YAML.replace("Y: 2*X + u", "Y: 2*X*u + u"))
    config = {
        "model": "model.yaml",
        "query": {
            "treatment": "X", "outcome": "Y", "x0": 0.0, "x1": 1.0,
            "estimator": {"kind": "mc", "samples": 1000, "seed": 1},
        },
    }
    path = tmp_path / "effect.yaml"
    path.write_text(yaml.safe_dump(config))
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["effect", "--config", str(path), "--out", str(out1)]) == 0
    assert main(["effect", "--config", str(path), "--seed", "99", "--out", str(out2)]) == 0
    with open(out1 / "effect.json") as fh:
        a = json.load(fh)
    with open(out2 / "effect.json") as fh:
        b = json.load(fh)
    assert a["query"]["estimator"]["seed"] == 1
    assert b["query"]["estimator"]["seed"] == 99
    assert a["value"] != b["value"]


def test_effect_requires_sections(tmp_path, capsys):
    path = tmp_path / "effect.yaml"
    path.write_text("query: {}\n")
    assert main(["effect", "--config", str(path)]) == 1
    assert "'model' and 'query'" in capsys.readouterr().err


def test_solve_writes_artifacts(experiment_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["solve", "--config", experiment_path, "--out", str(out)]) == 0
    with open(out / "solve.json") as fh:
        report = json.load(fh)
    assert report["env"]["name"] == "healthcare-single"
    assert report["feasible"] is True
    assert report["constraints"][0]["name"] == "group_procedural:G"
    assert (out / "trajectories.csv").exists()
    with open(out / "effects.json") as fh:
        effects = json.load(fh)
    assert effects["effects"][0]["query"]["outcome"] == "D"


def test_sweep_writes_artifacts(experiment_path, tmp_path):
    out = tmp_path / "out"
    assert main(["sweep", "--config", experiment_path, "--out", str(out)]) == 0
    with open(out / "sweep.json") as fh:
        report = json.load(fh)
    assert report["thresholds"] == [0.05, 0.2, 1.0]
    assert len(report["rows"]) == 3
    assert report["monotonic"] is True
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("threshold,objective,feasible,saturated")
    assert len(lines) == 4


def test_report_renders_summary(experiment_path, tmp_path, capsys):
    out = tmp_path / "out"
    main(["solve", "--config", experiment_path, "--out", str(out)])
    main(["sweep", "--config", experiment_path, "--out", str(out)])
    capsys.readouterr()
    assert main(["report", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "env: healthcare-single" in text
    assert "constraint group_procedural:G" in text
    assert "sweep over 3 thresholds" in text


def test_report_empty_dir(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path)]) == 0
    assert "no report artifacts" in capsys.readouterr().out


def test_console_script_installed():
    import shutil

    assert shutil.which("fairmdp") is not None
