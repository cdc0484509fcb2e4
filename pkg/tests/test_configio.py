"""YAML config parsing and serialization."""
import numpy as np
import pytest

from fairmdp import (
    ConfigError,
    load_experiment,
    load_scm,
    sample,
    save_scm,
    scm_from_dict,
    scm_to_dict,
)
from fairmdp.configio import (
    experiment_from_dict,
    principle_from_dict,
    query_from_dict,
    query_to_dict,
    resolve_path,
)
from fairmdp.effects import Exact, MonteCarlo


SCM_DICT = {
    "nodes": [
        {"id": "X", "domain": "binary"},
        {"id": "M", "domain": "binary"},
        {"id": "Y", "domain": "continuous"},
    ],
    "edges": [["X", "M"], ["X", "Y"], ["M", "Y"]],
    "mechanisms": {
        "X": "u",
        "M": {
            "table": {
                "parents": ["X"],
                "rows": [
                    {"given": [0.0], "probs": [0.8, 0.2]},
                    {"given": [1.0], "probs": [0.3, 0.7]},
                ],
            }
        },
        "Y": "2*X + 3*M + u",
    },
    "noises": {
        "X": {"kind": "bernoulli", "params": [0.4]},
        "M": {"kind": "uniform", "params": [0.0, 1.0]},
        "Y": {"kind": "bernoulli", "params": [0.5]},
    },
}


def test_scm_dict_round_trip():
    model = scm_from_dict(SCM_DICT)
    again = scm_from_dict(scm_to_dict(model))
    a = sample(model, 200, seed=4)
    b = sample(again, 200, seed=4)
    for key in a:
        assert np.array_equal(a[key], b[key])


def test_scm_file_round_trip(tmp_path):
    model = scm_from_dict(SCM_DICT)
    path = tmp_path / "model.yaml"
    save_scm(model, str(path))
    again = load_scm(str(path))
    assert scm_to_dict(again) == scm_to_dict(model)


def test_scm_config_errors_carry_paths():
    with pytest.raises(ConfigError, match="scm.noises"):
        scm_from_dict({**SCM_DICT, "noises": None} | {"noises": {"X": {"kind": "bernoulli"}}})
    with pytest.raises(ConfigError, match=r"scm\.nodes\[0\]"):
        scm_from_dict({**SCM_DICT, "nodes": ["X"]})
    with pytest.raises(ConfigError, match="missing section"):
        scm_from_dict({"nodes": SCM_DICT["nodes"]})
    with pytest.raises(ConfigError, match=r"edges\[1\]"):
        scm_from_dict({**SCM_DICT, "edges": [["X", "M"], ["Y"]]})
    with pytest.raises(ConfigError, match="unknown domain"):
        scm_from_dict(
            {**SCM_DICT, "nodes": [{"id": "X", "domain": "boolean"}] + SCM_DICT["nodes"][1:]}
        )
    with pytest.raises(ConfigError, match="table"):
        scm_from_dict({**SCM_DICT, "mechanisms": {**SCM_DICT["mechanisms"], "M": {"rows": []}}})


def test_categorical_node_needs_size():
    nodes = [{"id": "X", "domain": "categorical"}]
    with pytest.raises(ConfigError, match="integer size"):
        scm_from_dict({"nodes": nodes, "edges": [], "mechanisms": {"X": "u"},
                       "noises": {"X": {"kind": "point", "params": [0.0]}}})


def test_interventions_round_trip():
    data = dict(SCM_DICT, interventions={"X": 1.0})
    model = scm_from_dict(data)
    assert model.interventions == {"X": 1.0}
    assert scm_to_dict(model)["interventions"] == {"X": 1.0}


# ---------------------------------------------------------------------------
# Queries


def test_query_round_trip():
    data = {
        "treatment": "X", "outcome": "Y", "x0": 0.0, "x1": 1.0,
        "sigma": {"kind": "mediators", "mediators": ["M"]},
        "observations": {"M": 1.0},
        "transform": "identity",
        "estimator": {"kind": "mc", "samples": 500, "seed": 3},
    }
    query = query_from_dict(data)
    assert query.sigma.kind == "mediators" and query.sigma.mediators == ("M",)
    assert isinstance(query.estimator, MonteCarlo)
    assert query.estimator.samples == 500
    assert query_to_dict(query)["sigma"] == {"kind": "mediators", "mediators": ["M"]}


def test_query_defaults_and_errors():
    query = query_from_dict({"treatment": "X", "outcome": "Y", "x0": 0, "x1": 1})
    assert query.sigma.kind == "all" and isinstance(query.estimator, Exact)
    assert query.transform == "abs"
    with pytest.raises(ConfigError, match="missing key"):
        query_from_dict({"treatment": "X", "outcome": "Y", "x0": 0})
    with pytest.raises(ConfigError, match="unknown path set"):
        query_from_dict(
            {"treatment": "X", "outcome": "Y", "x0": 0, "x1": 1, "sigma": {"kind": "spurious"}}
        )
    with pytest.raises(ConfigError, match="unknown estimator"):
        query_from_dict(
            {"treatment": "X", "outcome": "Y", "x0": 0, "x1": 1,
             "estimator": {"kind": "bootstrap"}}
        )


# ---------------------------------------------------------------------------
# Principles and experiments


def test_principle_from_dict():
    p = principle_from_dict(
        {"kind": "group_outcome", "sensitive": ["G"], "threshold": 0.5}, "p"
    )
    assert p.kind == "group_outcome" and p.threshold == 0.5
    with pytest.raises(ConfigError, match="unknown key"):
        principle_from_dict({"kind": "maximin", "alpha": 1}, "p")
    with pytest.raises(ConfigError, match="missing key"):
        principle_from_dict({"sensitive": ["G"]}, "p")


def test_experiment_from_dict():
    config = experiment_from_dict(
        {
            "env": {"name": "healthcare-single", "params": {"p_gender": 0.3}},
            "seed": 5,
            "principles": [{"kind": "group_procedural", "sensitive": ["G"], "threshold": 0.2}],
            "solver": {"method": "primal_dual", "episodes": 500, "options": {"iterations": 10}},
            "sweep": {"thresholds": [0.1, 0.2, 0.5]},
            "output": {"dir": "results"},
        }
    )
    assert config.env_name == "healthcare-single"
    assert config.env_params == {"p_gender": 0.3}
    assert config.seed == 5
    assert config.principles[0].kind == "group_procedural"
    assert config.solver.method == "primal_dual"
    assert config.solver.options == {"iterations": 10}
    assert config.sweep_thresholds == (0.1, 0.2, 0.5)
    assert config.output_dir == "results"


def test_experiment_errors():
    with pytest.raises(ConfigError, match="env.name"):
        experiment_from_dict({"seed": 0})
    with pytest.raises(ConfigError, match="unknown method"):
        experiment_from_dict(
            {"env": {"name": "compas"}, "solver": {"method": "genetic"}}
        )
    with pytest.raises(ConfigError, match="strictly increasing"):
        experiment_from_dict(
            {"env": {"name": "compas"}, "sweep": {"thresholds": [0.5, 0.5]}}
        )


def test_load_experiment_defaults(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("env:\n  name: compas\n")
    config = load_experiment(str(path))
    assert config.solver.method == "lp"
    assert config.seed == 0
    assert config.principles == ()


def test_resolve_path(tmp_path):
    base = str(tmp_path / "configs" / "exp.yaml")
    assert resolve_path(base, "/abs/model.yaml") == "/abs/model.yaml"
    assert resolve_path(base, "model.yaml") == str(tmp_path / "configs" / "model.yaml")
