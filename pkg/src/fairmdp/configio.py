"""YAML serialization for models, queries and experiment configurations.

An SCM config has sections ``nodes``, ``edges``, ``mechanisms``, ``noises``
and optionally ``interventions``.  Mechanisms are either expression strings in
the mechanism DSL or ``table:`` blocks (conditional probability tables driven
by Uniform(0, 1) noise).  Experiment configs have sections ``env``,
``principles``, ``solver`` and ``output``; see the bundled demo configs.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Mapping

import yaml

from .effects import Exact, MonteCarlo, PathSet, PceQuery
from .principles import FairnessPrinciple
from .scm import (
    CausalGraph,
    Domain,
    ExprMechanism,
    NodeDecl,
    NoiseSpec,
    StructuralCausalModel,
    TableMechanism,
)


class ConfigError(ValueError):
    """A configuration problem, with the path to the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# SCM configs


def scm_to_dict(model: StructuralCausalModel) -> dict:
    nodes = []
    for decl in model.graph.nodes:
        entry: dict[str, Any] = {"id": decl.id, "domain": decl.domain.kind}
        if decl.domain.kind == "categorical":
            entry["size"] = decl.domain.size
        nodes.append(entry)
    mechanisms: dict[str, Any] = {}
    for nid, mech in model.mechanisms.items():
        if isinstance(mech, TableMechanism):
            mechanisms[nid] = {
                "table": {
                    "parents": list(mech.parents),
                    "values": [float(v) for v in mech.values],
                    "rows": [
                        {"given": [float(v) for v in key], "probs": [float(p) for p in probs]}
                        for key, probs in mech.rows
                    ],
                }
            }
        else:
            mechanisms[nid] = mech.to_source()
    return {
        "nodes": nodes,
        "edges": [[a, b] for a, b in model.graph.edges],
        "mechanisms": mechanisms,
        "noises": {
            nid: {"kind": spec.kind, "params": [float(p) for p in spec.params]}
            for nid, spec in model.noises.items()
        },
        "interventions": {nid: float(v) for nid, v in model.interventions.items()},
    }


def scm_from_dict(data: Mapping, path: str = "scm") -> StructuralCausalModel:
    if not isinstance(data, Mapping):
        raise ConfigError(path, "expected a mapping")
    for section in ("nodes", "edges", "mechanisms", "noises"):
        if section not in data:
            raise ConfigError(f"{path}.{section}", "missing section")
    decls = []
    for i, entry in enumerate(data["nodes"]):
        where = f"{path}.nodes[{i}]"
        if not isinstance(entry, Mapping) or "id" not in entry:
            raise ConfigError(where, "expected a mapping with an 'id' key")
        kind = entry.get("domain", "continuous")
        if kind not in ("binary", "continuous", "categorical"):
            raise ConfigError(f"{where}.domain", f"unknown domain {kind!r}")
        size = entry.get("size")
        if kind == "categorical" and not isinstance(size, int):
            raise ConfigError(f"{where}.size", "categorical domains need an integer size")
        decls.append(NodeDecl(str(entry["id"]), Domain(kind, size if kind == "categorical" else None)))
    edges = []
    for i, pair in enumerate(data["edges"]):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigError(f"{path}.edges[{i}]", "expected a [parent, child] pair")
        edges.append((str(pair[0]), str(pair[1])))
    mechanisms: dict[str, Any] = {}
    for nid, raw in dict(data["mechanisms"]).items():
        where = f"{path}.mechanisms.{nid}"
        if isinstance(raw, str):
            mechanisms[str(nid)] = ExprMechanism.parse(raw)
        elif isinstance(raw, Mapping) and "table" in raw:
            mechanisms[str(nid)] = _table_from_dict(raw["table"], where + ".table")
        else:
            raise ConfigError(where, "expected an expression string or a 'table' block")
    noises = {}
    for nid, raw in dict(data["noises"]).items():
        where = f"{path}.noises.{nid}"
        if not isinstance(raw, Mapping) or "kind" not in raw or "params" not in raw:
            raise ConfigError(where, "expected {kind, params}")
        noises[str(nid)] = NoiseSpec(str(raw["kind"]), tuple(float(p) for p in raw["params"]))
    interventions = {
        str(nid): float(v) for nid, v in dict(data.get("interventions", {})).items()
    }
    return StructuralCausalModel(
        graph=CausalGraph(decls, edges),
        mechanisms=mechanisms,
        noises=noises,
        interventions=interventions,
    )


def _table_from_dict(raw: Mapping, where: str) -> TableMechanism:
    for key in ("parents", "rows"):
        if key not in raw:
            raise ConfigError(f"{where}.{key}", "missing key")
    rows = {}
    for i, row in enumerate(raw["rows"]):
        if not isinstance(row, Mapping) or "given" not in row or "probs" not in row:
            raise ConfigError(f"{where}.rows[{i}]", "expected {given, probs}")
        rows[tuple(float(v) for v in row["given"])] = [float(p) for p in row["probs"]]
    return TableMechanism.from_dict(
        [str(p) for p in raw["parents"]],
        rows,
        values=[float(v) for v in raw.get("values", (0.0, 1.0))],
    )


def load_scm(path: str) -> StructuralCausalModel:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return scm_from_dict(data, path="scm")


def save_scm(model: StructuralCausalModel, path: str) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scm_to_dict(model), fh, sort_keys=True)


# ---------------------------------------------------------------------------
# Effect queries


def query_from_dict(data: Mapping, path: str = "query") -> PceQuery:
    for key in ("treatment", "outcome", "x0", "x1"):
        if key not in data:
            raise ConfigError(f"{path}.{key}", "missing key")
    sigma_raw = data.get("sigma", {"kind": "all"})
    kind = sigma_raw.get("kind", "all") if isinstance(sigma_raw, Mapping) else str(sigma_raw)
    if kind == "all":
        sigma = PathSet.all_paths()
    elif kind == "direct":
        sigma = PathSet.direct_only()
    elif kind == "mediators":
        sigma = PathSet.through_mediators([str(m) for m in sigma_raw.get("mediators", [])])
    elif kind == "edges":
        sigma = PathSet.explicit_edges(
            [(str(a), str(b)) for a, b in sigma_raw.get("edges", [])]
        )
    else:
        raise ConfigError(f"{path}.sigma.kind", f"unknown path set kind {kind!r}")
    est_raw = data.get("estimator", {"kind": "exact"})
    est_kind = est_raw.get("kind", "exact")
    if est_kind == "exact":
        estimator: Exact | MonteCarlo = Exact()
    elif est_kind in ("mc", "monte_carlo"):
        estimator = MonteCarlo(
            samples=int(est_raw.get("samples", 50_000)), seed=int(est_raw.get("seed", 0))
        )
    else:
        raise ConfigError(f"{path}.estimator.kind", f"unknown estimator {est_kind!r}")
    return PceQuery(
        treatment=str(data["treatment"]),
        outcome=str(data["outcome"]),
        x0=float(data["x0"]),
        x1=float(data["x1"]),
        sigma=sigma,
        observations={str(k): float(v) for k, v in dict(data.get("observations", {})).items()},
        transform=str(data.get("transform", "abs")),
        estimator=estimator,
    )


def query_to_dict(query: PceQuery) -> dict:
    sigma: dict[str, Any] = {"kind": query.sigma.kind}
    if query.sigma.mediators:
        sigma["mediators"] = list(query.sigma.mediators)
    if query.sigma.edges:
        sigma["edges"] = [list(e) for e in query.sigma.edges]
    estimator: dict[str, Any] = (
        {"kind": "exact"}
        if isinstance(query.estimator, Exact)
        else {"kind": "mc", "samples": query.estimator.samples, "seed": query.estimator.seed}
    )
    return {
        "treatment": query.treatment,
        "outcome": query.outcome,
        "x0": query.x0,
        "x1": query.x1,
        "sigma": sigma,
        "observations": dict(query.observations),
        "transform": query.transform,
        "estimator": estimator,
    }


# ---------------------------------------------------------------------------
# Experiment configs


@dataclass(frozen=True)
class SolverSection:
    method: str = "lp"  # lp | primal_dual
    episodes: int = 10_000  # evaluation episodes for reported values
    options: dict = field(default_factory=dict)  # PrimalDualConfig overrides


@dataclass(frozen=True)
class ExperimentConfig:
    env_name: str
    env_params: dict
    seed: int
    principles: tuple[FairnessPrinciple, ...]
    solver: SolverSection
    sweep_thresholds: tuple[float, ...] = ()
    output_dir: str = "out"


def principle_from_dict(data: Mapping, path: str) -> FairnessPrinciple:
    if "kind" not in data:
        raise ConfigError(f"{path}.kind", "missing key")
    extras = set(data) - {
        "kind", "sensitive", "non_sensitive", "outcome", "values",
        "contributions", "threshold",
    }
    if extras:
        raise ConfigError(f"{path}.{sorted(extras)[0]}", "unknown key")
    return FairnessPrinciple(
        kind=str(data["kind"]),
        sensitive=tuple(str(z) for z in data.get("sensitive", ())),
        non_sensitive=tuple(str(z) for z in data.get("non_sensitive", ())),
        outcome=data.get("outcome"),
        values=tuple(float(v) for v in data.get("values", (0.0, 1.0))),
        contributions=tuple(float(b) for b in data.get("contributions", ())),
        threshold=float(data.get("threshold", 0.0)),
    )


def experiment_from_dict(data: Mapping, path: str = "experiment") -> ExperimentConfig:
    if not isinstance(data, Mapping):
        raise ConfigError(path, "expected a mapping")
    env = data.get("env")
    if not isinstance(env, Mapping) or "name" not in env:
        raise ConfigError(f"{path}.env.name", "missing key")
    principles = tuple(
        principle_from_dict(p, f"{path}.principles[{i}]")
        for i, p in enumerate(data.get("principles", ()))
    )
    solver_raw = data.get("solver", {})
    method = str(solver_raw.get("method", "lp"))
    if method not in ("lp", "primal_dual"):
        raise ConfigError(f"{path}.solver.method", f"unknown method {method!r}")
    solver = SolverSection(
        method=method,
        episodes=int(solver_raw.get("episodes", 10_000)),
        options=dict(solver_raw.get("options", {})),
    )
    thresholds = tuple(float(d) for d in data.get("sweep", {}).get("thresholds", ()))
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ConfigError(f"{path}.sweep.thresholds", "thresholds must be strictly increasing")
    return ExperimentConfig(
        env_name=str(env["name"]),
        env_params=dict(env.get("params", {})),
        seed=int(data.get("seed", env.get("seed", 0))),
        principles=principles,
        solver=solver,
        sweep_thresholds=thresholds,
        output_dir=str(data.get("output", {}).get("dir", "out")),
    )


def load_experiment(path: str) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return experiment_from_dict(data, path=path)


def resolve_path(base_config: str, target: str) -> str:
    """Interpret ``target`` relative to the directory of ``base_config``."""
    if os.path.isabs(target):
        return target
    return os.path.join(os.path.dirname(os.path.abspath(base_config)), target)
