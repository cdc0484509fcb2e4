"""Path-specific counterfactual effects and related estimators.

The central quantity is the difference between the outcome when the treatment
change x0 -> x1 propagates only along a chosen set of causal paths (the
"sigma-affected" world) and the outcome under x0 everywhere (the "natural"
world), with both worlds sharing the same exogenous noise and, optionally,
conditioned on factual observations via abduction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import scm as scm_mod
from .scm import (
    CausalGraph,
    NotEnumerableError,
    StructuralCausalModel,
    TableMechanism,
    enumerate_noise,
    evaluate_arrays,
    topological_order,
)


class InconsistentEvidenceError(ValueError):
    """Observations have zero probability under the model."""


# ---------------------------------------------------------------------------
# Path sets


@dataclass(frozen=True)
class PathSet:
    """Which treatment->outcome paths carry the changed treatment value.

    kind is one of 'all', 'direct', 'mediators', 'edges'.
    """

    kind: str
    mediators: tuple[str, ...] = ()
    edges: tuple[tuple[str, str], ...] = ()

    @classmethod
    def all_paths(cls) -> "PathSet":
        return cls("all")

    @classmethod
    def direct_only(cls) -> "PathSet":
        return cls("direct")

    @classmethod
    def through_mediators(cls, mediators: Sequence[str]) -> "PathSet":
        return cls("mediators", mediators=tuple(mediators))

    @classmethod
    def explicit_edges(cls, edges: Sequence[tuple[str, str]]) -> "PathSet":
        return cls("edges", edges=tuple(tuple(e) for e in edges))

    def active_edges(
        self, graph: CausalGraph, x: str, y: str
    ) -> frozenset[tuple[str, str]]:
        paths = enumerate_paths(graph, x, y)
        all_edges = frozenset(
            (p[i], p[i + 1]) for p in paths for i in range(len(p) - 1)
        )
        if self.kind == "all":
            return all_edges
        if self.kind == "direct":
            if (x, y) not in graph.edges:
                raise ValueError(f"no direct edge {x!r} -> {y!r}")
            return frozenset({(x, y)})
        if self.kind == "mediators":
            for m in self.mediators:
                if m not in graph.node_ids:
                    raise ValueError(f"unknown mediator {m!r}")
            selected = [p for p in paths if any(m in p[1:-1] for m in self.mediators)]
            return frozenset(
                (p[i], p[i + 1]) for p in selected for i in range(len(p) - 1)
            )
        if self.kind == "edges":
            requested = frozenset(self.edges)
            for e in requested:
                if e not in graph.edges:
                    raise ValueError(f"edge {e!r} not in the graph")
            # closure under path membership: the set must be exactly the union
            # of the edges of the x->y paths it fully covers
            covered = [
                p
                for p in paths
                if all((p[i], p[i + 1]) in requested for i in range(len(p) - 1))
            ]
            union = frozenset(
                (p[i], p[i + 1]) for p in covered for i in range(len(p) - 1)
            )
            if union != requested:
                raise ValueError(
                    "explicit edge set is not closed under path membership: "
                    f"extra edges {sorted(requested - union)}"
                )
            return union
        raise ValueError(f"unknown path set kind {self.kind!r}")


def enumerate_paths(graph: CausalGraph, x: str, y: str) -> list[list[str]]:
    """All directed x -> ... -> y paths, in deterministic (DFS, edge-order) order."""
    if x == y:
        raise ValueError("treatment and outcome must differ")
    paths: list[list[str]] = []

    def visit(node: str, trail: list[str]) -> None:
        if node == y:
            paths.append(trail + [node])
            return
        for child in graph.children(node):
            if child not in trail:
                visit(child, trail + [node])

    visit(x, [])
    return paths


def recanting_witness_check(
    graph: CausalGraph, x: str, y: str, sigma: PathSet
) -> bool:
    """True iff some intermediate node lies on both a fully sigma-active x->y
    path and on an x->y path with a sigma-inactive edge.  Such configurations
    are not identifiable from data alone (the fully specified SCM still
    resolves them)."""
    active = sigma.active_edges(graph, x, y)
    paths = enumerate_paths(graph, x, y)
    active_through: set[str] = set()
    inactive_through: set[str] = set()
    for p in paths:
        edges = [(p[i], p[i + 1]) for i in range(len(p) - 1)]
        inner = set(p[1:-1])
        if all(e in active for e in edges):
            active_through |= inner
        else:
            inactive_through |= inner
    return bool(active_through & inactive_through)


# ---------------------------------------------------------------------------
# Queries


@dataclass(frozen=True)
class Exact:
    pass


@dataclass(frozen=True)
class MonteCarlo:
    samples: int = 50_000
    seed: int = 0


@dataclass(frozen=True)
class PceQuery:
    treatment: str
    outcome: str
    x0: float
    x1: float
    sigma: PathSet = field(default_factory=PathSet.all_paths)
    observations: Mapping[str, float] = field(default_factory=dict)
    transform: str = "abs"  # abs | identity
    estimator: Exact | MonteCarlo = field(default_factory=Exact)

    def __post_init__(self):
        object.__setattr__(self, "observations", dict(self.observations))

    def check(self, model: StructuralCausalModel) -> None:
        ids = set(model.graph.node_ids)
        if self.treatment == self.outcome:
            raise ValueError("treatment and outcome must differ")
        for nid in (self.treatment, self.outcome):
            if nid not in ids:
                raise ValueError(f"unknown node {nid!r}")
        decl = model.graph.node(self.treatment)
        for v in (self.x0, self.x1):
            if not decl.domain.contains(v):
                raise ValueError(f"value {v} outside the domain of {self.treatment!r}")
        for nid in self.observations:
            if nid not in ids:
                raise ValueError(f"unknown observation node {nid!r}")
            if nid in (self.treatment, self.outcome):
                raise ValueError("observation nodes must exclude treatment and outcome")
        if self.transform not in ("abs", "identity"):
            raise ValueError(f"unknown transform {self.transform!r}")

    def apply_transform(self, value: float) -> float:
        return abs(value) if self.transform == "abs" else value


@dataclass(frozen=True)
class EffectEstimate:
    value: float
    standard_error: float
    samples_used: int

    def __post_init__(self):
        if self.standard_error < 0:
            raise ValueError("standard error must be >= 0")


# ---------------------------------------------------------------------------
# Dual propagation (counterfactual coupling)


def dual_propagate_arrays(
    model: StructuralCausalModel,
    x: str,
    x0: float,
    x1: float,
    active_edges: frozenset[tuple[str, str]],
    noise: Mapping[str, np.ndarray],
    world_interventions: Mapping[str, tuple[np.ndarray | float, np.ndarray | float]] | None = None,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Natural (all-x0) and sigma-affected value maps sharing one noise draw.

    A node's sigma-affected value is computed from each parent's sigma-affected
    value when the connecting edge is active, and from the parent's natural
    value otherwise.  ``world_interventions`` optionally pins nodes to
    (natural, affected) values in the two worlds; used by the solver oracle to
    enumerate decision values.
    """
    world = dict(world_interventions or {})
    order = topological_order(model.graph)
    nat: dict[str, np.ndarray] = {}
    aff: dict[str, np.ndarray] = {}
    for nid in order:
        if nid == x:
            nat[nid] = np.asarray(float(x0))
            aff[nid] = np.asarray(float(x1))
            continue
        if nid in world:
            nat[nid] = np.asarray(world[nid][0], dtype=float)
            aff[nid] = np.asarray(world[nid][1], dtype=float)
            continue
        if nid in model.interventions:
            value = np.asarray(model.interventions[nid], dtype=float)
            nat[nid] = value
            aff[nid] = value
            continue
        mech = model.mechanisms.get(nid)
        if mech is None:
            raise scm_mod.EvaluationError(
                f"node {nid!r} has no mechanism and is not intervened"
            )
        parents = model.graph.parents(nid)
        env_nat: dict[str, np.ndarray | float] = {p: nat[p] for p in parents}
        env_aff: dict[str, np.ndarray | float] = {
            p: (aff[p] if (p, nid) in active_edges else nat[p]) for p in parents
        }
        if nid in noise:
            env_nat["u"] = noise[nid]
            env_aff["u"] = noise[nid]
        nat[nid] = mech.evaluate(env_nat, nid)
        aff[nid] = mech.evaluate(env_aff, nid)
    return nat, aff


def dual_propagate(
    model: StructuralCausalModel,
    x: str,
    x0: float,
    x1: float,
    sigma: PathSet,
    outcome: str,
    noise: Mapping[str, float],
) -> tuple[dict[str, float], dict[str, float]]:
    """Natural and sigma-affected value maps for one scalar noise assignment."""
    active = sigma.active_edges(model.graph, x, outcome)
    noise_arrays = {k: np.asarray(v, dtype=float) for k, v in noise.items()}
    nat, aff = dual_propagate_arrays(model, x, x0, x1, active, noise_arrays)
    return (
        {k: float(v) for k, v in nat.items()},
        {k: float(v) for k, v in aff.items()},
    )


# ---------------------------------------------------------------------------
# Abduction


def abduct(
    model: StructuralCausalModel, observations: Mapping[str, float]
) -> list[tuple[dict[str, float], float]]:
    """Posterior over enumerable noise assignments given factual observations.

    Returns (noise assignment, normalized weight) pairs; weights sum to 1.
    """
    nodes = [
        nid
        for nid in topological_order(model.graph)
        if nid not in model.interventions and nid in model.noises
    ]
    noise, weights = enumerate_noise(model, nodes)
    values = evaluate_arrays(model, noise)
    mask = np.ones(len(weights), dtype=bool)
    for nid, obs in observations.items():
        mask &= np.abs(values[nid] - obs) <= 1e-9
    total = weights[mask].sum()
    if total <= 0:
        raise InconsistentEvidenceError("inconsistent evidence: observations have zero probability")
    out = []
    for idx in np.nonzero(mask)[0]:
        assignment = {nid: float(noise[nid][idx]) for nid in nodes}
        out.append((assignment, float(weights[idx] / total)))
    return out


# ---------------------------------------------------------------------------
# PCE


def pce(model: StructuralCausalModel, query: PceQuery) -> EffectEstimate:
    """Path-specific counterfactual effect of the treatment on the outcome.

    Returns the raw (untransformed) difference E[sigma-affected Y] - E[natural Y],
    taken over the noise posterior given the query's observations.
    """
    query.check(model)
    active = query.sigma.active_edges(model.graph, query.treatment, query.outcome)
    if isinstance(query.estimator, Exact):
        return _pce_exact(model, query, active)
    return _pce_mc(model, query, active)


def _pce_exact(
    model: StructuralCausalModel, query: PceQuery, active: frozenset[tuple[str, str]]
) -> EffectEstimate:
    nodes = [
        nid
        for nid in topological_order(model.graph)
        if nid not in model.interventions and nid in model.noises
    ]
    noise, weights = enumerate_noise(model, nodes)
    if query.observations:
        factual = evaluate_arrays(model, noise)
        mask = np.ones(len(weights), dtype=bool)
        for nid, obs in query.observations.items():
            mask &= np.abs(factual[nid] - obs) <= 1e-9
        total = weights[mask].sum()
        if total <= 0:
            raise InconsistentEvidenceError(
                "inconsistent evidence: observations have zero probability"
            )
        noise = {k: v[mask] for k, v in noise.items()}
        weights = weights[mask] / total
    else:
        weights = weights / weights.sum()
    nat, aff = dual_propagate_arrays(
        model, query.treatment, query.x0, query.x1, active, noise
    )
    y_nat = np.broadcast_to(nat[query.outcome], weights.shape)
    y_aff = np.broadcast_to(aff[query.outcome], weights.shape)
    value = float(np.sum(weights * (y_aff - y_nat)))
    return EffectEstimate(value=value, standard_error=0.0, samples_used=len(weights))


def _pce_mc(
    model: StructuralCausalModel, query: PceQuery, active: frozenset[tuple[str, str]]
) -> EffectEstimate:
    est = query.estimator
    assert isinstance(est, MonteCarlo)
    rng = np.random.default_rng(est.seed)
    noise = scm_mod.sample_noise(model, est.samples, rng)
    if query.observations:
        for nid in query.observations:
            if model.graph.node(nid).domain.kind == "continuous":
                raise ValueError(
                    f"cannot condition on continuous node {nid!r} with the "
                    "Monte Carlo estimator (rejection sampling needs discrete evidence)"
                )
        factual = evaluate_arrays(model, noise)
        mask = np.ones(est.samples, dtype=bool)
        for nid, obs in query.observations.items():
            mask &= np.abs(factual[nid] - obs) <= 1e-9
        if not mask.any():
            raise InconsistentEvidenceError(
                "inconsistent evidence: no sampled world matches the observations"
            )
        noise = {k: v[mask] for k, v in noise.items()}
    n = len(next(iter(noise.values()))) if noise else est.samples
    nat, aff = dual_propagate_arrays(
        model, query.treatment, query.x0, query.x1, active, noise
    )
    diff = np.broadcast_to(
        np.asarray(aff[query.outcome]) - np.asarray(nat[query.outcome]), (n,)
    )
    value = float(diff.mean())
    se = float(diff.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return EffectEstimate(value=value, standard_error=se, samples_used=n)


# ---------------------------------------------------------------------------
# IPW and propensity invariance


def ipw_causal_effect(
    dataset: Mapping[str, np.ndarray],
    treatment: str,
    outcome: str,
    propensity: float,
) -> EffectEstimate:
    """Inverse-probability-weighted estimate of the total causal effect of a
    binary root treatment on the outcome, from sampled data."""
    if not 0 < propensity < 1:
        raise ValueError("propensity must lie strictly inside (0, 1)")
    t = np.asarray(dataset[treatment], dtype=float)
    y = np.asarray(dataset[outcome], dtype=float)
    if t.size == 0:
        raise ValueError("dataset is empty")
    if not set(np.unique(t)) <= {0.0, 1.0}:
        raise ValueError(f"treatment column {treatment!r} is not binary")
    terms = (t == 1) * y / propensity - (t == 0) * y / (1.0 - propensity)
    n = len(terms)
    value = float(terms.mean())
    se = float(terms.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return EffectEstimate(value=value, standard_error=se, samples_used=n)


def propensity_invariance_demo(
    model: StructuralCausalModel,
    treatment: str,
    outcome: str,
    propensities: Sequence[float],
) -> list[float]:
    """Exact total effect of the treatment on the outcome, recomputed after
    replacing the treatment root's marginal probability by each listed value.

    The effect intervenes on the treatment, so all returned values coincide.
    """
    spec = model.noises.get(treatment)
    if spec is None or spec.kind != "bernoulli":
        raise ValueError(f"treatment root {treatment!r} must carry Bernoulli noise")
    out = []
    for p in propensities:
        noises = dict(model.noises)
        noises[treatment] = scm_mod.bernoulli(p)
        variant = StructuralCausalModel(
            graph=model.graph,
            mechanisms=model.mechanisms,
            noises=noises,
            interventions=model.interventions,
        )
        query = PceQuery(
            treatment=treatment,
            outcome=outcome,
            x0=0.0,
            x1=1.0,
            sigma=PathSet.all_paths(),
            estimator=Exact(),
        )
        out.append(pce(variant, query).value)
    return out
