"""Compile named fairness principles into constraint specs and a welfare function."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .effects import Exact, MonteCarlo, PathSet, PceQuery, enumerate_paths
from .mdp import Scmdp, WelfareFn

# Stable catalog order; first eight follow the principle table, then the two
# temporal variants and unawareness.
_CATALOG: tuple[tuple[str, tuple[str, ...], str], ...] = (
    (
        "individual_outcome",
        ("sensitive", "outcome", "threshold"),
        "Outcome for an individual does not change when the sensitive attribute is intervened upon",
    ),
    (
        "group_outcome",
        ("sensitive", "outcome", "threshold"),
        "No total causal effect of a sensitive attribute on outcome",
    ),
    (
        "group_procedural",
        ("sensitive", "threshold"),
        "No total causal effect of a sensitive attribute on decision",
    ),
    (
        "luck_egalitarianism",
        ("sensitive", "outcome", "threshold"),
        "Individuals are not worse-off due to uncontrollable attributes",
    ),
    (
        "individual_procedural",
        ("sensitive", "threshold"),
        "Decision for each individual does not change if the sensitive attribute changes",
    ),
    (
        "maximin",
        (),
        "Improve the worst payoff among a group of individuals",
    ),
    (
        "path_specific_procedural",
        ("sensitive", "threshold"),
        "Decisions should not depend directly on sensitive attributes",
    ),
    (
        "equity_theory",
        ("contributions", "threshold"),
        "Rewards should be proportional to the individual's contribution",
    ),
    (
        "fairness_per_time_step",
        ("threshold",),
        "Benefit disparity between stakeholders stays under the threshold at every time step",
    ),
    (
        "fairness_across_trajectory",
        ("threshold",),
        "Average benefit disparity across the trajectory stays under the threshold",
    ),
    (
        "fairness_through_unawareness",
        ("sensitive",),
        "Sensitive attributes are excluded from the policy's inputs",
    ),
)

KINDS = tuple(entry[0] for entry in _CATALOG)


def catalog() -> list[tuple[str, tuple[str, ...], str]]:
    """(kind, required bindings, description) in stable order."""
    return list(_CATALOG)


@dataclass(frozen=True)
class FairnessPrinciple:
    kind: str
    sensitive: tuple[str, ...] = ()
    non_sensitive: tuple[str, ...] = ()  # observation set for individual-level kinds
    outcome: str | None = None  # outcome node; defaults per kind at compile time
    values: tuple[float, float] = (0.0, 1.0)  # z0 -> z1 per sensitive attribute
    contributions: tuple[float, ...] = ()
    threshold: float = 0.0
    estimator: Exact | MonteCarlo = field(default_factory=Exact)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(
                f"unknown fairness principle {self.kind!r}; known kinds: {', '.join(KINDS)}"
            )
        object.__setattr__(self, "sensitive", tuple(self.sensitive))
        object.__setattr__(self, "non_sensitive", tuple(self.non_sensitive))
        object.__setattr__(self, "contributions", tuple(self.contributions))


@dataclass(frozen=True)
class ConstraintSpec:
    """One compiled fairness constraint.

    Exactly one of ``query`` (causal, with threshold on the transformed effect)
    or ``statistic`` (non-causal trajectory cost) is set.
    """

    name: str
    threshold: float
    temporal_mode: str  # single_step | per_step | across_trajectory
    query: PceQuery | None = None
    statistic: str | None = None  # equity | disparity_per_step | disparity_across_trajectory
    contributions: tuple[float, ...] = ()
    # individual-level kinds: condition the effect on these nodes' factual
    # values and bound the worst case over their assignments
    observe_nodes: tuple[str, ...] = ()

    def __post_init__(self):
        if (self.query is None) == (self.statistic is None):
            raise ValueError("exactly one of query and statistic must be set")
        object.__setattr__(self, "observe_nodes", tuple(self.observe_nodes))

    @property
    def is_causal(self) -> bool:
        return self.query is not None


@dataclass(frozen=True)
class CompiledPrinciples:
    constraints: tuple[ConstraintSpec, ...]
    welfare: WelfareFn
    drop_features: tuple[str, ...] = ()  # attributes the policy must not observe


_CAUSAL_KINDS = {
    # kind -> (outcome target, path set, observation set, transform)
    "individual_outcome": ("reward", "all", "non_sensitive", "abs"),
    "group_outcome": ("reward", "all", "empty", "abs"),
    "group_procedural": ("decision", "all", "empty", "abs"),
    "luck_egalitarianism": ("reward", "all", "empty", "identity"),
    "individual_procedural": ("decision", "all", "non_sensitive", "abs"),
    "path_specific_procedural": ("decision", "direct", "empty", "abs"),
}


def compile_principles(
    principles: Sequence[FairnessPrinciple], scmdp: Scmdp
) -> CompiledPrinciples:
    """Compile principles against an SCMDP; combining rule for welfare: Min wins
    if any principle demands it, otherwise Sum."""
    constraints: list[ConstraintSpec] = []
    welfare = WelfareFn.SUM
    drop: list[str] = []
    for principle in principles:
        compiled = compile_principle(principle, scmdp)
        constraints.extend(compiled.constraints)
        if compiled.welfare is WelfareFn.MIN:
            welfare = WelfareFn.MIN
        drop.extend(f for f in compiled.drop_features if f not in drop)
    return CompiledPrinciples(tuple(constraints), welfare, tuple(drop))


def compile_principle(principle: FairnessPrinciple, scmdp: Scmdp) -> CompiledPrinciples:
    kind = principle.kind
    graph = scmdp.step_model.graph
    if kind == "maximin":
        return CompiledPrinciples((), WelfareFn.MIN)
    if kind == "fairness_through_unawareness":
        _require(principle.sensitive, kind, "sensitive")
        for z in principle.sensitive:
            _check_node(graph, z)
        return CompiledPrinciples((), WelfareFn.SUM, drop_features=principle.sensitive)
    if kind == "equity_theory":
        _require(principle.contributions, kind, "contributions")
        if len(principle.contributions) != scmdp.stakeholders:
            raise ValueError("one contribution per stakeholder is required")
        if any(b <= 0 for b in principle.contributions):
            raise ValueError("contributions must be positive")
        spec = ConstraintSpec(
            name="equity",
            threshold=principle.threshold,
            temporal_mode="across_trajectory",
            statistic="equity",
            contributions=principle.contributions,
        )
        return CompiledPrinciples((spec,), WelfareFn.SUM)
    if kind == "fairness_per_time_step":
        spec = ConstraintSpec(
            name="disparity_per_step",
            threshold=principle.threshold,
            temporal_mode="per_step",
            statistic="disparity_per_step",
        )
        return CompiledPrinciples((spec,), WelfareFn.SUM)
    if kind == "fairness_across_trajectory":
        spec = ConstraintSpec(
            name="disparity_across_trajectory",
            threshold=principle.threshold,
            temporal_mode="across_trajectory",
            statistic="disparity_across_trajectory",
        )
        return CompiledPrinciples((spec,), WelfareFn.SUM)

    target, paths, obs_kind, transform = _CAUSAL_KINDS[kind]
    _require(principle.sensitive, kind, "sensitive")
    if transform == "abs" and principle.threshold < 0:
        raise ValueError("threshold must be >= 0 for absolute-value constraints")
    if target == "decision":
        if len(scmdp.decision_nodes) != 1:
            raise ValueError("procedural constraints require a single decision node")
        outcome = scmdp.decision_nodes[0]
    else:
        outcome = principle.outcome or scmdp.stakeholder_reward_nodes[0]
    _check_node(graph, outcome)
    observations = ()
    if obs_kind == "non_sensitive":
        observations = principle.non_sensitive or tuple(
            s
            for s in scmdp.state_nodes
            if s not in principle.sensitive
        )
        for nid in observations:
            if nid in scmdp.decision_nodes or nid in scmdp.stakeholder_reward_nodes:
                raise ValueError(
                    f"observation set may not contain decision or reward node {nid!r}"
                )
    constraints = []
    for z in principle.sensitive:
        _check_node(graph, z)
        if not enumerate_paths(graph, z, outcome):
            warnings.warn(
                f"no causal path from {z!r} to {outcome!r}; the constraint is trivially satisfied",
                stacklevel=2,
            )
        sigma = PathSet.direct_only() if paths == "direct" else PathSet.all_paths()
        query = PceQuery(
            treatment=z,
            outcome=outcome,
            x0=principle.values[0],
            x1=principle.values[1],
            sigma=sigma,
            observations={},
            transform=transform,
            estimator=principle.estimator,
        )
        constraints.append(
            ConstraintSpec(
                name=f"{kind}:{z}",
                threshold=principle.threshold,
                temporal_mode="single_step",
                query=query,
                observe_nodes=tuple(observations),
            )
        )
    return CompiledPrinciples(tuple(constraints), WelfareFn.SUM)


def _require(value, kind: str, name: str) -> None:
    if not value:
        raise ValueError(f"principle {kind!r} requires the {name!r} binding")


def _check_node(graph, node_id: str) -> None:
    if node_id not in graph.node_ids:
        raise ValueError(f"unknown node {node_id!r}")
