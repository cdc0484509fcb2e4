"""Structural causal models: graphs, noise, mechanisms, sampling, do-operator."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import dsl
from .dsl import EvaluationError


class CycleError(ValueError):
    """Raised when a graph expected to be acyclic contains a cycle."""


class NotEnumerableError(ValueError):
    """Raised when exact enumeration is requested over non-enumerable noise."""


# ---------------------------------------------------------------------------
# Domains and nodes


@dataclass(frozen=True)
class Domain:
    kind: str  # binary | categorical | continuous
    size: int | None = None  # number of categories, for categorical

    def contains(self, value: float) -> bool:
        if self.kind == "binary":
            return value in (0, 1)
        if self.kind == "categorical":
            return float(value).is_integer() and 0 <= value < (self.size or 0)
        return True


BINARY = Domain("binary")
CONTINUOUS = Domain("continuous")


def categorical(k: int) -> Domain:
    return Domain("categorical", k)


@dataclass(frozen=True)
class NodeDecl:
    id: str
    domain: Domain = CONTINUOUS


# ---------------------------------------------------------------------------
# Graph


@dataclass(frozen=True)
class CausalGraph:
    nodes: tuple[NodeDecl, ...]
    edges: tuple[tuple[str, str], ...]

    def __init__(self, nodes: Sequence[NodeDecl], edges: Sequence[tuple[str, str]]):
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in edges))

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    def node(self, node_id: str) -> NodeDecl:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def parents(self, node_id: str) -> tuple[str, ...]:
        return tuple(a for a, b in self.edges if b == node_id)

    def children(self, node_id: str) -> tuple[str, ...]:
        return tuple(b for a, b in self.edges if a == node_id)

    def descendants(self, node_id: str) -> set[str]:
        out: set[str] = set()
        stack = [node_id]
        while stack:
            for child in self.children(stack.pop()):
                if child not in out:
                    out.add(child)
                    stack.append(child)
        return out

    def violations(self) -> list[str]:
        """Structural problems: duplicate ids, dangling edges, self loops, cycles."""
        problems: list[str] = []
        seen: set[str] = set()
        for n in self.nodes:
            if n.id in seen:
                problems.append(f"duplicate node id {n.id!r}")
            seen.add(n.id)
        for a, b in self.edges:
            if a == b:
                problems.append(f"self-loop on {a!r}")
            for end in (a, b):
                if end not in seen:
                    problems.append(f"edge endpoint {end!r} is not a declared node")
        if not problems:
            try:
                topological_order(self)
            except CycleError as exc:
                problems.append(str(exc))
        return problems


def topological_order(graph: CausalGraph) -> list[str]:
    """Topological order with ties broken by declaration order.

    Raises :class:`CycleError` naming one cycle if the graph is not a DAG.
    """
    ids = list(graph.node_ids)
    indegree = {nid: 0 for nid in ids}
    for _, b in graph.edges:
        if b in indegree:
            indegree[b] += 1
    order: list[str] = []
    remaining = dict(indegree)
    done: set[str] = set()
    while len(order) < len(ids):
        ready = [nid for nid in ids if nid not in done and remaining[nid] == 0]
        if not ready:
            cycle = _find_cycle(graph, [nid for nid in ids if nid not in done])
            raise CycleError(f"cycle: {' -> '.join(cycle)}")
        nxt = ready[0]
        order.append(nxt)
        done.add(nxt)
        for child in graph.children(nxt):
            remaining[child] -= 1
    return order


def _find_cycle(graph: CausalGraph, candidates: list[str]) -> list[str]:
    # walk forward from any remaining node until a repeat appears
    node = candidates[0]
    seen: list[str] = []
    while node not in seen:
        seen.append(node)
        nexts = [c for c in graph.children(node) if c in candidates]
        node = nexts[0]
    start = seen.index(node)
    return seen[start:] + [node]


# ---------------------------------------------------------------------------
# Noise


@dataclass(frozen=True)
class NoiseSpec:
    kind: str  # bernoulli | categorical | uniform | gaussian | point
    params: tuple[float, ...]

    def violations(self) -> list[str]:
        problems = []
        if self.kind == "bernoulli":
            p = self.params[0]
            if not 0 <= p <= 1:
                problems.append(f"bernoulli p={p} outside [0, 1]")
        elif self.kind == "categorical":
            probs = np.asarray(self.params)
            if (probs < 0).any():
                problems.append("categorical probabilities must be nonnegative")
            if abs(probs.sum() - 1.0) > 1e-9:
                problems.append(f"categorical probabilities sum to {probs.sum()}, not 1")
        elif self.kind == "uniform":
            a, b = self.params
            if a > b:
                problems.append(f"uniform bounds {a} > {b}")
        elif self.kind == "gaussian":
            if self.params[1] < 0:
                problems.append(f"gaussian sigma={self.params[1]} < 0")
        return problems

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "bernoulli":
            return (rng.random(n) < self.params[0]).astype(float)
        if self.kind == "categorical":
            return rng.choice(len(self.params), size=n, p=np.asarray(self.params)).astype(float)
        if self.kind == "uniform":
            a, b = self.params
            return rng.uniform(a, b, size=n)
        if self.kind == "gaussian":
            mu, sigma = self.params
            return rng.normal(mu, sigma, size=n)
        if self.kind == "point":
            return np.full(n, self.params[0], dtype=float)
        raise ValueError(f"unknown noise kind {self.kind!r}")

    def atoms(self) -> list[tuple[float, float]] | None:
        """Finite support as (value, probability) pairs, or None if continuous."""
        if self.kind == "bernoulli":
            p = self.params[0]
            return [(0.0, 1.0 - p), (1.0, p)]
        if self.kind == "categorical":
            return [(float(i), p) for i, p in enumerate(self.params)]
        if self.kind == "point":
            return [(self.params[0], 1.0)]
        return None


def bernoulli(p: float) -> NoiseSpec:
    return NoiseSpec("bernoulli", (float(p),))


def categorical_noise(probs: Sequence[float]) -> NoiseSpec:
    return NoiseSpec("categorical", tuple(float(p) for p in probs))


def uniform(a: float, b: float) -> NoiseSpec:
    return NoiseSpec("uniform", (float(a), float(b)))


def gaussian(mu: float, sigma: float) -> NoiseSpec:
    return NoiseSpec("gaussian", (float(mu), float(sigma)))


def point(value: float) -> NoiseSpec:
    return NoiseSpec("point", (float(value),))


# ---------------------------------------------------------------------------
# Mechanisms


@dataclass(frozen=True)
class ExprMechanism:
    """Deterministic function of parent values and the node's own noise."""

    expr: dsl.Expr

    @classmethod
    def parse(cls, source: str) -> "ExprMechanism":
        return cls(dsl.parse(source))

    def references(self) -> set[str]:
        return dsl.references(self.expr)

    def evaluate(self, env: dict[str, np.ndarray | float], node: str) -> np.ndarray:
        values = dsl.evaluate(self.expr, env)
        dsl.check_finite(values, node)
        return values

    def to_source(self) -> str:
        return dsl.to_source(self.expr)


@dataclass(frozen=True)
class TableMechanism:
    """Conditional distribution over a finite value set, driven by uniform noise.

    ``rows`` maps each parent assignment (tuple of parent values, ordered like
    ``parents``) to a probability vector over ``values``.  The node's noise must
    be Uniform(0, 1); the realized value is the inverse CDF of the selected row
    at the noise draw, so counterfactual worlds sharing the noise are coupled
    comonotonically.
    """

    parents: tuple[str, ...]
    values: tuple[float, ...]
    rows: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]

    @classmethod
    def from_dict(
        cls,
        parents: Sequence[str],
        rows: Mapping[tuple[float, ...], Sequence[float]],
        values: Sequence[float] = (0.0, 1.0),
    ) -> "TableMechanism":
        packed = tuple(
            (tuple(float(v) for v in key), tuple(float(p) for p in probs))
            for key, probs in rows.items()
        )
        return cls(tuple(parents), tuple(float(v) for v in values), packed)

    def row_map(self) -> dict[tuple[float, ...], tuple[float, ...]]:
        return dict(self.rows)

    def references(self) -> set[str]:
        return set(self.parents) | {"u"}

    def violations(self) -> list[str]:
        problems = []
        for key, probs in self.rows:
            arr = np.asarray(probs)
            if len(probs) != len(self.values):
                problems.append(f"row {key} has {len(probs)} probabilities, expected {len(self.values)}")
            elif (arr < 0).any() or abs(arr.sum() - 1.0) > 1e-9:
                problems.append(f"row {key} is not a probability distribution")
        return problems

    def evaluate(self, env: dict[str, np.ndarray | float], node: str) -> np.ndarray:
        u = np.asarray(env["u"], dtype=float)
        parent_vals = [np.asarray(env[p], dtype=float) for p in self.parents]
        shape = np.broadcast_shapes(u.shape, *(v.shape for v in parent_vals)) if parent_vals else u.shape
        u = np.broadcast_to(u, shape)
        out = np.full(shape, np.nan)
        matched = np.zeros(shape, dtype=bool)
        for key, probs in self.rows:
            mask = np.ones(shape, dtype=bool)
            for pv, kv in zip(parent_vals, key):
                mask &= np.broadcast_to(pv, shape) == kv
            if not mask.any():
                continue
            matched |= mask
            cum = np.cumsum(probs)
            idx = np.searchsorted(cum, u, side="right")
            idx = np.minimum(idx, len(self.values) - 1)
            out = np.where(mask, np.asarray(self.values)[idx], out)
        if not matched.all():
            raise EvaluationError(f"node {node!r}: parent assignment missing from table")
        return out

    def noise_atoms(self) -> list[tuple[float, float]]:
        """Partition of the uniform noise into intervals on which every row's
        inverse CDF is constant; returns (representative u, interval length)."""
        breaks = {0.0, 1.0}
        for _, probs in self.rows:
            breaks.update(float(c) for c in np.cumsum(probs)[:-1])
        pts = sorted(breaks)
        atoms = []
        for lo, hi in zip(pts[:-1], pts[1:]):
            if hi - lo > 1e-15:
                atoms.append(((lo + hi) / 2.0, hi - lo))
        return atoms


Mechanism = ExprMechanism | TableMechanism


def parse_mechanism(source: str) -> ExprMechanism:
    """Parse mechanism source text; raises MechanismSyntaxError with position."""
    return ExprMechanism.parse(source)


# ---------------------------------------------------------------------------
# The model


@dataclass(frozen=True)
class StructuralCausalModel:
    graph: CausalGraph
    mechanisms: Mapping[str, Mechanism]
    noises: Mapping[str, NoiseSpec]
    interventions: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "mechanisms", dict(self.mechanisms))
        object.__setattr__(self, "noises", dict(self.noises))
        object.__setattr__(self, "interventions", dict(self.interventions))

    @property
    def node_ids(self) -> tuple[str, ...]:
        return self.graph.node_ids

    def free_nodes(self) -> list[str]:
        """Nodes whose value is computed by a mechanism (not intervened)."""
        return [nid for nid in self.graph.node_ids if nid not in self.interventions]


def validate(model: StructuralCausalModel) -> list[str]:
    """Every invariant violation found, as human-readable strings. Empty = ok."""
    problems = model.graph.violations()
    declared = set(model.graph.node_ids)
    for nid in model.mechanisms:
        if nid not in declared:
            problems.append(f"mechanism for undeclared node {nid!r}")
    for nid in model.noises:
        if nid not in declared:
            problems.append(f"noise for undeclared node {nid!r}")
    for nid in declared:
        if nid in model.interventions:
            node = model.graph.node(nid)
            if not node.domain.contains(model.interventions[nid]):
                problems.append(
                    f"intervention value {model.interventions[nid]} outside domain of {nid!r}"
                )
            continue
        mech = model.mechanisms.get(nid)
        if mech is None:
            problems.append(f"node {nid!r} has no mechanism")
        else:
            allowed = set(model.graph.parents(nid)) | {"u"}
            for ref in mech.references():
                if ref not in allowed:
                    if ref in declared:
                        problems.append(
                            f"mechanism of {nid!r} references non-parent node {ref!r}"
                        )
                    else:
                        problems.append(f"mechanism of {nid!r}: unknown reference {ref!r}")
            if isinstance(mech, TableMechanism):
                problems.extend(f"node {nid!r}: {p}" for p in mech.violations())
        noise = model.noises.get(nid)
        if noise is None:
            problems.append(f"node {nid!r} has no noise spec")
        else:
            problems.extend(f"node {nid!r}: {p}" for p in noise.violations())
        if isinstance(mech, TableMechanism) and noise is not None:
            if noise.kind != "uniform" or noise.params != (0.0, 1.0):
                problems.append(f"node {nid!r}: table mechanisms require Uniform(0, 1) noise")
    return problems


def intervene(model: StructuralCausalModel, node: str, value: float) -> StructuralCausalModel:
    """Return a copy with do(node=value) recorded; the original is unchanged."""
    if node not in model.graph.node_ids:
        raise KeyError(f"unknown node {node!r}")
    decl = model.graph.node(node)
    if not decl.domain.contains(value):
        raise ValueError(f"value {value} outside the domain of {node!r}")
    new_interventions = dict(model.interventions)
    new_interventions[node] = float(value)
    return replace(model, interventions=new_interventions)


def evaluate_arrays(
    model: StructuralCausalModel,
    noise: Mapping[str, np.ndarray | float],
    extra_interventions: Mapping[str, np.ndarray | float] | None = None,
) -> dict[str, np.ndarray]:
    """Evaluate all nodes in topological order, vectorized over noise arrays.

    ``extra_interventions`` may carry per-sample arrays (used when binding
    policy decisions during rollouts); they override mechanisms like
    ``model.interventions`` does.
    """
    extra = dict(extra_interventions or {})
    order = topological_order(model.graph)
    values: dict[str, np.ndarray] = {}
    for nid in order:
        if nid in extra:
            values[nid] = np.asarray(extra[nid], dtype=float)
            continue
        if nid in model.interventions:
            values[nid] = np.asarray(model.interventions[nid], dtype=float)
            continue
        mech = model.mechanisms.get(nid)
        if mech is None:
            raise EvaluationError(f"node {nid!r} has no mechanism and is not intervened")
        env: dict[str, np.ndarray | float] = {p: values[p] for p in model.graph.parents(nid)}
        if nid in noise:
            env["u"] = noise[nid]
        if isinstance(mech, TableMechanism):
            if "u" not in env:
                raise EvaluationError(f"missing noise for node {nid!r}")
            values[nid] = mech.evaluate(env, nid)
        else:
            if "u" not in mech.references():
                values[nid] = mech.evaluate(env, nid)
            else:
                if "u" not in env:
                    raise EvaluationError(f"missing noise for node {nid!r}")
                values[nid] = mech.evaluate(env, nid)
    return values


def evaluate(
    model: StructuralCausalModel, noise: Mapping[str, float]
) -> dict[str, float]:
    """Scalar evaluation: one value per node, computed in topological order."""
    arrays = evaluate_arrays(model, {k: np.asarray(v, dtype=float) for k, v in noise.items()})
    return {k: float(v) for k, v in arrays.items()}


def sample(model: StructuralCausalModel, n: int, seed: int) -> dict[str, np.ndarray]:
    """n i.i.d. draws of the noise pushed through the mechanisms; deterministic
    given seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    noise: dict[str, np.ndarray] = {}
    for nid in topological_order(model.graph):
        if nid in model.interventions:
            continue
        spec = model.noises.get(nid)
        if spec is not None:
            noise[nid] = spec.sample(rng, n)
    return evaluate_arrays(model, noise)


def sample_noise(
    model: StructuralCausalModel, n: int, rng: np.random.Generator
) -> dict[str, np.ndarray]:
    """Draw noise arrays for every non-intervened node (topological order)."""
    noise: dict[str, np.ndarray] = {}
    for nid in topological_order(model.graph):
        if nid in model.interventions:
            continue
        spec = model.noises.get(nid)
        if spec is not None:
            noise[nid] = spec.sample(rng, n)
    return noise


# ---------------------------------------------------------------------------
# Exact enumeration support


def noise_atoms(model: StructuralCausalModel, node: str) -> list[tuple[float, float]]:
    """Finite (value, probability) support of a node's noise.

    Uniform(0, 1) noise is enumerable when it drives a TableMechanism: the
    unit interval partitions into finitely many intervals on which the
    mechanism is constant.  Raises :class:`NotEnumerableError` otherwise.
    """
    spec = model.noises.get(node)
    if spec is None:
        raise NotEnumerableError(f"node {node!r} has no noise spec")
    atoms = spec.atoms()
    if atoms is not None:
        return atoms
    mech = model.mechanisms.get(node)
    if (
        isinstance(mech, TableMechanism)
        and spec.kind == "uniform"
        and spec.params == (0.0, 1.0)
    ):
        return mech.noise_atoms()
    raise NotEnumerableError(f"noise of node {node!r} ({spec.kind}) is not enumerable")


def enumerate_noise(
    model: StructuralCausalModel, nodes: Sequence[str] | None = None
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Cartesian product of per-node noise atoms.

    Returns (noise arrays keyed by node, joint probability weights); each array
    has one entry per joint atom.  Noise terms are mutually independent, so the
    joint weight is the product of atom probabilities.
    """
    if nodes is None:
        nodes = [
            nid
            for nid in topological_order(model.graph)
            if nid not in model.interventions and nid in model.noises
        ]
    per_node = [noise_atoms(model, nid) for nid in nodes]
    combos = list(itertools.product(*per_node)) if per_node else [()]
    noise = {
        nid: np.array([combo[i][0] for combo in combos])
        for i, nid in enumerate(nodes)
    }
    weights = np.array([float(np.prod([a[1] for a in combo])) for combo in combos])
    if len(combos) == 0:
        weights = np.ones(0)
    return noise, weights
