"""Fair-policy solvers.

Two routes:

* an exact linear-program route for single-step problems whose objective and
  constraints are affine in the tabular policy probabilities, backed by
  scipy's LP solver;
* a primal-dual Lagrangian route for sequential problems, with score-function
  policy gradients estimated from rollouts and projected dual ascent.

Plus a brute-force grid oracle used for verification.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .effects import Exact, MonteCarlo, PceQuery, pce
from .mdp import (
    Policy,
    Scmdp,
    TrajectoryBatch,
    bind_policy,
    discounted_return,
    disparity_across_trajectory_stats,
    disparity_per_step_stats,
    equity_cost,
    rollout,
)
from .principles import ConstraintSpec
from .scm import (
    StructuralCausalModel,
    enumerate_noise,
    evaluate_arrays,
)
from .effects import dual_propagate_arrays


# ---------------------------------------------------------------------------
# Shared pieces


@dataclass(frozen=True)
class SolveResult:
    policy: Policy
    objective: float
    objective_se: float
    constraint_values: tuple[float, ...]
    constraint_ses: tuple[float, ...]
    duals: tuple[float, ...]
    feasible: bool
    iterations: int
    seed: int
    iterate_log: tuple[dict, ...] = ()
    notes: tuple[str, ...] = ()


def feature_assignments(
    model: StructuralCausalModel, feature_nodes: Sequence[str]
) -> list[tuple[float, ...]]:
    """All joint assignments of discrete feature nodes, in declaration order."""
    per_node = []
    for f in feature_nodes:
        domain = model.graph.node(f).domain
        if domain.kind == "binary":
            per_node.append((0.0, 1.0))
        elif domain.kind == "categorical":
            per_node.append(tuple(float(i) for i in range(domain.size or 0)))
        else:
            raise ValueError(f"feature node {f!r} must be discrete")
    return [tuple(combo) for combo in itertools.product(*per_node)]


def exact_objective(scmdp: Scmdp, policy: Policy) -> float:
    """Exact expected composed reward for a single-step problem."""
    if scmdp.horizon != 1:
        raise ValueError("exact objective requires horizon 1")
    bound = bind_policy(scmdp, policy)
    noise, weights = enumerate_noise(bound)
    values = evaluate_arrays(bound, noise)
    rewards = np.stack(
        [np.broadcast_to(values[r], weights.shape) for r in scmdp.stakeholder_reward_nodes],
        axis=1,
    )
    from .mdp import WelfareFn  # local import to avoid cycle noise

    composed = rewards.sum(axis=1) if scmdp.welfare is WelfareFn.SUM else rewards.min(axis=1)
    if scmdp.shared_reward_node is not None:
        composed = composed + np.broadcast_to(values[scmdp.shared_reward_node], weights.shape)
    return float(np.sum(weights * composed))


def exact_channel_mean(scmdp: Scmdp, policy: Policy, node: str) -> float:
    bound = bind_policy(scmdp, policy)
    noise, weights = enumerate_noise(bound)
    values = evaluate_arrays(bound, noise)
    return float(np.sum(weights * np.broadcast_to(values[node], weights.shape)))


def signed_constraint_value(
    scmdp: Scmdp, policy: Policy, spec: ConstraintSpec
) -> float:
    """Untransformed constraint statistic (signed PCE, or signed equity pair max)."""
    if spec.is_causal:
        if spec.observe_nodes:
            raise ValueError("individual-level constraints have no single signed value")
        bound = bind_policy(scmdp, policy)
        query = _with_estimator(spec.query, Exact())
        return pce(bound, query).value
    if spec.statistic == "equity":
        means = np.array(
            [
                exact_channel_mean(scmdp, policy, node)
                for node in scmdp.stakeholder_reward_nodes
            ]
        )
        ratios = means / np.asarray(spec.contributions)
        return float(np.max(np.abs(ratios[:, None] - ratios[None, :])))
    raise ValueError(f"statistic {spec.statistic!r} has no exact single-step form")


def constraint_value_exact(scmdp: Scmdp, policy: Policy, spec: ConstraintSpec) -> float:
    """Transformed (as-compared-to-threshold) constraint value, exact route."""
    if spec.is_causal:
        bound = bind_policy(scmdp, policy)
        query = _with_estimator(spec.query, Exact())
        if spec.observe_nodes:
            return _individual_worst_case(bound, query, spec.observe_nodes)
        return query.apply_transform(pce(bound, query).value)
    if spec.statistic == "equity":
        return signed_constraint_value(scmdp, policy, spec)
    raise ValueError(f"statistic {spec.statistic!r} requires rollouts; use evaluate_policy")


def _individual_worst_case(
    bound: StructuralCausalModel, query: PceQuery, observe_nodes: Sequence[str]
) -> float:
    """Worst transformed effect over all positive-probability observation profiles."""
    noise, weights = enumerate_noise(bound)
    values = evaluate_arrays(bound, noise)
    profiles: dict[tuple[float, ...], float] = {}
    cols = np.stack(
        [np.broadcast_to(values[n], weights.shape) for n in observe_nodes], axis=1
    )
    for row, w in zip(cols, weights):
        key = tuple(float(v) for v in row)
        profiles[key] = profiles.get(key, 0.0) + float(w)
    worst = 0.0 if query.transform == "abs" else -math.inf
    for key, prob in profiles.items():
        if prob <= 1e-12:
            continue
        obs = dict(zip(observe_nodes, key))
        q = PceQuery(
            treatment=query.treatment,
            outcome=query.outcome,
            x0=query.x0,
            x1=query.x1,
            sigma=query.sigma,
            observations=obs,
            transform=query.transform,
            estimator=Exact(),
        )
        worst = max(worst, q.apply_transform(pce(bound, q).value))
    return worst


def _with_estimator(query: PceQuery, estimator) -> PceQuery:
    return PceQuery(
        treatment=query.treatment,
        outcome=query.outcome,
        x0=query.x0,
        x1=query.x1,
        sigma=query.sigma,
        observations=query.observations,
        transform=query.transform,
        estimator=estimator,
    )


# ---------------------------------------------------------------------------
# Linear program route


@dataclass(frozen=True)
class AffineForm:
    """offset + sum coefs[x, a] * pi(a | x)."""

    offset: float
    coefs: np.ndarray  # (n_states, n_actions)

    def value(self, probs: np.ndarray) -> float:
        return float(self.offset + np.sum(self.coefs * probs))


@dataclass(frozen=True)
class LinearProgram:
    """Policy-probability LP: maximize the objective subject to per-state
    probability simplices, box bounds [0, 1] and affine fairness constraints."""

    feature_nodes: tuple[str, ...]
    feature_keys: tuple[tuple[float, ...], ...]
    actions: tuple[tuple[float, ...], ...]
    objective: AffineForm
    # per original constraint: (signed affine form, spec)
    constraints: tuple[tuple[AffineForm, ConstraintSpec], ...]

    @property
    def n_states(self) -> int:
        return len(self.feature_keys)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def inequality_rows(self) -> list[tuple[np.ndarray, float, int]]:
        """Expanded one-sided rows (coefs, rhs, constraint index); abs-transformed
        constraints contribute two rows."""
        rows = []
        for i, (form, spec) in enumerate(self.constraints):
            transform = spec.query.transform if spec.is_causal else "abs"
            rows.append((form.coefs, spec.threshold - form.offset, i))
            if transform == "abs":
                rows.append((-form.coefs, spec.threshold + form.offset, i))
        return rows


def _probe_policy(
    feature_nodes: Sequence[str],
    feature_keys: Sequence[tuple[float, ...]],
    actions: Sequence[tuple[float, ...]],
    choice: dict[tuple[float, ...], int],
) -> Policy:
    probs = {}
    for key in feature_keys:
        row = np.zeros(len(actions))
        row[choice.get(key, 0)] = 1.0
        probs[key] = row
    return Policy.from_probs(feature_nodes, actions, probs)


def probe_affine(
    feature_nodes: Sequence[str],
    feature_keys: Sequence[tuple[float, ...]],
    actions: Sequence[tuple[float, ...]],
    func: Callable[[Policy], float],
) -> AffineForm:
    """Recover an affine-in-policy function from evaluations at deterministic
    policies: the base policy plays action 0 everywhere; flipping one state to
    one action isolates that coefficient."""
    base = func(_probe_policy(feature_nodes, feature_keys, actions, {}))
    coefs = np.zeros((len(feature_keys), len(actions)))
    for xi, key in enumerate(feature_keys):
        for ai in range(1, len(actions)):
            val = func(_probe_policy(feature_nodes, feature_keys, actions, {key: ai}))
            coefs[xi, ai] = val - base
    return AffineForm(offset=base, coefs=coefs)


def build_lp(
    scmdp: Scmdp,
    constraints: Sequence[ConstraintSpec],
    feature_nodes: Sequence[str] | None = None,
) -> LinearProgram:
    """Exact LP for a single-step problem with group-level constraints.

    Coefficients come from exact enumeration of the noise space at probe
    policies; the optimum of the LP equals the SCMDP optimum exactly.
    """
    if scmdp.horizon != 1:
        raise ValueError("build_lp requires horizon 1; use primal_dual_solve")
    if len(scmdp.decision_nodes) != 1:
        raise ValueError("build_lp requires a single decision node")
    for spec in constraints:
        if spec.observe_nodes:
            raise ValueError(
                f"constraint {spec.name!r} is individual-level: not affine; use primal_dual"
            )
        if not spec.is_causal and spec.statistic != "equity":
            raise ValueError(
                f"constraint {spec.name!r} ({spec.statistic}) is trajectory-level; use primal_dual"
            )
    feats = tuple(feature_nodes or scmdp.state_nodes)
    keys = tuple(feature_assignments(scmdp.step_model, feats))
    decision = scmdp.decision_nodes[0]
    domain = scmdp.step_model.graph.node(decision).domain
    if domain.kind == "binary":
        actions = ((0.0,), (1.0,))
    elif domain.kind == "categorical":
        actions = tuple((float(i),) for i in range(domain.size or 0))
    else:
        raise ValueError("decision node must be discrete")

    objective = probe_affine(feats, keys, actions, lambda p: exact_objective(scmdp, p))
    compiled = []
    for spec in constraints:
        form = probe_affine(
            feats, keys, actions, lambda p, s=spec: signed_constraint_value_signed(scmdp, p, s)
        )
        compiled.append((form, spec))
    return LinearProgram(
        feature_nodes=feats,
        feature_keys=keys,
        actions=actions,
        objective=objective,
        constraints=tuple(compiled),
    )


def signed_constraint_value_signed(
    scmdp: Scmdp, policy: Policy, spec: ConstraintSpec
) -> float:
    """Signed affine statistic backing an LP constraint row."""
    if spec.is_causal:
        bound = bind_policy(scmdp, policy)
        return pce(bound, _with_estimator(spec.query, Exact())).value
    # equity: the max over pairs is not affine, but each signed pair is; the
    # LP expands the binding pair chosen below.  For two stakeholders there is
    # a single pair, which covers the bundled environments.
    means = np.array(
        [exact_channel_mean(scmdp, policy, node) for node in scmdp.stakeholder_reward_nodes]
    )
    ratios = means / np.asarray(spec.contributions)
    if len(ratios) != 2:
        raise ValueError("LP equity constraints support exactly two stakeholders")
    return float(ratios[0] - ratios[1])


def simplex_solve(lp: LinearProgram) -> SolveResult:
    """Solve the policy LP; returns the optimal policy or an infeasibility
    certificate (least-violating policy and the constraints it breaks)."""
    n_states, n_actions = lp.n_states, lp.n_actions
    n = n_states * n_actions
    c = -lp.objective.coefs.flatten()
    a_eq = np.zeros((n_states, n))
    for xi in range(n_states):
        a_eq[xi, xi * n_actions : (xi + 1) * n_actions] = 1.0
    b_eq = np.ones(n_states)
    rows = lp.inequality_rows()
    a_ub = np.array([r[0].flatten() for r in rows]) if rows else None
    b_ub = np.array([r[1] for r in rows]) if rows else None
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=(0.0, 1.0), method="highs"
    )
    if res.status == 2:  # infeasible: certify with the least-violating policy
        return _infeasible_certificate(lp, a_eq, b_eq, rows)
    if res.status != 0:
        raise RuntimeError(f"LP solve failed: {res.message}")
    probs = res.x.reshape(n_states, n_actions)
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum(axis=1, keepdims=True)
    policy = Policy.from_probs(
        lp.feature_nodes, lp.actions, {key: probs[i] for i, key in enumerate(lp.feature_keys)}
    )
    objective = lp.objective.value(probs)
    signed = [form.value(probs) for form, _ in lp.constraints]
    values = []
    for (form, spec), s in zip(lp.constraints, signed):
        transform = spec.query.transform if spec.is_causal else "abs"
        values.append(abs(s) if transform == "abs" else s)
    duals = _combine_duals(lp, rows, res)
    feasible = all(
        v <= spec.threshold + 1e-9 for v, (_, spec) in zip(values, lp.constraints)
    )
    return SolveResult(
        policy=policy,
        objective=objective,
        objective_se=0.0,
        constraint_values=tuple(values),
        constraint_ses=tuple(0.0 for _ in values),
        duals=duals,
        feasible=feasible,
        iterations=int(res.nit),
        seed=0,
    )


def _combine_duals(lp: LinearProgram, rows, res) -> tuple[float, ...]:
    duals = [0.0] * len(lp.constraints)
    marginals = getattr(getattr(res, "ineqlin", None), "marginals", None)
    if marginals is not None:
        for (coefs, rhs, idx), m in zip(rows, marginals):
            duals[idx] += float(-m)
    return tuple(duals)


def _infeasible_certificate(lp: LinearProgram, a_eq, b_eq, rows) -> SolveResult:
    """Minimize the uniform constraint slack to exhibit the violated constraints."""
    n = lp.n_states * lp.n_actions
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.hstack(
        [np.array([r[0].flatten() for r in rows]), -np.ones((len(rows), 1))]
    )
    b_ub = np.array([r[1] for r in rows])
    a_eq2 = np.hstack([a_eq, np.zeros((a_eq.shape[0], 1))])
    bounds = [(0.0, 1.0)] * n + [(0.0, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq2, b_eq=b_eq, bounds=bounds, method="highs")
    probs = res.x[:n].reshape(lp.n_states, lp.n_actions)
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum(axis=1, keepdims=True)
    policy = Policy.from_probs(
        lp.feature_nodes, lp.actions, {key: probs[i] for i, key in enumerate(lp.feature_keys)}
    )
    signed = [form.value(probs) for form, _ in lp.constraints]
    values = []
    notes = []
    for (form, spec), s in zip(lp.constraints, signed):
        transform = spec.query.transform if spec.is_causal else "abs"
        v = abs(s) if transform == "abs" else s
        values.append(v)
        if v > spec.threshold + 1e-9:
            notes.append(
                f"constraint {spec.name!r} unsatisfiable: best value {v:.6g} > threshold {spec.threshold:.6g}"
            )
    return SolveResult(
        policy=policy,
        objective=lp.objective.value(probs),
        objective_se=0.0,
        constraint_values=tuple(values),
        constraint_ses=tuple(0.0 for _ in values),
        duals=tuple(0.0 for _ in values),
        feasible=False,
        iterations=int(res.nit),
        seed=0,
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# Brute-force grid oracle (verification only)


def brute_force_oracle(
    scmdp: Scmdp,
    constraints: Sequence[ConstraintSpec],
    resolution: float,
    feature_nodes: Sequence[str] | None = None,
    max_grid: int = 5_000_000,
) -> SolveResult:
    """Exhaustive grid search over per-state action probabilities.

    Independent verification route: per-state conditional expectations come
    from direct enumeration with the decision intervened, not from the LP's
    probe construction.  Single decision node, two actions.
    """
    if scmdp.horizon != 1 or len(scmdp.decision_nodes) != 1:
        raise ValueError("oracle supports single-step, single-decision problems")
    feats = tuple(feature_nodes or scmdp.state_nodes)
    keys = feature_assignments(scmdp.step_model, feats)
    if len(keys) > 16:
        raise ValueError("instance too large")
    decision = scmdp.decision_nodes[0]
    if scmdp.step_model.graph.node(decision).domain.kind != "binary":
        raise ValueError("oracle supports two actions")
    actions = ((0.0,), (1.0,))

    steps = int(round(1.0 / resolution))
    grid_1d = np.linspace(0.0, 1.0, steps + 1)
    total = (steps + 1) ** len(keys)
    if total > max_grid:
        raise ValueError("instance too large")

    t_obj = _conditional_table(scmdp, feats, keys, _composed_reward_fn(scmdp))
    tables = []
    for spec in constraints:
        if spec.observe_nodes:
            raise ValueError("oracle supports group-level constraints only")
        if spec.is_causal:
            tables.append(("pce", _pce_tables(scmdp, feats, keys, spec), spec))
        elif spec.statistic == "equity":
            per_channel = [
                _conditional_table(scmdp, feats, keys, lambda v, node=node: v[node])
                for node in scmdp.stakeholder_reward_nodes
            ]
            tables.append(("equity", per_channel, spec))
        else:
            raise ValueError(f"oracle does not support statistic {spec.statistic!r}")

    mesh = np.meshgrid(*([grid_1d] * len(keys)), indexing="ij")
    p1 = np.stack([m.ravel() for m in mesh], axis=1)  # (grid, states): P(a=1|x)
    pi = np.stack([1.0 - p1, p1], axis=2)  # (grid, states, 2)

    objective = np.einsum("gsa,sa->g", pi, t_obj)
    feasible = np.ones(len(p1), dtype=bool)
    values_per_constraint = []
    for kind, data, spec in tables:
        if kind == "pce":
            t_nat, t_aff = data
            signed = np.einsum("gsa,sa->g", pi, t_aff) - np.einsum("gsa,sa->g", pi, t_nat)
            transform = spec.query.transform
            vals = np.abs(signed) if transform == "abs" else signed
        else:
            means = [np.einsum("gsa,sa->g", pi, t) for t in data]
            ratios = np.stack(
                [m / b for m, b in zip(means, spec.contributions)], axis=1
            )
            vals = np.max(
                np.abs(ratios[:, :, None] - ratios[:, None, :]), axis=(1, 2)
            )
        values_per_constraint.append(vals)
        feasible &= vals <= spec.threshold + 1e-9

    if not feasible.any():
        best = int(np.argmax(objective))
        ok = False
    else:
        masked = np.where(feasible, objective, -np.inf)
        best = int(np.argmax(masked))
        ok = True
    probs = {key: pi[best, i] for i, key in enumerate(keys)}
    policy = Policy.from_probs(feats, actions, probs)
    return SolveResult(
        policy=policy,
        objective=float(objective[best]),
        objective_se=0.0,
        constraint_values=tuple(float(v[best]) for v in values_per_constraint),
        constraint_ses=tuple(0.0 for _ in values_per_constraint),
        duals=tuple(0.0 for _ in values_per_constraint),
        feasible=ok,
        iterations=len(p1),
        seed=0,
    )


def _composed_reward_fn(scmdp: Scmdp) -> Callable[[dict], np.ndarray]:
    from .mdp import WelfareFn

    def fn(values: dict) -> np.ndarray:
        rewards = np.stack(
            [np.asarray(values[r], dtype=float) for r in scmdp.stakeholder_reward_nodes],
            axis=-1,
        )
        out = rewards.sum(axis=-1) if scmdp.welfare is WelfareFn.SUM else rewards.min(axis=-1)
        if scmdp.shared_reward_node is not None:
            out = out + np.asarray(values[scmdp.shared_reward_node], dtype=float)
        return out

    return fn


def _conditional_table(
    scmdp: Scmdp,
    feats: Sequence[str],
    keys: Sequence[tuple[float, ...]],
    target: Callable[[dict], np.ndarray],
) -> np.ndarray:
    """T[x, a] = sum over environment noise of P(noise) * 1(features = x) *
    target(values | do(decision = a))."""
    model = scmdp.step_model
    decision = scmdp.decision_nodes[0]
    noise, weights = enumerate_noise(model)
    table = np.zeros((len(keys), 2))
    key_index = {key: i for i, key in enumerate(keys)}
    for ai, a in enumerate((0.0, 1.0)):
        values = evaluate_arrays(model, noise, {decision: a})
        feats_arr = np.stack(
            [np.broadcast_to(values[f], weights.shape) for f in feats], axis=1
        )
        tgt = np.broadcast_to(target(values), weights.shape)
        for row, w, v in zip(feats_arr, weights, tgt):
            table[key_index[tuple(float(x) for x in row)], ai] += w * v
    return table


def _pce_tables(
    scmdp: Scmdp,
    feats: Sequence[str],
    keys: Sequence[tuple[float, ...]],
    spec: ConstraintSpec,
) -> tuple[np.ndarray, np.ndarray]:
    """Natural/affected outcome tables: T[x, a] = sum over noise of P(noise) *
    1(features-in-that-world = x) * outcome-in-that-world given decision a."""
    model = scmdp.step_model
    decision = scmdp.decision_nodes[0]
    query = spec.query
    active = query.sigma.active_edges(model.graph, query.treatment, query.outcome)
    noise, weights = enumerate_noise(model)
    key_index = {key: i for i, key in enumerate(keys)}
    t_nat = np.zeros((len(keys), 2))
    t_aff = np.zeros((len(keys), 2))
    outcome_nat = {}
    outcome_aff = {}
    feat_nat = feat_aff = None
    for d_nat in (0.0, 1.0):
        for d_aff in (0.0, 1.0):
            nat, aff = dual_propagate_arrays(
                model,
                query.treatment,
                query.x0,
                query.x1,
                active,
                noise,
                world_interventions={decision: (d_nat, d_aff)},
            )
            outcome_nat[(d_nat, d_aff)] = np.broadcast_to(
                nat[query.outcome], weights.shape
            )
            outcome_aff[(d_nat, d_aff)] = np.broadcast_to(
                aff[query.outcome], weights.shape
            )
            feat_nat = np.stack(
                [np.broadcast_to(nat[f], weights.shape) for f in feats], axis=1
            )
            feat_aff = np.stack(
                [np.broadcast_to(aff[f], weights.shape) for f in feats], axis=1
            )
    # each world's outcome must depend only on its own decision value
    for d in (0.0, 1.0):
        if not np.allclose(outcome_nat[(d, 0.0)], outcome_nat[(d, 1.0)], atol=1e-12):
            raise ValueError("natural outcome depends on the affected decision; oracle unsupported")
        if not np.allclose(outcome_aff[(0.0, d)], outcome_aff[(1.0, d)], atol=1e-12):
            raise ValueError("affected outcome depends on the natural decision; oracle unsupported")
    for i in range(len(weights)):
        x_nat = tuple(float(v) for v in feat_nat[i])
        x_aff = tuple(float(v) for v in feat_aff[i])
        for ai, a in enumerate((0.0, 1.0)):
            t_nat[key_index[x_nat], ai] += weights[i] * outcome_nat[(a, 0.0)][i]
            t_aff[key_index[x_aff], ai] += weights[i] * outcome_aff[(0.0, a)][i]
    return t_nat, t_aff


# ---------------------------------------------------------------------------
# Primal-dual route


@dataclass(frozen=True)
class PrimalDualConfig:
    policy_lr: float = 0.05
    dual_lr: float = 0.05
    iterations: int = 400
    episodes_per_iter: int = 512
    seed: int = 0
    tolerance: float = 0.05
    eval_every: int = 20
    eval_episodes: int = 2000
    fd_step: float = 1e-5  # finite-difference step for causal-constraint gradients

    def __post_init__(self):
        if self.policy_lr <= 0 or self.dual_lr <= 0:
            raise ValueError("learning rates must be positive")


def evaluate_policy(
    scmdp: Scmdp,
    policy: Policy,
    constraints: Sequence[ConstraintSpec],
    episodes: int,
    seed: int,
) -> tuple[tuple[float, float], list[tuple[float, float]], TrajectoryBatch]:
    """(J_R mean/SE, per-constraint value/SE, the evaluation batch).

    Causal constraints are evaluated exactly on the policy-bound step model
    (zero standard error); trajectory statistics come from the fresh batch.
    """
    batch = rollout(scmdp, policy, episodes, seed)
    j_r = discounted_return(batch, scmdp.discount)
    values: list[tuple[float, float]] = []
    for spec in constraints:
        values.append(_constraint_estimate(scmdp, policy, spec, batch))
    return j_r, values, batch


def _constraint_estimate(
    scmdp: Scmdp, policy: Policy, spec: ConstraintSpec, batch: TrajectoryBatch
) -> tuple[float, float]:
    if spec.is_causal:
        return constraint_value_exact(scmdp, policy, spec), 0.0
    if spec.statistic == "disparity_per_step":
        mean, se = disparity_per_step_stats(batch)
        return abs(mean), se
    if spec.statistic == "disparity_across_trajectory":
        mean, se = disparity_across_trajectory_stats(batch)
        return abs(mean), se
    if spec.statistic == "equity":
        return float(np.max(equity_cost(batch, spec.contributions))), 0.0
    raise ValueError(f"unknown statistic {spec.statistic!r}")


def _logit_matrix(policy: Policy, keys: Sequence[tuple[float, ...]]) -> np.ndarray:
    return np.stack([policy.logits[key] for key in keys])


def _policy_from_matrix(
    feats: Sequence[str],
    keys: Sequence[tuple[float, ...]],
    actions: Sequence[tuple[float, ...]],
    matrix: np.ndarray,
) -> Policy:
    return Policy(
        feature_nodes=tuple(feats),
        actions=tuple(actions),
        logits={key: matrix[i].copy() for i, key in enumerate(keys)},
    )


def _score_gradient(
    batch: TrajectoryBatch,
    policy: Policy,
    keys: Sequence[tuple[float, ...]],
    per_episode: np.ndarray,
) -> np.ndarray:
    """Likelihood-ratio gradient of E[f(trajectory)] w.r.t. the logits, with the
    batch mean of f as baseline."""
    key_index = {key: i for i, key in enumerate(keys)}
    probs = np.stack([policy.probs(key) for key in keys])
    grad = np.zeros_like(probs)
    centered = per_episode - per_episode.mean()
    for ep in range(batch.episodes):
        weight = centered[ep]
        if weight == 0.0:
            continue
        for t in range(batch.horizon):
            xi = key_index[batch.feature_keys[ep][t]]
            ai = batch.action_index[ep, t]
            row = -probs[xi] * weight
            row[ai] += weight
            grad[xi] += row
    return grad / batch.episodes


def primal_dual_solve(
    scmdp: Scmdp,
    constraints: Sequence[ConstraintSpec],
    config: PrimalDualConfig,
    feature_nodes: Sequence[str] | None = None,
) -> SolveResult:
    """Lagrangian ascent-descent: score-function policy gradients from rollouts,
    projected dual updates, best-feasible-iterate selection on fresh seeds."""
    feats = tuple(feature_nodes or scmdp.state_nodes)
    keys = feature_assignments(scmdp.step_model, feats)
    decision_domains = [
        scmdp.step_model.graph.node(d).domain for d in scmdp.decision_nodes
    ]
    per_decision = []
    for dom in decision_domains:
        if dom.kind == "binary":
            per_decision.append((0.0, 1.0))
        elif dom.kind == "categorical":
            per_decision.append(tuple(float(i) for i in range(dom.size or 0)))
        else:
            raise ValueError("decision nodes must be discrete")
    actions = [tuple(combo) for combo in itertools.product(*per_decision)]

    matrix = np.zeros((len(keys), len(actions)))
    lam = np.zeros(len(constraints))
    rng = np.random.default_rng(config.seed)
    best: tuple[float, np.ndarray] | None = None  # (objective, logits) among feasible
    least_violation: tuple[float, np.ndarray] | None = None
    log: list[dict] = []

    for it in range(config.iterations):
        policy = _policy_from_matrix(feats, keys, actions, matrix)
        batch = rollout(scmdp, policy, config.episodes_per_iter, int(rng.integers(2**31)))
        weights = scmdp.discount ** np.arange(scmdp.horizon)
        returns = batch.reward @ weights
        grad = _score_gradient(batch, policy, keys, returns)

        values = np.zeros(len(constraints))
        for ci, spec in enumerate(constraints):
            if spec.is_causal:
                value, cgrad = _causal_value_and_grad(
                    scmdp, feats, keys, actions, matrix, spec, config.fd_step
                )
            else:
                value, cgrad = _statistic_value_and_grad(scmdp, batch, policy, keys, spec)
            values[ci] = value
            grad = grad - lam[ci] * cgrad

        matrix = matrix + config.policy_lr * grad
        matrix = matrix - matrix.mean(axis=1, keepdims=True)  # keep logits centered
        lam = np.maximum(
            0.0, lam + config.dual_lr * (values - np.array([s.threshold for s in constraints]))
        )

        if (it + 1) % config.eval_every == 0 or it == config.iterations - 1:
            policy = _policy_from_matrix(feats, keys, actions, matrix)
            eval_seed = int(rng.integers(2**31))
            j_r, cons, _ = evaluate_policy(
                scmdp, policy, constraints, config.eval_episodes, eval_seed
            )
            feasible = all(
                v <= spec.threshold + config.tolerance
                for (v, _), spec in zip(cons, constraints)
            )
            violation = max(
                [v - spec.threshold for (v, _), spec in zip(cons, constraints)],
                default=0.0,
            )
            log.append(
                {
                    "iteration": it + 1,
                    "objective": j_r[0],
                    "constraints": [v for v, _ in cons],
                    "duals": lam.tolist(),
                    "feasible": feasible,
                }
            )
            if feasible and (best is None or j_r[0] > best[0]):
                best = (j_r[0], matrix.copy())
            if least_violation is None or violation < least_violation[0]:
                least_violation = (violation, matrix.copy())

    chosen = best if best is not None else least_violation
    assert chosen is not None
    policy = _policy_from_matrix(feats, keys, actions, chosen[1])
    final_seed = int(np.random.default_rng(config.seed + 1).integers(2**31))
    j_r, cons, _ = evaluate_policy(
        scmdp, policy, constraints, config.eval_episodes, final_seed
    )
    feasible = best is not None and all(
        v <= spec.threshold + config.tolerance for (v, _), spec in zip(cons, constraints)
    )
    return SolveResult(
        policy=policy,
        objective=j_r[0],
        objective_se=j_r[1],
        constraint_values=tuple(v for v, _ in cons),
        constraint_ses=tuple(se for _, se in cons),
        duals=tuple(lam.tolist()),
        feasible=feasible,
        iterations=config.iterations,
        seed=config.seed,
        iterate_log=tuple(log),
    )


def _causal_value_and_grad(
    scmdp: Scmdp,
    feats: Sequence[str],
    keys: Sequence[tuple[float, ...]],
    actions: Sequence[tuple[float, ...]],
    matrix: np.ndarray,
    spec: ConstraintSpec,
    step: float,
) -> tuple[float, np.ndarray]:
    """Exact transformed constraint value and its finite-difference gradient in
    logit space (the exact value is cheap for enumerable step models)."""

    def value_at(m: np.ndarray) -> float:
        return constraint_value_exact(
            scmdp, _policy_from_matrix(feats, keys, actions, m), spec
        )

    base = value_at(matrix)
    grad = np.zeros_like(matrix)
    for xi in range(matrix.shape[0]):
        for ai in range(matrix.shape[1]):
            bumped = matrix.copy()
            bumped[xi, ai] += step
            grad[xi, ai] = (value_at(bumped) - base) / step
    return base, grad


def _statistic_value_and_grad(
    scmdp: Scmdp,
    batch: TrajectoryBatch,
    policy: Policy,
    keys: Sequence[tuple[float, ...]],
    spec: ConstraintSpec,
) -> tuple[float, np.ndarray]:
    if spec.statistic == "disparity_per_step":
        per_episode = (batch.rewards_e[:, :, 0] - batch.rewards_e[:, :, 1]).max(axis=1)
        mean = per_episode.mean()
        sign = 1.0 if mean >= 0 else -1.0
        return abs(float(mean)), sign * _score_gradient(batch, policy, keys, per_episode)
    if spec.statistic == "disparity_across_trajectory":
        per_episode = (batch.rewards_e[:, :, 0] - batch.rewards_e[:, :, 1]).mean(axis=1)
        mean = per_episode.mean()
        sign = 1.0 if mean >= 0 else -1.0
        return abs(float(mean)), sign * _score_gradient(batch, policy, keys, per_episode)
    if spec.statistic == "equity":
        b = np.asarray(spec.contributions)
        means = batch.rewards_e.mean(axis=(0, 1)) / b
        i, j = np.unravel_index(
            np.argmax(np.abs(means[:, None] - means[None, :])), (len(b), len(b))
        )
        sign = 1.0 if means[i] - means[j] >= 0 else -1.0
        per_episode = (
            batch.rewards_e[:, :, i].mean(axis=1) / b[i]
            - batch.rewards_e[:, :, j].mean(axis=1) / b[j]
        )
        value = float(np.abs(means[i] - means[j]))
        return value, sign * _score_gradient(batch, policy, keys, per_episode)
    raise ValueError(f"unknown statistic {spec.statistic!r}")
