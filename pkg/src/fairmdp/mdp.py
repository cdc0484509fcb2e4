"""Decision processes over per-step structural causal models.

A step model carries state nodes, policy-bound decision node(s), one reward
node per stakeholder and an optional shared reward node.  The composed reward
at every transition is welfare(stakeholder rewards) + shared reward.
"""
from __future__ import annotations

import csv
import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .scm import (
    StructuralCausalModel,
    TableMechanism,
    evaluate_arrays,
    sample_noise,
    uniform,
)


class WelfareFn(enum.Enum):
    SUM = "sum"
    MIN = "min"


def welfare_apply(fn: WelfareFn, rewards: Sequence[float] | np.ndarray) -> float:
    arr = np.asarray(rewards, dtype=float)
    if arr.size == 0:
        raise ValueError("welfare of an empty reward vector")
    return float(arr.sum()) if fn is WelfareFn.SUM else float(arr.min())


def _welfare_arrays(fn: WelfareFn, rewards: np.ndarray, axis: int = -1) -> np.ndarray:
    return rewards.sum(axis=axis) if fn is WelfareFn.SUM else rewards.min(axis=axis)


@dataclass(frozen=True)
class Scmdp:
    """Decision problem: per-step SCM, policy-bound decisions, reward channels."""

    step_model: StructuralCausalModel
    state_nodes: tuple[str, ...]
    decision_nodes: tuple[str, ...]
    stakeholder_reward_nodes: tuple[str, ...]
    shared_reward_node: str | None
    welfare: WelfareFn
    horizon: int
    discount: float
    # state node -> node in the step model whose value becomes next step's state
    next_state: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "state_nodes", tuple(self.state_nodes))
        object.__setattr__(self, "decision_nodes", tuple(self.decision_nodes))
        object.__setattr__(
            self, "stakeholder_reward_nodes", tuple(self.stakeholder_reward_nodes)
        )
        object.__setattr__(self, "next_state", dict(self.next_state))
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must lie in (0, 1]")
        if not self.stakeholder_reward_nodes:
            raise ValueError("at least one stakeholder reward node is required")
        for d in self.decision_nodes:
            if d in self.step_model.mechanisms:
                raise ValueError(f"decision node {d!r} must not carry a mechanism")

    @property
    def stakeholders(self) -> int:
        return len(self.stakeholder_reward_nodes)


@dataclass(frozen=True)
class Policy:
    """Tabular softmax policy over joint decisions.

    ``actions`` lists joint decision values (one entry per decision node);
    ``logits`` maps each feature assignment to one logit per action.
    Temperature is fixed at 1.
    """

    feature_nodes: tuple[str, ...]
    actions: tuple[tuple[float, ...], ...]
    logits: Mapping[tuple[float, ...], np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "feature_nodes", tuple(self.feature_nodes))
        object.__setattr__(
            self, "actions", tuple(tuple(float(v) for v in a) for a in self.actions)
        )
        table = {
            tuple(float(v) for v in key): np.asarray(val, dtype=float)
            for key, val in dict(self.logits).items()
        }
        object.__setattr__(self, "logits", table)

    def probs(self, features: tuple[float, ...]) -> np.ndarray:
        try:
            logits = self.logits[tuple(float(v) for v in features)]
        except KeyError:
            raise KeyError(f"unseen state {tuple(features)!r}") from None
        z = logits - logits.max()
        e = np.exp(z)
        return e / e.sum()

    def prob_table(self) -> dict[tuple[float, ...], np.ndarray]:
        return {key: self.probs(key) for key in self.logits}

    @classmethod
    def uniform(
        cls,
        feature_nodes: Sequence[str],
        feature_assignments: Sequence[tuple[float, ...]],
        actions: Sequence[tuple[float, ...]],
    ) -> "Policy":
        return cls(
            feature_nodes=tuple(feature_nodes),
            actions=tuple(actions),
            logits={tuple(fa): np.zeros(len(actions)) for fa in feature_assignments},
        )

    @classmethod
    def from_probs(
        cls,
        feature_nodes: Sequence[str],
        actions: Sequence[tuple[float, ...]],
        probs: Mapping[tuple[float, ...], Sequence[float]],
    ) -> "Policy":
        logits = {
            tuple(fa): np.log(np.maximum(np.asarray(p, dtype=float), 1e-300))
            for fa, p in probs.items()
        }
        return cls(feature_nodes=tuple(feature_nodes), actions=tuple(actions), logits=logits)


def binary_assignments(k: int) -> list[tuple[float, ...]]:
    return [tuple(float(b) for b in bits) for bits in itertools.product((0, 1), repeat=k)]


def bind_policy(scmdp: Scmdp, policy: Policy) -> StructuralCausalModel:
    """Replace the (single) decision node's missing mechanism with the policy's
    conditional distribution, yielding a fully specified SCM for effect queries."""
    if len(scmdp.decision_nodes) != 1:
        raise ValueError("policy binding as an SCM mechanism requires one decision node")
    decision = scmdp.decision_nodes[0]
    rows = {fa: policy.probs(fa) for fa in policy.logits}
    values = tuple(a[0] for a in policy.actions)
    mech = TableMechanism.from_dict(policy.feature_nodes, rows, values=values)
    mechanisms = dict(scmdp.step_model.mechanisms)
    mechanisms[decision] = mech
    noises = dict(scmdp.step_model.noises)
    noises[decision] = uniform(0.0, 1.0)
    for f in policy.feature_nodes:
        if f not in scmdp.step_model.graph.parents(decision):
            raise ValueError(f"feature {f!r} is not a parent of decision {decision!r}")
    return StructuralCausalModel(
        graph=scmdp.step_model.graph,
        mechanisms=mechanisms,
        noises=noises,
        interventions=scmdp.step_model.interventions,
    )


# ---------------------------------------------------------------------------
# Trajectories


@dataclass
class TrajectoryBatch:
    """Episode-major logs of one rollout; arrays are (episodes, horizon)."""

    states: dict[str, np.ndarray]
    decisions: dict[str, np.ndarray]
    rewards_e: np.ndarray  # (episodes, horizon, stakeholders)
    reward_a: np.ndarray  # (episodes, horizon)
    reward: np.ndarray  # (episodes, horizon), composed
    action_index: np.ndarray  # (episodes, horizon) index into policy.actions
    feature_keys: list[list[tuple[float, ...]]]  # per episode, per step
    episodes: int
    horizon: int
    seed: int
    costs: dict[str, np.ndarray] = field(default_factory=dict)

    def to_csv(self, path: str) -> None:
        state_ids = sorted(self.states)
        decision_ids = sorted(self.decisions)
        n_stake = self.rewards_e.shape[2]
        cost_ids = sorted(self.costs)
        header = (
            ["episode", "t"]
            + state_ids
            + decision_ids
            + [f"R_e{i + 1}" for i in range(n_stake)]
            + ["R_a", "R"]
            + [f"cost_{c}" for c in cost_ids]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for ep in range(self.episodes):
                for t in range(self.horizon):
                    row = [ep, t]
                    row += [repr(float(self.states[s][ep, t])) for s in state_ids]
                    row += [repr(float(self.decisions[d][ep, t])) for d in decision_ids]
                    row += [repr(float(self.rewards_e[ep, t, i])) for i in range(n_stake)]
                    row += [repr(float(self.reward_a[ep, t])), repr(float(self.reward[ep, t]))]
                    row += [repr(float(self.costs[c][ep, t])) for c in cost_ids]
                    writer.writerow(row)


def rollout(scmdp: Scmdp, policy: Policy, episodes: int, seed: int) -> TrajectoryBatch:
    """Sample trajectories: per step, decisions drawn from the policy softmax
    given the feature values, bound into the step SCM via do, then the step SCM
    evaluated with fresh noise.  Deterministic given seed."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    model = scmdp.step_model
    graph = model.graph
    decision_desc = set()
    for d in scmdp.decision_nodes:
        decision_desc |= graph.descendants(d)
    for f in policy.feature_nodes:
        if f in decision_desc or f in scmdp.decision_nodes:
            raise ValueError(f"feature {f!r} depends on a decision node")

    rng = np.random.default_rng(seed)
    n_stake = scmdp.stakeholders
    states = {s: np.zeros((episodes, scmdp.horizon)) for s in scmdp.state_nodes}
    decisions = {d: np.zeros((episodes, scmdp.horizon)) for d in scmdp.decision_nodes}
    rewards_e = np.zeros((episodes, scmdp.horizon, n_stake))
    reward_a = np.zeros((episodes, scmdp.horizon))
    action_index = np.zeros((episodes, scmdp.horizon), dtype=int)
    feature_keys: list[list[tuple[float, ...]]] = [[] for _ in range(episodes)]

    carried: dict[str, np.ndarray] = {}
    dummy = {d: 0.0 for d in scmdp.decision_nodes}
    for t in range(scmdp.horizon):
        noise = sample_noise(model, episodes, rng)
        pinned = dict(carried)
        # pass 1: feature values (decisions pinned to dummies; features are
        # non-descendants of the decisions, so the dummies cannot leak in)
        pre = evaluate_arrays(model, noise, {**pinned, **dummy})
        feats = np.stack([pre[f] for f in policy.feature_nodes], axis=1)
        probs = np.zeros((episodes, len(policy.actions)))
        filled = np.zeros(episodes, dtype=bool)
        for key in policy.logits:
            mask = np.all(feats == np.asarray(key), axis=1)
            if mask.any():
                probs[mask] = policy.probs(key)
                filled |= mask
        if not filled.all():
            missing = feats[~filled][0]
            raise KeyError(f"unseen state {tuple(float(v) for v in missing)!r}")
        u = rng.random(episodes)
        cum = np.cumsum(probs, axis=1)
        idx = (u[:, None] >= cum).sum(axis=1)
        idx = np.minimum(idx, len(policy.actions) - 1)
        action_values = np.asarray(policy.actions)[idx]  # (episodes, n_decisions)
        bound = dict(pinned)
        for j, d in enumerate(scmdp.decision_nodes):
            bound[d] = action_values[:, j]
        values = evaluate_arrays(model, noise, bound)

        for ep in range(episodes):
            feature_keys[ep].append(tuple(float(v) for v in feats[ep]))
        action_index[:, t] = idx
        for s in scmdp.state_nodes:
            states[s][:, t] = np.broadcast_to(values[s], (episodes,))
        for d in scmdp.decision_nodes:
            decisions[d][:, t] = np.broadcast_to(values[d], (episodes,))
        for i, rnode in enumerate(scmdp.stakeholder_reward_nodes):
            rewards_e[:, t, i] = np.broadcast_to(values[rnode], (episodes,))
        if scmdp.shared_reward_node is not None:
            reward_a[:, t] = np.broadcast_to(values[scmdp.shared_reward_node], (episodes,))
        carried = {
            s: np.broadcast_to(values[src], (episodes,)).copy()
            for s, src in scmdp.next_state.items()
        }

    composed = _welfare_arrays(scmdp.welfare, rewards_e, axis=2) + reward_a
    return TrajectoryBatch(
        states=states,
        decisions=decisions,
        rewards_e=rewards_e,
        reward_a=reward_a,
        reward=composed,
        action_index=action_index,
        feature_keys=feature_keys,
        episodes=episodes,
        horizon=scmdp.horizon,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Trajectory statistics


def _mean_se(per_episode: np.ndarray) -> tuple[float, float]:
    n = len(per_episode)
    mean = float(per_episode.mean())
    se = float(per_episode.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def discounted_return(batch: TrajectoryBatch, gamma: float) -> tuple[float, float]:
    """Mean and standard error over episodes of the discounted composed return."""
    weights = gamma ** np.arange(batch.horizon)
    return _mean_se(batch.reward @ weights)


def discounted_cost(
    batch: TrajectoryBatch, constraint: str, gamma: float
) -> tuple[float, float]:
    """As :func:`discounted_return`, over a per-step cost channel."""
    if constraint not in batch.costs:
        raise KeyError(f"no cost channel {constraint!r}")
    weights = gamma ** np.arange(batch.horizon)
    return _mean_se(batch.costs[constraint] @ weights)


def equity_cost(batch: TrajectoryBatch, contributions: Sequence[float]) -> np.ndarray:
    """Pairwise |E[R_e^i]/b_i - E[R_e^j]/b_j| matrix (symmetric, zero diagonal)."""
    b = np.asarray(contributions, dtype=float)
    if b.shape != (batch.rewards_e.shape[2],):
        raise ValueError("one contribution per stakeholder is required")
    if (b <= 0).any():
        raise ValueError("contributions must be positive")
    ratios = batch.rewards_e.mean(axis=(0, 1)) / b
    return np.abs(ratios[:, None] - ratios[None, :])


def _gaps(batch: TrajectoryBatch) -> np.ndarray:
    if batch.rewards_e.shape[2] != 2:
        raise ValueError("disparity statistics require exactly 2 stakeholders")
    return batch.rewards_e[:, :, 0] - batch.rewards_e[:, :, 1]


def disparity_per_step(batch: TrajectoryBatch) -> float:
    """Episode-mean of the worst per-step benefit gap (stakeholder 1 minus 2)."""
    return float(_gaps(batch).max(axis=1).mean())


def disparity_per_step_stats(batch: TrajectoryBatch) -> tuple[float, float]:
    return _mean_se(_gaps(batch).max(axis=1))


def disparity_across_trajectory(batch: TrajectoryBatch) -> float:
    """Episode-mean of the time-averaged benefit gap."""
    return float(_gaps(batch).mean(axis=1).mean())


def disparity_across_trajectory_stats(batch: TrajectoryBatch) -> tuple[float, float]:
    return _mean_se(_gaps(batch).mean(axis=1))
