"""Experiment harness: solve/sweep/report plumbing shared by the CLI.

All outputs are deterministic given (config, seed): JSON is dumped with sorted
keys and CSV floats are written with ``repr``, so reruns are byte-identical.
"""
from __future__ import annotations

import dataclasses
import json
import os
from typing import Mapping, Sequence

import numpy as np

from .configio import ExperimentConfig, query_to_dict
from .envs import EnvBundle, build_env
from .mdp import Policy, Scmdp, bind_policy, rollout
from .principles import CompiledPrinciples, ConstraintSpec, compile_principles
from .scm import enumerate_noise, evaluate_arrays
from .solver import (
    PrimalDualConfig,
    SolveResult,
    build_lp,
    evaluate_policy,
    simplex_solve,
    primal_dual_solve,
)


def dump_json(data, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True, indent=2)
        fh.write("\n")


def policy_to_dict(policy: Policy) -> dict:
    return {
        "feature_nodes": list(policy.feature_nodes),
        "actions": [list(a) for a in policy.actions],
        "probs": {
            ",".join(repr(v) for v in key): [float(p) for p in policy.probs(key)]
            for key in sorted(policy.logits)
        },
    }


def result_to_dict(result: SolveResult, constraints: Sequence[ConstraintSpec]) -> dict:
    return {
        "objective": result.objective,
        "objective_se": result.objective_se,
        "constraints": [
            {
                "name": spec.name,
                "threshold": spec.threshold,
                "value": value,
                "standard_error": se,
                "dual": dual,
            }
            for spec, value, se, dual in zip(
                constraints, result.constraint_values, result.constraint_ses, result.duals
            )
        ],
        "feasible": result.feasible,
        "iterations": result.iterations,
        "seed": result.seed,
        "policy": policy_to_dict(result.policy),
        "notes": list(result.notes),
    }


def _apply_compiled(bundle: EnvBundle, compiled: CompiledPrinciples) -> tuple[Scmdp, tuple[str, ...]]:
    scmdp = dataclasses.replace(bundle.scmdp, welfare=compiled.welfare)
    features = tuple(f for f in bundle.feature_nodes if f not in compiled.drop_features)
    if not features:
        raise ValueError("unawareness drops every policy feature; nothing left to observe")
    return scmdp, features


def solve_experiment(
    config: ExperimentConfig, seed: int | None = None
) -> tuple[EnvBundle, Scmdp, CompiledPrinciples, SolveResult]:
    seed = config.seed if seed is None else seed
    bundle = build_env(config.env_name, config.env_params)
    compiled = compile_principles(config.principles, bundle.scmdp)
    scmdp, features = _apply_compiled(bundle, compiled)
    if config.solver.method == "lp":
        lp = build_lp(scmdp, compiled.constraints, features)
        result = simplex_solve(lp)
    else:
        pd_config = PrimalDualConfig(**{"seed": seed, **config.solver.options})
        result = primal_dual_solve(scmdp, compiled.constraints, pd_config, features)
    return bundle, scmdp, compiled, result


def run_experiment(config: ExperimentConfig, out_dir: str, seed: int | None = None) -> dict:
    """Solve, evaluate on fresh seeds, and write solve.json / trajectories.csv /
    effects.json into ``out_dir``.  Returns the solve report dict."""
    seed = config.seed if seed is None else seed
    os.makedirs(out_dir, exist_ok=True)
    bundle, scmdp, compiled, result = solve_experiment(config, seed)
    j_r, values, _ = evaluate_policy(
        scmdp, result.policy, compiled.constraints, config.solver.episodes, seed + 1000
    )
    report = result_to_dict(result, compiled.constraints)
    report["evaluation"] = {
        "episodes": config.solver.episodes,
        "seed": seed + 1000,
        "objective": j_r[0],
        "objective_se": j_r[1],
        "constraints": [
            {"name": spec.name, "value": v, "standard_error": se}
            for spec, (v, se) in zip(compiled.constraints, values)
        ],
    }
    report["env"] = {"name": bundle.name, "params": _jsonable(bundle.params), "notes": list(bundle.notes)}
    report["welfare"] = compiled.welfare.value
    report["dropped_features"] = list(compiled.drop_features)
    dump_json(report, os.path.join(out_dir, "solve.json"))

    batch = rollout(scmdp, result.policy, min(200, config.solver.episodes), seed + 2000)
    batch.to_csv(os.path.join(out_dir, "trajectories.csv"))

    effects = [
        {
            "name": spec.name,
            "query": query_to_dict(spec.query),
            "observe_nodes": list(spec.observe_nodes),
            "threshold": spec.threshold,
            "value": v,
            "standard_error": se,
        }
        for spec, (v, se) in zip(compiled.constraints, values)
        if spec.is_causal
    ]
    dump_json({"effects": effects}, os.path.join(out_dir, "effects.json"))
    return report


def _jsonable(value):
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return float(value)
    return value


# ---------------------------------------------------------------------------
# Sweeps


def sweep(config: ExperimentConfig, thresholds: Sequence[float] | None = None) -> dict:
    """Solve one instance per threshold (every principle's threshold replaced by
    d) and report per-row objectives, constraint values, feasibility and the
    monotonicity / binding / saturation flags."""
    thresholds = tuple(thresholds if thresholds is not None else config.sweep_thresholds)
    if not thresholds:
        raise ValueError("no sweep thresholds configured")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly increasing")

    bundle = build_env(config.env_name, config.env_params)

    # unconstrained reference point for the saturation flag
    unconstrained = dataclasses.replace(config, principles=(), sweep_thresholds=())
    _, scmdp_u, _, result_u = solve_experiment(unconstrained, config.seed)
    compiled_ref = compile_principles(config.principles, bundle.scmdp)
    scmdp_ref, _ = _apply_compiled(bundle, compiled_ref)
    unconstrained_costs = [
        _constraint_value_of(scmdp_ref, result_u.policy, spec)
        for spec in compiled_ref.constraints
    ]

    rows = []
    for d in thresholds:
        principles_d = tuple(
            dataclasses.replace(p, threshold=float(d)) for p in config.principles
        )
        config_d = dataclasses.replace(config, principles=principles_d, sweep_thresholds=())
        _, scmdp, compiled, result = solve_experiment(config_d, config.seed)
        row = {
            "threshold": float(d),
            "objective": result.objective,
            "feasible": result.feasible,
            "constraints": [
                {
                    "name": spec.name,
                    "value": value,
                    "binding": bool(abs(value - d) <= 1e-9),
                }
                for spec, value in zip(compiled.constraints, result.constraint_values)
            ],
            "policy": {
                ",".join(repr(v) for v in key): [float(p) for p in result.policy.probs(key)]
                for key in sorted(result.policy.logits)
            },
            "saturated": bool(
                all(d >= c - 1e-9 for c in unconstrained_costs)
                and abs(result.objective - result_u.objective) <= 1e-9
            ),
        }
        rows.append(row)
    objectives = [r["objective"] for r in rows if r["feasible"]]
    return {
        "env": {"name": bundle.name, "params": _jsonable(bundle.params), "notes": list(bundle.notes)},
        "thresholds": [float(d) for d in thresholds],
        "rows": rows,
        "unconstrained_objective": result_u.objective,
        "unconstrained_costs": unconstrained_costs,
        "monotonic": bool(
            all(b >= a - 1e-9 for a, b in zip(objectives, objectives[1:]))
        ),
        "plateau": bool(
            all(
                abs(r["objective"] - result_u.objective) <= 1e-9
                for r in rows
                if all(r["threshold"] >= c - 1e-9 for c in unconstrained_costs)
            )
        ),
    }


def _constraint_value_of(scmdp: Scmdp, policy: Policy, spec: ConstraintSpec) -> float:
    from .solver import constraint_value_exact

    return float(constraint_value_exact(scmdp, policy, spec))


def sweep_to_csv(report: dict, path: str) -> None:
    import csv

    names = [c["name"] for c in report["rows"][0]["constraints"]]
    header = ["threshold", "objective", "feasible", "saturated"] + [
        f"value_{n}" for n in names
    ] + [f"binding_{n}" for n in names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in report["rows"]:
            writer.writerow(
                [repr(float(row["threshold"])), repr(float(row["objective"])),
                 int(row["feasible"]), int(row["saturated"])]
                + [repr(float(c["value"])) for c in row["constraints"]]
                + [int(c["binding"]) for c in row["constraints"]]
            )


# ---------------------------------------------------------------------------
# Environment-specific metrics


def detention_rates(scmdp: Scmdp, policy: Policy) -> dict[str, float]:
    """Exact P(Score=1) overall and by race for a COMPAS-style instance."""
    bound = bind_policy(scmdp, policy)
    noise, weights = enumerate_noise(bound)
    values = evaluate_arrays(bound, noise)
    score = np.broadcast_to(values["Score"], weights.shape)
    race = np.broadcast_to(values["Race"], weights.shape)
    overall = float(np.sum(weights * score))
    out = {"rate": overall}
    for r in (0.0, 1.0):
        mask = race == r
        total = weights[mask].sum()
        out[f"rate_race{int(r)}"] = float(np.sum(weights[mask] * score[mask]) / total)
    out["rate_gap"] = abs(out["rate_race0"] - out["rate_race1"])
    return out


# ---------------------------------------------------------------------------
# Text report


def render_report(out_dir: str) -> str:
    """Plain-text summary of the JSON artifacts found in ``out_dir``."""
    lines: list[str] = []
    solve_path = os.path.join(out_dir, "solve.json")
    if os.path.exists(solve_path):
        with open(solve_path) as fh:
            solve = json.load(fh)
        lines.append(f"env: {solve['env']['name']}")
        for note in solve["env"].get("notes", []):
            lines.append(f"note: {note}")
        lines.append(
            f"objective: {solve['objective']:.6g} "
            f"(evaluated {solve['evaluation']['objective']:.6g} "
            f"+/- {solve['evaluation']['objective_se']:.2g})"
        )
        lines.append(f"feasible: {solve['feasible']}")
        for c in solve["constraints"]:
            lines.append(
                f"constraint {c['name']}: value {c['value']:.6g} "
                f"(threshold {c['threshold']:.6g}, dual {c['dual']:.6g})"
            )
        for note in solve.get("notes", []):
            lines.append(f"solver note: {note}")
    sweep_path = os.path.join(out_dir, "sweep.json")
    if os.path.exists(sweep_path):
        with open(sweep_path) as fh:
            swp = json.load(fh)
        lines.append(f"sweep over {len(swp['rows'])} thresholds "
                     f"(monotonic={swp['monotonic']}, plateau={swp['plateau']})")
        lines.append(f"{'d':>10} {'objective':>12} {'feasible':>8}  constraints")
        for row in swp["rows"]:
            cons = ", ".join(
                f"{c['name']}={c['value']:.4g}{'*' if c['binding'] else ''}"
                for c in row["constraints"]
            )
            lines.append(
                f"{row['threshold']:>10.4g} {row['objective']:>12.6g} "
                f"{str(row['feasible']):>8}  {cons}"
            )
        lines.append("(* = binding at the threshold)")
    effects_path = os.path.join(out_dir, "effects.json")
    if os.path.exists(effects_path):
        with open(effects_path) as fh:
            eff = json.load(fh)
        for rec in eff.get("effects", []):
            lines.append(
                f"effect {rec['name']}: {rec['value']:.6g} "
                f"+/- {rec['standard_error']:.2g} (threshold {rec['threshold']:.6g})"
            )
    if not lines:
        lines.append(f"no report artifacts found in {out_dir}")
    return "\n".join(lines)
