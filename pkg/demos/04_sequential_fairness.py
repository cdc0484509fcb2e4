"""
Temporal fairness in a sequential decision process
==================================================

Two stakeholders with different starting health receive or are denied a
subsidy at each of 10 steps; subsidies improve health, health decays
otherwise, and benefits are larger for the worse-off.  Two temporal fairness
notions bound the benefit gap between the stakeholders:

* per-time-step: the worst single-step disparity within an episode;
* across-trajectory: the time-averaged disparity.

Constraints over trajectory statistics are not affine in the policy, so this
uses the Lagrangian primal-dual solver (REINFORCE policy gradients plus
projected dual ascent, keeping the best feasible iterate).
"""
import numpy as np

from fairmdp import (
    FairnessPrinciple,
    PrimalDualConfig,
    compile_principles,
    disparity_across_trajectory_stats,
    disparity_per_step_stats,
    healthcare_sequential,
    primal_dual_solve,
    rollout,
)

bundle = healthcare_sequential()
scmdp = bundle.scmdp
print(f"horizon {scmdp.horizon}, stakeholders {scmdp.stakeholders}, "
      f"policy features {bundle.feature_nodes}")

config = PrimalDualConfig(
    iterations=150, policy_lr=0.2, dual_lr=0.1, episodes_per_iter=512,
    eval_every=25, seed=0,
)


def solve_and_report(kind, threshold):
    compiled = compile_principles(
        [FairnessPrinciple(kind=kind, threshold=threshold)], scmdp
    )
    result = primal_dual_solve(scmdp, compiled.constraints, config, bundle.feature_nodes)
    print(f"\n{kind} (d = {threshold}):")
    print(f"  J_R = {result.objective:.2f} +/- {result.objective_se:.2f}, "
          f"feasible = {result.feasible}")
    print(f"  constraint = {result.constraint_values[0]:.3f}, "
          f"final dual = {result.duals[0]:.3f}")

    # re-evaluate the disparity profile on fresh episodes
    batch = rollout(scmdp, result.policy, 10_000, seed=999)
    ps, ps_se = disparity_per_step_stats(batch)
    ac, ac_se = disparity_across_trajectory_stats(batch)
    print(f"  per-step disparity      = {ps:.3f} +/- {ps_se:.3f}")
    print(f"  across-trajectory disp. = {ac:.3f} +/- {ac_se:.3f}")
    gaps = batch.rewards_e[:, :, 0] - batch.rewards_e[:, :, 1]
    means = gaps.mean(axis=0)
    print("  mean gap by step:", " ".join(f"{m:.2f}" for m in means))
    exceed = int(np.sum(means > threshold))
    if exceed:
        print(f"  note: {exceed} step(s) exceed {threshold} in the mean "
              "(allowed when only the trajectory average is constrained)")
    return result


# An unconstrained baseline for context.
unconstrained = primal_dual_solve(scmdp, (), config, bundle.feature_nodes)
print(f"\nunconstrained J_R = {unconstrained.objective:.2f}")

solve_and_report("fairness_per_time_step", 4.0)
solve_and_report("fairness_across_trajectory", 4.0)
