"""
Fairness-constrained policies via linear programming
====================================================

For single-step decision problems with group-level fairness constraints, the
objective and every constraint are affine in the tabular policy probabilities
pi(d | x).  The solver recovers those affine forms exactly (by probing
deterministic policies against full noise enumeration) and hands the result to
a simplex solver, so the optimum is exact and duals certify which constraints
bind.

This demo uses the healthcare subsidy environment in the regime where
subsidizing pays off, imposes a group-outcome constraint on gender, and sweeps
the threshold to trace the fairness/welfare trade-off curve.
"""
import numpy as np

from fairmdp import (
    FairnessPrinciple,
    build_lp,
    compile_principles,
    healthcare_single_step,
    simplex_solve,
)
from fairmdp.configio import ExperimentConfig, SolverSection
from fairmdp.harness import sweep

# ---------------------------------------------------------------------------
# With benefit_subsidy = (8, 14) the subsidy is worth more than it costs for
# women (the expense term drops the e1*(1-G) component), so the unconstrained
# optimum subsidizes exactly when G = 1 -- a maximally unfair policy.

bundle = healthcare_single_step({"benefit_subsidy": (8.0, 14.0)})
scmdp = bundle.scmdp

unconstrained = simplex_solve(build_lp(scmdp, [], bundle.feature_nodes))
print(f"unconstrained J_R = {unconstrained.objective:.4f}")
for key, probs in sorted(unconstrained.policy.prob_table().items()):
    print(f"  pi(subsidize | G,E,H = {key}) = {probs[1]:.2f}")

# ---------------------------------------------------------------------------
# Principles compile to constraint specs: group outcome fairness on G bounds
# |E[I under do(G=1)] - E[I under do(G=0)]| by a threshold d.

principle = FairnessPrinciple(kind="group_outcome", sensitive=("G",), threshold=2.0)
compiled = compile_principles([principle], scmdp)
result = simplex_solve(build_lp(scmdp, compiled.constraints, bundle.feature_nodes))
spec = compiled.constraints[0]
print(f"\nconstrained (d = {spec.threshold}):")
print(f"  J_R = {result.objective:.4f}, feasible = {result.feasible}")
print(f"  constraint value = {result.constraint_values[0]:.6f} "
      f"(dual = {result.duals[0]:.4f})")

# ---------------------------------------------------------------------------
# Sweeping the threshold shows the standard constrained-optimization shape:
# the objective is non-decreasing in d, the constraint binds exactly at d while
# it has bite, and the curve plateaus at the unconstrained optimum once d
# exceeds the unconstrained policy's own cost.

config = ExperimentConfig(
    env_name="healthcare-single",
    env_params={"benefit_subsidy": (8.0, 14.0)},
    seed=0,
    principles=(principle,),
    solver=SolverSection(method="lp", episodes=1000),
)
report = sweep(config, thresholds=(0.5, 1.0, 2.0, 4.0, 8.0, 12.0))
print(f"\nunconstrained cost = {report['unconstrained_costs'][0]:.4f}")
print(f"{'d':>6} {'J_R':>9} {'value':>9}  binding  saturated")
for row in report["rows"]:
    c = row["constraints"][0]
    print(f"{row['threshold']:>6.2f} {row['objective']:>9.4f} {c['value']:>9.4f}"
          f"  {str(c['binding']):>7}  {row['saturated']}")
print(f"monotonic: {report['monotonic']}, plateau: {report['plateau']}")
