"""LP route, primal-dual route, and the brute-force verification oracle."""
import numpy as np
import pytest

from fairmdp import (
    BINARY,
    CausalGraph,
    ExprMechanism,
    FairnessPrinciple,
    NodeDecl,
    Policy,
    PrimalDualConfig,
    Scmdp,
    StructuralCausalModel,
    WelfareFn,
    bernoulli,
    binary_assignments,
    brute_force_oracle,
    build_lp,
    compile_principles,
    discounted_return,
    evaluate_policy,
    healthcare_single_step,
    point,
    primal_dual_solve,
    rollout,
    simplex_solve,
)
from fairmdp.solver import exact_objective, feature_assignments


def small_instance(r_coefs=(1.0, 2.0, -0.5), p_s=0.5):
    """One binary feature S, binary decision D, reward a + b*D + c*S*D."""
    a, b, c = r_coefs
    graph = CausalGraph(
        [NodeDecl("S", BINARY), NodeDecl("D", BINARY), NodeDecl("R")],
        [("S", "D"), ("S", "R"), ("D", "R")],
    )
    model = StructuralCausalModel(
        graph,
        {"S": ExprMechanism.parse("u"),
         "R": ExprMechanism.parse(f"{a} + {b}*D + {c}*S*D".replace("*S*D", "*S*D"))},
        {"S": bernoulli(p_s), "R": point(0.0)},
    )
    return Scmdp(
        step_model=model, state_nodes=("S",), decision_nodes=("D",),
        stakeholder_reward_nodes=("R",), shared_reward_node=None,
        welfare=WelfareFn.SUM, horizon=1, discount=1.0,
    )


def group_procedural(scmdp, sensitive, threshold):
    p = FairnessPrinciple(kind="group_procedural", sensitive=(sensitive,), threshold=threshold)
    return compile_principles([p], scmdp).constraints


# ---------------------------------------------------------------------------
# Exact objective and LP structure


def test_feature_assignments_healthcare():
    bundle = healthcare_single_step()
    keys = feature_assignments(bundle.scmdp.step_model, bundle.feature_nodes)
    assert len(keys) == 8
    assert keys[0] == (0.0, 0.0, 0.0) and keys[-1] == (1.0, 1.0, 1.0)


def test_exact_objective_deny_all_healthcare():
    bundle = healthcare_single_step()
    pol = Policy.from_probs(
        bundle.feature_nodes, ((0.0,), (1.0,)),
        {key: [1.0, 0.0] for key in binary_assignments(3)},
    )
    # deny-all: E[I] = 2*E[1-E] + 4*E[1-H] = 1 + 2; Ra = 0
    assert abs(exact_objective(bundle.scmdp, pol) - 3.0) < 1e-12


def test_lp_objective_is_affine_in_policy():
    scmdp = small_instance()
    lp = build_lp(scmdp, [])
    rng = np.random.default_rng(4)
    for _ in range(10):
        probs = rng.random((lp.n_states, lp.n_actions))
        probs /= probs.sum(axis=1, keepdims=True)
        pol = Policy.from_probs(
            lp.feature_nodes, lp.actions,
            {key: probs[i] for i, key in enumerate(lp.feature_keys)},
        )
        assert abs(lp.objective.value(probs) - exact_objective(scmdp, pol)) < 1e-12


def test_lp_objective_matches_rollout():
    scmdp = small_instance()
    pol = Policy.from_probs(("S",), ((0.0,), (1.0,)), {(0.0,): [0.3, 0.7], (1.0,): [0.8, 0.2]})
    exact = exact_objective(scmdp, pol)
    batch = rollout(scmdp, pol, 50_000, seed=21)
    mean, se = discounted_return(batch, 1.0)
    assert abs(mean - exact) <= 4 * se


def test_build_lp_rejects_horizon_and_individual_constraints():
    scmdp = small_instance()
    bad = Scmdp(
        step_model=scmdp.step_model, state_nodes=("S",), decision_nodes=("D",),
        stakeholder_reward_nodes=("R",), shared_reward_node=None,
        welfare=WelfareFn.SUM, horizon=2, discount=1.0,
    )
    with pytest.raises(ValueError, match="horizon 1"):
        build_lp(bad, [])
    hc = healthcare_single_step()
    principle = FairnessPrinciple(kind="individual_procedural", sensitive=("G",), threshold=0.0)
    compiled = compile_principles([principle], hc.scmdp)
    with pytest.raises(ValueError, match="not affine; use primal_dual"):
        build_lp(hc.scmdp, compiled.constraints, feature_nodes=hc.feature_nodes)
    temporal = FairnessPrinciple(kind="fairness_per_time_step", threshold=1.0)
    with pytest.raises(ValueError, match="use primal_dual"):
        build_lp(scmdp, compile_principles([temporal], scmdp).constraints)


# ---------------------------------------------------------------------------
# simplex_solve


def test_simplex_unconstrained_picks_best_action():
    scmdp = small_instance(r_coefs=(1.0, 2.0, -3.0))
    # D=1 gains 2 at S=0 and -1 at S=1
    result = simplex_solve(build_lp(scmdp, []))
    assert result.feasible
    table = result.policy.prob_table()
    assert np.allclose(table[(0.0,)], [0.0, 1.0])
    assert np.allclose(table[(1.0,)], [1.0, 0.0])
    assert abs(result.objective - (0.5 * 3.0 + 0.5 * 1.0)) < 1e-9


def test_simplex_constraint_binds_with_positive_dual():
    # unconstrained optimum treats S=0 only -> |E[D1] - E[D0]| = 1; cap it at 0.4
    scmdp = small_instance(r_coefs=(0.0, 2.0, -3.0))
    constraints = group_procedural(scmdp, "S", 0.4)
    result = simplex_solve(build_lp(scmdp, constraints))
    assert result.feasible
    assert abs(result.constraint_values[0] - 0.4) < 1e-9  # binding
    assert result.duals[0] > 0.0
    unconstrained = simplex_solve(build_lp(scmdp, []))
    assert result.objective < unconstrained.objective


def test_simplex_slack_constraint_zero_dual():
    scmdp = small_instance(r_coefs=(0.0, 2.0, -3.0))
    constraints = group_procedural(scmdp, "S", 5.0)
    result = simplex_solve(build_lp(scmdp, constraints))
    assert result.feasible
    assert result.duals[0] == 0.0


def test_simplex_infeasible_certificate():
    # luck egalitarianism with a signed effect that cannot go below -1
    scmdp = small_instance(r_coefs=(0.0, 1.0, 0.0))
    p = FairnessPrinciple(
        kind="luck_egalitarianism", sensitive=("S",), outcome="D",
        threshold=-2.0, values=(0.0, 1.0),
    )
    constraints = compile_principles([p], scmdp).constraints
    result = simplex_solve(build_lp(scmdp, constraints))
    assert not result.feasible
    assert any("unsatisfiable" in n for n in result.notes)
    # the certificate minimizes the violation: best signed value is -1
    assert abs(result.constraint_values[0] - (-1.0)) < 1e-9


# ---------------------------------------------------------------------------
# Brute-force oracle


def test_oracle_matches_simplex_unconstrained():
    scmdp = small_instance(r_coefs=(1.0, 2.0, -3.0))
    lp_result = simplex_solve(build_lp(scmdp, []))
    oracle = brute_force_oracle(scmdp, [], resolution=0.01)
    assert abs(lp_result.objective - oracle.objective) < 1e-9


def test_oracle_matches_simplex_constrained():
    scmdp = small_instance(r_coefs=(0.0, 2.0, -3.0))
    constraints = group_procedural(scmdp, "S", 0.4)
    lp_result = simplex_solve(build_lp(scmdp, constraints))
    oracle = brute_force_oracle(scmdp, constraints, resolution=0.01)
    assert oracle.feasible
    assert abs(lp_result.objective - oracle.objective) < 0.02
    assert oracle.constraint_values[0] <= 0.4 + 1e-9


def test_oracle_rejects_large_and_individual():
    bundle = healthcare_single_step()
    with pytest.raises(ValueError, match="instance too large"):
        brute_force_oracle(bundle.scmdp, [], resolution=0.05,
                           feature_nodes=bundle.feature_nodes)
    principle = FairnessPrinciple(kind="individual_procedural", sensitive=("G",), threshold=0.0)
    compiled = compile_principles([principle], bundle.scmdp)
    with pytest.raises(ValueError, match="group-level"):
        brute_force_oracle(bundle.scmdp, compiled.constraints, resolution=1.0,
                           feature_nodes=bundle.feature_nodes)


def test_oracle_detects_infeasible():
    scmdp = small_instance(r_coefs=(0.0, 1.0, 0.0))
    p = FairnessPrinciple(
        kind="luck_egalitarianism", sensitive=("S",), outcome="D",
        threshold=-2.0, values=(0.0, 1.0),
    )
    constraints = compile_principles([p], scmdp).constraints
    oracle = brute_force_oracle(scmdp, constraints, resolution=0.05)
    assert not oracle.feasible


# ---------------------------------------------------------------------------
# Primal-dual


def test_primal_dual_unconstrained_near_lp():
    scmdp = small_instance(r_coefs=(1.0, 2.0, -3.0))
    lp_result = simplex_solve(build_lp(scmdp, []))
    config = PrimalDualConfig(iterations=300, policy_lr=0.3, episodes_per_iter=256, seed=0)
    result = primal_dual_solve(scmdp, [], config)
    assert exact_objective(scmdp, result.policy) >= lp_result.objective - 0.02
    assert result.feasible


def test_primal_dual_constraint_satisfied():
    scmdp = small_instance(r_coefs=(0.0, 2.0, -3.0))
    constraints = group_procedural(scmdp, "S", 0.4)
    config = PrimalDualConfig(iterations=400, policy_lr=0.3, dual_lr=0.2,
                              episodes_per_iter=256, seed=1)
    result = primal_dual_solve(scmdp, constraints, config)
    assert result.feasible
    # causal constraints are evaluated exactly; feasibility allows the
    # configured tolerance around the threshold
    assert result.constraint_values[0] <= 0.4 + config.tolerance
    assert all(d >= 0.0 for d in result.duals)
    lp_result = simplex_solve(build_lp(scmdp, constraints))
    assert exact_objective(scmdp, result.policy) >= lp_result.objective - 0.05


def test_primal_dual_deterministic_given_seed():
    scmdp = small_instance()
    config = PrimalDualConfig(iterations=50, episodes_per_iter=64, seed=7)
    a = primal_dual_solve(scmdp, [], config)
    b = primal_dual_solve(scmdp, [], config)
    assert a.objective == b.objective
    for key in a.policy.logits:
        assert np.array_equal(a.policy.logits[key], b.policy.logits[key])


# ---------------------------------------------------------------------------
# evaluate_policy


def test_evaluate_policy_deterministic_and_exact_causal():
    scmdp = small_instance(r_coefs=(0.0, 2.0, -3.0))
    constraints = group_procedural(scmdp, "S", 0.4)
    pol = Policy.from_probs(("S",), ((0.0,), (1.0,)), {(0.0,): [0.2, 0.8], (1.0,): [0.6, 0.4]})
    (m1, s1), c1, _ = evaluate_policy(scmdp, pol, constraints, episodes=2000, seed=3)
    (m2, s2), c2, _ = evaluate_policy(scmdp, pol, constraints, episodes=2000, seed=3)
    assert (m1, s1) == (m2, s2) and c1 == c2
    # |E[D|do(S=1)] - E[D|do(S=0)]| = |0.4 - 0.8| with zero SE (exact route)
    value, se = c1[0]
    assert abs(value - 0.4) < 1e-12 and se == 0.0
