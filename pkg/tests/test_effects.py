"""Path-specific effects against an independent enumeration oracle."""
import itertools
import math

import numpy as np
import pytest

from fairmdp import (
    BINARY,
    CausalGraph,
    ExprMechanism,
    Exact,
    InconsistentEvidenceError,
    MonteCarlo,
    NodeDecl,
    PathSet,
    PceQuery,
    StructuralCausalModel,
    abduct,
    bernoulli,
    dual_propagate,
    enumerate_paths,
    gaussian,
    intervene,
    ipw_causal_effect,
    pce,
    point,
    propensity_invariance_demo,
    recanting_witness_check,
    sample,
)
from fairmdp.scm import noise_atoms, topological_order


# ---------------------------------------------------------------------------
# Independent oracle: scalar recursion over explicitly enumerated noise,
# written directly from the dual-world definition (natural world all-x0;
# sigma-affected world reads a parent's affected value iff the edge is active).


def oracle_noise_space(model):
    nodes = [n for n in topological_order(model.graph) if n in model.noises]
    atom_lists = [noise_atoms(model, n) for n in nodes]
    for combo in itertools.product(*atom_lists):
        assignment = {n: combo[i][0] for i, n in enumerate(nodes)}
        weight = 1.0
        for _, p in combo:
            weight *= p
        yield assignment, weight


def oracle_world(model, noise, overrides):
    """Scalar forward pass; overrides pin node values (interventions)."""
    values = {}
    for nid in topological_order(model.graph):
        if nid in overrides:
            values[nid] = float(overrides[nid])
            continue
        env = {p: values[p] for p in model.graph.parents(nid)}
        if nid in noise:
            env["u"] = noise[nid]
        values[nid] = float(model.mechanisms[nid].evaluate(env, nid))
    return values


def oracle_affected_world(model, noise, x, x0, x1, active):
    """Sigma-affected values by the parent-choice rule, computed recursively."""
    natural = oracle_world(model, noise, {x: x0})
    values = {}
    for nid in topological_order(model.graph):
        if nid == x:
            values[nid] = float(x1)
            continue
        env = {}
        for p in model.graph.parents(nid):
            env[p] = values[p] if (p, nid) in active else natural[p]
        if nid in noise:
            env["u"] = noise[nid]
        values[nid] = float(model.mechanisms[nid].evaluate(env, nid))
    return natural, values


def oracle_pce(model, query):
    active = query.sigma.active_edges(model.graph, query.treatment, query.outcome)
    total = 0.0
    norm = 0.0
    for noise, weight in oracle_noise_space(model):
        if query.observations:
            factual = oracle_world(model, noise, {})
            if any(abs(factual[k] - v) > 1e-9 for k, v in query.observations.items()):
                continue
        natural, affected = oracle_affected_world(
            model, noise, query.treatment, query.x0, query.x1, active
        )
        total += weight * (affected[query.outcome] - natural[query.outcome])
        norm += weight
    return total / norm


# ---------------------------------------------------------------------------
# Path enumeration / path sets


def test_enumerate_paths_chain(chain_model):
    assert enumerate_paths(chain_model.graph, "X", "Y") == [["X", "M", "Y"], ["X", "Y"]]


def test_enumerate_paths_disconnected():
    graph = CausalGraph([NodeDecl("A"), NodeDecl("B")], [])
    assert enumerate_paths(graph, "A", "B") == []


def test_enumerate_paths_same_node(chain_model):
    with pytest.raises(ValueError):
        enumerate_paths(chain_model.graph, "X", "X")


def test_pathset_direct_requires_edge(chain_model):
    graph = CausalGraph([NodeDecl("A"), NodeDecl("B"), NodeDecl("C")], [("A", "B"), ("B", "C")])
    with pytest.raises(ValueError, match="no direct edge"):
        PathSet.direct_only().active_edges(graph, "A", "C")


def test_pathset_explicit_edges_closure(chain_model):
    graph = chain_model.graph
    # {X->M} alone is not the full edge set of any X->Y path
    with pytest.raises(ValueError, match="closed under path membership"):
        PathSet.explicit_edges([("X", "M")]).active_edges(graph, "X", "Y")
    active = PathSet.explicit_edges([("X", "M"), ("M", "Y")]).active_edges(graph, "X", "Y")
    assert active == frozenset({("X", "M"), ("M", "Y")})


def test_pathset_mediators(chain_model):
    active = PathSet.through_mediators(["M"]).active_edges(chain_model.graph, "X", "Y")
    assert active == frozenset({("X", "M"), ("M", "Y")})


def test_recanting_witness_kite():
    graph = CausalGraph(
        [NodeDecl("X"), NodeDecl("W"), NodeDecl("M"), NodeDecl("Y")],
        [("X", "W"), ("W", "Y"), ("W", "M"), ("M", "Y")],
    )
    sigma = PathSet.explicit_edges([("X", "W"), ("W", "Y")])
    assert recanting_witness_check(graph, "X", "Y", sigma) is True
    assert recanting_witness_check(graph, "X", "Y", PathSet.all_paths()) is False


# ---------------------------------------------------------------------------
# Dual propagation


def test_dual_propagate_all_paths_equals_interventions(chain_model):
    noise = {"X": 1.0, "M": 0.5, "Y": 0.0}
    nat, aff = dual_propagate(chain_model, "X", 0.0, 1.0, PathSet.all_paths(), "Y", noise)
    from fairmdp import evaluate

    assert nat == evaluate(intervene(chain_model, "X", 0.0), noise)
    assert aff == evaluate(intervene(chain_model, "X", 1.0), noise)


def test_dual_propagate_direct_only(chain_model):
    noise = {"X": 1.0, "M": 0.5, "Y": 0.0}
    nat, aff = dual_propagate(chain_model, "X", 0.0, 1.0, PathSet.direct_only(), "Y", noise)
    assert aff["M"] == nat["M"]  # mediator keeps its natural value
    assert aff["Y"] - nat["Y"] == 2.0  # only the direct 2*X term moves


def test_dual_propagate_empty_sigma(chain_model):
    noise = {"X": 1.0, "M": 0.5, "Y": 0.0}
    sigma = PathSet.explicit_edges([])
    nat, aff = dual_propagate(chain_model, "X", 0.0, 1.0, sigma, "Y", noise)
    assert nat["Y"] == aff["Y"] and nat["M"] == aff["M"]


# ---------------------------------------------------------------------------
# PCE vs the oracle


@pytest.mark.parametrize(
    "sigma",
    [PathSet.all_paths(), PathSet.direct_only(), PathSet.through_mediators(["M"])],
)
def test_pce_exact_matches_oracle(chain_model, sigma):
    query = PceQuery("X", "Y", 0.0, 1.0, sigma=sigma, estimator=Exact())
    got = pce(chain_model, query)
    assert got.standard_error == 0.0
    assert abs(got.value - oracle_pce(chain_model, query)) < 1e-12


def test_pce_exact_with_observations_matches_oracle(chain_model):
    query = PceQuery(
        "X", "Y", 0.0, 1.0, sigma=PathSet.direct_only(),
        observations={"M": 1.0}, estimator=Exact(),
    )
    got = pce(chain_model, query)
    assert abs(got.value - oracle_pce(chain_model, query)) < 1e-12


def test_pce_monte_carlo_agrees_with_exact(chain_model):
    query_exact = PceQuery("X", "Y", 0.0, 1.0, estimator=Exact())
    query_mc = PceQuery("X", "Y", 0.0, 1.0, estimator=MonteCarlo(samples=100_000, seed=3))
    exact = pce(chain_model, query_exact)
    mc = pce(chain_model, query_mc)
    assert abs(mc.value - exact.value) <= 4 * mc.standard_error


def test_pce_disconnected_is_zero():
    graph = CausalGraph([NodeDecl("X", BINARY), NodeDecl("Y")], [])
    model = StructuralCausalModel(
        graph, {"X": ExprMechanism.parse("u"), "Y": ExprMechanism.parse("u")},
        {"X": bernoulli(0.5), "Y": bernoulli(0.5)},
    )
    assert pce(model, PceQuery("X", "Y", 0.0, 1.0, estimator=Exact())).value == 0.0


def test_linear_total_effect(linear_gaussian_model):
    query = PceQuery("X", "Y", 0.0, 1.0, estimator=MonteCarlo(samples=100_000, seed=1))
    got = pce(linear_gaussian_model, query)
    assert abs(got.value - 2.0) <= 3 * got.standard_error


def test_linear_decomposition(linear_mediation_model):
    # total = 2 + 3*5 = 17; direct = 2; mediated = 15
    total = pce(linear_mediation_model, PceQuery("X", "Y", 0.0, 1.0, estimator=Exact())).value
    direct = pce(
        linear_mediation_model,
        PceQuery("X", "Y", 0.0, 1.0, sigma=PathSet.direct_only(), estimator=Exact()),
    ).value
    mediated = pce(
        linear_mediation_model,
        PceQuery("X", "Y", 0.0, 1.0, sigma=PathSet.through_mediators(["M"]), estimator=Exact()),
    ).value
    assert abs(total - 17.0) < 1e-12
    assert abs(direct - 2.0) < 1e-12
    assert abs(mediated - 15.0) < 1e-12
    assert abs(direct + mediated - total) < 1e-9


def test_total_effect_consistency(chain_model):
    exact = pce(chain_model, PceQuery("X", "Y", 0.0, 1.0, estimator=Exact())).value
    n = 200_000
    y1 = sample(intervene(chain_model, "X", 1.0), n, seed=11)["Y"].mean()
    y0 = sample(intervene(chain_model, "X", 0.0), n, seed=12)["Y"].mean()
    assert abs((y1 - y0) - exact) < 0.02


def test_coupling_reduces_variance(linear_gaussian_model):
    # coupled estimator cancels the shared noise entirely on the linear model
    mc = pce(
        linear_gaussian_model,
        PceQuery("X", "Y", 0.0, 1.0, estimator=MonteCarlo(samples=10_000, seed=5)),
    )
    n = 10_000
    y1 = sample(intervene(linear_gaussian_model, "X", 1.0), n, seed=6)["Y"]
    y0 = sample(intervene(linear_gaussian_model, "X", 0.0), n, seed=7)["Y"]
    uncoupled_se = float(np.std(y1 - y0, ddof=1) / math.sqrt(n))
    assert mc.standard_error <= uncoupled_se


def test_query_validation(chain_model):
    with pytest.raises(ValueError):
        PceQuery("X", "X", 0.0, 1.0).check(chain_model)
    with pytest.raises(ValueError, match="unknown node"):
        PceQuery("X", "Z", 0.0, 1.0).check(chain_model)
    with pytest.raises(ValueError, match="domain"):
        PceQuery("X", "Y", 0.0, 0.5).check(chain_model)
    with pytest.raises(ValueError, match="exclude treatment"):
        PceQuery("X", "Y", 0.0, 1.0, observations={"X": 1.0}).check(chain_model)
    with pytest.raises(ValueError, match="transform"):
        PceQuery("X", "Y", 0.0, 1.0, transform="square").check(chain_model)


# ---------------------------------------------------------------------------
# Abduction


def test_abduct_no_observations_is_prior(chain_model):
    posterior = abduct(chain_model, {})
    assert abs(sum(w for _, w in posterior) - 1.0) < 1e-12


def test_abduct_point_noise_single_assignment():
    graph = CausalGraph([NodeDecl("A")], [])
    model = StructuralCausalModel(graph, {"A": ExprMechanism.parse("u")}, {"A": point(2.0)})
    posterior = abduct(model, {"A": 2.0})
    assert len(posterior) == 1 and posterior[0][1] == 1.0


def test_abduct_binary_hand_bayes():
    graph = CausalGraph([NodeDecl("A", BINARY)], [])
    model = StructuralCausalModel(
        graph, {"A": ExprMechanism.parse("u")}, {"A": bernoulli(0.25)}
    )
    posterior = abduct(model, {"A": 1.0})
    assert len(posterior) == 1
    assert posterior[0][0]["A"] == 1.0 and abs(posterior[0][1] - 1.0) < 1e-12


def test_abduct_inconsistent_evidence(chain_model):
    with pytest.raises(InconsistentEvidenceError):
        abduct(chain_model, {"Y": 99.0})


def test_mc_rejects_continuous_observations():
    graph = CausalGraph(
        [NodeDecl("X", BINARY), NodeDecl("Y"), NodeDecl("Z")],
        [("X", "Y"), ("X", "Z")],
    )
    model = StructuralCausalModel(
        graph,
        {"X": ExprMechanism.parse("u"), "Y": ExprMechanism.parse("2*X + u"),
         "Z": ExprMechanism.parse("X + u")},
        {"X": bernoulli(0.5), "Y": gaussian(0, 1), "Z": gaussian(0, 1)},
    )
    query = PceQuery(
        "X", "Y", 0.0, 1.0, observations={"Z": 1.0},
        estimator=MonteCarlo(samples=100, seed=0),
    )
    with pytest.raises(ValueError, match="continuous"):
        pce(model, query)


# ---------------------------------------------------------------------------
# IPW and propensity invariance


def test_ipw_hand_example():
    data = {"G": np.array([1.0, 1.0, 0.0, 0.0]), "D": np.array([1.0, 1.0, 0.0, 0.0])}
    got = ipw_causal_effect(data, "G", "D", 0.5)
    assert got.value == 1.0


def test_ipw_constant_zero():
    data = {"G": np.array([1.0, 0.0]), "D": np.zeros(2)}
    assert ipw_causal_effect(data, "G", "D", 0.5).value == 0.0


def test_ipw_validation():
    data = {"G": np.array([0.5]), "D": np.array([1.0])}
    with pytest.raises(ValueError, match="not binary"):
        ipw_causal_effect(data, "G", "D", 0.5)
    with pytest.raises(ValueError, match="propensity"):
        ipw_causal_effect({"G": np.ones(1), "D": np.ones(1)}, "G", "D", 1.0)


def test_ipw_matches_exact_effect(chain_model):
    exact = pce(chain_model, PceQuery("X", "Y", 0.0, 1.0, estimator=Exact())).value
    data = sample(chain_model, 200_000, seed=13)
    got = ipw_causal_effect(data, "X", "Y", 0.4)
    assert abs(got.value - exact) <= 3 * got.standard_error


def test_propensity_invariance(chain_model):
    values = propensity_invariance_demo(chain_model, "X", "Y", [0.2, 0.5, 0.8])
    assert len(values) == 3
    assert max(values) - min(values) < 1e-9


def test_propensity_invariance_no_descendants():
    graph = CausalGraph([NodeDecl("G", BINARY), NodeDecl("D")], [])
    model = StructuralCausalModel(
        graph, {"G": ExprMechanism.parse("u"), "D": ExprMechanism.parse("u")},
        {"G": bernoulli(0.5), "D": bernoulli(0.5)},
    )
    assert propensity_invariance_demo(model, "G", "D", [0.2, 0.8]) == [0.0, 0.0]
