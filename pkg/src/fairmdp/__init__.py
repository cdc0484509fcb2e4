"""Fairness-constrained decision making over structural causal models."""

from .scm import (
    BINARY,
    CONTINUOUS,
    CausalGraph,
    CycleError,
    Domain,
    ExprMechanism,
    NodeDecl,
    NoiseSpec,
    NotEnumerableError,
    StructuralCausalModel,
    TableMechanism,
    bernoulli,
    categorical,
    categorical_noise,
    enumerate_noise,
    evaluate,
    evaluate_arrays,
    gaussian,
    intervene,
    parse_mechanism,
    point,
    sample,
    topological_order,
    uniform,
    validate,
)
from .dsl import EvaluationError, MechanismSyntaxError
from .effects import (
    EffectEstimate,
    Exact,
    InconsistentEvidenceError,
    MonteCarlo,
    PathSet,
    PceQuery,
    abduct,
    dual_propagate,
    enumerate_paths,
    ipw_causal_effect,
    pce,
    propensity_invariance_demo,
    recanting_witness_check,
)
from .mdp import (
    Policy,
    Scmdp,
    TrajectoryBatch,
    WelfareFn,
    binary_assignments,
    bind_policy,
    discounted_cost,
    discounted_return,
    disparity_across_trajectory,
    disparity_across_trajectory_stats,
    disparity_per_step,
    disparity_per_step_stats,
    equity_cost,
    rollout,
    welfare_apply,
)
from .principles import (
    CompiledPrinciples,
    ConstraintSpec,
    FairnessPrinciple,
    catalog,
    compile_principle,
    compile_principles,
)
from .solver import (
    LinearProgram,
    PrimalDualConfig,
    SolveResult,
    brute_force_oracle,
    build_lp,
    evaluate_policy,
    primal_dual_solve,
    simplex_solve,
)
from .envs import (
    CptTable,
    EnvBundle,
    binarize,
    build_env,
    compas_env,
    default_compas_cpts,
    fit_cpts,
    healthcare_sequential,
    healthcare_single_step,
)
from .configio import (
    ConfigError,
    ExperimentConfig,
    load_experiment,
    load_scm,
    save_scm,
    scm_from_dict,
    scm_to_dict,
)
from .harness import render_report, run_experiment, sweep

__version__ = "0.1.0"
