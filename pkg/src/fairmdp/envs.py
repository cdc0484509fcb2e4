"""Bundled case-study environments and CPT fitting.

Three environments ship with the package:

* ``healthcare-single`` — one-step subsidy decision for a single stakeholder
  (gender G, employment E, health H; benefit I; expense Ex shared).
* ``healthcare-seq`` — horizon-10 subsidy decisions for two stakeholders with
  continuous health dynamics and per-step benefit-disparity statistics.
* ``compas`` — one-step detention decision (Score) over binary covariates
  (Race, Gender, Age, Priors) with a recidivism node V fitted from CPTs.

All priors and dynamics constants are configurable via the ``params`` mapping;
the defaults are documented here because the underlying scenario descriptions
leave them open.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .mdp import Scmdp, WelfareFn
from .scm import (
    BINARY,
    CONTINUOUS,
    CausalGraph,
    ExprMechanism,
    NodeDecl,
    NoiseSpec,
    StructuralCausalModel,
    TableMechanism,
    bernoulli,
    gaussian,
    point,
    uniform,
)

ENV_NAMES = ("healthcare-single", "healthcare-seq", "compas")


@dataclass(frozen=True)
class EnvBundle:
    """A built environment plus the metadata the harness needs."""

    name: str
    scmdp: Scmdp
    feature_nodes: tuple[str, ...]
    params: dict
    notes: tuple[str, ...] = ()


def _check_params(params: Mapping, allowed: Sequence[str], env: str) -> dict:
    merged = dict(params)
    for key in merged:
        if key not in allowed:
            raise ValueError(
                f"unknown parameter {key!r} for env {env!r}; allowed: {', '.join(allowed)}"
            )
    return merged


# ---------------------------------------------------------------------------
# Healthcare, single step


_HC_DEFAULTS = {
    "p_gender": 0.5,
    "p_employment": 0.5,
    # P(H=1 | G=g); equal entries make health independent of gender
    "p_health": (0.5, 0.5),
    "benefit_subsidy": (3.0, 5.0),  # I = b1*(1-E) + b2*(1-H) when D=1
    "benefit_deny": (2.0, 4.0),  # I = c1*(1-E) + c2*(1-H) when D=0
    "expense_weights": (5.0, 4.0, 8.0),  # Ex = e1*(1-G) + e2*(1-E) + e3*(1-H) when D=1
    "discount": 1.0,
}


def healthcare_single_step(params: Mapping | None = None) -> EnvBundle:
    p = {**_HC_DEFAULTS, **_check_params(params or {}, list(_HC_DEFAULTS), "healthcare-single")}
    ph = p["p_health"]
    if np.isscalar(ph):
        ph = (float(ph), float(ph))
    b1, b2 = p["benefit_subsidy"]
    c1, c2 = p["benefit_deny"]
    e1, e2, e3 = p["expense_weights"]
    nodes = [
        NodeDecl("G", BINARY),
        NodeDecl("E", BINARY),
        NodeDecl("H", BINARY),
        NodeDecl("D", BINARY),
        NodeDecl("I", CONTINUOUS),
        NodeDecl("Ex", CONTINUOUS),
        NodeDecl("negEx", CONTINUOUS),
    ]
    edges = [
        ("G", "H"),
        ("G", "D"), ("E", "D"), ("H", "D"),
        ("E", "I"), ("H", "I"), ("D", "I"),
        ("G", "Ex"), ("E", "Ex"), ("H", "Ex"), ("D", "Ex"),
        ("Ex", "negEx"),
    ]
    mechanisms = {
        "G": ExprMechanism.parse("u"),
        "E": ExprMechanism.parse("u"),
        "H": TableMechanism.from_dict(
            ("G",), {(0.0,): (1 - ph[0], ph[0]), (1.0,): (1 - ph[1], ph[1])}
        ),
        "I": ExprMechanism.parse(
            f"case D == 1: {b1}*(1-E) + {b2}*(1-H) default: {c1}*(1-E) + {c2}*(1-H)"
        ),
        "Ex": ExprMechanism.parse(
            f"case D == 1: {e1}*(1-G) + {e2}*(1-E) + {e3}*(1-H) default: 0"
        ),
        "negEx": ExprMechanism.parse("0 - Ex"),
    }
    noises = {
        "G": bernoulli(p["p_gender"]),
        "E": bernoulli(p["p_employment"]),
        "H": uniform(0.0, 1.0),
        # deterministic nodes carry degenerate noise to satisfy the
        # one-noise-per-node invariant
        "I": point(0.0),
        "Ex": point(0.0),
        "negEx": point(0.0),
    }
    model = StructuralCausalModel(CausalGraph(nodes, edges), mechanisms, noises)
    scmdp = Scmdp(
        step_model=model,
        state_nodes=("G", "E", "H"),
        decision_nodes=("D",),
        stakeholder_reward_nodes=("I",),
        shared_reward_node="negEx",
        welfare=WelfareFn.SUM,
        horizon=1,
        discount=float(p["discount"]),
        next_state={},
    )
    notes = ()
    if tuple(p["benefit_subsidy"]) == (3.0, 5.0):
        notes = (
            "default benefit/expense weights make the subsidy weakly "
            "reward-decreasing for every profile (the unconstrained optimum "
            "denies everyone); override benefit_subsidy to study regimes where "
            "subsidizing pays, e.g. (8, 14)",
        )
    return EnvBundle("healthcare-single", scmdp, ("G", "E", "H"), dict(p, p_health=tuple(ph)), notes)


# ---------------------------------------------------------------------------
# Healthcare, sequential (two stakeholders)


_HCSEQ_DEFAULTS = {
    "initial_health": (0.3, 0.7),
    "employment": (0.0, 1.0),
    "gender": (1.0, 1.0),
    "benefit_subsidy": (3.0, 5.0),
    "benefit_deny": (2.0, 4.0),
    "expense_weights": (5.0, 4.0, 8.0),
    "expense_scale": 0.1,  # shared reward = -scale * (Ex1 + Ex2)
    "health_gain": 0.2,  # health increase per subsidized step
    "health_decay": 0.05,  # baseline health drift per step
    "health_noise_sigma": 0.02,
    "health_bucket_threshold": 0.5,  # policy observes 1(H_i >= threshold)
    "horizon": 10,
    "discount": 0.99,
}


def healthcare_sequential(params: Mapping | None = None) -> EnvBundle:
    p = {**_HCSEQ_DEFAULTS, **_check_params(params or {}, list(_HCSEQ_DEFAULTS), "healthcare-seq")}
    b1, b2 = p["benefit_subsidy"]
    c1, c2 = p["benefit_deny"]
    e1, e2, e3 = p["expense_weights"]
    thr = float(p["health_bucket_threshold"])
    nodes: list[NodeDecl] = []
    edges: list[tuple[str, str]] = []
    mechanisms: dict[str, ExprMechanism] = {}
    noises: dict[str, NoiseSpec] = {}
    for i in (1, 2):
        e_i = float(p["employment"][i - 1])
        g_i = float(p["gender"][i - 1])
        h, hb, d, ben, ex, hn = f"H{i}", f"HB{i}", f"D{i}", f"I{i}", f"Ex{i}", f"Hn{i}"
        nodes += [
            NodeDecl(h, CONTINUOUS),
            NodeDecl(hb, BINARY),
            NodeDecl(d, BINARY),
            NodeDecl(ben, CONTINUOUS),
            NodeDecl(ex, CONTINUOUS),
            NodeDecl(hn, CONTINUOUS),
        ]
        edges += [
            (h, hb), (h, ben), (h, ex), (h, hn),
            (d, ben), (d, ex), (d, hn),
            (ex, "Ra"),
        ]
        mechanisms[h] = ExprMechanism.parse("u")
        noises[h] = point(float(p["initial_health"][i - 1]))
        mechanisms[hb] = ExprMechanism.parse(f"case {h} >= {thr}: 1 default: 0")
        noises[hb] = point(0.0)
        noises[ben] = point(0.0)
        noises[ex] = point(0.0)
        mechanisms[ben] = ExprMechanism.parse(
            f"case {d} == 1: {b1 * (1 - e_i)} + {b2}*(1-{h}) "
            f"default: {c1 * (1 - e_i)} + {c2}*(1-{h})"
        )
        mechanisms[ex] = ExprMechanism.parse(
            f"case {d} == 1: {e1 * (1 - g_i) + e2 * (1 - e_i)} + {e3}*(1-{h}) default: 0"
        )
        mechanisms[hn] = ExprMechanism.parse(
            f"clip({h} + {p['health_gain']}*{d} - {p['health_decay']} + u, 0, 1)"
        )
        noises[hn] = gaussian(0.0, float(p["health_noise_sigma"]))
    nodes.append(NodeDecl("Ra", CONTINUOUS))
    # both decisions observe both stakeholders' health buckets
    for d in ("D1", "D2"):
        edges += [("HB1", d), ("HB2", d)]
    mechanisms["Ra"] = ExprMechanism.parse(f"0 - {p['expense_scale']}*(Ex1 + Ex2)")
    noises["Ra"] = point(0.0)
    model = StructuralCausalModel(CausalGraph(nodes, edges), mechanisms, noises)
    scmdp = Scmdp(
        step_model=model,
        state_nodes=("H1", "H2"),
        decision_nodes=("D1", "D2"),
        stakeholder_reward_nodes=("I1", "I2"),
        shared_reward_node="Ra",
        welfare=WelfareFn.SUM,
        horizon=int(p["horizon"]),
        discount=float(p["discount"]),
        next_state={"H1": "Hn1", "H2": "Hn2"},
    )
    return EnvBundle("healthcare-seq", scmdp, ("HB1", "HB2"), dict(p))


# ---------------------------------------------------------------------------
# COMPAS-style detention environment


@dataclass(frozen=True)
class CptTable:
    """Conditional probability tables for binary nodes.

    ``entries`` maps node id -> (parent ids, {parent assignment -> P(node=1)}).
    """

    entries: Mapping[str, tuple[tuple[str, ...], dict[tuple[float, ...], float]]]

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))
        for nid, (parents, rows) in self.entries.items():
            expected = 2 ** len(parents)
            if len(rows) != expected:
                raise ValueError(
                    f"CPT for {nid!r} has {len(rows)} rows, expected {expected} "
                    f"(one per parent configuration)"
                )
            for key, p1 in rows.items():
                if len(key) != len(parents):
                    raise ValueError(f"CPT for {nid!r}: row key {key} has wrong arity")
                if not 0.0 <= p1 <= 1.0 + 1e-9:
                    raise ValueError(f"CPT for {nid!r}: P={p1} outside [0, 1]")

    def mechanism(self, nid: str) -> TableMechanism:
        parents, rows = self.entries[nid]
        return TableMechanism.from_dict(
            parents, {key: (1.0 - p1, p1) for key, p1 in rows.items()}
        )

    def to_dict(self) -> dict:
        return {
            nid: {
                "parents": list(parents),
                "rows": [
                    {"given": [float(v) for v in key], "p1": float(p1)}
                    for key, p1 in sorted(rows.items())
                ],
            }
            for nid, (parents, rows) in sorted(self.entries.items())
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CptTable":
        entries = {}
        for nid, raw in data.items():
            parents = tuple(str(q) for q in raw["parents"])
            rows = {
                tuple(float(v) for v in row["given"]): float(row["p1"])
                for row in raw["rows"]
            }
            entries[str(nid)] = (parents, rows)
        return cls(entries)


def default_compas_cpts() -> CptTable:
    """Synthetic defaults: recidivism risk rises with Race=1, Priors=1, Age=1."""

    def table(parents: tuple[str, ...], fn) -> tuple[tuple[str, ...], dict]:
        keys = [()] if not parents else [
            tuple(float(b) for b in bits)
            for bits in np.ndindex(*(2,) * len(parents))
        ]
        return parents, {key: fn(*key) for key in keys}

    return CptTable(
        {
            "Race": table((), lambda: 0.5),
            "Gender": table((), lambda: 0.5),
            "Age": table((), lambda: 0.4),
            "Priors": table(("Race", "Age"), lambda race, age: 0.2 + 0.3 * race + 0.1 * age),
            "V": table(
                ("Race", "Priors", "Age"),
                lambda race, priors, age: 0.15 + 0.35 * race + 0.25 * priors + 0.05 * age,
            ),
        }
    )


_COMPAS_DEFAULTS = {"theta": 1.0, "discount": 1.0}

COMPAS_GRAPH = CausalGraph(
    [
        NodeDecl("Race", BINARY),
        NodeDecl("Gender", BINARY),
        NodeDecl("Age", BINARY),
        NodeDecl("Priors", BINARY),
        NodeDecl("Score", BINARY),
        NodeDecl("V", BINARY),
        NodeDecl("RW", CONTINUOUS),
    ],
    [
        ("Race", "Priors"), ("Age", "Priors"),
        ("Race", "Score"), ("Gender", "Score"), ("Age", "Score"), ("Priors", "Score"),
        ("Race", "V"), ("Priors", "V"), ("Age", "V"),
        ("Score", "RW"), ("V", "RW"),
    ],
)


def compas_env(params: Mapping | None = None, cpts: CptTable | None = None) -> EnvBundle:
    p = {**_COMPAS_DEFAULTS, **_check_params(params or {}, list(_COMPAS_DEFAULTS), "compas")}
    cpts = cpts or default_compas_cpts()
    theta = float(p["theta"])
    if theta <= 0:
        raise ValueError("theta must be positive")
    required = ("Race", "Gender", "Age", "Priors", "V")
    missing = [nid for nid in required if nid not in cpts.entries]
    if missing:
        raise ValueError(f"incomplete CPT set: missing {', '.join(missing)}")
    mechanisms: dict = {}
    noises: dict[str, NoiseSpec] = {}
    for root in ("Race", "Gender", "Age"):
        parents, rows = cpts.entries[root]
        if parents:
            raise ValueError(f"{root!r} must be a root node in the CPT set")
        mechanisms[root] = ExprMechanism.parse("u")
        noises[root] = bernoulli(rows[()])
    for nid in ("Priors", "V"):
        parents, _ = cpts.entries[nid]
        if parents != COMPAS_GRAPH.parents(nid):
            raise ValueError(
                f"CPT parents for {nid!r} must be {COMPAS_GRAPH.parents(nid)}, got {parents}"
            )
        mechanisms[nid] = cpts.mechanism(nid)
        noises[nid] = uniform(0.0, 1.0)
    mechanisms["RW"] = ExprMechanism.parse(
        f"case Score == 1: 0 - 1 case V == 1: 0 - {theta} default: 1"
    )
    noises["RW"] = point(0.0)
    model = StructuralCausalModel(COMPAS_GRAPH, mechanisms, noises)
    scmdp = Scmdp(
        step_model=model,
        state_nodes=("Race", "Gender", "Age", "Priors"),
        decision_nodes=("Score",),
        stakeholder_reward_nodes=("RW",),
        shared_reward_node=None,
        welfare=WelfareFn.SUM,
        horizon=1,
        discount=float(p["discount"]),
        next_state={},
    )
    return EnvBundle("compas", scmdp, ("Race", "Gender", "Age", "Priors"), dict(p))


# ---------------------------------------------------------------------------
# CPT fitting


def binarize(column: np.ndarray) -> np.ndarray:
    """Median split: 1 where the value strictly exceeds the median, else 0."""
    arr = np.asarray(column, dtype=float)
    return (arr > np.median(arr)).astype(float)


def read_csv_dataset(path: str) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError(f"dataset {path!r} is empty")
    return {
        name: np.array([float(row[name]) for row in rows])
        for name in rows[0]
    }


def fit_cpts(dataset: Mapping[str, np.ndarray], graph: CausalGraph) -> CptTable:
    """Laplace-smoothed CPTs for every binary node of the graph present in the
    dataset: P(node=1 | parents) = (count_1 + 1) / (count + 2); parent
    configurations absent from the data get the uniform 0.5 row."""
    data = {name: np.asarray(col, dtype=float) for name, col in dataset.items()}
    for name, col in data.items():
        if not set(np.unique(col)) <= {0.0, 1.0}:
            raise ValueError(f"column {name!r} is not binary; binarize it first")
    entries = {}
    for decl in graph.nodes:
        nid = decl.id
        if nid not in data:
            continue
        parents = graph.parents(nid)
        for q in parents:
            if q not in data:
                raise ValueError(f"missing column {q!r} (parent of {nid!r})")
        rows = {}
        keys = [()] if not parents else [
            tuple(float(b) for b in bits) for bits in np.ndindex(*(2,) * len(parents))
        ]
        for key in keys:
            mask = np.ones(len(data[nid]), dtype=bool)
            for q, v in zip(parents, key):
                mask &= data[q] == v
            n = int(mask.sum())
            ones = int(data[nid][mask].sum())
            rows[key] = (ones + 1.0) / (n + 2.0)
        entries[nid] = (parents, rows)
    return CptTable(entries)


# ---------------------------------------------------------------------------
# Dispatcher


def build_env(name: str, params: Mapping | None = None) -> EnvBundle:
    params = dict(params or {})
    if name == "healthcare-single":
        return healthcare_single_step(params)
    if name == "healthcare-seq":
        return healthcare_sequential(params)
    if name == "compas":
        cpts = params.pop("cpts", None)
        if isinstance(cpts, Mapping):
            cpts = CptTable.from_dict(cpts)
        return compas_env(params, cpts)
    raise ValueError(f"unknown environment {name!r}; available: {', '.join(ENV_NAMES)}")
