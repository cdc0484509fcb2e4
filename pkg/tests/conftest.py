import numpy as np
import pytest

from fairmdp import (
    BINARY,
    CausalGraph,
    ExprMechanism,
    NodeDecl,
    StructuralCausalModel,
    TableMechanism,
    bernoulli,
    gaussian,
    uniform,
)


@pytest.fixture
def chain_model():
    """X -> M -> Y with a direct X -> Y edge; all nodes binary/deterministic-ish."""
    graph = CausalGraph(
        [NodeDecl("X", BINARY), NodeDecl("M", BINARY), NodeDecl("Y")],
        [("X", "M"), ("X", "Y"), ("M", "Y")],
    )
    return StructuralCausalModel(
        graph=graph,
        mechanisms={
            "X": ExprMechanism.parse("u"),
            "M": TableMechanism.from_dict(
                ("X",), {(0.0,): (0.8, 0.2), (1.0,): (0.3, 0.7)}
            ),
            "Y": ExprMechanism.parse("2*X + 3*M + u"),
        },
        noises={
            "X": bernoulli(0.4),
            "M": uniform(0.0, 1.0),
            "Y": bernoulli(0.5),
        },
    )


@pytest.fixture
def linear_gaussian_model():
    """Y = 2*X + u with continuous noise (non-enumerable)."""
    graph = CausalGraph([NodeDecl("X", BINARY), NodeDecl("Y")], [("X", "Y")])
    return StructuralCausalModel(
        graph=graph,
        mechanisms={"X": ExprMechanism.parse("u"), "Y": ExprMechanism.parse("2*X + u")},
        noises={"X": bernoulli(0.5), "Y": gaussian(0.0, 1.0)},
    )


@pytest.fixture
def linear_mediation_model():
    """Linear mechanisms: X -> M -> Y and X -> Y, all effects decomposable."""
    graph = CausalGraph(
        [NodeDecl("X", BINARY), NodeDecl("M"), NodeDecl("Y")],
        [("X", "M"), ("X", "Y"), ("M", "Y")],
    )
    return StructuralCausalModel(
        graph=graph,
        mechanisms={
            "X": ExprMechanism.parse("u"),
            "M": ExprMechanism.parse("3*X + u"),
            "Y": ExprMechanism.parse("2*X + 5*M + u"),
        },
        noises={"X": bernoulli(0.5), "M": bernoulli(0.3), "Y": bernoulli(0.2)},
    )
