"""Mechanism-expression DSL: parser, printer, evaluation."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairmdp import dsl


def ev(source, **env):
    return float(dsl.evaluate(dsl.parse(source), env))


def test_parse_benefit_equation():
    expr = dsl.parse("case D == 1: 3*(1-E) + 5*(1-H) default: 2*(1-E) + 4*(1-H)")
    assert isinstance(expr, dsl.Case)
    assert len(expr.arms) == 1
    assert float(dsl.evaluate(expr, {"D": 1, "E": 0, "H": 0})) == 8.0
    assert float(dsl.evaluate(expr, {"D": 0, "E": 0, "H": 0})) == 6.0


def test_bare_noise_reference():
    assert ev("u", u=0.25) == 0.25


def test_precedence_and_unary_minus():
    assert ev("1 + 2 * 3") == 7.0
    assert ev("(1 + 2) * 3") == 9.0
    assert ev("-2 + 3") == 1.0
    assert ev("2 - -3") == 5.0
    assert ev("-(2 + 3) * 2") == -10.0


def test_functions():
    assert ev("clip(5, 0, 1)") == 1.0
    assert ev("clip(-1, 0, 1)") == 0.0
    assert ev("min(3, 1, 2)") == 1.0
    assert ev("max(3, 1, 2)") == 3.0


def test_case_first_match_wins():
    src = "case x >= 1: 10 case x >= 2: 20 default: 0"
    assert ev(src, x=2) == 10.0
    assert ev(src, x=0) == 0.0


def test_comparison_operators():
    for op, expected in [("==", 0), ("!=", 1), ("<", 1), ("<=", 1), (">", 0), (">=", 0)]:
        assert ev(f"case 1 {op} 2: 1 default: 0") == expected


def test_syntax_error_positions():
    with pytest.raises(dsl.MechanismSyntaxError) as exc:
        dsl.parse("1 + ")
    assert exc.value.line == 1 and exc.value.col == 5
    with pytest.raises(dsl.MechanismSyntaxError):
        dsl.parse("case x == 1: 2")  # missing default
    with pytest.raises(dsl.MechanismSyntaxError):
        dsl.parse("clip(1, 2)")
    with pytest.raises(dsl.MechanismSyntaxError):
        dsl.parse("1 + @")
    with pytest.raises(dsl.MechanismSyntaxError):
        dsl.parse("default: 1")
    with pytest.raises(dsl.MechanismSyntaxError):
        dsl.parse("1 2")


def test_guarded_division_parses_then_fails_at_evaluation():
    expr = dsl.parse("1/(H - H)")
    values = dsl.evaluate(expr, {"H": 3.0})
    with pytest.raises(dsl.EvaluationError, match="division"):
        dsl.check_finite(values, "Y")


def test_division_inside_condition_raises_immediately():
    expr = dsl.parse("case 1/x > 0: 1 default: 0")
    with pytest.raises(dsl.EvaluationError):
        dsl.evaluate(expr, {"x": 0.0})


def test_division_masked_by_case_is_fine():
    # the failing arm is never selected, so no error survives
    expr = dsl.parse("case x == 0: 7 default: 1/x")
    values = dsl.evaluate(expr, {"x": 0.0})
    dsl.check_finite(values, "Y")
    assert float(values) == 7.0


def test_references():
    expr = dsl.parse("case D == 1: 3*(1-E) + u default: H")
    assert dsl.references(expr) == {"D", "E", "u", "H"}


def test_vectorized_evaluation():
    expr = dsl.parse("case D == 1: 3*(1-E) + 5*(1-H) default: 2*(1-E) + 4*(1-H)")
    out = dsl.evaluate(expr, {"D": np.array([1.0, 0.0]), "E": 0.0, "H": 0.0})
    assert out.tolist() == [8.0, 6.0]


# ---------------------------------------------------------------------------
# Round-trip property


def _exprs(depth):
    leaf = st.one_of(
        st.floats(min_value=-10, max_value=10, allow_nan=False).map(dsl.Num),
        st.sampled_from(["x", "y", "u"]).map(dsl.Ref),
    )
    if depth == 0:
        return leaf
    sub = _exprs(depth - 1)
    return st.one_of(
        leaf,
        sub.map(dsl.Neg),
        st.tuples(st.sampled_from("+-*"), sub, sub).map(lambda t: dsl.BinOp(*t)),
        st.tuples(sub, sub, sub).map(lambda t: dsl.Call("clip", t)),
        st.tuples(sub, sub).map(lambda t: dsl.Call("min", t)),
        st.tuples(st.sampled_from(["<", "<=", "==", "!=", ">", ">="]), sub, sub, sub, sub).map(
            lambda t: dsl.Case(((dsl.Compare(t[0], t[1], t[2]), t[3]),), t[4])
        ),
    )


@settings(max_examples=1000, deadline=None)
@given(expr=_exprs(3), x=st.floats(-5, 5), y=st.floats(-5, 5), u=st.floats(-5, 5))
def test_parse_print_round_trip(expr, x, y, u):
    reparsed = dsl.parse(dsl.to_source(expr))
    env = {"x": x, "y": y, "u": u}
    a = float(dsl.evaluate(expr, env))
    b = float(dsl.evaluate(reparsed, env))
    assert a == b or (np.isnan(a) and np.isnan(b))
