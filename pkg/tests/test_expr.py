import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from weightedshift import _pykernel
from weightedshift import expr as ex
from weightedshift.expr import Binary, Const, EvaluationError, ParseError, Unary, Var


def test_parse_sum_of_product():
    assert ex.parse("x0 + 2*x1", 2) == Binary("+", Var(0), Binary("*", Const(2.0), Var(1)))


def test_unary_minus_and_power_precedence():
    assert ex.evaluate(ex.parse("-x1", 3), [0, 5, 0]) == -5
    assert ex.parse("-x0^2", 1) == Unary("neg", Binary("^", Var(0), Const(2.0)))
    assert ex.evaluate(ex.parse("-x0^2", 1), [3.0]) == -9.0


def test_power_is_right_associative():
    assert ex.evaluate(ex.parse("2^3^2", 1), [0.0]) == 512.0


def test_functions_and_whitespace():
    assert ex.evaluate(ex.parse("x0^2 + sin(x1)", 2), [2, 0]) == 4
    assert ex.evaluate(ex.parse("  exp( 0 ) ", 1), [7.0]) == 1.0
    assert ex.evaluate(ex.parse("3", 2), [1.0, 2.0]) == 3


@pytest.mark.parametrize(
    "text, dim",
    [
        ("2x0", 1),  # implicit multiplication
        ("foo(x0)", 1),  # unknown identifier
        ("y + 1", 1),
        ("x2", 2),  # index beyond dimension
        ("(x0 + 1", 1),
        ("x0 + 1)", 1),
        ("sin(x0, x0)", 1),  # arity
        ("sin x0", 1),
        ("", 1),
        ("x0 +", 1),
        ("x0 # 1", 1),
    ],
)
def test_parse_errors_carry_position(text, dim):
    with pytest.raises(ParseError) as info:
        ex.parse(text, dim)
    assert 0 <= info.value.position <= len(text)
    assert info.value.message


def test_parse_error_position_points_at_offender():
    with pytest.raises(ParseError) as info:
        ex.parse("x0 + x7", 2)
    assert info.value.position == 5


@pytest.mark.parametrize(
    "text, x",
    [("x0/x1", [1.0, 0.0]), ("sqrt(x0)", [-1.0, 0.0]), ("log(x0)", [0.0, 0.0]),
     ("x0^0.5", [-2.0, 0.0]), ("x0^(-1)", [0.0, 0.0]), ("exp(x0)", [1e4, 0.0])],
)
def test_evaluation_errors(text, x):
    with pytest.raises(EvaluationError):
        ex.evaluate(ex.parse(text, 2), x)


def test_negative_base_integer_power_is_fine():
    assert ex.evaluate(ex.parse("x0^3", 1), [-2.0]) == -8.0


def test_differentiate_examples():
    assert ex.evaluate(ex.differentiate(ex.parse("x0^2", 1), 0), [3.0]) == pytest.approx(6.0)
    assert ex.differentiate(ex.parse("x1", 2), 0) == Const(0.0)
    div = ex.divergence([ex.parse("-x1", 2), ex.parse("x0", 2)])
    assert div == Const(0.0)


def test_abs_differentiates_to_sign():
    d = ex.differentiate(ex.parse("abs(x0)", 1), 0)
    assert ex.evaluate(d, [-2.0]) == -1.0
    assert ex.evaluate(d, [3.0]) == 1.0


def test_variable_exponent_derivative():
    d = ex.differentiate(ex.parse("x0^x1", 2), 1)
    assert ex.evaluate(d, [2.0, 3.0]) == pytest.approx(8.0 * math.log(2.0))


# random trees ------------------------------------------------------------------

DIM = 3
_leaf = st.one_of(
    st.builds(Const, st.floats(-3, 3, allow_nan=False).map(lambda v: round(v, 3))),
    st.builds(Var, st.integers(0, DIM - 1)),
)


def _extend(children):
    return st.one_of(
        st.builds(Unary, st.sampled_from(["neg", "sin", "cos", "exp", "sqrt", "abs", "log"]), children),
        st.builds(Binary, st.sampled_from(["+", "-", "*", "/"]), children, children),
        st.builds(Binary, st.just("^"), children, st.integers(-2, 3).map(lambda k: Const(float(k)))),
    )


def _depth(node):
    if isinstance(node, (Const, Var)):
        return 0
    if isinstance(node, Unary):
        return 1 + _depth(node.arg)
    return 1 + max(_depth(node.left), _depth(node.right))


trees = st.recursive(_leaf, _extend, max_leaves=12).filter(lambda n: _depth(n) <= 5)
points = st.lists(st.floats(-2, 2, allow_nan=False), min_size=DIM, max_size=DIM)


def _safe(node, x, radius=1e-3):
    """Value at ``x`` if the expression is defined on a ball around it (away from singularities)."""
    try:
        v = ex.evaluate(node, x)
        for i in range(DIM):
            for s in (-radius, radius):
                y = list(x)
                y[i] += s
                w = ex.evaluate(node, y)
                if abs(w - v) > 1e3 * radius * (1 + abs(v)):
                    return None
        return v
    except EvaluationError:
        return None


@settings(max_examples=200, derandomize=True, deadline=None)
@given(trees, points, st.integers(0, DIM - 1))
def test_symbolic_derivative_matches_central_difference(node, x, i):
    v = _safe(node, x)
    assume(v is not None and abs(v) < 1e6)
    d_node = ex.differentiate(node, i)
    try:
        d = ex.evaluate(d_node, x)
    except EvaluationError:
        assume(False)
    delta = 1e-5
    xp, xm = list(x), list(x)
    xp[i] += delta
    xm[i] -= delta
    fd = (ex.evaluate(node, xp) - ex.evaluate(node, xm)) / (2 * delta)
    assume(abs(d) < 1e6)
    assert abs(fd - d) <= 1e-5 * max(1.0, abs(d), abs(v))


@settings(max_examples=200, derandomize=True, deadline=None)
@given(trees)
def test_print_parse_roundtrip_is_idempotent(node):
    once = ex.parse(ex.to_string(node), DIM)
    assert ex.parse(ex.to_string(once), DIM) == once
    assert ex.to_string(once) == ex.to_string(node)


@settings(max_examples=100, derandomize=True, deadline=None)
@given(trees, points)
def test_compiled_program_matches_tree(node, x):
    try:
        v = ex.evaluate(node, x)
    except EvaluationError:
        v = None
    prog = ex.compile_program([node])
    try:
        w = _pykernel.eval_program(prog.ops, prog.args, prog.consts, prog.starts, x)[0]
    except EvaluationError:
        w = None
    if v is None or w is None:
        assert v is None and w is None
    else:
        assert w == v


def test_vectorize_matches_scalar_evaluation(rng):
    node = ex.parse("x0^2*cos(x1) - exp(-x2)/(1 + x0^2)", 3)
    X = rng.uniform(-1, 1, (3, 20))
    got = ex.vectorize(node)(X)
    want = [ex.evaluate(node, X[:, j]) for j in range(20)]
    np.testing.assert_allclose(got, want, rtol=1e-15)
