import math

import numpy as np
import pytest

from splitgeom import expr as ex
from splitgeom.expr import parse_expr, evaluate, eval_jet, to_source

from test_hyperdual import fd_grad, fd_hess


def test_basic_eval():
    ast = parse_expr("2 + sin(x1)", 1)
    assert evaluate(ast, [0.0]) == 2.0

    ast = parse_expr("x1^2 * x2", 2)
    assert evaluate(ast, [3.0, 2.0]) == 18.0


def test_log_domain_error():
    ast = parse_expr("log(x1)", 1)
    with pytest.raises(ex.DomainError):
        evaluate(ast, [-1.0])


def test_precedence():
    assert evaluate(parse_expr("2 + 3 * 4", 1), [0.0]) == 14.0
    assert evaluate(parse_expr("2 * 3 ^ 2", 1), [0.0]) == 18.0
    assert evaluate(parse_expr("-2 ^ 2", 1), [0.0]) == -4.0  # ^ binds tighter than unary -
    assert evaluate(parse_expr("2 ^ -1", 1), [0.0]) == 0.5
    assert evaluate(parse_expr("(2 + 3) * 4", 1), [0.0]) == 20.0
    assert evaluate(parse_expr("2 - 3 - 4", 1), [0.0]) == -5.0  # left associative
    assert evaluate(parse_expr("2 ^ 3 ^ 2", 1), [0.0]) == 512.0  # right associative


def test_parse_errors_carry_offsets():
    with pytest.raises(ex.ParseError) as e:
        parse_expr("2 + $", 1)
    assert e.value.offset == 4

    with pytest.raises(ex.ParseError):
        parse_expr("sin(x1", 1)

    with pytest.raises(ex.ParseError) as e:
        parse_expr("foo(x1)", 1)
    assert "unknown identifier" in str(e.value)

    with pytest.raises(ex.ParseError) as e:
        parse_expr("x3 + 1", 2)
    assert "exceeds chart dimension" in str(e.value)

    with pytest.raises(ex.ParseError):
        parse_expr("x1 ^ x2", 2)  # variable exponent rejected


def test_eval_jet_examples():
    j = eval_jet(parse_expr("sin(x1)", 1), [0.0])
    assert j.val == 0.0 and j.grad[0] == 1.0 and j.hess[0, 0] == 0.0

    j = eval_jet(parse_expr("x1*x2", 2), [2.0, 3.0])
    assert j.val == 6.0
    np.testing.assert_allclose(j.grad, [3.0, 2.0])
    assert j.hess[0, 1] == 1.0 and j.hess[1, 0] == 1.0

    j = eval_jet(parse_expr("exp(x1^2)", 1), [1.0])
    e = math.e
    np.testing.assert_allclose(j.grad, [2 * e], rtol=1e-14)
    np.testing.assert_allclose(j.hess, [[6 * e]], rtol=1e-14)
    # finite-difference cross check at the spec steps
    f = lambda x: math.exp(x[0] ** 2)
    assert abs(j.grad[0] - fd_grad(f, [1.0], h=1e-4)[0]) <= 1e-6 * abs(j.grad[0])


def test_eval_jet_batched():
    ast = parse_expr("x1 * cos(x2)", 2)
    pts = np.array([[1.0, 0.0], [2.0, math.pi / 3]])
    j = eval_jet(ast, pts)
    np.testing.assert_allclose(j.val, [1.0, 2 * 0.5], rtol=1e-15)
    np.testing.assert_allclose(j.grad[:, 0], np.cos(pts[:, 1]), rtol=1e-15)


def test_constant_expression_jet():
    j = eval_jet(parse_expr("3.5", 2), [1.0, 2.0])
    assert j.val == 3.5
    np.testing.assert_array_equal(j.grad, [0.0, 0.0])


# -- random expression generator (seeded, rejection-sampled for domain) ----

_BIN_OPS = ["+", "-", "*", "/"]
_FUNCS = ["sin", "cos", "exp", "log", "sqrt"]


def random_ast(rng, dim, depth):
    if depth == 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.45:
            return ex.Var(int(rng.integers(1, dim + 1)))
        return ex.Num(round(float(rng.uniform(0.5, 3.0)), 3))
    r = rng.random()
    if r < 0.15:
        return ex.Neg(random_ast(rng, dim, depth - 1))
    if r < 0.45:
        fn = _FUNCS[rng.integers(0, len(_FUNCS))]
        child = random_ast(rng, dim, depth - 1)
        if fn in ("log", "sqrt"):
            # keep the argument strictly positive
            child = ex.Bin("+", ex.Num(2.0), ex.Call("sin", child))
        return ex.Call(fn, child)
    if r < 0.55:
        return ex.Bin("^", random_ast(rng, dim, depth - 1), ex.Num(float(rng.integers(2, 4))))
    op = _BIN_OPS[rng.integers(0, len(_BIN_OPS))]
    left = random_ast(rng, dim, depth - 1)
    right = random_ast(rng, dim, depth - 1)
    if op == "/":
        right = ex.Bin("+", ex.Num(2.0), ex.Call("cos", right))
    return ex.Bin(op, left, right)


def test_random_expressions_match_finite_differences():
    rng = np.random.default_rng(20240817)
    checked = 0
    attempts = 0
    while checked < 1000 and attempts < 5000:
        attempts += 1
        dim = int(rng.integers(1, 4))
        ast = random_ast(rng, dim, depth=5)
        p = rng.uniform(-1.2, 1.2, size=dim)
        try:
            j = eval_jet(ast, p)
        except ex.ExprError:
            continue
        if not np.all(np.isfinite(j.val)) or not np.all(np.isfinite(j.hess)):
            continue
        if np.max(np.abs(j.val)) > 1e3:
            continue  # steep compositions make the FD oracle itself unreliable

        def f(x):
            return float(evaluate(ast, list(x)))

        g_fd = fd_grad(f, p, h=1e-4)
        h_fd = fd_hess(f, p, h=1e-3)
        gs = 1.0 + np.max(np.abs(j.grad))
        hs = 1.0 + np.max(np.abs(j.hess))
        # qualify the oracle: halving the step must not move it, else the
        # stencil's own truncation error exceeds the tolerance being tested
        if np.max(np.abs(g_fd - fd_grad(f, p, h=5e-5))) > 2e-6 * gs:
            continue
        if np.max(np.abs(h_fd - fd_hess(f, p, h=5e-4))) > 2e-6 * hs:
            continue
        np.testing.assert_allclose(j.grad, g_fd, atol=1e-5 * gs)
        np.testing.assert_allclose(j.hess, h_fd, atol=1e-5 * hs)
        checked += 1
    assert checked == 1000


def test_print_parse_round_trip():
    rng = np.random.default_rng(99)
    for _ in range(300):
        dim = int(rng.integers(1, 4))
        ast = random_ast(rng, dim, depth=4)
        assert parse_expr(to_source(ast), dim) == ast
