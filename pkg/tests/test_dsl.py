import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

import identikit
from identikit.dsl import (BinOp, ExprSyntaxError, ModelSpecError, Num, UnknownIdentifier, Var, compile_model,
                           differentiate, evaluate, load_model, parse, sampling_boxes, to_string, variables)
from identikit.dsl.model import ModelSpec
from identikit.errors import DomainError, ValidationError
from identikit.odecore import response

OPERON_FILE = Path(identikit.__file__).parent / "data" / "operon_input.json"


def test_precedence_and_associativity():
    assert parse("x ^ y ^ z") == BinOp("^", Var("x"), BinOp("^", Var("y"), Var("z")))
    assert parse("x - y - z") == BinOp("-", BinOp("-", Var("x"), Var("y")), Var("z"))
    assert evaluate(parse("-2 ^ 2"), {}) == -4.0
    assert evaluate(parse("2 * 3 + 4"), {}) == 10.0


def test_syntax_error_position():
    with pytest.raises(ExprSyntaxError) as ei:
        parse("x + * y")
    assert ei.value.pos == 4
    with pytest.raises(ExprSyntaxError):
        parse("sin(x")
    with pytest.raises(ExprSyntaxError):
        parse("x $ y")


def test_call_arity_checked():
    with pytest.raises(ExprSyntaxError):
        parse("sin(x, y)")
    with pytest.raises(ValidationError):
        parse("foo(x)")


def test_unknown_identifier_at_evaluation():
    with pytest.raises(UnknownIdentifier):
        evaluate(parse("x + y"), {"x": 1.0})


def test_domain_errors():
    with pytest.raises(DomainError):
        evaluate(parse("log(x)"), {"x": -1.0})
    with pytest.raises(DomainError):
        evaluate(parse("1 / x"), {"x": 0.0})
    with pytest.raises(DomainError):
        evaluate(parse("x ^ y"), {"x": -2.0, "y": 0.5})
    assert evaluate(parse("x ^ 3"), {"x": -2.0}) == -8.0


def test_derivative_examples():
    d = differentiate(parse("x ^ y"), "x")
    assert evaluate(d, {"x": 2.0, "y": 3.0}) == pytest.approx(12.0)
    d = differentiate(parse("x ^ x"), "x")
    assert evaluate(d, {"x": 2.0}) == pytest.approx(4.0 * (1.0 + math.log(2.0)))
    assert differentiate(parse("y * 3"), "x") == Num(0.0)
    assert evaluate(differentiate(parse("log(E)"), "E"), {"E": 2.0}) == 0.5


ATOMS = st.sampled_from(["x", "y", "z", "1", "2", "0.5", "3"])


def _exprs():
    def extend(children):
        return st.one_of(
            st.builds(lambda a, op, b: f"({a}) {op} ({b})", children, st.sampled_from("+-*"), children),
            st.builds(lambda a: f"-({a})", children),
            st.builds(lambda f, a: f"{f}({a})", st.sampled_from(["sin", "cos", "exp"]), children),
            st.builds(lambda a: f"({a}) ^ 2", children),
        )
    return st.recursive(ATOMS, extend, max_leaves=8)


ENV = {"x": 0.37, "y": -0.61, "z": 1.13}


def _value(e, env=ENV):
    try:
        v = evaluate(e, env)
    except (DomainError, OverflowError):
        return None
    return v if math.isfinite(v) and abs(v) < 1e50 else None


@settings(max_examples=150)
@given(_exprs())
def test_round_trip_property(text):
    e = parse(text)
    s = to_string(e)
    assert parse(s) == e
    assert to_string(parse(s)) == s


@settings(max_examples=80)
@given(_exprs(), _exprs(), st.floats(-3, 3), st.floats(-3, 3))
def test_derivative_is_linear(a, b, ca, cb):
    ea, eb = parse(a), parse(b)
    combo = BinOp("+", BinOp("*", Num(ca), ea), BinOp("*", Num(cb), eb))
    lhs = _value(differentiate(combo, "x"))
    da, db = _value(differentiate(ea, "x")), _value(differentiate(eb, "x"))
    assume(None not in (lhs, da, db))
    assert lhs == pytest.approx(ca * da + cb * db, rel=1e-9, abs=1e-9)


@settings(max_examples=80)
@given(_exprs())
def test_derivative_matches_finite_difference(text):
    e = parse(text)
    h = 1e-6
    vp, vm = _value(e, {**ENV, "x": ENV["x"] + h}), _value(e, {**ENV, "x": ENV["x"] - h})
    d = _value(differentiate(e, "x"))
    assume(None not in (vp, vm, d) and abs(d) < 1e6)
    assert d == pytest.approx((vp - vm) / (2 * h), rel=1e-4, abs=1e-4)


def test_variables():
    assert variables(parse("a * M - b * E ^ m")) == {"a", "M", "b", "E", "m"}


def _spec():
    return json.loads(OPERON_FILE.read_text())


def test_operon_file_compiles():
    m = load_model(OPERON_FILE)
    assert (m.n_states, m.r_params, m.d_experiment, m.p_outputs) == (2, 5, 2, 1)
    pbox, ebox = sampling_boxes(ModelSpec.from_dict(_spec()))
    assert pbox.dim == 5 and ebox.dim == 2


def test_model_errors_are_collected():
    spec = _spec()
    spec["rhs"]["M"] = "a * M - q"
    spec["outputs"] = ["M +"]
    with pytest.raises(ModelSpecError) as ei:
        compile_model(ModelSpec.from_dict(spec))
    msg = str(ei.value)
    assert "q" in msg and "outputs" in msg


def test_model_missing_rhs():
    spec = _spec()
    del spec["rhs"]["E"]
    with pytest.raises(ModelSpecError):
        compile_model(ModelSpec.from_dict(spec))


def test_state_in_initial_value_rejected():
    spec = _spec()
    spec["states"][0]["init"] = "E"
    with pytest.raises(ModelSpecError):
        compile_model(ModelSpec.from_dict(spec))


def test_scalar_model_response(tmp_path):
    spec = {"name": "growth", "states": [{"name": "z", "init": "1"}],
            "parameters": [{"name": "k", "range": [0, 1]}], "inputs": [],
            "experiment": [{"name": "c", "range": [0, 2]}],
            "rhs": {"z": "k * z"}, "outputs": ["2 * z"], "input_generator": {},
            "reparametrize_time": False}
    path = tmp_path / "growth.json"
    path.write_text(json.dumps(spec))
    m = load_model(path)
    assert response(m, [0.5], [2.0])[0] == pytest.approx(2.0 * math.exp(0.5), rel=1e-10)
