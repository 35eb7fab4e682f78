"""Tiny expression language for user-defined models."""
from .expr import (BinOp, Call, Expr, ExprSyntaxError, Neg, Num, UnknownIdentifier, Var,
                   differentiate, evaluate, parse, to_string, variables)
from .model import ModelSpec, ModelSpecError, compile_model, load_model, load_spec, sampling_boxes

__all__ = ["BinOp", "Call", "Expr", "ExprSyntaxError", "Neg", "Num", "UnknownIdentifier", "Var",
           "differentiate", "evaluate", "parse", "to_string", "variables", "ModelSpec",
           "ModelSpecError", "compile_model", "load_model", "load_spec", "sampling_boxes"]
