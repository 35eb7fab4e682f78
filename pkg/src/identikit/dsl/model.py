"""JSON model files compiled into SystemModel objects with symbolic partials.

Schema (all expressions are strings in the expression grammar)::

    {
      "name": "operon",
      "states":      [{"name": "M", "init": "M0"},
                      {"name": "E", "init": "E0", "lower": 0, "open_lower": true}],
      "parameters":  [{"name": "a", "lower": 0, "open_lower": true, "range": [0.2, 2]}],
      "inputs":      ["u"],
      "experiment":  [{"name": "v", "range": [0, 3]}],
      "rhs":         {"M": "...", "E": "..."},
      "outputs":     ["M"],
      "input_generator": {"u": "v^2"},
      "reparametrize_time": true
    }

``lower``/``upper`` are domain bounds (default unbounded); ``range`` is an
optional finite sampling box.  Initial values may use parameters only; the
input generator may use experiment coordinates and ``t``; right-hand sides
and outputs may use states, inputs and parameters.  With
``reparametrize_time`` the duration ``T`` is appended to the experiment.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ValidationError
from ..odecore import Partials, SystemModel, reparametrize_time
from ..spaces import Box
from . import expr as ex

RESERVED = set(ex.FUNCTIONS) | {"t"}


class ModelSpecError(ValidationError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid model spec:\n  " + "\n  ".join(self.errors))


@dataclass
class ModelSpec:
    name: str
    states: list[str]
    init: dict[str, str]
    parameters: list[str]
    inputs: list[str]
    experiment: list[str]
    rhs: dict[str, str]
    outputs: list[str]
    input_generator: dict[str, str]
    param_bounds: dict = field(default_factory=dict)
    state_bounds: dict = field(default_factory=dict)
    experiment_bounds: dict = field(default_factory=dict)
    param_range: dict = field(default_factory=dict)
    experiment_range: dict = field(default_factory=dict)
    reparametrize: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        errs = []
        if not isinstance(d, dict):
            raise ModelSpecError(["top level must be an object"])
        for key in ("states", "parameters", "rhs", "outputs"):
            if key not in d:
                errs.append(f"missing field {key!r}")
        if errs:
            raise ModelSpecError(errs)

        def entries(key):
            out = []
            for i, item in enumerate(d.get(key, [])):
                if isinstance(item, str):
                    item = {"name": item}
                if not isinstance(item, dict) or "name" not in item:
                    errs.append(f"{key}[{i}]: needs a name")
                    continue
                out.append(item)
            return out

        def bounds(item):
            lo = item.get("lower")
            hi = item.get("upper")
            return (-np.inf if lo is None else float(lo), np.inf if hi is None else float(hi),
                    bool(item.get("open_lower", False)))

        states = entries("states")
        params = entries("parameters")
        exps = entries("experiment")
        inputs = [i if isinstance(i, str) else i.get("name", "") for i in d.get("inputs", [])]
        spec = cls(
            name=str(d.get("name", "model")),
            states=[s["name"] for s in states],
            init={s["name"]: str(s.get("init", "")) for s in states},
            parameters=[p["name"] for p in params],
            inputs=inputs,
            experiment=[e["name"] for e in exps],
            rhs={str(k): str(v) for k, v in dict(d.get("rhs", {})).items()},
            outputs=[str(o) for o in d.get("outputs", [])],
            input_generator={str(k): str(v) for k, v in dict(d.get("input_generator", {})).items()},
            param_bounds={p["name"]: bounds(p) for p in params},
            state_bounds={s["name"]: bounds(s) for s in states},
            experiment_bounds={e["name"]: bounds(e) for e in exps},
            param_range={p["name"]: tuple(p["range"]) for p in params if "range" in p},
            experiment_range={e["name"]: tuple(e["range"]) for e in exps if "range" in e},
            reparametrize=bool(d.get("reparametrize_time", False)),
        )
        if errs:
            raise ModelSpecError(errs)
        return spec


def _box(names, bounds) -> Box:
    lo = [bounds[n][0] for n in names]
    hi = [bounds[n][1] for n in names]
    ol = [bounds[n][2] for n in names]
    return Box.of(lo, hi, ol)


def _parse_all(spec: ModelSpec):
    """Parse every expression, checking identifiers per context; collect all errors."""
    errs: list[str] = []
    S, P, U, L = spec.states, spec.parameters, spec.inputs, spec.experiment
    all_names = S + P + U + L
    seen = set()
    for n in all_names:
        if n in seen:
            errs.append(f"identifier {n!r} declared twice")
        if n in RESERVED:
            errs.append(f"identifier {n!r} is reserved")
        seen.add(n)
    if not S:
        errs.append("at least one state is required")
    if not spec.outputs:
        errs.append("at least one output is required")
    for n in U:
        if n not in spec.input_generator:
            errs.append(f"input {n!r} has no input_generator expression")
    for n in spec.input_generator:
        if n not in U:
            errs.append(f"input_generator entry {n!r} is not a declared input")
    for n in spec.rhs:
        if n not in S:
            errs.append(f"rhs entry {n!r} is not a declared state")

    def get(where, text, allowed):
        try:
            e = ex.parse(text)
        except ValidationError as exc:
            errs.append(f"{where}: {exc}")
            return ex.ZERO
        bad = sorted(ex.variables(e) - set(allowed))
        for b in bad:
            errs.append(f"{where}: unknown identifier {b!r}")
        return e

    init = {}
    for s in S:
        text = spec.init.get(s, "")
        if not text:
            errs.append(f"state {s!r} has no init expression")
            init[s] = ex.ZERO
        else:
            init[s] = get(f"init.{s}", text, P)
    rhs = {}
    for s in S:
        if s not in spec.rhs:
            errs.append(f"state {s!r} has no rhs expression")
            rhs[s] = ex.ZERO
        else:
            rhs[s] = get(f"rhs.{s}", spec.rhs[s], S + U + P)
    outs = [get(f"outputs[{i}]", o, S + U + P) for i, o in enumerate(spec.outputs)]
    gen = {u: get(f"input_generator.{u}", spec.input_generator[u], L + ["t"])
           for u in U if u in spec.input_generator}
    if errs:
        raise ModelSpecError(errs)
    return init, rhs, outs, gen


def _compile(body_rows, arg_unpack: dict[str, list[str]], shape, label):
    """Generate ``f(z, u, x)`` style functions returning an ndarray of ``shape``."""
    names = {}
    lines = []
    for arg, ids in arg_unpack.items():
        for i, n in enumerate(ids):
            local = f"v_{n}"
            names[n] = local
            lines.append(f"    {local} = float({arg}[{i}])")
    flat = [ex.to_python(e, names) for e in body_rows]
    lines.append(f"    return _np.array([{', '.join(flat)}], dtype=float).reshape({shape!r})")
    args = ", ".join(arg_unpack)
    src = f"def {label}({args}):\n" + "\n".join(lines) + "\n"
    ns = dict(ex.CODEGEN_NAMESPACE)
    ns["_np"] = np
    exec(compile(src, f"<identikit:{label}>", "exec"), ns)
    fn = ns[label]
    fn.source = src
    return fn


def compile_model(spec: ModelSpec) -> SystemModel:
    """Build a SystemModel whose partial derivatives come from symbolic differentiation."""
    init, rhs, outs, gen = _parse_all(spec)
    S, P, U, L = spec.states, spec.parameters, spec.inputs, spec.experiment
    n, r, m, p = len(S), len(P), len(U), len(outs)
    zux = {"z": S, "u": U, "x": P}
    f_rows = [rhs[s] for s in S]
    d = ex.differentiate
    try:
        rhs_fn = _compile(f_rows, zux, (n,), "rhs")
        init_fn = _compile([init[s] for s in S], {"x": P}, (n,), "init")
        out_fn = _compile(outs, zux, (p,), "output")
        mu_rows = [gen[u] for u in U]
        mu_fn = _compile(mu_rows, {"lam": L, "t_": ["t"]}, (m,), "mu_raw")
        partials = Partials(
            rhs_dz=_compile([d(e, v) for e in f_rows for v in S], zux, (n, n), "rhs_dz"),
            rhs_dx=_compile([d(e, v) for e in f_rows for v in P], zux, (n, r), "rhs_dx"),
            init_dx=_compile([d(init[s], v) for s in S for v in P], {"x": P}, (n, r), "init_dx"),
            output_dz=_compile([d(e, v) for e in outs for v in S], zux, (p, n), "output_dz"),
            output_dx=_compile([d(e, v) for e in outs for v in P], zux, (p, r), "output_dx"),
        )
    except ValidationError as exc:
        raise ModelSpecError([str(exc)]) from exc

    def input_gen(lam, t):
        return mu_fn(lam, (t,))

    state_box = _box(S, spec.state_bounds)
    model = SystemModel(
        name=spec.name, n_states=n, r_params=r, m_inputs=m, p_outputs=p, d_experiment=len(L),
        rhs=rhs_fn, init=init_fn, output=out_fn, input_gen=input_gen,
        param_domain=_box(P, spec.param_bounds), experiment_domain=_box(L, spec.experiment_bounds),
        state_domain=None if state_box == Box.unbounded(n) else state_box,
        partials=partials, param_names=tuple(P), state_names=tuple(S), experiment_names=tuple(L),
    )
    if spec.reparametrize:
        model = reparametrize_time(model)
    return model


def sampling_boxes(spec: ModelSpec) -> tuple[Optional[Box], Optional[Box]]:
    """Finite sampling boxes from the ``range`` fields, when every coordinate has one."""
    pbox = ebox = None
    if spec.parameters and all(n in spec.param_range for n in spec.parameters):
        pbox = Box.of([spec.param_range[n][0] for n in spec.parameters],
                      [spec.param_range[n][1] for n in spec.parameters])
    exp_names = list(spec.experiment)
    ranges = dict(spec.experiment_range)
    if spec.reparametrize:
        exp_names.append("T")
        ranges.setdefault("T", (0.1, 5.0))
    if all(n in ranges for n in exp_names):
        ebox = Box.of([ranges[n][0] for n in exp_names], [ranges[n][1] for n in exp_names])
    return pbox, ebox


def load_spec(path) -> ModelSpec:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelSpecError([f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
    return ModelSpec.from_dict(data)


def load_model(path) -> SystemModel:
    return compile_model(load_spec(path))
