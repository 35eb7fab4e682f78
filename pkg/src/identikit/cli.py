"""Command-line interface.

Every JSON report carries the tool version, the full run configuration
(including the argument vector) and the master seed, so re-running
``identikit <report["config"]["argv"]>`` reproduces it byte for byte.
Reports go to ``--out`` (written atomically) or to stdout; trajectories are
CSV.  Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, modelzoo
from .distinguish import (GridSpec, ToleranceSpec, distinguish_from_reference, distinguishable_on_set,
                          monte_carlo_theorem, scan_witness)
from .errors import IdentikitError, MissingPartials, NumericalFailure, ValidationError
from .localrank import RankSearch, local_distinguishing_set, rho, rho_max
from .odecore import IntegrationOptions, SystemModel, integrate
from .recover import MultistartConfig, fit
from .response import as_response
from .spaces import Box, ExperimentSet


# ---------------------------------------------------------------- helpers

def _vector(text: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.replace(" ", "").split(",") if v != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty vector")
    return np.array(vals)


def _clean(obj):
    """JSON-safe copy: numpy to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _write_atomic(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text: str) -> None:
    if args.out:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _report(args, result) -> None:
    doc = {"tool": "identikit", "version": __version__, "command": args.command,
           "seed": getattr(args, "seed", None), "config": _config(args), "result": result}
    _emit(args, json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n")


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "argv")}
    cfg["argv"] = list(args.argv)
    return cfg


def _options(args) -> IntegrationOptions:
    if args.steps < 1:
        raise ValidationError("--steps must be positive")
    if not args.blowup_bound > 0:
        raise ValidationError("--blowup-bound must be positive")
    return IntegrationOptions(steps=args.steps, adaptive=args.adaptive, blowup_bound=args.blowup_bound)


class _Loaded:
    """A resolved model reference: response, system (if any) and sampling boxes."""

    def __init__(self, ref: str, opts: IntegrationOptions):
        path = Path(ref)
        if ref.endswith(".json") or path.is_file():
            from .dsl import compile_model, load_spec, sampling_boxes

            spec = load_spec(path)
            self.system = compile_model(spec)
            self.param_box, self.experiment_box = sampling_boxes(spec)
            self.name = self.system.name
            self.nominal_x = None
        else:
            desc = modelzoo.get(ref)
            self.system = desc.model if isinstance(desc.model, SystemModel) else None
            self.param_box, self.experiment_box = desc.param_box, desc.experiment_box
            self.name = desc.name
            self.nominal_x = np.asarray(desc.nominal_x, float)
            self.desc = desc
        self.response = as_response(self.system, opts) if self.system is not None else as_response(desc)

    def need_boxes(self):
        if self.param_box is None or self.experiment_box is None:
            raise ValidationError(f"{self.name}: sampling boxes unknown (add 'range' fields to the model file)")
        return self.param_box, self.experiment_box


def _load(args) -> _Loaded:
    return _Loaded(args.model, _options(args))


def _read_json(path: str, what: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read {what} file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from exc


def _read_set(path: str) -> ExperimentSet:
    data = _read_json(path, "experiment-set")
    if isinstance(data, list):
        data = {"experiments": data}
    if not isinstance(data, dict) or "experiments" not in data:
        raise ValidationError(f"{path}: expected an object with an 'experiments' list")
    return ExperimentSet.from_dict(data)


def _read_data(path: str, q: int, p: int) -> np.ndarray:
    data = _read_json(path, "data")
    if isinstance(data, dict):
        data = data.get("measurements")
    try:
        Y = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: measurements must be numeric") from exc
    if Y.size != q * p:
        raise ValidationError(f"{path}: expected {q * p} measurements, got {Y.size}")
    return Y.reshape(q, p)


def _tol(args) -> ToleranceSpec:
    return ToleranceSpec(args.atol, args.rtol)


def _grid(args, box: Box) -> GridSpec:
    return GridSpec(box, args.grid_points, refine=not args.no_refine)


# ---------------------------------------------------------------- commands

def cmd_list_models(args):
    rows = []
    for desc in modelzoo.all_descriptors():
        rows.append(desc.summary())
    if args.json:
        _emit(args, json.dumps(rows, sort_keys=True, indent=2) + "\n")
        return
    lines = [f"{'name':<26} {'r':>2} {'d':>2} {'p':>2}  {'kind':<8} notes"]
    for s in rows:
        kind = "ode" if s["ode"] else "abstract"
        lines.append(f"{s['name']:<26} {s['r']:>2} {s['d']:>2} {s['p']:>2}  {kind:<8} {s['notes']}")
    lines.append("linear-response-<r> and scalar-linear-response-<r> accept any r >= 1")
    _emit(args, "\n".join(lines) + "\n")


def cmd_parse_check(args):
    from .dsl import compile_model, load_spec

    spec = load_spec(args.file)
    m = compile_model(spec)
    info = {"name": m.name, "states": m.n_states, "parameters": m.r_params, "inputs": m.m_inputs,
            "outputs": m.p_outputs, "experiment_dim": m.d_experiment,
            "partials": m.partials is not None}
    _emit(args, " ".join(f"{k}={v}" for k, v in info.items()) + "\n")


def cmd_simulate(args):
    L = _load(args)
    if L.system is None:
        raise ValidationError(f"{L.name} is not an ODE model")
    traj = integrate(L.system, args.x, args.experiment, args.horizon, _options(args))
    names = list(L.system.state_names) or [f"z{i}" for i in range(L.system.n_states)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + names)
    for t, z in zip(traj.times, traj.states):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in z])
    _emit(args, buf.getvalue())


def cmd_respond(args):
    L = _load(args)
    val = L.response(args.x, args.experiment)
    out = {"model": L.name, "x": args.x, "experiment": args.experiment, "value": val}
    if args.jacobian:
        out["jacobian"] = L.response.jacobian(args.x, args.experiment)
    _report(args, out)


def cmd_distinguish(args):
    L = _load(args)
    exps = _read_set(args.set)
    tol = _tol(args)
    v = distinguishable_on_set(L.response, args.x1, args.x2, exps, tol)
    out = {"model": L.name, "experiments": exps.points, "distinguished": v.distinguished,
           "witness": v.witness, "max_gap": v.max_gap, "tolerance": {"atol": tol.atol, "rtol": tol.rtol}}
    if args.scan:
        _, ebox = L.need_boxes()
        grid = _grid(args, ebox)
        wit = scan_witness(L.response, args.x1, args.x2, grid, tol)
        out["scan"] = {"grid": grid.to_dict(), "separable": wit is not None, "witness": wit}
    _report(args, out)


def cmd_mc_theorem(args):
    L = _load(args)
    pbox, ebox = L.need_boxes()
    rep = monte_carlo_theorem(L.response, args.q, args.pairs, args.seed, _grid(args, ebox), pbox,
                              tol=_tol(args), min_separation=args.min_separation)
    _report(args, rep.to_dict())


def cmd_distinguish_ref(args):
    L = _load(args)
    pbox, ebox = L.need_boxes()
    x0 = args.x0 if args.x0 is not None else L.nominal_x
    if x0 is None:
        raise ValidationError("--x0 is required for model files")
    rep = distinguish_from_reference(L.response, x0, args.trials, args.seed, _grid(args, ebox), pbox,
                                     q=args.q, tol=_tol(args), min_separation=args.min_separation)
    _report(args, rep.to_dict())


def cmd_rank(args):
    L = _load(args)
    rep = rho(L.response, args.x, _read_set(args.set), args.threshold)
    _report(args, rep.to_dict())


def _search(args, L) -> RankSearch:
    _, ebox = L.need_boxes()
    return RankSearch(ebox, args.patience, args.seed, args.threshold)


def cmd_rank_max(args):
    L = _load(args)
    _report(args, rho_max(L.response, args.x, _search(args, L)).to_dict())


def cmd_local_set(args):
    L = _load(args)
    search = _search(args, L)
    res = local_distinguishing_set(L.response, args.x, search, args.radius, args.probes, args.pairs,
                                   GridSpec(search.experiment_box, args.grid_points, refine=False),
                                   _tol(args))
    _report(args, res.to_dict())


def cmd_secant_chord(args):
    from .secant import r_chord, r_r_chord, spiral_chord

    w = args.target
    if w.size == 2:
        sol, kind = spiral_chord(complex(w[0], w[1])), "spiral"
    elif w.size == 3:
        sol, kind = r_chord(w, args.method), "R"
    elif w.size >= 5 and w.size % 2 == 1:
        n = float(np.linalg.norm(w))
        if n == 0:
            raise ValidationError("target direction must be nonzero")
        sol, kind = r_r_chord(w / n, (w.size - 1) // 2, args.method), "R_r"
    else:
        raise ValidationError("target must have 2 (spiral), 3 (R) or 2r+1 >= 5 (R_r) coordinates")
    _report(args, {"kind": kind, "target": w, "chord": sol.to_dict()})


def cmd_lower_bound(args):
    from .secant import lower_bound_pair

    _report(args, lower_bound_pair(args.inputs, args.r, args.method).to_dict())


def cmd_fit(args):
    L = _load(args)
    pbox, _ = L.need_boxes()
    exps = _read_set(args.set)
    Y = _read_data(args.data, exps.q, L.response.p_outputs)
    cfg = MultistartConfig(pbox, n_starts=args.starts, xatol=args.xatol, max_evals=args.max_evals,
                           log_space=not args.linear_space)
    _report(args, fit(L.response, exps, Y, cfg, args.seed).to_dict())


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(f"{self.prog}: {message}")


def _common(p, seed=True, tol=False, grid=False):
    p.add_argument("--steps", type=int, default=2000, help="fixed RK4 steps (default 2000)")
    p.add_argument("--adaptive", action="store_true", help="double the step count until converged")
    p.add_argument("--blowup-bound", type=float, default=1e12, help="max-norm bound for blow-up detection")
    p.add_argument("--out", help="write the output here (atomically) instead of stdout")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="master seed")
    if tol:
        p.add_argument("--atol", type=float, default=1e-9)
        p.add_argument("--rtol", type=float, default=1e-6)
    if grid:
        p.add_argument("--grid-points", type=int, default=8, help="scan-grid points per axis")
        p.add_argument("--no-refine", action="store_true", help="skip the jittered refinement grid")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="identikit", description="Identifiability and distinguishability experiments.")
    ap.add_argument("--version", action="version", version=f"identikit {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("list-models", help="list built-in models")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_list_models)

    p = sub.add_parser("parse-check", help="validate a model file and print its dimensions")
    p.add_argument("file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_parse_check)

    p = sub.add_parser("simulate", help="integrate a trajectory to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--x", type=_vector, required=True)
    p.add_argument("--experiment", type=_vector, required=True)
    p.add_argument("--horizon", type=float, default=1.0, help="final time (default 1)")
    _common(p, seed=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("respond", help="evaluate the response map")
    p.add_argument("--model", required=True)
    p.add_argument("--x", type=_vector, required=True)
    p.add_argument("--experiment", type=_vector, required=True)
    p.add_argument("--jacobian", action="store_true", help="also report d response / dx")
    _common(p, seed=False)
    p.set_defaults(func=cmd_respond)

    p = sub.add_parser("distinguish", help="compare two parameters on an experiment set")
    p.add_argument("--model", required=True)
    p.add_argument("--x1", type=_vector, required=True)
    p.add_argument("--x2", type=_vector, required=True)
    p.add_argument("--set", required=True, help="experiment-set JSON file")
    p.add_argument("--scan", action="store_true", help="also run the grid oracle")
    _common(p, seed=False, tol=True, grid=True)
    p.set_defaults(func=cmd_distinguish)

    p = sub.add_parser("mc-theorem", help="random experiment set against random separable pairs")
    p.add_argument("--model", required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--min-separation", type=float, default=1e-3)
    _common(p, tol=True, grid=True)
    p.set_defaults(func=cmd_mc_theorem)

    p = sub.add_parser("distinguish-ref", help="random set of r+1 experiments against a fixed reference")
    p.add_argument("--model", required=True)
    p.add_argument("--x0", type=_vector)
    p.add_argument("--q", type=int)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--min-separation", type=float, default=1e-3)
    _common(p, tol=True, grid=True)
    p.set_defaults(func=cmd_distinguish_ref)

    p = sub.add_parser("rank", help="numerical rank of the stacked Jacobian on a set")
    p.add_argument("--model", required=True)
    p.add_argument("--x", type=_vector, required=True)
    p.add_argument("--set", required=True)
    p.add_argument("--threshold", type=float, default=1e-7)
    _common(p, seed=False)
    p.set_defaults(func=cmd_rank)

    for name, fn, h in (("rank-max", cmd_rank_max, "greedy maximal rank"),
                        ("local-set", cmd_local_set, "local distinguishing set at a nonsingular parameter")):
        p = sub.add_parser(name, help=h)
        p.add_argument("--model", required=True)
        p.add_argument("--x", type=_vector, required=True)
        p.add_argument("--patience", type=int, default=50)
        p.add_argument("--threshold", type=float, default=1e-7)
        if name == "local-set":
            p.add_argument("--radius", type=float, default=0.05)
            p.add_argument("--probes", type=int, default=5)
            p.add_argument("--pairs", type=int, default=100)
            _common(p, tol=True, grid=True)
        else:
            _common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("secant-chord", help="solve f(t) - f(s) = chi w on the spiral, R or R_r curve")
    p.add_argument("--target", type=_vector, required=True, help="x,y (spiral), x,y,z (R) or 2r+1 values")
    p.add_argument("--method", choices=("auto", "proof"), default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_secant_chord)

    p = sub.add_parser("lower-bound", help="indistinguishable pair for 2r scalar inputs")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--inputs", type=_vector, required=True)
    p.add_argument("--method", choices=("auto", "proof"), default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_lower_bound)

    p = sub.add_parser("fit", help="multi-start least-squares recovery")
    p.add_argument("--model", required=True)
    p.add_argument("--set", required=True)
    p.add_argument("--data", required=True, help="JSON list (or {'measurements': ...}) of q*p values")
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--xatol", type=float, default=1e-9)
    p.add_argument("--max-evals", type=int, default=20000)
    p.add_argument("--linear-space", action="store_true", help="search in x rather than log x")
    _common(p)
    p.set_defaults(func=cmd_fit)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        args.argv = argv
        args.func(args)
    except (ValidationError, MissingPartials) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except IdentikitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
