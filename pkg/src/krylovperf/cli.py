"""
Command-line interface.

    krylovperf model export --model queue --param n=9 --out queue9
    krylovperf eval --model queue --param n=1024 --measure average-clients --t 1 --method both
    krylovperf sensitivity --model queue --param n=256 --direction rho2 --measure average-clients --t 1
    krylovperf bench --suite queue --max-exp 16 --out bench.csv

All results are written as CSV (stdout unless ``--out``). Exit status is 0
on success, 1 on invalid input and 2 when a Krylov run did not converge.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import measures as M
from .ctmc import StatePartition, read_matrix_market, write_matrix_market
from .errors import (
    ConvergenceError,
    ResourceError,
    SolveError,
    SpecError,
    ValidationError,
)
from .krylov import KrylovConfig
from .models import MODELS, CaseStudy, build_model, direction_matrix
from .sensitivity import measure_sensitivity

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2

PRESETS = {
    "average-clients": {"kind": "InstReward", "reward": "linear"},
    "average-clients-steady": {"kind": "SteadyStateReward", "reward": "linear"},
    "D": {"kind": "CumulativeReward"},
    "B_security": {"kind": "CumulativeReward"},
    "reliability": {"kind": "InstReliability"},
    "availability": {"kind": "InstAvailability"},
    "mttf": {"kind": "MTTF_Infinite"},
    "mttf-finite": {"kind": "MTTF_Finite"},
    "expected-failures": {"kind": "ExpectedFailures"},
    "uptime": {"kind": "Uptime"},
    "reward": {"kind": "InstReward"},
    "cumulative": {"kind": "CumulativeReward"},
}

EVAL_COLUMNS = [
    "model", "n", "measure", "t", "method", "value", "wall_time_s", "restarts",
    "converged", "tol", "m", "max_restarts", "params",
]
SENS_COLUMNS = [
    "model", "n", "measure", "t", "method", "direction", "value", "derivative",
    "wall_time_s", "eval_time_s", "time_ratio", "restarts", "converged", "tol", "m",
    "max_restarts", "params",
]
BENCH_COLUMNS = ["suite"] + EVAL_COLUMNS + ["status"]


def _fail(kind, message, **context):
    extra = " ".join(f"{k}={v}" for k, v in context.items())
    print(f"krylovperf: error={kind} {extra} message={json.dumps(str(message))}".replace("  ", " "),
          file=sys.stderr)


def parse_params(items):
    """``["n=1024", "rho2=1,2"]`` -> list of parameter dicts (cartesian product)."""
    keys, values = [], []
    for item in items or []:
        if "=" not in item:
            raise ValidationError(f"--param expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        keys.append(k.strip())
        values.append([x.strip() for x in v.split(",") if x.strip()])
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def _format_params(params):
    return ";".join(f"{k}={v}" for k, v in sorted(params.items()))


def load_case(model, params, sidecar=None):
    """Built-in case study, or a Matrix Market file plus JSON sidecar."""
    if model in MODELS:
        return build_model(model, **params)
    path = Path(model)
    if not path.exists():
        raise ValidationError(f"unknown model {model!r} (not a built-in name or a file)")
    Q = read_matrix_market(path)
    meta = {}
    side = Path(sidecar) if sidecar else path.with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text())
    n = Q.n
    pi0 = np.asarray(meta.get("pi0", np.eye(1, n).ravel()), dtype=float)
    part = meta.get("partition")
    partition = StatePartition.from_up(Q, part["up"]) if part else StatePartition.from_up(
        Q, np.arange(n))
    reward = np.asarray(meta.get("reward", np.zeros(n)), dtype=float)
    named = {k: StatePartition.from_up(Q, up) for k, up in meta.get("partitions", {}).items()}
    return CaseStudy(path.stem, None, Q, partition, reward, pi0, list(range(n)), named)


def resolve_measure(text, t=None):
    """Measure dict from inline JSON, a JSON file, a preset or a bare kind name."""
    text = text.strip()
    if text.startswith("{"):
        d = json.loads(text)
    elif text in PRESETS:
        d = dict(PRESETS[text])
    elif text in {k.value for k in M.Kind}:
        d = {"kind": text}
    elif Path(text).exists():
        d = json.loads(Path(text).read_text())
    else:
        raise SpecError(f"unknown measure {text!r}; presets: {sorted(PRESETS)}")
    if t is not None:
        d["t"] = float(t)
    return d


def _cfg(args):
    return KrylovConfig(m=args.restart_len, max_restarts=args.max_restarts, tol=args.tol)


def _methods(arg):
    return ["krylov", "uniformization"] if arg == "both" else [arg]


def eval_row(case, measure_name, d, method, cfg, params):
    """Evaluate one measure; returns (row, exit_code)."""
    spec = M.measure_spec_from_dict(d, case.generator, case)
    status = EXIT_OK
    t0 = time.perf_counter()
    restarts, converged = "", True
    try:
        res = M.evaluate(case.generator, spec, cfg, method, cfg.tol)
        value = res.value
        if hasattr(res.diagnostics, "restarts_used"):
            restarts = res.diagnostics.restarts_used
    except ConvergenceError as exc:
        value = float("nan")
        restarts, converged, status = len(exc.update_norms), False, EXIT_NOT_CONVERGED
        _fail("ConvergenceError", exc, model=case.name, n=case.n)
    wall = time.perf_counter() - t0
    row = {
        "model": case.name, "n": case.n, "measure": measure_name, "t": spec.t if spec.t is not None else "",
        "method": method, "value": repr(float(value)), "wall_time_s": f"{wall:.6f}",
        "restarts": restarts, "converged": converged, "tol": cfg.tol, "m": cfg.m,
        "max_restarts": cfg.max_restarts, "params": _format_params(params),
    }
    return row, status


def _writer(out, columns):
    handle = open(out, "w", newline="") if out else sys.stdout
    w = csv.DictWriter(handle, fieldnames=columns)
    w.writeheader()
    return handle, w


def cmd_eval(args):
    cfg = _cfg(args)
    rows, status = [], EXIT_OK
    for params in parse_params(args.param) or [{}]:
        case = load_case(args.model, params, args.sidecar)
        d = resolve_measure(args.measure, args.t)
        for method in _methods(args.method):
            row, st = eval_row(case, args.measure if not args.measure.startswith("{") else d["kind"],
                               d, method, cfg, params)
            rows.append(row)
            status = max(status, st)
    handle, w = _writer(args.out, EVAL_COLUMNS)
    w.writerows(rows)
    if args.out:
        handle.close()
    return status


def _direction(case, name, params):
    if Path(name).suffix == ".mtx" and Path(name).exists():
        import scipy.io
        return scipy.io.mmread(name)
    if ":" in name:
        model, name = name.split(":", 1)
        if model != case.name:
            raise SpecError(f"direction {model}:{name} does not belong to model {case.name}")
    if case.model is None:
        raise SpecError("named directions need a built-in model")
    return direction_matrix(case.model, name)


def cmd_sensitivity(args):
    cfg = _cfg(args)
    rows, status = [], EXIT_OK
    for params in parse_params(args.param) or [{}]:
        case = load_case(args.model, params, args.sidecar)
        d = resolve_measure(args.measure, args.t)
        spec = M.measure_spec_from_dict(d, case.generator, case)
        E = _direction(case, args.direction, params)
        eval_time = ratio = ""
        if args.with_ratio:
            t0 = time.perf_counter()
            M.evaluate(case.generator, spec, cfg)
            eval_time = time.perf_counter() - t0
        t0 = time.perf_counter()
        restarts, converged = "", True
        try:
            res = measure_sensitivity(case.generator, spec, E, cfg)
            value, deriv = res.value, res.derivative
            if hasattr(res.diagnostics, "restarts_used"):
                restarts = res.diagnostics.restarts_used
        except ConvergenceError as exc:
            value = deriv = float("nan")
            restarts, converged, status = len(exc.update_norms), False, EXIT_NOT_CONVERGED
            _fail("ConvergenceError", exc, model=case.name, n=case.n)
        wall = time.perf_counter() - t0
        if eval_time != "":
            ratio = f"{wall / eval_time:.4f}"
            eval_time = f"{eval_time:.6f}"
        rows.append({
            "model": case.name, "n": case.n, "measure": args.measure if not args.measure.startswith("{") else d["kind"],
            "t": spec.t if spec.t is not None else "", "method": "krylov",
            "direction": args.direction, "value": repr(float(value)),
            "derivative": repr(float(deriv)), "wall_time_s": f"{wall:.6f}",
            "eval_time_s": eval_time, "time_ratio": ratio, "restarts": restarts,
            "converged": converged, "tol": cfg.tol, "m": cfg.m,
            "max_restarts": cfg.max_restarts, "params": _format_params(params),
        })
    handle, w = _writer(args.out, SENS_COLUMNS)
    w.writerows(rows)
    if args.out:
        handle.close()
    return status


def cmd_model_export(args):
    params = parse_params(args.param)
    if len(params) > 1:
        raise ValidationError("model export takes a single value per parameter")
    case = load_case(args.model, params[0] if params else {})
    out = Path(args.out)
    mtx = out.with_suffix(".mtx")
    write_matrix_market(mtx, case.generator, comment=f"{case.name} generator")
    sidecar = {
        "model": case.name,
        "params": asdict(case.model) if case.model is not None else {},
        "n": case.n,
        "partition": {
            "up": case.partition.up.tolist(),
            "absorbing_down": case.partition.absorbing_down,
        },
        "partitions": {k: p.up.tolist() for k, p in case.partitions.items()},
        "reward": case.reward.tolist(),
        "pi0": case.pi0.tolist(),
        "labels": [list(x) if isinstance(x, tuple) else x for x in case.labels],
    }
    mtx.with_suffix(".json").write_text(json.dumps(sidecar, indent=1))
    print(f"{mtx}\n{mtx.with_suffix('.json')}")
    return EXIT_OK


# -- benchmark sweeps ---------------------------------------------------------

def bench_cells(suites, max_exp=20, telecom_max_exp=15, sens_max_exp=20, attack_nodes=None,
                methods=("krylov",)):
    """List of benchmark cells ``(suite, model, params, measure, t, method)``."""
    cells = []
    for suite in suites:
        if suite == "queue":
            for k in range(10, max_exp + 1):
                for meth in methods:
                    cells.append((suite, "queue", {"n": 2**k}, "average-clients", 1.0, meth))
        elif suite == "telecom":
            for k in range(10, telecom_max_exp + 1):
                for meth in methods:
                    cells.append((suite, "telecom", {"n": 2**k}, "D", 20.0, meth))
        elif suite == "attack":
            for N in attack_nodes or (10, 20, 50, 100, 150):
                for meth in methods:
                    cells.append((suite, "attack", {"N": N}, "B_security", 10.0, meth))
        elif suite == "sensitivity":
            for k in range(8, sens_max_exp + 1):
                cells.append((suite, "queue", {"n": 2**k}, "average-clients", 1.0, "sensitivity"))
        else:
            raise ValidationError(f"unknown bench suite {suite!r}")
    return cells


def run_cell(cell, cfg, max_m=120):
    """Run one benchmark cell, doubling the restart length on non-convergence."""
    suite, model, params, measure, t, method = cell
    row = {"suite": suite, "model": model, "measure": measure, "t": t, "method": method,
           "params": _format_params(params), "tol": cfg.tol, "max_restarts": cfg.max_restarts}
    try:
        case = build_model(model, **params)
        d = resolve_measure(measure, t)
        spec = M.measure_spec_from_dict(d, case.generator, case)
        row["n"] = case.n
        while True:
            row["m"] = cfg.m
            t0 = time.perf_counter()
            try:
                if method == "sensitivity":
                    res = measure_sensitivity(case.generator, spec,
                                              direction_matrix(case.model, "rho2"), cfg)
                    value, diag = res.derivative, res.diagnostics
                else:
                    res = M.evaluate(case.generator, spec, cfg, method, cfg.tol)
                    value, diag = res.value, res.diagnostics
            except ConvergenceError:
                if cfg.m * 2 > max_m:
                    raise
                cfg = KrylovConfig(m=cfg.m * 2, max_restarts=cfg.max_restarts, tol=cfg.tol,
                                   breakdown_tol=cfg.breakdown_tol)
                continue
            row.update(value=repr(float(value)), wall_time_s=f"{time.perf_counter() - t0:.6f}",
                       restarts=getattr(diag, "restarts_used", ""), converged=True, status="ok")
            return row
    except (ConvergenceError, ResourceError, SolveError, SpecError, ValidationError,
            MemoryError) as exc:
        row.update(value="nan", wall_time_s="", restarts="", converged=False,
                   status=f"{type(exc).__name__}: {exc}")
        return row


def run_bench(cells, cfg, jobs=1):
    """Evaluate cells (optionally in threads); rows come back in cell order."""
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda c: run_cell(c, cfg), cells))
    return [run_cell(c, cfg) for c in cells]


def fit_loglog_slope(ns, times):
    """Least-squares exponent ``b`` in ``time ~ a n^b``."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(times, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def cmd_bench(args):
    cfg = _cfg(args)
    suites = [s.strip() for s in args.suite.split(",") if s.strip()]
    cells = bench_cells(suites, args.max_exp, args.telecom_max_exp, args.sens_max_exp,
                        methods=_methods(args.method))
    rows = run_bench(cells, cfg, args.jobs)
    handle, w = _writer(args.out, BENCH_COLUMNS)
    w.writerows(rows)
    if args.out:
        handle.close()
    for suite in suites:
        pts = [(r["n"], float(r["wall_time_s"])) for r in rows
               if r["suite"] == suite and r["status"] == "ok" and r["method"] != "uniformization"]
        if len(pts) >= 2:
            slope = fit_loglog_slope(*zip(*pts))
            print(f"krylovperf: suite={suite} loglog_slope={slope:.3f}", file=sys.stderr)
    return EXIT_OK


def _common(p):
    p.add_argument("--model", required=True,
                   help="built-in model (queue, telecom, attack) or a Matrix Market file")
    p.add_argument("--param", action="append", default=[],
                   help="model parameter name=value; comma-separated values sweep")
    p.add_argument("--sidecar", help="JSON sidecar for a Matrix Market model")
    p.add_argument("--measure", required=True,
                   help="preset name, measure kind, inline JSON or JSON file")
    p.add_argument("--t", type=float, help="time horizon (overrides the measure's t)")
    p.add_argument("--out", help="output CSV (default: stdout)")


def _krylov_opts(p):
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--restart-len", type=int, default=15)
    p.add_argument("--max-restarts", type=int, default=10)


def build_parser():
    parser = argparse.ArgumentParser(prog="krylovperf", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    model = sub.add_parser("model", help="model utilities")
    msub = model.add_subparsers(dest="action", required=True)
    exp = msub.add_parser("export", help="write Matrix Market + JSON sidecar")
    exp.add_argument("--model", required=True, choices=sorted(MODELS))
    exp.add_argument("--param", action="append", default=[])
    exp.add_argument("--out", required=True, help="output path prefix")
    exp.set_defaults(func=cmd_model_export)

    ev = sub.add_parser("eval", help="evaluate a measure")
    _common(ev)
    ev.add_argument("--method", choices=["krylov", "uniformization", "both"], default="krylov")
    _krylov_opts(ev)
    ev.set_defaults(func=cmd_eval)

    se = sub.add_parser("sensitivity", help="derivative of a measure along a parameter")
    _common(se)
    se.add_argument("--direction", required=True,
                    help="parameter name (rho2, queue:rho2, ...) or Matrix Market file")
    se.add_argument("--with-ratio", action="store_true",
                    help="also time a plain evaluation and report the cost ratio")
    _krylov_opts(se)
    se.set_defaults(func=cmd_sensitivity)

    be = sub.add_parser("bench", help="timing sweeps over model sizes")
    be.add_argument("--suite", default="queue,telecom,attack,sensitivity")
    be.add_argument("--max-exp", type=int, default=20, help="queue sizes 2^10..2^max")
    be.add_argument("--telecom-max-exp", type=int, default=15)
    be.add_argument("--sens-max-exp", type=int, default=20)
    be.add_argument("--method", choices=["krylov", "uniformization", "both"], default="krylov")
    be.add_argument("--jobs", type=int, default=1)
    be.add_argument("--out")
    _krylov_opts(be)
    be.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        _fail("ConvergenceError", exc)
        return EXIT_NOT_CONVERGED
    except (ValidationError, SpecError, SolveError, ResourceError, IndexError,
            json.JSONDecodeError, OSError) as exc:
        _fail(type(exc).__name__, exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
