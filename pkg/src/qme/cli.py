"""Command-line interface: ``qme <task> [options]``.

Exit codes: 0 success, 2 invalid configuration or input, 3 numerical failure.
All reports carry a provenance block and are byte-identical for identical
arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, kernels, presets
from .bounds import SAT_TOL, check_bound, coarse_bound, deviation_indicator, normalize_class
from .errors import ConfigError, NumericalError, QMEError, ScheduleError
from .generators import (Constant, canonicalize, load_spec, spec_from_dict, spec_to_dict,
                         validate_canonical)
from .lyapunov import decay_rates, spectrum
from .positivity import EIG_TOL, choi_from_superoperator, classify, cp_test
from .serialize import dumps
from .vectorized import DEFAULT_TOL, pauli_transfer_matrix, propagate, volume_rate

log = logging.getLogger("qme")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULT_HORIZON = 50.0
EXAMPLE2_HORIZON = 200.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message, "argv")


def _grid_arg(text):
    name, sep, values = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"grid entries look like name=v1,v2,...; got {text!r}")
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric value in grid {text!r}") from None
    return name.strip(), vals


def build_parser():
    parser = _Parser(prog="qme", description="Master-equation generators, Lyapunov spectra and decay-rate bounds.")
    parser.add_argument("--version", action="version", version=f"qme {__version__}")
    sub = parser.add_subparsers(dest="task", required=True, parser_class=_Parser)

    def common(p, spec=True):
        if spec:
            p.add_argument("--spec", help="spec file path or inline JSON document")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="local integration tolerance")

    def method_opts(p):
        p.add_argument("--method", choices=("auto", "autonomous", "floquet", "gram"), default="auto")
        p.add_argument("--horizon", type=float, default=None)
        p.add_argument("--period", type=float, default=None)
        p.add_argument("--dt", type=float, default=1.0, help="re-orthonormalization interval")

    common(sub.add_parser("validate", help="check a spec against the canonical-form constraints"))
    p = sub.add_parser("spectrum", help="Lyapunov spectrum and decay rates")
    common(p)
    method_opts(p)
    p = sub.add_parser("propagate", help="propagator and transfer matrix at time t")
    common(p)
    p.add_argument("--t", type=float, required=True)
    p = sub.add_parser("classify", help="positivity class of the map at time t")
    common(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--samples", type=int, default=500)
    p = sub.add_parser("bounds", help="decay-rate bound for an assumed positivity class")
    common(p)
    method_opts(p)
    p.add_argument("--class", dest="cls", default="two-positive",
                   choices=("two-positive", "schwarz", "positive", "two_positive"))
    p = sub.add_parser("example", help="run one of the built-in qubit examples")
    common(p, spec=False)
    p.add_argument("number", type=int, choices=(1, 2, 3))
    p.add_argument("--r1", type=float, default=0.0)
    p.add_argument("--r2", type=float, default=0.0)
    p.add_argument("--r3", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--samples", type=int, default=500)
    p = sub.add_parser("sweep", help="bound reports over a parameter grid (CSV)")
    common(p)
    method_opts(p)
    p.add_argument("--grid", type=_grid_arg, action="append", default=[],
                   help="name=v1,v2,...; names r1,r2,r3 (Pauli example) or c<k> (constant coupling of jump k)")
    p.add_argument("--class", dest="cls", default="two-positive",
                   choices=("two-positive", "schwarz", "positive", "two_positive"))
    p.add_argument("--resume", action="store_true", help="keep rows already present in --out")
    p.add_argument("--workers", type=int, default=1)
    return parser


# --------------------------------------------------------------------------
# helpers


def _load(source):
    if source is None:
        raise ConfigError("this task needs --spec", "--spec")
    if source.lstrip().startswith("{"):
        try:
            data = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid inline JSON: {exc.msg}", "--spec") from None
        return spec_from_dict(data)
    return load_spec(source)


def _canonical(spec):
    return spec if spec.canonical else canonicalize(spec)


def _provenance(args):
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}
    return {
        "tool": "qme",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "config": config,
        "tolerances": {"integration": args.tol, "eigenvalue": EIG_TOL, "saturation": SAT_TOL},
        "seed": args.seed,
    }


def _emit(args, text):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _rows_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(x):
    return repr(float(x) + 0.0)


def _spectrum_for(spec, args, horizon_default=DEFAULT_HORIZON):
    horizon = args.horizon if args.horizon is not None else horizon_default
    kwargs = {"dt": args.dt} if getattr(args, "dt", None) else {}
    method = getattr(args, "method", "auto")
    if method in ("gram",) or (method == "auto" and not spec.is_autonomous and args.period is None):
        return spectrum(spec, "gram", horizon, tol=args.tol, **kwargs)
    return spectrum(spec, method, horizon, args.period, tol=args.tol)


def _bound_section(spec, spec_result, cls, horizon):
    report = check_bound(spec_result, spec.d, cls)
    out = report.to_dict()
    can = _canonical(spec)
    T = horizon if horizon else 1.0
    total, rate = deviation_indicator(can, T)
    report.deviation_rate = rate
    out["deviation_rate"] = rate
    out["deviation_integral"] = total
    out["coarse_bound"] = coarse_bound(can, T)
    out["volume_rate"] = volume_rate(spec, T)
    out["averaging_horizon"] = T
    return out


# --------------------------------------------------------------------------
# tasks


def task_validate(args):
    spec = _load(args.spec)
    report = validate_canonical(spec)
    out = {"canonical": not report, "violations": report, "d": spec.d, "jumps": len(spec.jumps),
           "autonomous": spec.is_autonomous}
    if args.format == "csv":
        return _rows_csv(["violation"], [[v] for v in report])
    return dumps({"validate": out, "provenance": _provenance(args)})


def task_spectrum(args):
    spec = _load(args.spec)
    res = _spectrum_for(spec, args)
    if args.format == "csv":
        if res.running is not None:
            return res.running_csv()
        return _rows_csv(["index", "exponent", "decay_rate"],
                         [[i, _fmt(x), _fmt(-x)] for i, x in enumerate(res.exponents)])
    out = res.to_dict()
    out["decay_rates"] = decay_rates(res).tolist()
    return dumps({"spectrum": out, "provenance": _provenance(args)})


def task_propagate(args):
    spec = _load(args.spec)
    F = propagate(spec, 0.0, args.t, args.tol)
    P = pauli_transfer_matrix(F)
    if args.format == "csv":
        return _rows_csv([f"col_{j}" for j in range(P.shape[1])], [[_fmt(x) for x in row] for row in P])
    return dumps({"propagate": {"t": args.t, "superoperator": F, "transfer_matrix": P},
                  "provenance": _provenance(args)})


def task_classify(args):
    spec = _canonical(_load(args.spec))
    verdict = classify(spec, args.t, args.samples, args.seed, prop_tol=args.tol)
    return dumps({"classify": verdict.to_dict(), "provenance": _provenance(args)})


def task_bounds(args):
    spec = _load(args.spec)
    res = _spectrum_for(spec, args)
    cls = normalize_class(args.cls)
    out = {"spectrum": res.to_dict(), "bound": _bound_section(spec, res, cls, res.horizon or args.horizon)}
    return dumps({"bounds": out, "provenance": _provenance(args)})


def task_example(args):
    n = args.number
    spec = presets.example(n, args.r1, args.r2, args.r3)
    out = {"example": n, "spec": spec_to_dict(spec)}
    if n == 1:
        res = spectrum(spec, "autonomous")
        out["spectrum"] = res.to_dict()
        out["bound"] = _bound_section(spec, res, "two_positive", None)
    elif n == 2:
        T = args.horizon if args.horizon is not None else EXAMPLE2_HORIZON
        res = spectrum(spec, "gram", T, tol=args.tol)
        out["spectrum"] = res.to_dict()
        out["bound"] = _bound_section(spec, res, "positive", T)
    else:
        res = spectrum(spec, "autonomous")
        out["spectrum"] = res.to_dict()
        out["bound"] = _bound_section(spec, res, "positive", None)
    F = propagate(spec, 0.0, args.t, args.tol)
    C = choi_from_superoperator(F)
    out["transfer_matrix"] = {"t": args.t, "matrix": pauli_transfer_matrix(F)}
    out["choi"] = {"t": args.t, "matrix": C.matrix, **cp_test(C).to_dict()}
    if n != 1:
        out["classify"] = classify(spec, args.t, args.samples, args.seed, prop_tol=args.tol).to_dict()
    return dumps({"result": out, "provenance": _provenance(args)})


# --------------------------------------------------------------------------
# sweep


def _sweep_spec(base, params):
    if base is None:
        return presets.pauli_channels(params.get("r1", 0.0), params.get("r2", 0.0), params.get("r3", 1.0))
    couplings = [j.coupling for j in base.jumps]
    for name, value in params.items():
        if not name.startswith("c") or not name[1:].isdigit() or int(name[1:]) >= len(couplings):
            raise ConfigError(f"unknown sweep parameter {name!r} for this spec", "--grid")
        couplings[int(name[1:])] = Constant(value)
    return base.with_couplings(couplings)


def _sweep_row(base, names, values, args, cls):
    params = dict(zip(names, values))
    try:
        spec = _sweep_spec(base, params)
        res = _spectrum_for(spec, args)
        rep = _bound_section(spec, res, cls, res.horizon)
        rates = decay_rates(res)
        return ([_fmt(v) for v in values] + ["ok", rep["prefactor"], _fmt(rep["gamma_max"]),
                _fmt(rep["rhs"]), _fmt(rep["margin"]), str(rep["saturated"]).lower(),
                _fmt(rep["deviation_rate"]), " ".join(_fmt(r) for r in rates)])
    except (QMEError, ValueError, ArithmeticError) as exc:
        log.warning("sweep row %s failed: %s", params, exc)
        return [_fmt(v) for v in values] + ["failed: " + str(exc).replace("\n", " ")] + [""] * 7


def task_sweep(args):
    base = _load(args.spec) if args.spec else None
    names = [name for name, _ in args.grid]
    if len(set(names)) != len(names):
        raise ConfigError("grid parameter given twice", "--grid")
    if base is None:
        bad = [n for n in names if n not in ("r1", "r2", "r3")]
        if bad:
            raise ConfigError(f"without --spec the grid runs the Pauli example; unknown parameter {bad[0]!r}",
                              "--grid")
    else:
        for n in names:
            _sweep_spec(base, {n: 0.0})
    cls = normalize_class(args.cls)
    header = names + ["status", "prefactor", "gamma_max", "rhs", "margin", "saturated",
                      "deviation_rate", "rates"]
    points = list(itertools.product(*[vals for _, vals in args.grid])) if names else []
    if any(not vals for _, vals in args.grid):
        points = []

    done = {}
    out_path = Path(args.out) if args.out else None
    if args.resume and out_path and out_path.exists():
        with out_path.open() as fh:
            reader = csv.reader(fh)
            if next(reader, None) == header:
                for row in reader:
                    if len(row) == len(header) and row[len(names)] == "ok":
                        done[tuple(row[:len(names)])] = row
    todo = [p for p in points if tuple(_fmt(v) for v in p) not in done]

    sink = out_path.open("w") if out_path else io.StringIO()
    try:
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(header)
        sink.flush()
        with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
            fresh = pool.map(lambda p: _sweep_row(base, names, p, args, cls), todo)
            fresh_iter = iter(fresh)
            for p in points:
                key = tuple(_fmt(v) for v in p)
                row = done[key] if key in done else next(fresh_iter)
                writer.writerow(row)
                sink.flush()
        if out_path is None:
            return sink.getvalue()
    finally:
        sink.close() if out_path else None
    return None


TASKS = {
    "validate": task_validate,
    "spectrum": task_spectrum,
    "propagate": task_propagate,
    "classify": task_classify,
    "bounds": task_bounds,
    "example": task_example,
    "sweep": task_sweep,
}


def run(argv=None):
    """Run one task; returns the process exit status."""
    level = os.environ.get("QME_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        np.seterr(all="ignore")
        text = TASKS[args.task](args)
        if text is not None:
            _emit(args, text)
        return 0
    except ConfigError as exc:
        print(f"qme: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ScheduleError) as exc:
        where = exc.operation or "unknown"
        print(f"qme: numerical failure in {where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except QMEError as exc:
        where = f" ({exc.operation})" if exc.operation else ""
        print(f"qme: invalid input{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
