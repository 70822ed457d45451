"""Command-line front end: ``cbnorm <verb> [options]``.

Every verb prints one JSON report on stdout (or CSV with ``--csv`` for the
tabular verbs ``sweep`` and ``limit``). Exit codes: 0 success, 2 validation
error, 3 inequality violation, 4 counterexample found by ``ineq mink3``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import cbentropy, channels, inequalities, linalg, vnorms
from .channels import Channel
from .errors import BadName, CbNormError, DimMismatch

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_INVALID, EXIT_VIOLATION, EXIT_MINK3 = 0, 2, 3, 4


# serialization ---------------------------------------------------------------------


def _plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers to JSON-ready Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _encode(obj: Any, indent: int, level: int) -> str:
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [inner + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON with keys sorted and floats written to 17 significant digits."""
    return _encode(_plain(obj), indent, 0)


# channel loading -----------------------------------------------------------------------


def load_channel(spec: str) -> Channel:
    """Builtin ``name:key=val,...`` or a path to a JSON channel file."""
    path = Path(spec)
    if path.suffix == ".json" or path.is_file():
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise BadName(f"cannot read channel file {spec}: {exc.strerror}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DimMismatch(
                f"{spec}: invalid JSON at line {exc.lineno}, column {exc.colno} (offset {exc.pos}): {exc.msg}"
            ) from exc
        return channels.channel_from_dict(data, name=path.name)
    if spec == "sic-ebt":
        return channels.ebt_channel(channels.qubit_sic_ebt())
    return channels.from_name(spec)


def _load_matrix(path: str) -> np.ndarray:
    """Matrix file: JSON list of rows, each entry a number or ``[re, im]``."""
    try:
        rows = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise BadName(f"cannot read matrix file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DimMismatch(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    to_c = lambda z: complex(z[0], z[1]) if isinstance(z, list) else complex(z)
    return np.array([[to_c(z) for z in row] for row in rows], dtype=complex)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _default_seed() -> int:
    raw = os.environ.get("CBNORM_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise DimMismatch(f"CBNORM_SEED must be an integer, got {raw!r}") from None


# verbs -----------------------------------------------------------------------------------


def _params(args, p: float | None = None) -> vnorms.NormParams:
    return vnorms.NormParams(p=p if p is not None else 2.0, restarts=args.restarts, seed=args.seed)


def _need(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise DimMismatch(f"{args.verb} requires " + ", ".join(f"--{n}" for n in missing))


def _channel_summary(phi: Channel) -> dict:
    return {
        "name": phi.name,
        "d_in": phi.d_in,
        "d_out": phi.d_out,
        "n_kraus": len(phi.kraus),
        "tp_residual": phi.tp_residual,
        "is_tp": phi.is_tp,
        "ebt_tag": phi.ebt,
        "choi_eigenvalues": phi.choi.eigenvalues(),
    }


def _cb_payload(res: cbentropy.CbResult) -> tuple[dict, dict]:
    rep = res.report
    diag = {"spread": rep.spread, "converged": rep.converged, "iterations": rep.iterations,
            "restarts_used": rep.restarts_used}
    results = {"value": res.value,
               "schmidt_coefficients": np.linalg.svd(res.state.coeffs, compute_uv=False)}
    return results, diag


def cmd_chan(args) -> tuple[dict, dict, int]:
    _need(args, "channel")
    phi = load_channel(args.channel)
    results = _channel_summary(phi)
    results["kraus"] = channels.channel_to_dict(phi)["kraus"]
    if args.save:
        Path(args.save).write_text(channels.channel_to_json(phi), encoding="utf-8")
        results["saved_to"] = args.save
    return results, {}, EXIT_OK


def cmd_norm(args):
    if args.matrix:
        _need(args, "dims")
        x, split = _load_matrix(args.matrix), args.dims
    else:
        _need(args, "channel")
        phi = load_channel(args.channel)
        x, split = phi.choi.matrix, (phi.d_in, phi.d_out)
    p = 2.0 if args.p is None else args.p
    params = _params(args, p)
    if args.kind == "p1":
        return {"kind": "p1", "value": vnorms.norm_p1(x, split, p)}, {}, EXIT_OK
    if args.kind == "maxmin":
        val = vnorms.maxmin_p(x, split, params)
        return {"kind": "maxmin", "value": val, "schatten_p": linalg.schatten_norm(x, p)}, {}, EXIT_OK
    rep = vnorms.norm_1p(x, split, params) if args.kind == "1p" else vnorms.norm_infp(x, split, params)
    diag = {"spread": rep.spread, "converged": rep.converged, "iterations": rep.iterations,
            "restarts_used": rep.restarts_used}
    return {"kind": args.kind, "value": rep.value, "argument": rep.argument}, diag, EXIT_OK


def cmd_omega(args):
    _need(args, "channel", "p")
    phi = load_channel(args.channel)
    results, diag = _cb_payload(cbentropy.omega_p(phi, args.p, _params(args, args.p), args.max_entangled))
    return results, diag, EXIT_OK


def cmd_nu(args):
    _need(args, "channel", "p")
    phi = load_channel(args.channel)
    results, diag = _cb_payload(cbentropy.nu_p(phi, args.p, _params(args, args.p)))
    return results, diag, EXIT_OK


def cmd_scbmin(args):
    _need(args, "channel")
    phi = load_channel(args.channel)
    results, diag = _cb_payload(cbentropy.s_cb_min(phi, _params(args), args.max_entangled))
    results["units"] = "bits"
    return results, diag, EXIT_OK


def cmd_limit(args):
    _need(args, "channel")
    phi = load_channel(args.channel)
    grid = args.p_grid or list(cbentropy.DEFAULT_P_GRID)
    rows = cbentropy.limit_curve(phi, grid, _params(args), args.max_entangled)
    results = {"p_grid": grid, "curve": rows, "estimate": cbentropy.extrapolate_to_one(rows), "units": "bits"}
    return results, {}, EXIT_OK


def cmd_mult(args):
    _need(args, "channel", "channel-b", "p")
    chk = cbentropy.mult_check_omega(load_channel(args.channel), load_channel(args.channel_b),
                                     args.p, _params(args, args.p))
    rel = abs(chk.gap) / max(abs(chk.rhs), 1e-300)
    return {"lhs": chk.lhs, "rhs": chk.rhs, "gap": chk.gap, "relative_gap": rel}, {}, EXIT_OK


def cmd_add(args):
    _need(args, "channel", "channel-b")
    chk = cbentropy.add_check_scb(load_channel(args.channel), load_channel(args.channel_b), _params(args))
    return {"lhs": chk.lhs, "rhs": chk.rhs, "gap": chk.gap, "units": "bits"}, {}, EXIT_OK


def cmd_mustar(args):
    res = cbentropy.mu_star(args.d, tuple(args.bracket), args.tol)
    out = res.to_dict()
    out["oracle"] = "bisection on the closed-form depolarizing entropy"
    return out, {}, EXIT_OK


def cmd_sweep(args):
    p = 2.0 if args.p is None else args.p
    grid = np.linspace(0.0, 1.0, args.points)
    a_star, grid, ratios = cbentropy.nonunital_sweep(args.lam, args.tau, p, grid, require_cp=not args.allow_non_cp)
    results = {"a_star": a_star, "a_grid": grid, "ratios": ratios,
               "gamma12_at_a_star": cbentropy.nonunital_gamma(a_star, args.lam, args.tau).real}
    return results, {}, EXIT_OK


def cmd_ineq(args):
    slack_tol = args.slack_tol
    base = dict(trials=args.trials, seed=args.seed, slack_tol=slack_tol)
    suite = args.suite
    p = 2.0 if args.p is None else args.p
    default_dims = {"ssa": (2, 2, 2), "mink3": (2, 2, 2), "cond_subadd": (2, 2, 2, 2),
                    "lieb_thirring": (3,), "klein": (3,)}
    dims = args.dims or default_dims.get(suite, (2, 2))
    cfg = inequalities.TrialConfig(dims=dims, p=p, t=args.t, q=args.q, **base)
    if suite in ("ssa", "cond_subadd", "mink3", "lieb_thirring", "klein"):
        rep = inequalities.SUITES[suite](cfg)
    elif suite == "minkowski":
        rep = inequalities.minkowski_checks(cfg, vnorms.NormParams(restarts=min(args.restarts, 2), seed=args.seed))
    elif suite == "ebt":
        phi = load_channel(args.channel) if args.channel else None
        rep = inequalities.ebt_lemma_check(phi, cfg)
    elif suite == "positive":
        _need(args, "channel", "q")
        rep = inequalities.positive_achiever_check(load_channel(args.channel), args.q, p, cfg,
                                                   vnorms.NormParams(restarts=args.restarts, seed=args.seed))
    else:  # qgeqp
        _need(args, "channel", "q")
        rep = inequalities.q_geq_p_cb_check(load_channel(args.channel), args.q, p, args.d_ext, cfg,
                                            vnorms.NormParams(restarts=min(args.restarts, 3), seed=args.seed))
    code = EXIT_OK
    if rep.violations:
        code = EXIT_MINK3 if suite == "mink3" else EXIT_VIOLATION
    return rep.to_dict(), {"config": cfg.to_dict()}, code


VERBS = {
    "chan": cmd_chan, "norm": cmd_norm, "omega": cmd_omega, "nu": cmd_nu, "scbmin": cmd_scbmin,
    "limit": cmd_limit, "mult": cmd_mult, "add": cmd_add, "mustar": cmd_mustar,
    "sweep": cmd_sweep, "ineq": cmd_ineq,
}
CSV_VERBS = {"sweep", "limit"}
INEQ_SUITES = ["ssa", "cond_subadd", "minkowski", "mink3", "lieb_thirring", "klein", "ebt", "positive", "qgeqp"]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--channel", help="builtin 'name:key=val,...' or path to a channel JSON file")
    common.add_argument("--channel-b", help="second channel for mult/add")
    common.add_argument("--p", type=float, help="Schatten exponent")
    common.add_argument("--q", type=float, help="input exponent (ineq positive/qgeqp)")
    common.add_argument("--t", type=float, help="Minkowski exponent (ineq minkowski/mink3)")
    common.add_argument("--dims", type=_ints, help="comma-separated factor dimensions")
    common.add_argument("--trials", type=int, default=100)
    common.add_argument("--seed", type=int, default=None, help="default: $CBNORM_SEED or 0")
    common.add_argument("--restarts", type=int, default=20)
    common.add_argument("--max-entangled", action="store_true",
                        help="evaluate only at the maximally entangled input")
    common.add_argument("--report", help="write the JSON report to this path instead of stdout")
    common.add_argument("--csv", action="store_true", help="CSV output (sweep and limit only)")

    parser = argparse.ArgumentParser(prog="cbnorm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("chan", parents=[common], help="inspect a channel").add_argument(
        "--save", help="write the channel as JSON to this path")
    norm = sub.add_parser("norm", parents=[common], help="vector-valued norms of a Choi or PSD matrix")
    norm.add_argument("--kind", choices=["p1", "1p", "infp", "maxmin"], default="infp")
    norm.add_argument("--matrix", help="JSON matrix file (requires --dims d,n)")
    sub.add_parser("omega", parents=[common], help="CB 1->p norm omega_p")
    sub.add_parser("nu", parents=[common], help="maximal output p-norm nu_p")
    sub.add_parser("scbmin", parents=[common], help="minimal CB conditional entropy (bits)")
    lim = sub.add_parser("limit", parents=[common], help="p -> 1+ limit estimate of S_CB,min")
    lim.add_argument("--p-grid", type=_floats, help="comma-separated exponents in (1, 2]")
    sub.add_parser("mult", parents=[common], help="multiplicativity of omega_p")
    sub.add_parser("add", parents=[common], help="additivity of S_CB,min")
    mu = sub.add_parser("mustar", parents=[common], help="depolarizing sign-change threshold")
    mu.add_argument("--d", type=int, default=2)
    mu.add_argument("--bracket", type=_floats, default=[0.5, 0.9])
    mu.add_argument("--tol", type=float, default=1e-6)
    sw = sub.add_parser("sweep", parents=[common], help="non-unital qubit ratio along a")
    sw.add_argument("--lam", type=float, default=0.8)
    sw.add_argument("--tau", type=float, default=0.3)
    sw.add_argument("--points", type=int, default=201)
    sw.add_argument("--allow-non-cp", action="store_true",
                    help="evaluate the matrix formula even where the map is not CP")
    iq = sub.add_parser("ineq", parents=[common], help="randomized inequality suites")
    iq.add_argument("suite", choices=INEQ_SUITES)
    iq.add_argument("--slack-tol", type=float, default=1e-9)
    iq.add_argument("--d-ext", type=int, default=2)
    return parser


def _to_csv(verb: str, results: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if verb == "sweep":
        w.writerow(["a", "ratio"])
        for a, r in zip(results["a_grid"], results["ratios"]):
            w.writerow([format(float(a), ".17g"), format(float(r), ".17g")])
    else:
        w.writerow(["p", "omega", "quotient_bits"])
        for row in results["curve"]:
            w.writerow([format(float(row[k]), ".17g") for k in ("p", "omega", "quotient")])
    return buf.getvalue()


def parse_and_dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if args.csv and args.verb not in CSV_VERBS:
            raise DimMismatch(f"--csv is only available for {sorted(CSV_VERBS)}")
        if args.restarts < 1 or args.trials < 1:
            raise DimMismatch("--restarts and --trials must be >= 1")
        print(f"cbnorm {args.verb}: running", file=sys.stderr)
        start = time.perf_counter()
        results, diag, code = VERBS[args.verb](args)
        diag = dict(diag, wall_time_s=time.perf_counter() - start)
    except CbNormError as exc:
        print(f"cbnorm {args.verb}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    inputs = {k: v for k, v in vars(args).items() if k not in ("report",)}
    report = {"schema_version": SCHEMA_VERSION, "verb": args.verb, "inputs": inputs,
              "results": results, "diagnostics": diag}
    text = _to_csv(args.verb, _plain(results)) if args.csv else dumps(report) + "\n"
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


def main(argv: list[str] | None = None) -> int:
    return parse_and_dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
