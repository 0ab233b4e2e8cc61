"""Command-line entry point: ``privdesign {design,verify,reproduce-example,oracle}``.

Exit codes
    0  success
    1  unexpected internal error
    2  no feasible assignment
    3  invalid input (file, field or mode/divergence mismatch)
    4  budgets too large for the local regime
    5  verify found a violated budget
    6  reference example does not match the published values
    7  oracle instance too large for grid mode
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings
from typing import Any, Optional, Sequence

import numpy as np

from . import measures
from .errors import (
    EpsilonTooLarge,
    NoFeasibleAssignment,
    OracleSizeExceeded,
    RankDeficient,
    Singular,
    ValidationError,
)
from .invertible import design_invertible
from .linalg import matrix_rank
from .oracle import OracleConfig, brute_force, default_config
from .polytope import Mode, design_lp
from .prob import (
    MIXTURE_TOL,
    STOCHASTIC_TOL,
    UNUSED_LETTER_TOL,
    Divergence,
    MechanismDesign,
    ProblemInstance,
    forward_from_filter,
    instance_from_joint,
    make_channel,
    make_instance,
    marginal_x,
)
from .reference import run_reference

log = logging.getLogger("privdesign")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3
EXIT_EPS_TOO_LARGE = 4
EXIT_VIOLATION = 5
EXIT_MISMATCH = 6
EXIT_ORACLE_SIZE = 7

MODES = ("auto", "invertible", "full-row-rank", "pinv")
REPORT_TOL = 1e-7


class InputError(ValidationError):
    pass


# ---------------------------------------------------------------- input

def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise InputError(f"{path}: cannot read ({err.strerror})") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise InputError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from err
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    return doc


def _matrix(value: Any, field: str) -> np.ndarray:
    """Nested row lists, or ``{"rows": r, "cols": c, "data": [...row-major...]}``."""
    if isinstance(value, dict):
        try:
            rows, cols, data = int(value["rows"]), int(value["cols"]), value["data"]
        except (KeyError, TypeError, ValueError) as err:
            raise InputError(f"field '{field}': needs integer 'rows', 'cols' and a 'data' list") from err
        arr = np.asarray(data, dtype=float)
        if arr.size != rows * cols:
            raise InputError(f"field '{field}': {arr.size} entries for a {rows}x{cols} matrix")
        return arr.reshape(rows, cols)
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as err:
        raise InputError(f"field '{field}': not a numeric matrix") from err
    if arr.ndim != 2:
        raise InputError(f"field '{field}': expected a matrix, got {arr.ndim} dimension(s)")
    return arr


def _vector(value: Any, field: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as err:
        raise InputError(f"field '{field}': not a numeric vector") from err
    if arr.ndim != 1:
        raise InputError(f"field '{field}': expected a vector")
    return arr


def _field_error(field: str, err: Exception) -> InputError:
    return InputError(f"field '{field}': {err}")


def load_instance(path: str, tol_override: Optional[float] = None
                  ) -> tuple[ProblemInstance, str]:
    doc = _read_json(path)
    if "epsilons" not in doc:
        raise InputError(f"{path}: missing field 'epsilons'")
    eps = _vector(doc["epsilons"], "epsilons")
    div = doc.get("divergence", "l1")
    try:
        divergence = Divergence.parse(div)
    except ValueError as err:
        raise _field_error("divergence", err) from err
    if divergence is Divergence.KL:
        raise InputError("field 'divergence': must be 'chi2' or 'l1'")
    mode = doc.get("mode", "auto")
    if mode not in MODES:
        raise InputError(f"field 'mode': must be one of {', '.join(MODES)}, got {mode!r}")
    tols = doc.get("tolerances", {})
    if not isinstance(tols, dict):
        raise InputError("field 'tolerances': must be an object")
    stoch = float(tols.get("stochastic", STOCHASTIC_TOL))
    mix = float(tols.get("mixture", MIXTURE_TOL))
    if tol_override is not None:
        stoch = tol_override

    try:
        if "p_xy" in doc:
            inst = instance_from_joint(_matrix(doc["p_xy"], "p_xy"), eps, divergence,
                                       tol=stoch, mixture_tol=mix)
        else:
            for key in ("p_x_given_y", "p_y"):
                if key not in doc:
                    raise InputError(f"{path}: missing field '{key}' (or give 'p_xy')")
            inst = make_instance(_matrix(doc["p_x_given_y"], "p_x_given_y"),
                                 _vector(doc["p_y"], "p_y"), eps, divergence,
                                 tol=stoch, mixture_tol=mix)
    except InputError:
        raise
    except ValidationError as err:
        raise InputError(f"{path}: {err}") from err
    return inst, mode


def resolve_mode(inst: ProblemInstance, mode: str) -> str:
    """Pick the designer; divergence and mode must belong to the same regime."""
    p = inst.p_x_given_y.matrix
    square = p.shape[0] == p.shape[1]
    if mode == "auto":
        if inst.divergence is Divergence.CHI_SQUARE:
            if square and matrix_rank(p) == p.shape[0]:
                return "invertible"
            raise InputError("chi2 budgets need a square invertible P_X|Y; use l1 otherwise")
        return "full-row-rank" if matrix_rank(p) == p.shape[0] else "pinv"
    if mode == "invertible" and inst.divergence is not Divergence.CHI_SQUARE:
        raise InputError("mode 'invertible' requires divergence 'chi2'")
    if mode in ("full-row-rank", "pinv") and inst.divergence is not Divergence.L1:
        raise InputError(f"mode '{mode}' requires divergence 'l1'")
    return mode


def run_designer(inst: ProblemInstance, mode: str) -> MechanismDesign:
    if mode == "invertible":
        try:
            return design_invertible(inst)
        except Singular as err:
            raise InputError(f"P_X|Y is singular: {err}") from err
    try:
        return design_lp(inst, Mode(mode))
    except RankDeficient as err:
        raise InputError(f"mode 'full-row-rank' not applicable: {err}") from err


# ---------------------------------------------------------------- output

def _budget_bound(eps: float, divergence: Divergence) -> float:
    return eps ** 2 if divergence is Divergence.CHI_SQUARE else eps


def build_report(design: MechanismDesign, inst: ProblemInstance, mode: str,
                 elapsed_ms: float, unit: str = "bits") -> dict:
    leak = []
    for i, eps in enumerate(inst.budgets.epsilons):
        leak.append({
            "letter": i + 1,
            "realized": float(design.leakages[i]),
            "budget": float(eps),
            "bound": _budget_bound(float(eps), inst.divergence),
            "divergence": inst.divergence.value,
        })
    report = {
        "status": "optimal",
        "mode_used": mode,
        "divergence": inst.divergence.value,
        "p_u": design.p_u.values.tolist(),
        "p_y_given_u": design.p_y_given_u.matrix.tolist(),
        "p_u_given_y": design.p_u_given_y.matrix.tolist(),
        "utility_nats": float(design.exact_utility),
        "utility_bits": float(design.exact_utility_bits),
        "approx_utility": float(design.approx_utility),
        "approx_utility_bits": float(design.approx_utility_bits),
        "unit": unit,
        "utility": float(design.exact_utility_bits if unit == "bits" else design.exact_utility),
        "leakage_per_letter": leak,
        "unused_letters": [i + 1 for i in range(inst.k) if i not in design.used_letters],
        "assignment": (None if design.assignment is None
                       else [v + 1 for v in design.assignment]),
        "warnings": list(design.warnings),
        "timing_ms": elapsed_ms,
    }
    return report


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def cmd_design(args) -> int:
    inst, file_mode = load_instance(args.instance, args.tol)
    mode = resolve_mode(inst, args.mode or file_mode)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        design = run_designer(inst, mode)
    elapsed = (time.perf_counter() - t0) * 1e3
    report = build_report(design, inst, mode, elapsed, args.unit)
    report["warnings"] += [str(w.message) for w in caught]
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK


def audit(inst: ProblemInstance, filt: np.ndarray, tol: float) -> tuple[list[dict], float]:
    channel = make_channel(filt, max(tol, STOCHASTIC_TOL))
    p_u, pyu = forward_from_filter(channel, inst.p_y)
    p_x = marginal_x(inst)
    pxu = inst.p_x_given_y.matrix @ pyu.matrix
    rows = []
    for u in range(inst.k):
        eps = float(inst.budgets[u])
        bound = _budget_bound(eps, inst.divergence)
        used = p_u.values[u] > UNUSED_LETTER_TOL
        leak = measures.divergence(inst.divergence, pxu[:, u], p_x) if used else 0.0
        rows.append({"letter": u + 1, "p_u": float(p_u.values[u]), "realized": float(leak),
                     "bound": bound, "ok": bool(leak <= bound + tol)})
    util = measures.mutual_information(p_u, pyu, inst.p_y, max(inst.mixture_tol, tol))
    return rows, util


def cmd_verify(args) -> int:
    inst, _ = load_instance(args.instance)
    doc = _read_json(args.mechanism)
    if "p_u_given_y" not in doc:
        raise InputError(f"{args.mechanism}: missing field 'p_u_given_y'")
    filt = _matrix(doc["p_u_given_y"], "p_u_given_y")
    if filt.shape != (inst.k, inst.ny):
        raise InputError(f"field 'p_u_given_y': shape {filt.shape}, expected {(inst.k, inst.ny)}")
    tol = REPORT_TOL if args.tol is None else args.tol
    rows, util = audit(inst, filt, tol)
    lines = [f"{'letter':>6} {'P_U':>12} {'realized':>14} {'bound':>14}  status"]
    for r in rows:
        lines.append(f"{r['letter']:>6} {r['p_u']:>12.6g} {r['realized']:>14.6g} "
                     f"{r['bound']:>14.6g}  {'ok' if r['ok'] else 'VIOLATED'}")
    lines.append(f"I(U;Y) = {util:.9g} nats = {measures.to_bits(util):.9g} bits")
    sys.stdout.write("\n".join(lines) + "\n")
    bad = [r["letter"] for r in rows if not r["ok"]]
    if bad:
        print(f"budget violated for letter(s) {bad}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _vec(v) -> str:
    return "[" + ", ".join(f"{x:.6f}" for x in v) + "]"


def cmd_reproduce(args) -> int:
    run = run_reference()
    out = ["extreme points (eps terms at zero):"]
    for pt in run.points:
        omega = ",".join(str(o + 1) for o in pt.omega)
        out.append(f"  V{pt.index + 1} omega={{{omega}}} base={_vec(pt.full())} "
                   f"H={pt.entropy_bits:.6f} bits")
    d = run.published_design
    out.append("published assignment: " + ", ".join(
        f"u{i + 1}->V{v + 1}" for i, v in enumerate(d.assignment)))
    out.append(f"P_U = {_vec(d.p_u.values)}")
    out.append(f"I(U;Y) = {d.exact_utility_bits:.6f} bits (linearised {d.approx_utility_bits:.6f})")
    b = run.best_design
    out.append("best assignment over full search: " + ", ".join(
        f"u{i + 1}->V{v + 1}" for i, v in enumerate(b.assignment)))
    out.append(f"P_U = {_vec(b.p_u.values)}")
    out.append(f"I(U;Y) = {b.exact_utility_bits:.6f} bits (linearised {b.approx_utility_bits:.6f})")
    sys.stdout.write("\n".join(out) + "\n")
    if run.ok:
        sys.stdout.write("all published values reproduced\n")
        return EXIT_OK
    table = [f"{'quantity':<16} {'computed':>12} {'published':>12} {'|diff|':>10} {'tol':>8}"]
    for c in run.checks:
        if not c.ok:
            table.append(f"{c.name:<16} {c.computed:>12.6f} {c.published:>12.6f} "
                         f"{abs(c.computed - c.published):>10.2e} {c.tol:>8.0e}")
    sys.stdout.write("MISMATCH\n" + "\n".join(table) + "\n")
    return EXIT_MISMATCH


def cmd_oracle(args) -> int:
    inst, file_mode = load_instance(args.instance, args.tol)
    if args.grid_step is not None or args.random or args.samples is not None:
        base = default_config(inst, args.seed)
        cfg = OracleConfig(grid_step=args.grid_step or base.grid_step,
                           max_random_samples=args.samples or base.max_random_samples,
                           seed=args.seed, random=args.random)
    else:
        cfg = OracleConfig(seed=args.seed)
    result = brute_force(inst, cfg)
    util = result.exact_utility
    lines = [f"oracle ({result.mode}) I(U;Y) = {util:.9g} nats = {measures.to_bits(util):.9g} bits",
             "P_U|Y ="]
    lines += ["  " + _vec(row) for row in result.p_u_given_y.matrix]
    if args.compare:
        mode = resolve_mode(inst, args.mode or file_mode)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            design = run_designer(inst, mode)
        gap = util - design.exact_utility
        lines.append(f"designer ({mode}) I(U;Y) = {design.exact_utility:.9g} nats")
        lines.append(f"gap (oracle - designer) = {gap:.3e} nats")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privdesign",
                                     description="Point-wise private mechanism design.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="design a mechanism and write a JSON report")
    p.add_argument("instance")
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--tol", type=float, help="stochasticity tolerance for input matrices")
    unit = p.add_mutually_exclusive_group()
    unit.add_argument("--bits", dest="unit", action="store_const", const="bits")
    unit.add_argument("--nats", dest="unit", action="store_const", const="nats")
    p.set_defaults(func=cmd_design, unit="bits")

    p = sub.add_parser("verify", help="audit a filter P_U|Y against the budgets")
    p.add_argument("instance")
    p.add_argument("mechanism", help="JSON file with a 'p_u_given_y' matrix (a report works)")
    p.add_argument("--tol", type=float, help=f"leakage tolerance (default {REPORT_TOL:g})")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reproduce-example", help="rerun the embedded hybrid example")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("oracle", help="brute-force search over filters")
    p.add_argument("instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--random", action="store_true", help="sample filters instead of a grid")
    p.add_argument("--grid-step", type=float)
    p.add_argument("--samples", type=int, help="random-mode sample count")
    p.add_argument("--compare", action="store_true", help="also run the matching designer")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_oracle)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("PRIVDESIGN_LOG", "error").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoFeasibleAssignment as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except EpsilonTooLarge as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_EPS_TOO_LARGE
    except OracleSizeExceeded as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ORACLE_SIZE
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as err:  # noqa: BLE001 - last-resort report, traceback in debug log
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
