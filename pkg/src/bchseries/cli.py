"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 numerical failure, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import coeffs
from .checks import error_sweep, run_suite, sweep_fixture
from .errors import BranchError, DecompositionError, InputError, SingularityError
from .matops import ORDER_CAP, BCHForm, FallbackPolicy, MatrixPair, bch_truncated
from .oracle import SweepGrid

logger = logging.getLogger("bchseries")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
COMPOSITION_DUMP_CAP = 12


class VerificationFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# ------------------------------------------------------------------ input

def _matrix(obj, name: str, dim: int) -> np.ndarray:
    if not isinstance(obj, dict) or "re" not in obj:
        raise InputError(f"{name} must be an object with 're' (and optional 'im')")
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name} has non-numeric entries") from exc
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise InputError(f"{name} must be {dim}x{dim}, got re {re.shape} / im {im.shape}")
    return re + 1j * im


def load_pair(path: str | Path, form: str | None = None) -> MatrixPair:
    """Read the JSON input document ``{"dim", "A", "B", "form"}``."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read input {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("input must be a JSON object")
    dim = doc.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise InputError("'dim' must be a positive integer")
    if "A" not in doc or "B" not in doc:
        raise InputError("input needs both 'A' and 'B'")
    chosen = form or doc.get("form", "symmetric")
    if chosen not in ("symmetric", "standard"):
        raise InputError(f"unknown form {chosen!r}")
    return MatrixPair(_matrix(doc["A"], "A", dim), _matrix(doc["B"], "B", dim), chosen)


def _matrix_json(M: np.ndarray) -> dict:
    return {"re": M.real.tolist(), "im": M.imag.tolist()}


def _policy(args) -> FallbackPolicy:
    kw = {}
    if args.delta is not None:
        kw["delta"] = args.delta
    if args.epsilon is not None:
        kw["radius"] = args.epsilon
    return FallbackPolicy(**kw)


def _check_order(order: int, cap: int = ORDER_CAP, low: int = 1) -> int:
    if not low <= order <= cap:
        raise InputError(f"order must be in {low}..{cap}, got {order}")
    return order


# --------------------------------------------------------------- commands

def cmd_compute(args) -> str:
    if not args.input:
        raise InputError("compute needs --input")
    order = _check_order(args.order, low=0)
    pair = load_pair(args.input, args.form)
    logger.info("stage: eigendecomposition and order-%d evaluation", order)
    A, B = pair.symmetric()
    rep = bch_truncated(A, B, order, policy=_policy(args), compare_oracle=args.compare_oracle)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "i", "j", "re", "im"])
        for i, j in np.ndindex(rep.Z.shape):
            w.writerow(["Z", i, j, fmt(rep.Z[i, j].real), fmt(rep.Z[i, j].imag)])
        for k, n in enumerate(rep.term_norms, start=1):
            w.writerow(["term_norm", k, "", fmt(n), ""])
        w.writerow(["fallback_count", "", "", rep.fallback_count, ""])
        if rep.oracle_error is not None:
            w.writerow(["oracle_error", "", "", fmt(rep.oracle_error), ""])
        return buf.getvalue()
    doc = {
        "form": pair.form.value,
        "dim": pair.dim,
        "order": order,
        "Z": _matrix_json(rep.Z),
        "term_norms": rep.term_norms,
        "fallback_count": rep.fallback_count,
    }
    if rep.oracle_error is not None:
        doc["oracle_error"] = rep.oracle_error
    return json.dumps(doc, indent=2) + "\n"


def cmd_verify(args) -> str:
    order = _check_order(args.order)
    delta = args.delta if args.delta is not None else coeffs.DEFAULT_DELTA
    results = run_suite(seed=args.seed, delta=delta, max_order=order, policy=_policy(args))
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "status", "samples", "skipped", "max_error", "tolerance"])
        for r in results:
            w.writerow([r.name, "pass" if r.passed else "fail", r.samples, r.skipped,
                        fmt(r.max_error), fmt(r.tolerance)])
        text = buf.getvalue()
    else:
        text = json.dumps({
            "seed": args.seed,
            "delta": delta,
            "passed": all(r.passed for r in results),
            "checks": [{"check": r.name, "status": "pass" if r.passed else "fail",
                        "samples": r.samples, "skipped": r.skipped,
                        "max_error": r.max_error, "tolerance": r.tolerance} for r in results],
        }, indent=2) + "\n"
    failed = [r for r in results if not r.passed]
    for r in failed:
        why = f"{r.skipped} samples rejected" if r.skipped else f"max error {r.max_error:.3g}"
        logger.error("check %s failed: %s (tolerance %.1g)", r.name, why, r.tolerance)
    if failed:
        raise VerificationFailed(text)
    return text


def cmd_sweep(args) -> str:
    order = _check_order(args.order)
    grid = SweepGrid.parse(args.t_grid)
    if args.input:
        pair = load_pair(args.input, args.form)
        A, B = pair.symmetric()
    else:
        A, B = sweep_fixture(args.seed)
    result = error_sweep(A, B, range(1, order + 1), grid, policy=_policy(args))
    if result.grid is not grid:
        logger.warning("t grid halved to %s..%s to stay in the principal-log domain",
                       fmt(result.grid.t_values[0]), fmt(result.grid.t_values[-1]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "order", "abs_err"])
    for t, N, err in result.rows:
        w.writerow([fmt(t), N, fmt(err)])
    for N in range(1, order + 1):
        w.writerow(["slope", N, fmt(result.slopes[N])])
    return buf.getvalue()


def cmd_coeffs(args) -> str:
    order = _check_order(args.order, cap=coeffs.MAX_ORDER)
    t = coeffs.tanh_taylor(order)
    doc = {
        "t": [str(x) for x in t],
        "a": [str(coeffs.a_coeff(r)) for r in range(1, order + 1)],
        "compositions": {str(r): [list(p) for p in coeffs.compositions(r)]
                         for r in range(1, min(order, COMPOSITION_DUMP_CAP) + 1)},
    }
    return json.dumps(doc, indent=2) + "\n"


COMMANDS = {"compute": cmd_compute, "verify": cmd_verify, "sweep": cmd_sweep, "coeffs": cmd_coeffs}
DEFAULT_ORDER = {"compute": 3, "verify": 6, "sweep": 4, "coeffs": 8}
DEFAULT_FORMAT = {"compute": "json", "verify": "json", "sweep": "csv", "coeffs": "json"}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bchseries", description="One-sided BCH series in the eigenbasis of A.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--order", type=int, default=DEFAULT_ORDER[name])
        p.add_argument("--input")
        p.add_argument("--form", choices=[f.value for f in BCHForm])
        p.add_argument("--t-grid", default="1e-3:1e-1:8")
        p.add_argument("--output")
        p.add_argument("--format", choices=["csv", "json"], default=DEFAULT_FORMAT[name])
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--epsilon", type=float, help="fallback circle radius")
        p.add_argument("--delta", type=float, help="sinh-zero threshold")
        p.add_argument("--compare-oracle", action="store_true")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    for flag in ("delta", "epsilon"):
        value = getattr(args, flag)
        if value is not None and not value > 0:
            logger.error("--%s must be positive", flag)
            return EXIT_INPUT
    if args.seed < 0:
        logger.error("--seed must be nonnegative")
        return EXIT_INPUT
    try:
        _emit(COMMANDS[args.command](args), args.output)
    except VerificationFailed as exc:
        _emit(str(exc), args.output)
        return EXIT_VERIFY
    except InputError as exc:
        logger.error("input error: %s", exc)
        return EXIT_INPUT
    except DecompositionError as exc:
        logger.error("numerical failure in eigendecomposition: %s", exc)
        return EXIT_NUMERIC
    except BranchError as exc:
        logger.error("numerical failure in principal logarithm: %s", exc)
        return EXIT_NUMERIC
    except SingularityError as exc:
        logger.error("numerical failure at a singular point: %s", exc)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
