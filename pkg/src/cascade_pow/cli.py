"""Command-line front end: ``eval``, ``coeffs``, ``scan`` and ``profile``.

Exit codes: 0 ok, 1 usage error, 2 out of region (or branch mismatch),
3 no convergence, 4 singular point, 5 I/O failure.
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
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import gmpy2
from gmpy2 import mpfr

from .cascade import DEFAULT_MAX_TERMS, DEFAULT_TOL, compute_m0, eval_cascade, eval_xy
from .errors import (
    BranchMismatch,
    DomainError,
    NoConvergence,
    OutOfRegion,
    RecursionLimit,
    SingularShift,
    ZeroBase,
    ZeroDenominator,
)
from .numeric_core import (
    DEFAULT_PRECISION,
    MIN_PRECISION,
    Exponent,
    Scalar,
    format_real,
    principal_power,
    precision_bits,
    working_context,
)
from .oracle import GridSpec, direct_pow, profile_convergence, scan_grid
from .series import b_coeff_exact, eval_eq8, eval_eq9

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_OUT_OF_REGION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_SINGULAR = 4
EXIT_IO = 5

VERDICT_EXIT = {
    "ok": EXIT_OK,
    "out_of_region": EXIT_OUT_OF_REGION,
    "branch_mismatch": EXIT_OUT_OF_REGION,
    "no_convergence": EXIT_NO_CONVERGENCE,
    "singular": EXIT_SINGULAR,
}

CONFIG_ENV = "CASCADE_POW_CONFIG"
CONFIG_KEYS = ("precision", "tol", "max_terms", "recursion_depth", "output_format")

SCAN_HEADER = [
    "re_z", "im_z", "A", "m0", "method", "value_re", "value_im",
    "ref_re", "ref_im", "rel_err", "terms_total", "wall_ns", "verdict",
]

# flags whose value may legitimately start with "-"
_VALUE_FLAGS = {"--z", "--x", "--y", "--A", "--re", "--im", "--tol"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class Config:
    precision: int = DEFAULT_PRECISION
    tol: float = DEFAULT_TOL
    max_terms: int = DEFAULT_MAX_TERMS
    recursion_depth: int | None = None  # None means m0 + 2
    output_format: str = "json"

    def validate(self) -> Config:
        p = self.precision
        if isinstance(p, bool) or not isinstance(p, int) or p < MIN_PRECISION:
            raise UsageError(f"precision must be an integer >= {MIN_PRECISION}")
        if isinstance(self.tol, bool) or not isinstance(self.tol, (int, float)):
            raise UsageError("tol must be a number")
        if not (math.isfinite(self.tol) and self.tol > 10.0 ** (5 - p)):
            raise UsageError(f"tol must exceed 1e{5 - p} at precision {p}")
        m = self.max_terms
        if isinstance(m, bool) or not isinstance(m, int) or m < 1:
            raise UsageError("max_terms must be an integer >= 1")
        d = self.recursion_depth
        if d is not None and (isinstance(d, bool) or not isinstance(d, int) or d < 0):
            raise UsageError("recursion_depth must be a nonnegative integer")
        if self.output_format not in ("json", "csv"):
            raise UsageError("output_format must be 'json' or 'csv'")
        return self


def load_config_file(path: str | None) -> dict:
    """Settings from a JSON file; a missing path or file yields ``{}``."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        return {}
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def resolve_config(args: argparse.Namespace) -> Config:
    """Merge settings with precedence flag > config file > default."""
    merged = dict(load_config_file(args.config))
    flags = {
        "precision": args.precision,
        "tol": args.tol,
        "max_terms": args.max_terms,
        "recursion_depth": args.depth,
        "output_format": args.format,
    }
    merged.update({k: v for k, v in flags.items() if v is not None})
    if "tol" not in merged:
        # the stock 1e-30 is unreachable below ~36 digits
        p = merged.get("precision", DEFAULT_PRECISION)
        if isinstance(p, int) and not isinstance(p, bool):
            merged["tol"] = max(DEFAULT_TOL, 10.0 ** (6 - p))
    return Config(**merged).validate()


# ---------------------------------------------------------------- parsing


def parse_complex(text: str, precision: int) -> Scalar:
    """``"re"`` or ``"re,im"`` as an exactly-rounded :class:`Scalar`."""
    parts = text.split(",")
    if len(parts) > 2:
        raise UsageError(f"complex value must be 're' or 're,im', got {text!r}")
    try:
        re = Fraction(parts[0].strip())
        im = Fraction(parts[1].strip()) if len(parts) == 2 else Fraction(0)
    except ValueError as exc:
        raise UsageError(f"not a number: {text!r}") from exc
    return Scalar((re, im), precision)


def parse_real(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except ValueError as exc:
        raise UsageError(f"not a real number: {text!r}") from exc


def parse_range(text: str) -> tuple[Fraction, Fraction, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range must be min:max:count, got {text!r}")
    lo, hi = parse_real(parts[0]), parse_real(parts[1])
    try:
        count = int(parts[2])
    except ValueError as exc:
        raise UsageError(f"range count must be an integer, got {parts[2]!r}") from exc
    if count < 1:
        raise UsageError("range count must be >= 1")
    if lo > hi:
        raise UsageError("range min must not exceed max")
    return lo, hi, count


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _join_negative_values(argv: list[str]) -> list[str]:
    # argparse would read "--z -0.5,2" as two options
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


# ------------------------------------------------------------- rendering


class _Num(str):
    """A pre-rendered JSON number literal."""


def num(x, digits: int) -> _Num:
    return _Num(format_real(x, digits))


def _json_value(v) -> str:
    if isinstance(v, _Num):
        return str(v)
    if v is None or isinstance(v, bool):
        return json.dumps(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else "null"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    if isinstance(v, dict):
        items = (f"{json.dumps(k)}: {_json_value(x)}" for k, x in v.items())
        return "{" + ", ".join(items) + "}"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dump_json(obj) -> str:
    return _json_value(obj)


def _float_field(x: float) -> str:
    return "" if x is None or math.isnan(x) else repr(float(x))


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit_table(header, rows, fmt: str, out) -> None:
    if fmt == "json":
        out.write(dump_json([dict(zip(header, r)) for r in rows]) + "\n")
    else:
        out.write(_csv_text(header, [[str(c) for c in r] for r in rows]))


# ------------------------------------------------------------- commands


def _verdict_of(exc: Exception) -> str:
    if isinstance(exc, (SingularShift, ZeroDenominator, ZeroBase)):
        return "singular"
    if isinstance(exc, (OutOfRegion, DomainError)):
        return "out_of_region"
    if isinstance(exc, (NoConvergence, RecursionLimit)):
        return "no_convergence"
    if isinstance(exc, BranchMismatch):
        return "branch_mismatch"
    raise exc


_NUMERIC_ERRORS = (
    SingularShift, ZeroDenominator, ZeroBase, OutOfRegion, DomainError,
    NoConvergence, RecursionLimit, BranchMismatch,
)


def _fail(exc: Exception, out) -> int:
    verdict = _verdict_of(exc)
    out.write(dump_json({"verdict": verdict, "message": str(exc)}) + "\n")
    print(f"error: {exc}", file=sys.stderr)
    return VERDICT_EXIT[verdict]


def _rel_err(value: Scalar, reference: Scalar) -> float:
    with working_context(reference.bits):
        return float(abs(value.value - reference.value) / abs(reference.value))


def cmd_eval(args, cfg: Config, out) -> int:
    p = cfg.precision
    A = Exponent(parse_real(args.A), p)
    method = args.method
    if method == "xy":
        if args.x is None or args.y is None:
            raise UsageError("--method xy needs --x and --y")
        x, y = parse_complex(args.x, p), parse_complex(args.y, p)
    else:
        if args.z is None:
            raise UsageError(f"--method {method} needs --z")
        z = parse_complex(args.z, p)
    diag = args.check
    try:
        if method == "cascade":
            rep = eval_cascade(z, A, cfg.tol, cfg.max_terms, diagnostics=diag)
        elif method == "eq8":
            rep = eval_eq8(z, A, cfg.tol, cfg.max_terms, diagnostics=diag)
        elif method == "eq9":
            rep = eval_eq9(z, A, cfg.tol, cfg.recursion_depth, cfg.max_terms, diagnostics=diag)
        elif method == "xy":
            rep = eval_xy(x, y, A, cfg.tol, cfg.max_terms, diagnostics=diag)
        else:
            rep = None
            value = direct_pow(z, A)
    except _NUMERIC_ERRORS as exc:
        return _fail(exc, out)

    if rep is not None:
        value = rep.value
        fields = {
            "method": method,
            "m0": rep.m0,
            "per_factor_terms": list(rep.per_factor_terms),
            "est_rel_error": rep.est_rel_error,
        }
    else:
        fields = {"method": method, "m0": compute_m0(z), "per_factor_terms": [], "est_rel_error": 0.0}
    report = {"value_re": num(value.re, p), "value_im": num(value.im, p), **fields}
    if args.check:
        rp = p + 10
        if method == "xy":
            with working_context(precision_bits(rp)):
                base = Scalar._wrap(x.value + y.value, rp)
            ref = principal_power(base, Exponent(A.value, rp))
        else:
            ref = direct_pow(Scalar(z.value, rp), Exponent(A.value, rp))
        report["oracle_rel_err"] = _rel_err(value, ref)
    report["verdict"] = "ok"

    if cfg.output_format == "csv":
        row = dict(report)
        row["per_factor_terms"] = " ".join(str(n) for n in row["per_factor_terms"])
        _emit_table(list(row), [list(row.values())], "csv", out)
    else:
        out.write(dump_json(report) + "\n")
    return EXIT_OK


def cmd_coeffs(args, cfg: Config, out) -> int:
    if args.r < 1 or args.m < 0 or args.max_j < 0:
        raise UsageError("need r >= 1, m >= 0 and max-j >= 0")
    p = cfg.precision
    bits = precision_bits(p)
    rows = []
    for j in range(args.max_j + 1):
        b = b_coeff_exact(j, args.r, args.m)
        with working_context(bits):
            v = mpfr(gmpy2.mpq(b.numerator, b.denominator))
        rows.append([j, num(v, p), num(0, p)])
    fmt = "csv" if args.format is None else cfg.output_format
    _emit_table(["j", "b_re", "b_im"], rows, fmt, out)
    return EXIT_OK


def _scan_rows(records, p: int) -> list[list[str]]:
    rows = []
    for rec in records:
        value = rec.value
        ref = rec.reference
        rows.append([
            format_real(rec.z.re, p),
            format_real(rec.z.im, p),
            format_real(rec.A.value, p),
            "" if rec.m0 is None else str(rec.m0),
            rec.method_tag,
            "" if value is None else format_real(value.re, p),
            "" if value is None else format_real(value.im, p),
            "" if ref is None else format_real(ref.re, p),
            "" if ref is None else format_real(ref.im, p),
            _float_field(rec.rel_err),
            str(rec.terms_total),
            str(rec.wall_ns),
            rec.verdict,
        ])
    return rows


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a sibling temp file and a rename."""
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def cmd_scan(args, cfg: Config, out) -> int:
    p = cfg.precision
    A_values = [Exponent(parse_real(a), p) for a in args.A.split(",") if a.strip()]
    if not A_values:
        raise UsageError("--A needs at least one value")
    spec = GridSpec(parse_range(args.re), parse_range(args.im), tuple(A_values), cfg.tol)
    records = scan_grid(spec, args.method, p, cfg.max_terms, workers=args.workers)
    text = _csv_text(SCAN_HEADER, _scan_rows(records, p))
    try:
        write_atomic(Path(args.out), text)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_profile(args, cfg: Config, out) -> int:
    p = cfg.precision
    z = parse_complex(args.z, p)
    A = Exponent(parse_real(args.A), p)
    caps = parse_int_list(args.caps)
    if not caps or min(caps) < 1:
        raise UsageError("--caps needs positive integers")
    try:
        rows = profile_convergence(z, A, caps)
    except _NUMERIC_ERRORS as exc:
        return _fail(exc, out)
    fmt = "csv" if args.format is None else cfg.output_format
    _emit_table(["cap", "rel_err"], [[c, repr(e)] for c, e in rows], fmt, out)
    return EXIT_OK


# ----------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--precision", type=int, help="working precision in decimal digits")
    common.add_argument("--tol", type=float, help="relative tolerance")
    common.add_argument("--max-terms", type=int, dest="max_terms", help="term limit per series")
    common.add_argument("--depth", type=int, help="recursion depth for eq9 (default m0+2)")
    common.add_argument("--format", choices=["json", "csv"], help="output format")
    common.add_argument("--config", help=f"JSON config file (default ${CONFIG_ENV})")

    parser = _Parser(prog="cascade-pow", description="Evaluate (1+z)^A outside the unit disk.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ev = sub.add_parser("eval", parents=[common], help="evaluate (1+z)^A or (x+y)^A")
    ev.add_argument("--z", help="complex argument 're[,im]'")
    ev.add_argument("--A", required=True, help="real exponent")
    ev.add_argument("--method", default="cascade", choices=["cascade", "eq8", "eq9", "direct", "xy"])
    ev.add_argument("--x", help="x for --method xy")
    ev.add_argument("--y", help="y for --method xy")
    ev.add_argument("--check", action="store_true", help="report error against the direct oracle")
    ev.set_defaults(func=cmd_eval)

    co = sub.add_parser("coeffs", parents=[common], help="dump b(j, r, m) for j = 0..max-j")
    co.add_argument("--r", type=int, required=True)
    co.add_argument("--m", type=int, required=True)
    co.add_argument("--max-j", type=int, dest="max_j", required=True)
    co.set_defaults(func=cmd_coeffs)

    sc = sub.add_parser("scan", parents=[common], help="grid scan to a CSV file")
    sc.add_argument("--re", required=True, help="min:max:count")
    sc.add_argument("--im", required=True, help="min:max:count")
    sc.add_argument("--A", required=True, help="comma-separated exponents")
    sc.add_argument("--method", default="cascade", choices=["cascade", "eq8", "eq9"])
    sc.add_argument("--out", required=True, help="output CSV path")
    sc.add_argument("--workers", type=int, default=None, help="worker processes")
    sc.set_defaults(func=cmd_scan)

    pr = sub.add_parser("profile", parents=[common], help="error against per-factor term caps")
    pr.add_argument("--z", required=True)
    pr.add_argument("--A", required=True)
    pr.add_argument("--caps", required=True, help="comma-separated term caps")
    pr.set_defaults(func=cmd_profile)
    return parser


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg, out)
    except (UsageError, ValueError, TypeError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main_entry() -> None:
    sys.exit(main())
