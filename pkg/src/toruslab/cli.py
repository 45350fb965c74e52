"""Command-line front end: ``toruslab <group> <command> [options]``.

Output is rendered in memory and written only once the command has
succeeded, so a failing run leaves no partial file behind.  CSV outputs
begin with ``#`` lines recording the version, the resolved configuration
and the thread count; JSON outputs carry the same data under ``"run"``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from . import __version__
from .errors import AccuracyError, DomainError, ResourceError, ToruslabError

GROUPS = ("exponents", "lattice", "kernel", "mult", "weyl", "lab")
# options that describe the invocation rather than the computation
_PLUMBING = {"group", "command", "config", "emit", "no_timestamp", "format"}


class UsageError(DomainError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message} (see '{self.prog} --help')")


def fmt(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _float(s: str) -> float:
    """Decimal or ``p/q`` rational."""
    try:
        v = float(Fraction(s.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {s!r}")
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not finite: {s!r}")
    return v


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _vector(s: str) -> tuple:
    return tuple(_float(c) for c in s.split(","))


def _matrix(s: str) -> list:
    try:
        rows = [[int(c) for c in r.split(",")] for r in s.split(";")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"matrix entries must be integers: {s!r}")
    if any(len(r) != len(rows) for r in rows):
        raise argparse.ArgumentTypeError("matrix must be square, rows separated by ';'")
    return rows


# ------------------------------------------------------------------ output


class Output:
    def __init__(self, args, config: dict):
        self.args = args
        self.config = config

    def header_lines(self) -> list[str]:
        lines = [
            f"# toruslab {__version__}",
            f"# command: {self.args.group} {self.args.command}",
            "# config: " + json.dumps(self.config, sort_keys=True),
            "# threads: 1",
        ]
        if not self.args.no_timestamp:
            lines.append("# timestamp: " + datetime.now(timezone.utc).isoformat(timespec="seconds"))
        return lines

    def meta(self) -> dict:
        d = {"version": __version__, "command": f"{self.args.group} {self.args.command}",
             "config": self.config, "threads": 1}
        if not self.args.no_timestamp:
            d["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return d

    def csv(self, columns, rows, notes=()) -> str:
        buf = io.StringIO()
        buf.write("\n".join(self.header_lines() + [f"# {k}: {fmt(v)}" for k, v in notes]) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) for v in r])
        return buf.getvalue()

    def json(self, payload: dict) -> str:
        return json.dumps({"run": self.meta(), **payload}, indent=2, sort_keys=True, default=fmt) + "\n"


def _resolved(args) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items())
            if k not in _PLUMBING and k != "handler"}


# --------------------------------------------------------------- commands


def cmd_exponents_table(args, out):
    from .exponents import ExponentReport, exponent_table

    rows = [r.as_strings() for r in exponent_table(args.n_min, args.n_max, args.q_max)]
    if args.format == "json":
        return out.json({"rows": rows})
    return out.csv(ExponentReport.FIELDS, [[r[k] for k in ExponentReport.FIELDS] for r in rows])


def _coord_names(prefix, n):
    return [f"{prefix}{i + 1}" for i in range(n)]


def cmd_lattice_annulus(args, out):
    from .lattice import AnnulusSpec, enumerate_annulus

    pts = enumerate_annulus(AnnulusSpec(args.n, args.lam, args.rho), args.max_points)
    return out.csv(_coord_names("k", args.n), pts.points.tolist(), [("count", len(pts))])


def cmd_lattice_sphere(args, out):
    from .lattice import enumerate_sphere

    pts = enumerate_sphere(args.n, args.radius_sq, args.max_points)
    return out.csv(_coord_names("k", args.n), pts.points.tolist(), [("count", len(pts))])


def cmd_lattice_caps(args, out):
    from .lattice import AnnulusSpec, cap_cover, enumerate_annulus, max_cap_count

    pts = enumerate_annulus(AnnulusSpec(args.n, args.lam, args.rho), args.max_points)
    radius = args.cap_radius if args.cap_radius is not None else math.sqrt(args.rho * args.lam)
    cover = cap_cover(args.lam, radius, args.n, points=pts)
    count = max_cap_count(pts, cover)
    rows = [p + [int(c)] for p, c in zip(pts.points.tolist(), cover.assignment)]
    notes = [("caps", len(cover)), ("overlap", cover.overlap), ("max_count", count.max_count),
             ("ratio", count.ratio)]
    return out.csv(_coord_names("k", args.n) + ["cap"], rows, notes)


def cmd_kernel_compare(args, out):
    from .kernel import BumpSpec, compare_kernel

    bump = BumpSpec(inner=args.bump_inner, outer=args.bump_outer)
    samples = compare_kernel(args.n, args.lam, args.rho, args.samples, args.seed, bump,
                             args.truncation_radius, args.decay)
    cols = _coord_names("x", args.n) + ["direct_re", "direct_im", "poisson_re", "poisson_im",
                                        "envelope", "tail_estimate"]
    rows = [list(s.x) + [s.direct_value.real, s.direct_value.imag, s.poisson_value.real,
                         s.poisson_value.imag, s.envelope, s.tail_estimate] for s in samples]
    notes = [("max_discrepancy", max((s.discrepancy for s in samples), default=0.0))]
    return out.csv(cols, rows, notes)


def read_grid(path: str, n: int):
    """Grid CSV (``index,re,im`` with C-order flat indices) -> GridFunction."""
    from .multiplier import GridFunction

    data = {}
    with open(path, newline="") as fh:
        rows = csv.reader(line for line in fh if line.strip() and not line.startswith("#"))
        for row in rows:
            if row[0].strip() == "index":
                continue
            if len(row) != 3:
                raise DomainError(f"{path}: expected index,re,im rows")
            try:
                i, re, im = int(row[0]), float(row[1]), float(row[2])
            except ValueError:
                raise DomainError(f"{path}: malformed row {row}")
            if i in data:
                raise DomainError(f"{path}: duplicate index {i}")
            data[i] = complex(re, im)
    N = round(len(data) ** (1 / n)) if data else 0
    if N < 1 or N**n != len(data) or set(data) != set(range(N**n)):
        raise DomainError(f"{path}: indices must be exactly 0..N^{n}-1 for some N")
    samples = np.array([data[i] for i in range(N**n)]).reshape((N,) * n)
    return GridFunction(n, N, samples)


def cmd_mult_apply(args, out):
    from .kernel import BumpSpec
    from .multiplier import (ResolventPoint, apply_symbol, build_resolvent_symbol,
                             build_sharp_symbol, build_smooth_symbol)

    f = read_grid(args.input, args.n)
    if args.symbol == "smooth":
        m = build_smooth_symbol(args.lam, args.rho, BumpSpec(inner=args.bump_inner, outer=args.bump_outer),
                                args.n, max_points=args.max_points)
    elif args.symbol == "sharp":
        m = build_sharp_symbol(args.lam, args.rho, args.n, max_points=args.max_points)
    else:
        if args.mu is None:
            raise DomainError("--mu is required for the resolvent symbol")
        cutoff = args.cutoff if args.cutoff is not None else 4 * args.lam
        m = build_resolvent_symbol(ResolventPoint(args.lam, args.mu), cutoff, args.n,
                                   max_points=args.max_points)
    g = apply_symbol(m, f).samples.ravel()
    rows = ([i, v.real, v.imag] for i, v in enumerate(g))
    return out.csv(["index", "re", "im"], rows, [("grid", f.N), ("support", len(m))])


def _weyl_rho(args) -> float:
    if (args.rho is None) == (args.rho_exp is None):
        raise DomainError("give exactly one of --rho and --rho-exp")
    return args.rho if args.rho is not None else args.lam ** (-args.rho_exp)


def cmd_weyl_sum(args, out):
    from .weylsum import WeylSumConfig, truncated_weyl_sum

    cfg = WeylSumConfig(args.n, args.lam, _weyl_rho(args), args.x or (), args.sign,
                        args.truncation_radius, args.decay, max_terms=args.max_terms)
    s = truncated_weyl_sum(cfg)
    ratio = abs(s.value) / s.abs_sum if s.abs_sum else 0.0
    return out.csv(["value_re", "value_im", "abs_sum", "ratio", "terms", "rho", "truncation_radius"],
                   [[s.value.real, s.value.imag, s.abs_sum, ratio, s.terms, cfg.rho, cfg.radius]])


def cmd_weyl_hessian(args, out):
    from .weylsum import hessian_certificate

    c = hessian_certificate(args.Q, args.q, args.samples, args.threshold, args.radius, args.seed)
    n = len(args.Q)
    rows = [list(u) + [v] for u, v in zip(c.sample_points.tolist(), c.scaled_values.tolist())]
    notes = [("alpha", ",".join(map(str, c.alpha))), ("min_scaled", c.min_scaled),
             ("degenerate_count", len(c.degenerate_points))]
    return out.csv(_coord_names("u", n) + ["scaled_det"], rows, notes)


def cmd_weyl_cosets(args, out):
    from .weylsum import coset_decomposition, smith_normal_form

    cs = coset_decomposition(args.Q)
    D, _, _ = smith_normal_form(args.Q)
    n = len(args.Q)
    notes = [("det", cs.det), ("hnf", ";".join(",".join(map(str, r)) for r in cs.hnf.tolist())),
             ("smith_diagonal", ",".join(str(abs(int(D[i, i]))) for i in range(n)))]
    return out.csv(_coord_names("b", n), cs.representatives.tolist(), notes)


def cmd_lab_run(args, out):
    from .explab import scaling_sweep

    cfg = dict(args.lab_config)
    cfg["n"] = args.n
    if args.rho_exp is not None:
        cfg["rho_exp"] = args.rho_exp_text
    rep = scaling_sweep(args.experiment, args.lambda_grid, cfg, args.seed)
    if args.format == "csv":
        notes = [("fitted_slope", rep.fitted_slope), ("predicted_slope", rep.predicted_slope),
                 ("residual", rep.residual)]
        return out.csv(["lambda", "value"], rep.points, notes)
    return out.json(rep.as_dict())


# ----------------------------------------------------------------- parser


def _common(p, seed=False, budget=None):
    p.add_argument("--emit", "--out", "--output", dest="emit", help="output file (default stdout)")
    p.add_argument("--config", help="file of key = value lines overriding defaults")
    p.add_argument("--no-timestamp", action="store_true")
    p.add_argument("--threads", type=int, default=1, help="worker threads (only 1 is supported)")
    if seed:
        p.add_argument("--seed", type=_seed, default=0)
    if budget == "points":
        from .lattice import DEFAULT_MAX_POINTS
        p.add_argument("--max-points", type=int, default=DEFAULT_MAX_POINTS)
    elif budget == "terms":
        from .weylsum import DEFAULT_MAX_TERMS
        p.add_argument("--max-terms", type=int, default=DEFAULT_MAX_TERMS)


def _shell(p, rho=True):
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=_float, required=True)
    if rho:
        p.add_argument("--rho", type=_float, required=True)


def _bump(p):
    p.add_argument("--bump-inner", type=_float, default=1.0)
    p.add_argument("--bump-outer", type=_float, default=2.0)


def build_parser() -> _Parser:
    parser = _Parser(prog="toruslab", description="Spectral projector and lattice experiments on the torus.")
    parser.add_argument("--version", action="version", version=f"toruslab {__version__}")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)
    leaves = {}

    def leaf(group, name, handler, **kw):
        p = group.add_parser(name, **kw)
        p.set_defaults(handler=handler)
        leaves[(group_name[id(group)], name)] = p
        return p

    group_name = {}

    def new_group(name, help):
        g = groups.add_parser(name, help=help).add_subparsers(dest="command", required=True,
                                                              parser_class=_Parser)
        group_name[id(g)] = name
        return g

    g = new_group("exponents", "exact exponent tables")
    p = leaf(g, "table", cmd_exponents_table)
    p.add_argument("--n-min", type=int, default=3)
    p.add_argument("--n-max", type=int, default=12)
    p.add_argument("--q-max", type=int, default=30)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _common(p)

    g = new_group("lattice", "lattice point enumeration")
    p = leaf(g, "annulus", cmd_lattice_annulus)
    _shell(p)
    _common(p, budget="points")
    p = leaf(g, "sphere", cmd_lattice_sphere)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--radius-sq", type=int, required=True)
    _common(p, budget="points")
    p = leaf(g, "caps", cmd_lattice_caps)
    _shell(p)
    p.add_argument("--cap-radius", type=_float, default=None, help="default sqrt(rho*lambda)")
    _common(p, budget="points")

    g = new_group("kernel", "kernel evaluation")
    p = leaf(g, "compare", cmd_kernel_compare)
    _shell(p)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--truncation-radius", type=_float, default=None)
    p.add_argument("--decay", type=int, default=None, help="envelope exponent N")
    _bump(p)
    _common(p, seed=True)

    g = new_group("mult", "Fourier multipliers on grid functions")
    p = leaf(g, "apply", cmd_mult_apply)
    p.add_argument("--symbol", choices=("smooth", "sharp", "resolvent"), required=True)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--lambda", dest="lam", type=_float, required=True)
    p.add_argument("--rho", type=_float, default=0.5)
    p.add_argument("--mu", type=_float, default=None)
    p.add_argument("--cutoff", type=_float, default=None)
    p.add_argument("--input", required=True)
    _bump(p)
    _common(p, budget="points")

    g = new_group("weyl", "Weyl sums and Hessian certificates")
    p = leaf(g, "sum", cmd_weyl_sum)
    _shell(p, rho=False)
    p.add_argument("--rho", type=_float, default=None)
    p.add_argument("--rho-exp", type=_float, default=None, help="rho = lambda^(-rho_exp)")
    p.add_argument("--x", type=_vector, default=None)
    p.add_argument("--sign", type=int, choices=(1, -1), default=1)
    p.add_argument("--truncation-radius", type=_float, default=None)
    p.add_argument("--decay", type=int, default=None)
    _common(p, budget="terms")
    p = leaf(g, "hessian", cmd_weyl_hessian)
    p.add_argument("--Q", type=_matrix, required=True)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--threshold", type=_float, default=1e-8)
    p.add_argument("--radius", type=_float, default=1.0)
    _common(p, seed=True)
    p = leaf(g, "cosets", cmd_weyl_cosets)
    p.add_argument("--Q", type=_matrix, required=True)
    _common(p)

    g = new_group("lab", "scaling experiments")
    p = leaf(g, "run", cmd_lab_run)
    p.add_argument("--experiment", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--lambda", dest="lambda_grid", required=True, help="e.g. 8:256:geometric or 8,16,32,64")
    p.add_argument("--rho-exp", type=_float, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    _common(p, seed=True)

    parser.leaves = leaves
    return parser


def read_config(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DomainError(f"cannot read config {path}: {exc.strerror}")
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{no}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _config_path(argv):
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def _apply_config(parser, argv) -> dict:
    """Install config-file values as parser defaults (explicit flags still win).

    Returns the keys not matching any option; for ``lab run`` these are
    experiment parameters and are validated once the experiment is known.
    """
    path = _config_path(argv)
    if path is None or len(argv) < 2 or (argv[0], argv[1]) not in parser.leaves:
        return {}
    sub = parser.leaves[(argv[0], argv[1])]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults, extra = {}, {}
    for key, text in read_config(path).items():
        dest = {"lambda": "lam" if "lam" in actions else "lambda_grid"}.get(key, key)
        if dest not in actions:
            if argv[0] != "lab":
                raise DomainError(f"unknown config key {key!r} for {argv[0]} {argv[1]}")
            extra[key] = text
            continue
        a = actions[dest]
        if a.nargs == 0:
            defaults[dest] = text.lower() in ("1", "true", "yes")
            continue
        try:
            value = a.type(text) if a.type else text
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise DomainError(f"config key {key}: {exc}")
        if a.choices is not None and value not in a.choices:
            raise DomainError(f"config key {key}: {value!r} not in {list(a.choices)}")
        defaults[dest] = value
        a.required = False
        if dest == "rho_exp":
            defaults["rho_exp_text"] = text
    sub.set_defaults(**defaults)
    return extra


def _coerce(text: str, default, key: str):
    """Convert a config string to the type of the experiment default."""
    try:
        if isinstance(default, bool):
            return text.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise DomainError(f"config key {key}: cannot parse {text!r}")
    return text


def _rho_exp_text(argv):
    for i, a in enumerate(argv):
        if a == "--rho-exp" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--rho-exp="):
            return a.split("=", 1)[1]
    return None


def dispatch(argv=None, stdout=None, stderr=None) -> int:
    """Run one command; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        parser = build_parser()
        extra = _apply_config(parser, argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help / --version
            return int(exc.code or 0)
        if args.threads != 1:
            raise DomainError("only --threads 1 is supported; all computations are serial")
        if args.group == "lab":
            text = _rho_exp_text(argv) or getattr(args, "rho_exp_text", None)
            args.rho_exp_text = text
            from .explab import default_config
            if args.n is None:
                args.n = default_config(args.experiment)["n"]
            known = default_config(args.experiment, args.n)
            unknown = sorted(set(extra) - set(known))
            if unknown:
                raise DomainError(f"unknown config keys {unknown} for experiment {args.experiment}")
            extra = {k: _coerce(v, known[k], k) for k, v in extra.items()}
            args.lab_config = extra
        config = _resolved(args)
        config.pop("lab_config", None)
        config.pop("rho_exp_text", None)
        config.update(extra)
        text = args.handler(args, Output(args, config))
        if args.emit:
            with open(args.emit, "w", newline="") as fh:
                fh.write(text)
        else:
            stdout.write(text)
        return 0
    except ToruslabError as exc:
        print(f"toruslab: error: {exc}", file=stderr)
        return exc.exit_code
    except MemoryError:
        print("toruslab: error: out of memory", file=stderr)
        return ResourceError.exit_code
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"toruslab: error: {exc}", file=stderr)
        return AccuracyError.exit_code
    except OSError as exc:
        print(f"toruslab: error: {exc}", file=stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())
