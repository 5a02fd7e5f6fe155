"""Command-line front end.

Exit codes: 0 success, 1 a checked invariant failed (pair not in convex
order, residual above --tol, negative slack), 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import io as mio
from .constants import figure1_table, k_rho, parse_grid
from .convex_order import check_cx
from .errors import DegeneratePair, MartwassError, NotInConvexOrder
from .examples import bj_example, bj_ratio, random_cx_pair, scaling_pair, triangle_example
from .itm import itm_coupling
from .measures import EUCLIDEAN, DiscreteMeasureND, NormSpec, as_nd
from .mot import m_rho_lp
from .transport import w_rho_1d, w_rho_nd
from .verify import CASES, SWEEP_HEADER, SweepConfig, sweep, verify_pair

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
SEED_MAX = 2**64 - 1


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    inputs: tuple
    rho: Optional[float]
    norm: NormSpec
    seed: Optional[int]
    out: Optional[str]
    tol: float
    threads: int
    fmt: str

    def __post_init__(self):
        if self.rho is not None and not self.rho >= 1:
            raise UsageError(f"--rho must be >= 1, got {self.rho}")
        if self.seed is not None and not 0 <= self.seed <= SEED_MAX:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CliConfig":
        rho = getattr(args, "rho", None)
        # verify takes a list of exponents; those are checked by SweepConfig
        if not isinstance(rho, float):
            rho = None
        inputs = tuple(getattr(args, k) for k in ("mu", "nu") if hasattr(args, k))
        return cls(args.command, inputs, rho, getattr(args, "norm", EUCLIDEAN),
                   getattr(args, "seed", None), args.out, args.tol, args.threads, args.format)


def _norm(text: str) -> NormSpec:
    try:
        return NormSpec.parse(text)
    except (ValueError, MartwassError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _rho(text: str) -> float:
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if not v >= 1:
        raise argparse.ArgumentTypeError(f"rho must be >= 1, got {text}")
    return v


def _rho_list(text: str) -> List[float]:
    return [_rho(t) for t in text.split(",") if t.strip()]


def _common(defaults: bool) -> argparse.ArgumentParser:
    # flags accepted both before and after the subcommand; the subcommand
    # copy uses SUPPRESS so it does not overwrite a value given earlier
    p = argparse.ArgumentParser(add_help=False,
                                argument_default=None if defaults else argparse.SUPPRESS)
    kw = (lambda v: {"default": v}) if defaults else (lambda v: {})
    p.add_argument("--tol", type=float, help="tolerance for invariant checks (default 1e-7)", **kw(1e-7))
    p.add_argument("--threads", type=int, help="worker threads for sweeps", **kw(1))
    p.add_argument("--out", help="write the main output to this file", **kw(None))
    p.add_argument("--format", choices=("csv", "json"), help="output format", **kw("csv"))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="martwass", parents=[_common(True)],
                                     description="Martingale optimal transport on discrete measures.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    common = _common(False)

    def pair_cmd(name, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("mu", help="first marginal (CSV or JSON)")
        p.add_argument("nu", help="second marginal (CSV or JSON)")
        return p

    p = pair_cmd("wasserstein", "W_rho between two measures")
    p.add_argument("--rho", type=_rho, required=True)
    p.add_argument("--norm", type=_norm, default=NormSpec(2.0))
    p.add_argument("--coupling", action="store_true", help="also print an optimal coupling")

    p = pair_cmd("mot", "M_rho by linear programming")
    p.add_argument("--rho", type=_rho, required=True)
    p.add_argument("--norm", type=_norm, default=NormSpec(2.0))

    p = pair_cmd("itm", "inverse-transform martingale coupling (1-D)")
    p.add_argument("--rho", type=_rho, required=True)
    p.add_argument("--q", choices=("comonotone", "conditioned-product"), default="comonotone")

    pair_cmd("cx-check", "test mu <=_cx nu")

    p = sub.add_parser("kappa", parents=[common], help="the constant K_rho and its bounds")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--rho", type=_rho)
    g.add_argument("--rho-grid", help="a:b:step, inclusive")
    p.add_argument("--gamma1-step", type=float, default=1e-4)

    p = sub.add_parser("example", parents=[common], help="worked examples with an inequality report")
    p.add_argument("name", choices=("bj", "triangle", "scaling"))
    p.add_argument("--n", type=int, default=10, help="size parameter (bj, triangle) or atom count (scaling)")
    p.add_argument("--theta", type=float, default=0.01)
    p.add_argument("--lambda", dest="lam", type=float, default=1e-3)
    p.add_argument("--rho", type=_rho, default=1.0)
    p.add_argument("--norm", type=_norm, default=NormSpec(2.0))
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify", parents=[common], help="sweep the inequality over random instances")
    p.add_argument("--case", action="append", choices=CASES, help="repeatable; default 1d")
    p.add_argument("--rho", type=_rho_list, default=[1.0], help="comma-separated list")
    p.add_argument("--seeds", type=int, default=10, help="number of seeds")
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--n-atoms", type=int, default=5)
    p.add_argument("--n-dilations", type=int, default=4)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--norm", type=_norm, default=NormSpec(2.0))
    return parser


# ------------------------------------------------------------------ output


class _Output:
    def __init__(self, fmt: str):
        self.fmt = fmt
        self.parts: List[str] = []

    def scalar(self, v):
        self.parts.append(mio.fmt(v) + "\n")

    def table(self, header, rows):
        self.parts.append(mio.table_to_csv(header, rows))

    def text(self) -> str:
        return "\n".join(self.parts)


def _summary_rows(d: dict):
    return [(k, v) for k, v in d.items()]


def _coupling_json(M):
    return {
        "rows": as_nd(M.row_marginal).points.tolist(),
        "cols": as_nd(M.col_marginal).points.tolist(),
        "triplets": [list(t) for t in M.triplets()],
    }


def _emit(cfg: CliConfig, summary: dict, coupling=None, tables=()) -> str:
    if cfg.fmt == "json":
        obj = dict(summary)
        if coupling is not None:
            obj["coupling"] = _coupling_json(coupling)
        for name, header, rows in tables:
            obj[name] = [dict(zip(header, r)) for r in rows]
        return json.dumps(mio.jsonable(obj), indent=2, sort_keys=False) + "\n"
    out = _Output("csv")
    out.table(("quantity", "value"), _summary_rows(summary))
    if coupling is not None:
        out.table(("i", "j", "weight"), coupling.triplets())
    for _, header, rows in tables:
        out.table(header, rows)
    return out.text()


# ---------------------------------------------------------------- commands


def _read_pair(args):
    try:
        return mio.read_measure(args.mu), mio.read_measure(args.nu)
    except OSError as exc:
        raise UsageError(str(exc)) from exc


def _is_1d(m):
    return as_nd(m).dim == 1


def cmd_wasserstein(args, cfg):
    mu, nu = _read_pair(args)
    if as_nd(mu).dim != as_nd(nu).dim:
        raise UsageError("measures live in different dimensions")
    if _is_1d(mu) and not args.coupling:
        value, M = w_rho_1d(mu, nu, args.rho), None
    else:
        value, M = w_rho_nd(mu, nu, args.rho, args.norm)
    if cfg.fmt == "json":
        return _emit(cfg, {"w_rho": value}, M if args.coupling else None), EXIT_OK
    out = _Output("csv")
    out.scalar(value)
    if args.coupling:
        out.table(("i", "j", "weight"), M.triplets())
    return out.text(), EXIT_OK


def cmd_mot(args, cfg):
    mu, nu = _read_pair(args)
    value, M = m_rho_lp(mu, nu, args.rho, args.norm)
    r, c = M.marginal_residuals()
    mres = M.martingale_residual()
    summary = {"m_rho": value, "m_rho_pow": value**args.rho, "row_residual": r,
               "col_residual": c, "martingale_residual": mres}
    code = EXIT_OK if max(r, c, mres) <= cfg.tol else EXIT_VIOLATION
    return _emit(cfg, summary, M), code


def cmd_itm(args, cfg):
    mu, nu = _read_pair(args)
    if not (_is_1d(mu) and _is_1d(nu)):
        raise UsageError("itm needs one-dimensional measures")
    M = itm_coupling(mu, nu, args.q)
    r, c = M.marginal_residuals()
    mres = M.martingale_residual()
    summary = {"q": args.q, "cost": M.cost(args.rho), "row_residual": r, "col_residual": c,
               "martingale_residual": mres}
    code = EXIT_OK if max(r, c, mres) <= cfg.tol else EXIT_VIOLATION
    return _emit(cfg, summary, M), code


def cmd_cx_check(args, cfg):
    mu, nu = _read_pair(args)
    if as_nd(mu).dim != as_nd(nu).dim:
        raise UsageError("measures live in different dimensions")
    rep = check_cx(mu, nu)
    summary = {"ordered": rep.ordered, "mean_gap": rep.mean_gap, "worst_violation": rep.worst_violation}
    return _emit(cfg, summary), EXIT_OK if rep.ordered else EXIT_VIOLATION


def cmd_kappa(args, cfg):
    header = ("rho", "K_lower", "K_est", "K_upper")
    if args.rho is not None:
        res = k_rho(args.rho, args.gamma1_step)
        if cfg.fmt == "json":
            return json.dumps(mio.jsonable(res.__dict__), indent=2) + "\n", EXIT_OK
        out = _Output("csv")
        out.scalar(res.K_est)
        return out.text(), EXIT_OK
    grid = parse_grid(args.rho_grid)
    if any(r <= 1.0 or r > 2.0 for r in grid):
        raise UsageError("the grid must lie in (1, 2]")
    rows = figure1_table(grid, args.gamma1_step)
    code = EXIT_OK if all(lo <= est <= up + 1e-6 for _, lo, est, up in rows) else EXIT_VIOLATION
    if cfg.fmt == "json":
        return json.dumps(mio.jsonable([dict(zip(header, r)) for r in rows]), indent=2) + "\n", code
    return mio.table_to_csv(header, rows), code


def cmd_example(args, cfg):
    rho, norm = args.rho, args.norm
    extra = {}
    if args.name == "bj":
        if args.n < 2 or not 0 <= args.theta < np.pi:
            raise UsageError("bj needs n >= 2 and theta in [0, pi)")
        mu, nu, _ = bj_example(args.n, args.theta, norm)
        rep = verify_pair(mu, nu, rho, norm, "nd")
        extra = {"theta_to_zero_ratio": bj_ratio(args.n, rho, norm)}
        params = {"n": args.n, "theta": args.theta}
    elif args.name == "triangle":
        if args.n < 2 or not args.lam > 0:
            raise UsageError("triangle needs n >= 2 and lambda > 0")
        mu, nu = triangle_example(args.n, args.lam)
        rep = verify_pair(mu, nu, rho, norm, "scaling", args.lam)
        params = {"n": args.n, "lambda": args.lam}
    else:
        if args.n < 1 or args.dim < 1 or args.lam < 0:
            raise UsageError("scaling needs n >= 1 atoms, dim >= 1 and lambda >= 0")
        if not 0 <= args.seed <= SEED_MAX:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        rng = np.random.default_rng(args.seed)
        mu = DiscreteMeasureND(rng.normal(size=(args.n, args.dim)), rng.dirichlet(np.ones(args.n)))
        nu, _ = scaling_pair(mu, args.lam)
        rep = verify_pair(mu, nu, rho, norm, "scaling", args.lam)
        params = {"n_atoms": args.n, "dim": args.dim, "lambda": args.lam, "seed": args.seed}
    obj = {"example": args.name, "parameters": params, "rho": rho, "norm": str(norm),
           "mu": mio.measure_to_json(mu), "nu": mio.measure_to_json(nu),
           "report": rep.to_dict(), **extra}
    code = EXIT_OK if rep.holds else EXIT_VIOLATION
    return json.dumps(mio.jsonable(obj), indent=2) + "\n", code


def cmd_verify(args, cfg):
    if args.seeds < 0:
        raise UsageError("--seeds must be >= 0")
    if not 0 <= args.seed <= SEED_MAX - max(args.seeds, 0):
        raise UsageError("--seed must be an unsigned 64-bit integer")
    conf = SweepConfig(cases=tuple(args.case or ["1d"]), rhos=tuple(args.rho),
                       seeds=tuple(range(args.seed, args.seed + args.seeds)),
                       n_atoms=args.n_atoms, n_dilations=args.n_dilations, dim=args.dim,
                       lam=args.lam, norm=args.norm)
    rows = sweep(conf, cfg.threads)
    bad = any(r[9] is not None and r[9] < -cfg.tol for r in rows)
    code = EXIT_VIOLATION if bad else EXIT_OK
    if cfg.fmt == "json":
        return json.dumps(mio.jsonable([dict(zip(SWEEP_HEADER, r)) for r in rows]), indent=2) + "\n", code
    return mio.table_to_csv(SWEEP_HEADER, rows), code


COMMANDS = {
    "wasserstein": cmd_wasserstein,
    "mot": cmd_mot,
    "itm": cmd_itm,
    "cx-check": cmd_cx_check,
    "kappa": cmd_kappa,
    "example": cmd_example,
    "verify": cmd_verify,
}


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = CliConfig.from_args(args)
        text, code = COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"martwass: error: {exc}", file=stderr)
        return EXIT_USAGE
    except NotInConvexOrder as exc:
        print(f"martwass: not in convex order: {exc}", file=stderr)
        return EXIT_VIOLATION
    except DegeneratePair as exc:
        print(f"martwass: degenerate pair: {exc}", file=stderr)
        return EXIT_VIOLATION
    except MartwassError as exc:
        print(f"martwass: error: {exc}", file=stderr)
        return EXIT_USAGE
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())
