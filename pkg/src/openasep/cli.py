"""Command-line front end: every computation writes one CSV or JSON table.

Exit status is 0 on success, 1 when inputs fail validation and 2 when a
numerical procedure fails. Errors are reported on stderr as one JSON record.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .asep import LaplaceSpec, ScalingInput, laplace_exact, mc_simulate, stationary_exact
from .askey_wilson import TangentProcess
from .cdh import CDHProcessParams, cdh_marginal, cdh_marginal_density
from .errors import NumericalError, OpenASEPError, ParameterError
from .limits import (
    atom_convergence,
    bld_oracle,
    bw_identity_check,
    laplace_identity_check,
    marginal_convergence,
    phi_limit,
    phi_n,
    transition_convergence,
)

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "OPENASEP_OUTPUT_DIR"


class _UsageError(ParameterError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


@dataclass
class RunConfig:
    """A validated invocation: what to run, with which bindings, written where."""

    subcommand: str
    params: dict
    output: str | None = None
    fmt: str = "csv"
    seed: int = 0
    tolerances: dict = field(default_factory=dict)


@dataclass
class Table:
    name: str
    columns: list
    rows: list


# ----------------------------------------------------------------- parsing


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise _UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise _UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _state(text: str):
    """Parse a process state: ``c:1.3``, ``v:0`` or ``u:1``."""
    kind, _, val = text.partition(":")
    if kind == "c":
        return ("c", float(val))
    if kind in ("u", "v"):
        return (kind, int(val))
    raise _UsageError(f"state must be c:<x>, u:<j> or v:<j>, got {text!r}")


def _add_exponents(p, with_wr: bool = True):
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--v", type=float, required=True)
    if with_wr:
        p.add_argument("--w", type=float, required=True)
        p.add_argument("--r", type=float, required=True)


def _add_common(p, default_fmt: str = "csv"):
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default=default_fmt)
    p.add_argument("--output", default=None, help=f"output file (relative paths go under ${OUTPUT_DIR_ENV})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rel-tol", type=float, default=1e-10)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="openasep", description="Open ASEP, Askey-Wilson and continuous dual Hahn computations.")
    parser.add_argument("--version", action="version", version=__version__)
    top = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    aw = top.add_parser("aw", help="tangent Askey-Wilson laws").add_subparsers(dest="op", required=True, parser_class=_Parser)
    p = aw.add_parser("density", help="tangent marginal density on a grid of y")
    _add_exponents(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--y-max", type=float, default=20.0)
    _add_common(p)
    p = aw.add_parser("atoms", help="tangent marginal atoms")
    _add_exponents(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=float, required=True)
    _add_common(p)

    cdh = top.add_parser("cdh", help="continuous dual Hahn process").add_subparsers(dest="op", required=True, parser_class=_Parser)
    p = cdh.add_parser("density", help="marginal density on a grid of x")
    _add_exponents(p, with_wr=False)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--x-max", type=float, default=20.0)
    _add_common(p)
    p = cdh.add_parser("atoms", help="marginal atoms")
    _add_exponents(p, with_wr=False)
    p.add_argument("--t", type=float, required=True)
    _add_common(p)

    chk = top.add_parser("check", help="exact finite-N identities").add_subparsers(dest="op", required=True, parser_class=_Parser)
    p = chk.add_parser("bw-identity", help="generating function against its Askey-Wilson integral")
    _add_exponents(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=_floats, required=True, help="comma-separated, ascending, length N")
    _add_common(p, "json")
    p = chk.add_parser("laplace-identity", help="height Laplace transform against its Askey-Wilson integral")
    _add_exponents(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=_floats, required=True)
    p.add_argument("--x", type=_floats, required=True)
    _add_common(p, "json")

    lim = top.add_parser("limit", help="scaling-limit sweeps").add_subparsers(dest="op", required=True, parser_class=_Parser)
    p = lim.add_parser("marginal")
    _add_exponents(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--n-list", type=_ints, default=[100, 1000, 10000, 100000, 1000000])
    _add_common(p)
    p = lim.add_parser("atom")
    _add_exponents(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--family", choices=("u", "v"), required=True)
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--n-list", type=_ints, default=[100, 1000, 10000, 100000, 1000000])
    _add_common(p)
    p = lim.add_parser("transition")
    _add_exponents(p)
    p.add_argument("--kind", choices=("cc", "dc_v", "dc_u", "dd_vv", "dd_uu", "cd"), required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--src", type=_state, required=True, help="c:<x>, u:<j> or v:<j>")
    p.add_argument("--dst", type=_state, required=True)
    p.add_argument("--n-list", type=_ints, default=[100, 1000, 10000, 100000, 1000000])
    _add_common(p)
    p = lim.add_parser("laplace", help="finite-N transform (tangent integration) against the limit")
    _add_exponents(p)
    p.add_argument("--c", type=_floats, required=True)
    p.add_argument("--x", type=_floats, required=True)
    p.add_argument("--n-list", type=_ints, default=[10, 100, 1000])
    _add_common(p)

    asep = top.add_parser("asep", help="open ASEP on N sites").add_subparsers(dest="op", required=True, parser_class=_Parser)
    p = asep.add_parser("stationary", help="exact stationary occupation profile")
    _add_exponents(p)
    p.add_argument("--n", type=int, required=True)
    _add_common(p)
    p = asep.add_parser("laplace", help="exact height Laplace transform")
    _add_exponents(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=_floats, required=True)
    p.add_argument("--x", type=_floats, required=True)
    _add_common(p, "json")
    p = asep.add_parser("simulate", help="Monte Carlo occupation profile")
    _add_exponents(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--burn-in", type=float, required=True)
    p.add_argument("--replicas", type=int, default=4)
    _add_common(p)

    kpz = top.add_parser("kpz", help="KPZ stationary Laplace transform").add_subparsers(dest="op", required=True, parser_class=_Parser)
    p = kpz.add_parser("phi", help="limit transform by continuous dual Hahn quadrature")
    _add_exponents(p, with_wr=False)
    p.add_argument("--c", type=_floats, required=True)
    p.add_argument("--x", type=_floats, required=True)
    p.add_argument("--exploratory", action="store_true", help="allow c outside the admissible window")
    _add_common(p, "json")
    p = kpz.add_parser("oracle", help="Brownian reweighting estimate of E[exp(-c H(1))]")
    _add_exponents(p, with_wr=False)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--mesh", type=int, default=2048)
    _add_common(p, "json")
    return parser


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    params = {
        k: v for k, v in vars(ns).items() if k not in ("group", "op", "fmt", "output", "seed", "rel_tol")
    }
    return RunConfig(
        subcommand=f"{ns.group} {ns.op}",
        params=params,
        output=ns.output,
        fmt=ns.fmt,
        seed=ns.seed,
        tolerances={"rel_tol": ns.rel_tol},
    )


# --------------------------------------------------------------- handlers


def _quad(cfg: RunConfig):
    from .numerics import QuadSpec

    return QuadSpec(rel_tol=cfg.tolerances["rel_tol"])


def _scaling(p) -> ScalingInput:
    return ScalingInput(p["u"], p["v"], p["w"], p["r"], p["n"])


def _spec(p) -> LaplaceSpec:
    return LaplaceSpec(tuple(p["x"]), tuple(p["c"]))


def _report_table(name, reports) -> Table:
    cols = ["label", "n", "finite_n_value", "limit_value", "rel_error", "fitted_exponent", "passed"]
    rows = []
    for rep in reports:
        for row in rep.rows():
            row.update(fitted_exponent=rep.fitted_exponent, passed=rep.passed)
            rows.append(row)
    return Table(name, cols, rows)


def _aw_density(cfg, p):
    proc = TangentProcess(p["u"], p["v"], p["w"], p["r"], p["n"])
    proc.check_time(p["t"])
    if p["grid"] < 1 or not 0 < p["y_max"] < 4 * p["n"]:
        raise ParameterError("need grid >= 1 and 0 < y-max < 4N")
    y = p["y_max"] * np.arange(1, p["grid"] + 1) / p["grid"]
    dens = proc.marginal_density(p["t"], y)
    return Table("aw_density", ["y", "density"], [{"y": a, "density": b} for a, b in zip(y, dens)])


def _aw_atoms(cfg, p):
    proc = TangentProcess(p["u"], p["v"], p["w"], p["r"], p["n"])
    rows = [{"family": a.family, "j": a.j, "location": a.location, "mass": a.mass} for a in proc.marginal_atoms(p["t"])]
    return Table("aw_atoms", ["family", "j", "location", "mass"], rows)


def _cdh_density(cfg, p):
    pp = CDHProcessParams(p["u"], p["v"])
    if p["grid"] < 1 or not p["x_max"] > 0:
        raise ParameterError("need grid >= 1 and x-max > 0")
    x = p["x_max"] * np.arange(1, p["grid"] + 1) / p["grid"]
    dens = cdh_marginal_density(x, p["t"], pp)
    return Table("cdh_density", ["x", "density"], [{"x": a, "density": b} for a, b in zip(x, dens)])


def _cdh_atoms(cfg, p):
    pp = CDHProcessParams(p["u"], p["v"])
    marg = cdh_marginal(p["t"], pp)
    rows = [{"location": loc, "mass": m} for loc, m in marg.atoms]
    return Table("cdh_atoms", ["location", "mass"], rows)


def _check_bw(cfg, p):
    res = bw_identity_check(_scaling(p), p["t"], _quad(cfg))
    return Table("identity_check", ["lhs", "rhs", "gap"], [res._asdict()])


def _check_laplace(cfg, p):
    res = laplace_identity_check(_scaling(p), _spec(p), _quad(cfg))
    return Table("identity_check", ["lhs", "rhs", "gap"], [res._asdict()])


def _limit_marginal(cfg, p):
    rep = marginal_convergence(p["u"], p["v"], p["w"], p["r"], p["t"], p["y"], p["n_list"])
    return _report_table("convergence_report", [rep])


def _limit_atom(cfg, p):
    reps = atom_convergence(p["u"], p["v"], p["w"], p["r"], p["t"], p["family"], p["j"], p["n_list"])
    return _report_table("convergence_report", reps)


def _limit_transition(cfg, p):
    rep = transition_convergence(
        p["kind"], p["u"], p["v"], p["w"], p["r"], p["s"], p["t"], p["src"], p["dst"], p["n_list"]
    )
    return _report_table("convergence_report", [rep])


def _limit_laplace(cfg, p):
    from .limits import make_report

    spec = _spec(p)
    quad = _quad(cfg)
    limit = phi_limit(p["u"], p["v"], spec, quad, r=p["r"])
    vals = [phi_n(ScalingInput(p["u"], p["v"], p["w"], p["r"], n), spec, quad) for n in p["n_list"]]
    rep = make_report(f"laplace w={p['w']:g} r={p['r']:g}", p["n_list"], vals, limit)
    return _report_table("convergence_report", [rep])


def _asep_stationary(cfg, p):
    dist = stationary_exact(_scaling(p).model())
    occ = dist.occupation()
    rows = [{"site": i + 1, "density": float(o)} for i, o in enumerate(occ)]
    return Table("occupation_profile", ["site", "density"], rows)


def _asep_laplace(cfg, p):
    val = laplace_exact(_scaling(p).model(), _spec(p))
    return Table("laplace_value", ["value"], [{"value": val}])


def _asep_simulate(cfg, p):
    if not p["horizon"] > p["burn_in"] > 0:
        raise ParameterError("need horizon > burn-in > 0")
    res = mc_simulate(_scaling(p).model(), p["horizon"], p["burn_in"], cfg.seed, n_replicas=p["replicas"])
    rows = [
        {"site": i + 1, "density": float(m), "std_error": float(s)}
        for i, (m, s) in enumerate(zip(res.occupation, res.occupation_se))
    ]
    return Table("occupation_profile_mc", ["site", "density", "std_error"], rows)


def _kpz_phi(cfg, p):
    val = phi_limit(p["u"], p["v"], _spec(p), _quad(cfg), exploratory=p["exploratory"])
    return Table("laplace_value", ["value"], [{"value": val}])


def _kpz_oracle(cfg, p):
    est = bld_oracle(p["u"], p["v"], p["c"], p["paths"], p["mesh"], cfg.seed)
    row = {"estimate": est.estimate, "std_error": est.std_error, "ess": est.ess, "n_paths": est.n_paths}
    return Table("oracle_estimate", list(row), [row])


HANDLERS = {
    "aw density": _aw_density,
    "aw atoms": _aw_atoms,
    "cdh density": _cdh_density,
    "cdh atoms": _cdh_atoms,
    "check bw-identity": _check_bw,
    "check laplace-identity": _check_laplace,
    "limit marginal": _limit_marginal,
    "limit atom": _limit_atom,
    "limit transition": _limit_transition,
    "limit laplace": _limit_laplace,
    "asep stationary": _asep_stationary,
    "asep laplace": _asep_laplace,
    "asep simulate": _asep_simulate,
    "kpz phi": _kpz_phi,
    "kpz oracle": _kpz_oracle,
}


# ----------------------------------------------------------------- output


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            raise NumericalError("non-finite value in output")
        return v
    return v


def render(table: Table, fmt: str) -> str:
    rows = [{c: _cell(row[c]) for c in table.columns} for row in table.rows]
    if fmt == "json":
        body = rows[0] if len(rows) == 1 else rows
        return json.dumps(body, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# openasep-schema: {table.name} v{SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row.values()])
    return buf.getvalue()


def _destination(output: str | None):
    if output is None:
        return None
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(output):
        return os.path.join(base, output)
    return output


def _fail(kind: str, exc: Exception, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")
    return code


def dispatch(argv=None) -> int:
    """Run one command; returns the process exit status."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
        table = HANDLERS[cfg.subcommand](cfg, cfg.params)
        text = render(table, cfg.fmt)
    except NumericalError as exc:
        return _fail("numerical", exc, 2)
    except (ParameterError, ValueError) as exc:
        return _fail("validation", exc, 1)
    except ArithmeticError as exc:
        return _fail("numerical", exc, 2)
    except OpenASEPError as exc:
        return _fail("numerical", exc, 2)
    dest = _destination(cfg.output)
    if dest is None:
        sys.stdout.write(text)
    else:
        parent = os.path.dirname(dest)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
