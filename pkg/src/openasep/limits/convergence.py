"""Sweeps of tangent Askey-Wilson laws toward their continuous dual Hahn limits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..askey_wilson import TangentProcess
from ..cdh import (
    CDHProcessParams,
    atom_location_u,
    atom_location_v,
    cdh_marginal_atom_mass,
    cdh_marginal_density,
    cdh_transition,
)
from ..errors import ParameterError, SupportError
from ..numerics import log_gamma

__all__ = [
    "ConvergenceReport",
    "DEFAULT_N_LIST",
    "scale_constant",
    "fit_exponent",
    "count_inversions",
    "make_report",
    "marginal_convergence",
    "atom_convergence",
    "transition_convergence",
    "TRANSITION_KINDS",
]

DEFAULT_N_LIST = (100, 1000, 10_000, 100_000, 1_000_000)
TRANSITION_KINDS = ("cc", "dc_v", "dc_u", "dd_vv", "dd_uu", "cd")


@dataclass(frozen=True)
class ConvergenceReport:
    """Finite-N values against a limit.

    ``rel_errors`` are relative errors, or absolute values when the limit is
    zero. ``fitted_exponent`` is the least-squares slope of log error
    against log N, so decay shows up as a negative number. ``passed``
    requires a slope at most ``-min_decay`` and at most ``max_inversions``
    increases in the error sequence.
    """

    label: str
    n_values: tuple
    finite_n_values: tuple
    limit_value: float
    rel_errors: tuple
    fitted_exponent: float
    passed: bool
    min_decay: float = 0.0
    max_inversions: int = 1

    def __post_init__(self):
        if not len(self.n_values) == len(self.finite_n_values) == len(self.rel_errors):
            raise ParameterError("report lists must have equal length")
        if any(e < 0 for e in self.rel_errors):
            raise ParameterError("errors must be nonnegative")

    @property
    def inversions(self) -> int:
        return count_inversions(self.rel_errors)

    def rows(self):
        """One dict per N, in the column order used by the CLI."""
        return [
            {"label": self.label, "n": n, "finite_n_value": f, "limit_value": self.limit_value, "rel_error": e}
            for n, f, e in zip(self.n_values, self.finite_n_values, self.rel_errors)
        ]


def scale_constant(u: float, v: float, w: float, r: float) -> float:
    """Gamma(u+v+w+r) / (Gamma(u+v+2) Gamma(w+r))."""
    val = log_gamma(u + v + w + r) - log_gamma(u + v + 2.0) - log_gamma(w + r)
    return float(np.exp(val.real) * np.cos(val.imag))


def count_inversions(errors) -> int:
    e = np.asarray(errors, dtype=float)
    return int(np.sum(np.diff(e) > 0))


def fit_exponent(n_values, errors, drop_first: bool = False) -> float:
    """Least-squares slope of log(error) against log(N); zero errors are skipped."""
    n = np.asarray(n_values, dtype=float)
    e = np.asarray(errors, dtype=float)
    if drop_first:
        n, e = n[1:], e[1:]
    keep = e > 0
    if keep.sum() < 2:
        return -math.inf
    return float(np.polyfit(np.log(n[keep]), np.log(e[keep]), 1)[0])


def make_report(
    label: str,
    n_values,
    values,
    limit: float,
    min_decay: float = 0.0,
    max_inversions: int = 1,
    drop_first: bool = False,
) -> ConvergenceReport:
    values = [float(x) for x in values]
    if limit == 0.0:
        errs = [abs(x) for x in values]
    else:
        errs = [abs(x / limit - 1.0) for x in values]
    slope = fit_exponent(n_values, errs, drop_first)
    passed = slope <= -min_decay and count_inversions(errs) <= max_inversions
    return ConvergenceReport(
        label, tuple(int(n) for n in n_values), tuple(values), float(limit), tuple(errs), slope, bool(passed),
        min_decay, max_inversions,
    )


def _n_list(n_list):
    n_list = tuple(int(n) for n in (n_list or DEFAULT_N_LIST))
    if not n_list or any(n < 1 for n in n_list) or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ParameterError("n_list must be increasing positive integers")
    return n_list


def marginal_convergence(u, v, w, r, t, y, n_list=None, min_decay: float = 0.3) -> ConvergenceReport:
    """N^{u+v} sqrt(1 - y/4N) times the tangent marginal density against C * CDH density."""
    n_list = _n_list(n_list)
    if not y > 0:
        raise SupportError("y must be positive")
    if not -2.0 * w < t < 2.0 * r:
        raise ParameterError("t must lie in (-2w, 2r)")
    limit = scale_constant(u, v, w, r) * float(cdh_marginal_density(y, t, CDHProcessParams(u, v)))
    vals = []
    for n in n_list:
        proc = TangentProcess(u, v, w, r, n)
        dens = float(proc.marginal_density(t, y))
        vals.append(math.exp((u + v) * math.log(n)) * math.sqrt(1.0 - y / (4.0 * n)) * dens)
    return make_report(f"marginal t={t:g} y={y:g}", n_list, vals, limit, min_decay)


def atom_convergence(u, v, w, r, t, family: str, j: int, n_list=None, min_decay: float = 0.3):
    """Reports (location, mass) for the j-th atom of the given family.

    The mass is scaled by N^{u+v} and compared with C times the continuous
    dual Hahn marginal atom.
    """
    n_list = _n_list(n_list)
    pp = CDHProcessParams(u, v)
    if family == "v":
        if not v + 0.5 * t < 0:
            raise SupportError("v-atoms need v + t/2 < 0")
        loc_lim = atom_location_v(v, t, j)
    elif family == "u":
        if not u - 0.5 * t < 0:
            raise SupportError("u-atoms need u - t/2 < 0")
        loc_lim = atom_location_u(u, t, j)
    else:
        raise ParameterError("family must be 'u' or 'v'")
    mass_lim = scale_constant(u, v, w, r) * cdh_marginal_atom_mass(family, j, t, pp)
    locs, masses = [], []
    for n in n_list:
        proc = TangentProcess(u, v, w, r, n)
        hit = [a for a in proc.marginal_atoms(t) if a.family == family and a.j == j]
        if not hit:
            raise SupportError(f"no {family}-atom with index {j} at N = {n}")
        locs.append(hit[0].location)
        masses.append(math.exp((u + v) * math.log(n)) * hit[0].mass)
    tag = f"{family}-atom j={j} t={t:g}"
    return (
        make_report(f"{tag} location", n_list, locs, loc_lim, min_decay),
        make_report(f"{tag} mass", n_list, masses, mass_lim, min_decay),
    )


def _cdh_limit(kind: str, s, t, src, dst, pp: CDHProcessParams) -> float:
    meas = cdh_transition(s, t, src, pp)
    if dst[0] == "c":
        return float(meas.density(float(dst[1])))
    fam, k = dst
    loc = atom_location_u(pp.u, t, k) if fam == "u" else atom_location_v(pp.v, t, k)
    for x, m in meas.atoms:
        if abs(x - loc) <= 1e-10 * max(1.0, abs(loc)):
            return float(m)
    return 0.0


_KIND_STATES = {
    "cc": ("c", "c"),
    "dc_v": ("v", "c"),
    "dc_u": ("u", "c"),
    "dd_vv": ("v", "v"),
    "dd_uu": ("u", "u"),
    "cd": ("c", "u"),
}


def transition_convergence(
    kind: str, u, v, w, r, s, t, src, dst, n_list=None, min_decay: float = 0.0
) -> ConvergenceReport:
    """Tangent transition weights against the continuous dual Hahn transition.

    ``src`` and ``dst`` are states ``("c", x)``, ``("v", j)`` or
    ``("u", j)`` whose kinds must match ``kind``. Continuous-to-continuous
    densities carry the factor sqrt(1 - y/4N). For ``dc_u`` the limit is
    zero and the errors are the finite-N values themselves.
    """
    if kind not in _KIND_STATES:
        raise ParameterError(f"kind must be one of {TRANSITION_KINDS}")
    want = _KIND_STATES[kind]
    if (src[0], dst[0]) != want:
        raise ParameterError(f"kind {kind} needs states of kinds {want}")
    if not s < t:
        raise ParameterError("transitions require s < t")
    for tt in (s, t):
        if not -2.0 * w < tt < 2.0 * r:
            raise ParameterError("t must lie in (-2w, 2r)")
    n_list = _n_list(n_list)
    pp = CDHProcessParams(u, v)
    limit = 0.0 if kind == "dc_u" else _cdh_limit(kind, s, t, src, dst, pp)
    vals = []
    for n in n_list:
        val = TangentProcess(u, v, w, r, n).transition(s, t, src, dst)
        if kind == "cc":
            val *= math.sqrt(1.0 - float(dst[1]) / (4.0 * n))
        vals.append(val)
    return make_report(f"transition {kind} s={s:g} t={t:g}", n_list, vals, limit, min_decay)
