"""Laplace transforms of open ASEP height increments and their KPZ limit.

The finite-N transform is computed three ways: by exact enumeration, by
Askey-Wilson integration (see :mod:`.identities`) and by integration over
the tangent process. The limit is a ratio of continuous dual Hahn
expectations, cross-checked by a Brownian reweighting estimator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..askey_wilson import TangentProcess
from ..asep import LaplaceSpec, ScalingInput, laplace_exact, stationary_exact
from ..cdh import CDHProcessParams, window_constant
from ..errors import ParameterError
from ..numerics import QuadSpec
from .convergence import make_report
from .joint import converge_aw, converge_cdh, merge_equal_times

__all__ = [
    "g_finite",
    "g_limit",
    "phi_tilde_n",
    "phi_n",
    "phi_limit",
    "phi_limit_parts",
    "OracleEstimate",
    "bld_oracle",
    "LaplaceSweep",
    "laplace_convergence",
    "EXACT_MAX_N",
]

EXACT_MAX_N = 14


def _check_r(spec: LaplaceSpec, r_vector) -> np.ndarray:
    r = np.asarray(r_vector, dtype=float)
    if r.shape[-1:] != (spec.d + 1,):
        raise ParameterError("r_vector must have length d + 1")
    return r


def g_finite(r_vector, spec: LaplaceSpec, n: int) -> float:
    """2^{-N} prod_k (cosh(s_k/sqrt N) + 1 - r_k/2N)^{n_k - n_{k-1}}, zero unless every r_k <= 4N.

    ``r_vector`` is (r_1, ..., r_{d+1}) matched with (s_1, ..., s_{d+1}).
    """
    r = _check_r(spec, r_vector)
    if np.any(r > 4.0 * n):
        return 0.0
    npts = spec.n_points(n)
    root_n = math.sqrt(n)
    total = 0.0
    for k in range(spec.d + 1):
        e = npts[k + 1] - npts[k]
        if e == 0:
            continue
        base = 0.5 * (math.cosh(spec.s[k] / root_n) + 1.0 - r[k] / (2.0 * n))
        if base <= 0.0:
            return 0.0
        total += e * math.log(base)
    # remaining 2^{-(N - n_{d+1} + n_0)} from the normalisation
    total -= (n - (npts[-1] - npts[0])) * math.log(2.0)
    return math.exp(total)


def g_limit(r_vector, spec: LaplaceSpec) -> float:
    """exp(1/4 sum_k (s_k^2 - r_k)(x_k - x_{k-1})) with x_{d+1} = 1."""
    r = _check_r(spec, r_vector)
    x = spec.x_full
    expo = sum((spec.s[k] ** 2 - r[k]) * (x[k + 1] - x[k]) for k in range(spec.d + 1))
    return math.exp(0.25 * expo)


def _tangent_factors(spec: LaplaceSpec, n: int):
    """Per-level factors ((cosh(s/sqrt N) + 1 - r/2N)/2)^e, ordered from s_{d+1} up to s_1."""
    npts = spec.n_points(n)
    root_n = math.sqrt(n)
    levels = []
    for k in range(spec.d, -1, -1):
        e = npts[k + 1] - npts[k]
        c = math.cosh(spec.s[k] / root_n)

        def f(r, c=c, e=e):
            base = 0.5 * (c + 1.0 - r / (2.0 * n))
            out = np.where(r <= 4.0 * n, np.abs(base) ** e, 0.0)
            return out

        levels.append((spec.s[k], e, f))
    return levels


def phi_tilde_n(si: ScalingInput, spec: LaplaceSpec, quad: QuadSpec | None = None, m_max: int | None = None) -> float:
    """N^{u+v} times the tangent-process expectation of the finite-N G function.

    The chain is anchored at the tangent marginal at s_{d+1} = 0 and moves
    forward in tangent time to s_d, ..., s_1. Leading levels whose factor
    is identically one are integrated out exactly (Chapman-Kolmogorov).
    """
    quad = quad or QuadSpec()
    n = si.n_sites
    proc = TangentProcess(si.u, si.v, si.w, si.r, n)
    for s in spec.s:
        proc.check_time(s)
    levels = _tangent_factors(spec, n)
    while len(levels) > 1 and levels[0][1] == 0:
        levels = levels[1:]
    times, funcs = merge_equal_times([s for s, _, _ in levels], [f for _, _, f in levels])
    pp = proc.process
    log_times = [-pp.kappa * s for s in times]
    if m_max is None:
        m_max = 1 << 16 if len(times) == 1 else 4096
    # the integrand lives on r = O(1/dx), i.e. theta = O(sqrt(1/(dx N))); start resolved
    x = spec.x_full
    dx = min(b - a for a, b in zip(x, x[1:]) if b > a)
    theta_c = 2.0 * math.asin(math.sqrt(min(1.0, 40.0 / (dx * n))))
    m0 = min(m_max // 2, max(32, 1 << math.ceil(math.log2(16.0 * math.pi / theta_c))))
    val = converge_aw(
        pp, log_times, funcs, direction="tangent", n_lattice=n, tol=quad.rel_tol, m0=m0, m_max=m_max
    ).value
    return math.exp((si.u + si.v) * math.log(n)) * val


def phi_n(si: ScalingInput, spec: LaplaceSpec, quad: QuadSpec | None = None) -> float:
    """Finite-N Laplace transform as the ratio phi_tilde(c) / phi_tilde(0)."""
    zero = LaplaceSpec(spec.x_points, tuple(0.0 for _ in spec.c_weights))
    return phi_tilde_n(si, spec, quad) / phi_tilde_n(si, zero, quad)


def _check_window(u: float, spec: LaplaceSpec, r: float | None, exploratory: bool) -> None:
    limit = window_constant(u, math.inf if r is None else r)
    if spec.s[0] >= limit and not exploratory:
        raise ParameterError(f"c_1 + ... + c_d must lie below the window constant {limit:g}")


def phi_limit_parts(u: float, v: float, spec: LaplaceSpec, quad: QuadSpec | None = None):
    """(numerator, denominator) of the limiting transform, as CDH expectations.

    numerator = E[exp(1/4 sum_{k=1}^{d+1} (s_k^2 - T_{s_k})(x_k - x_{k-1}))] over
    the process started from the unnormalised marginal at time 0 and run
    forward to s_d, ..., s_1; denominator = E[exp(-T_0/4)].
    """
    quad = quad or QuadSpec()
    pp = CDHProcessParams(u, v)
    x = spec.x_full
    funcs, times = [], []
    for k in range(spec.d, -1, -1):
        dx = x[k + 1] - x[k]
        s = spec.s[k]
        funcs.append(lambda T, s=s, dx=dx: np.exp(0.25 * (s * s - T) * dx))
        times.append(s)
    times, funcs = merge_equal_times(times, funcs)
    gaps = [b - a for a, b in zip(times, times[1:])]
    h0 = min([0.2] + [g / 4.0 for g in gaps])
    dx_pos = [b - a for a, b in zip(x, x[1:]) if b > a]
    z0 = math.sqrt(160.0 / min(dx_pos))
    tol = quad.rel_tol
    num = converge_cdh(pp, times, funcs, h0, z0, tol).value
    den = converge_cdh(pp, [0.0], [lambda T: np.exp(-0.25 * T)], 0.2, math.sqrt(160.0), tol).value
    return num, den


def phi_limit(
    u: float,
    v: float,
    spec: LaplaceSpec,
    quad: QuadSpec | None = None,
    r: float | None = None,
    exploratory: bool = False,
) -> float:
    """Limiting Laplace transform: ratio of continuous dual Hahn expectations.

    ``r`` (optional) tightens the admissible window to min(2u, 2r);
    ``exploratory=True`` evaluates outside the window without a guarantee.
    """
    if not u + v > 0:
        raise ParameterError("u + v must be positive")
    _check_window(u, spec, r, exploratory)
    num, den = phi_limit_parts(u, v, spec, quad)
    return num / den


# ----------------------------------------------------------- path oracle


@dataclass(frozen=True)
class OracleEstimate:
    estimate: float
    std_error: float
    ess: float
    n_paths: int


def bld_oracle(
    u: float,
    v: float,
    c: float,
    n_paths: int = 100_000,
    mesh: int = 2048,
    seed: int = 0,
    diffusivity: float = 0.5,
    batch: int = 2048,
) -> OracleEstimate:
    """Self-normalised importance sampling of E[exp(-c (H(1) - H(0)))].

    H(x) = B(x/2) + X(x) with B a standard Brownian motion independent of X,
    and X a Brownian path f reweighted by W(f) = exp(-2 v f(1)) (int_0^1 exp(-2 f))^{-(u+v)}.
    The proposal paths have variance ``diffusivity`` per unit length and are
    sampled on ``mesh`` steps; the time integral uses the trapezoid rule.
    Then E[exp(-c H(1))] = exp(c^2/4) E[exp(-c f(1)) W] / E[W].
    """
    if not u + v > 0:
        raise ParameterError("u + v must be positive")
    if n_paths < 2 or mesh < 1:
        raise ParameterError("need n_paths >= 2 and mesh >= 1")
    rng = np.random.default_rng(seed)
    step_sd = math.sqrt(diffusivity / mesh)
    logw = np.empty(n_paths)
    end = np.empty(n_paths)
    for lo in range(0, n_paths, batch):
        k = min(batch, n_paths - lo)
        inc = rng.standard_normal((k, mesh)) * step_sd
        path = np.cumsum(inc, axis=1)
        e = np.exp(-2.0 * path)
        # trapezoid with f(0) = 0
        integral = (0.5 * (1.0 + e[:, -1]) + e[:, :-1].sum(axis=1)) / mesh
        end[lo : lo + k] = path[:, -1]
        logw[lo : lo + k] = -2.0 * v * path[:, -1] - (u + v) * np.log(integral)
    w = np.exp(logw - logw.max())
    wsum = w.sum()
    ess = wsum**2 / np.sum(w * w)
    if ess < 0.05 * n_paths:
        warnings.warn(f"effective sample size {ess:.0f} is below 5% of {n_paths} paths", RuntimeWarning, stacklevel=2)
    y = np.exp(-c * end)
    ratio = float(np.sum(w * y) / wsum)
    se = float(math.sqrt(np.sum((w * (y - ratio)) ** 2)) / wsum)
    scale = math.exp(0.25 * c * c)
    return OracleEstimate(scale * ratio, scale * se, float(ess), n_paths)


# ------------------------------------------------------------- N sweeps


@dataclass(frozen=True)
class LaplaceSweep:
    """Finite-N transforms for several (w, r) pairs against one limit."""

    reports: dict
    limit_value: float
    mutual_gaps: tuple

    @property
    def gap_shrinks(self) -> bool:
        g = self.mutual_gaps
        return len(g) < 2 or g[-1] < g[0]


def laplace_convergence(
    u: float,
    v: float,
    spec: LaplaceSpec,
    n_list,
    wr_pairs=((1.0, 1.0), (1.5, 0.6)),
    quad: QuadSpec | None = None,
    mode: str = "auto",
    max_inversions: int = 1,
) -> LaplaceSweep:
    """phi^{(N)} for each (w, r) against phi_limit.

    ``mode="exact"`` uses enumeration of the stationary law (N <= 14),
    ``"tangent"`` the tangent-process integral, and ``"auto"`` picks exact
    enumeration where it is feasible.
    """
    if mode not in ("auto", "exact", "tangent"):
        raise ParameterError("mode must be 'auto', 'exact' or 'tangent'")
    n_list = tuple(int(n) for n in n_list)
    trivial = all(c == 0.0 for c in spec.c_weights)
    limit = 1.0 if trivial else phi_limit(u, v, spec, quad)
    reports = {}
    seqs = []
    for w, r in wr_pairs:
        vals = []
        for n in n_list:
            si = ScalingInput(u, v, w, r, n)
            use_exact = mode == "exact" or (mode == "auto" and n <= EXACT_MAX_N)
            if trivial:
                vals.append(1.0)
            elif use_exact:
                if n > EXACT_MAX_N:
                    raise ParameterError(f"exact enumeration is limited to N <= {EXACT_MAX_N}")
                model = si.model()
                vals.append(laplace_exact(model, spec, stationary_exact(model)))
            else:
                vals.append(phi_n(si, spec, quad))
        seqs.append(vals)
        reports[(w, r)] = make_report(f"laplace w={w:g} r={r:g}", n_list, vals, limit, 0.0, max_inversions)
    gaps = tuple(abs(a - b) for a, b in zip(seqs[0], seqs[-1])) if len(seqs) > 1 else ()
    return LaplaceSweep(reports, limit, gaps)
