"""Nested integration against Markov joint laws with continuous and atomic parts.

A joint law is described by a chain of levels, one per time point. Each
level carries a quadrature grid for the continuous part followed by the
atoms of the marginal at that time. Kernels map functions on one level to
functions on the previous one, so that

    E[f_0(X_0) f_1(X_1) ... f_m(X_m)] = mu_0 . (f_0 * K_0 (f_1 * K_1 (... f_m)))

with mu_0 the masses of the anchor level. Three chains are provided:
Askey-Wilson processes in forward time, the tangent process (Askey-Wilson
kernels reversed through Bayes' rule) and the continuous dual Hahn process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..askey_wilson import (
    AWParams,
    AWProcessParams,
    aw_measure,
    log_theta_weight,
    marginal_params,
    transition_logs,
)
from ..cdh import CDHProcessParams, cdh_marginal, cdh_marginal_density, cdh_measure, transition_params
from ..errors import NumericalError, ParameterError
from ..numerics import QuadResult, log_gamma, trapezoid_theta

__all__ = [
    "Level",
    "JointLawPlan",
    "aw_level",
    "aw_forward_weights",
    "aw_plan",
    "cdh_level",
    "cdh_plan",
    "converge_aw",
    "converge_cdh",
    "merge_equal_times",
]

ROOT_TOL = 1e-9


@dataclass(frozen=True)
class Level:
    """Support descriptor of one time point.

    The first ``n_grid`` entries of every array are quadrature nodes of the
    continuous part, the rest are atoms. ``density`` holds the marginal
    density at grid nodes (with respect to the grid variable) and the atom
    masses; ``quad_weights`` is one for atoms.
    """

    time: float
    log_roots: np.ndarray
    locations: np.ndarray
    density: np.ndarray
    quad_weights: np.ndarray
    n_grid: int

    @property
    def masses(self) -> np.ndarray:
        return self.density * self.quad_weights

    @property
    def n_nodes(self) -> int:
        return len(self.locations)


@dataclass(frozen=True)
class JointLawPlan:
    """Ordered levels and the kernels linking consecutive levels.

    ``kernels[k][i, j]`` is the mass moved from node i of level k to node j
    of level k+1, quadrature weight included.
    """

    times: tuple
    levels: tuple
    kernels: tuple
    direction: str

    def __post_init__(self):
        if len(self.kernels) != len(self.levels) - 1:
            raise ParameterError("need one kernel between consecutive levels")
        diffs = np.diff(self.times)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ParameterError("times must be strictly ordered")

    def expectation(self, funcs: Sequence[Callable]) -> float:
        """E[prod_k f_k(X_k)]; each f_k maps an array of locations to values."""
        if len(funcs) != len(self.levels):
            raise ParameterError("need one function per level")
        g = np.asarray(funcs[-1](self.levels[-1].locations), dtype=float)
        for k in range(len(self.levels) - 2, -1, -1):
            g = np.asarray(funcs[k](self.levels[k].locations), dtype=float) * (self.kernels[k] @ g)
        return float(self.levels[0].masses @ g)


def merge_equal_times(times, funcs, tol: float = 1e-14):
    """Collapse repeated time points by multiplying their functions."""
    out_t, out_f = [], []
    for t, f in zip(times, funcs):
        if out_t and abs(t - out_t[-1]) <= tol * max(1.0, abs(t)):
            prev = out_f[-1]
            out_f[-1] = lambda x, f1=prev, f2=f: f1(x) * f2(x)
        else:
            out_t.append(t)
            out_f.append(f)
    return out_t, out_f


# ------------------------------------------------------------ Askey-Wilson


def _match_root(roots: np.ndarray, root: complex) -> int:
    for k, z in enumerate(roots):
        dphase = (z.imag - root.imag + math.pi) % (2.0 * math.pi) - math.pi
        if abs(z.real - root.real) <= ROOT_TOL * max(1.0, abs(root.real)) and abs(dphase) < 1e-9:
            return k
    return -1


def aw_level(pp: AWProcessParams, log_time: float, m: int, coords: str = "aw", n_lattice: int | None = None) -> Level:
    """Trapezoid grid on [0, pi] with m panels plus the marginal atoms.

    ``coords="aw"`` reports locations cos(theta); ``"tangent"`` reports
    2N (1 - cos(theta)) with N = ``n_lattice``.
    """
    theta, wq = trapezoid_theta(m)
    logs = marginal_params(pp, log_time).logs
    la, sg = log_theta_weight(logs, theta, pp.kappa)
    dens = sg * np.exp(la)
    meas = aw_measure(AWParams(logs, pp.kappa), allow_multiple=True)
    atom_roots = np.array([a.log_root for a in meas.atoms], dtype=complex)
    atom_mass = np.array([a.mass for a in meas.atoms])
    roots = np.concatenate([1j * theta, atom_roots])
    if coords == "aw":
        locs = np.concatenate([np.cos(theta), [a.location for a in meas.atoms]])
    elif coords == "tangent":
        if n_lattice is None:
            raise ParameterError("tangent coordinates need the lattice size")
        n = n_lattice
        atom_locs = np.real(-n * np.expm1(atom_roots) ** 2 / np.exp(atom_roots))
        locs = np.concatenate([4.0 * n * np.sin(0.5 * theta) ** 2, atom_locs])
    else:
        raise ParameterError("coords must be 'aw' or 'tangent'")
    return Level(
        time=log_time,
        log_roots=roots,
        locations=locs,
        density=np.concatenate([dens, atom_mass]),
        quad_weights=np.concatenate([wq, np.ones(len(atom_mass))]),
        n_grid=m + 1,
    )


def aw_forward_weights(pp: AWProcessParams, src: Level, dst: Level) -> np.ndarray:
    """Forward transition weights from every node of ``src`` to ``dst``.

    Entry [i, j] is the theta-density of the transition law at grid node j,
    or the transition mass on atom j. Quadrature weights are not included.
    """
    if not src.time < dst.time:
        raise ParameterError("forward transitions need increasing time")
    kappa = pp.kappa
    ng = dst.n_grid
    theta_dst = dst.log_roots[:ng].imag
    logs = transition_logs(pp, src.time, dst.time, src.log_roots[:, None])
    # a and b do not depend on the source
    logs[0] = logs[0][:1, :1]
    logs[1] = logs[1][:1, :1]
    la, sg = log_theta_weight(logs, theta_dst[None, :], kappa)
    out = np.zeros((src.n_nodes, dst.n_nodes))
    out[:, :ng] = sg * np.exp(la)
    dst_atoms = dst.log_roots[ng:]
    full = transition_logs(pp, src.time, dst.time, src.log_roots)
    for i in range(src.n_nodes):
        li = tuple(complex(z[i]) for z in full)
        if not any(z.real > 1e-12 for z in li):
            continue
        for atom in aw_measure(AWParams(li, kappa), allow_multiple=True).atoms:
            if atom.mass == 0.0:
                continue
            k = _match_root(dst_atoms, atom.log_root)
            if k < 0:
                raise NumericalError("a transition atom lies outside the marginal support")
            out[i, ng + k] = atom.mass
    return out


def _aw_forward_kernel(pp, src: Level, dst: Level) -> np.ndarray:
    return aw_forward_weights(pp, src, dst) * dst.quad_weights[None, :]


def _aw_reversed_kernel(pp, src: Level, dst: Level) -> np.ndarray:
    """Bayes-reversed kernel: src is the later process time, dst the earlier.

    K[i, j] = F(j -> i) mu_dst[j] / rho_src[i], with F the forward weights,
    mu the marginal masses and rho the marginal density (or atom mass).
    """
    fwd = aw_forward_weights(pp, dst, src)
    dens = src.density
    with np.errstate(divide="ignore", invalid="ignore"):
        k = fwd.T * dst.masses[None, :] / dens[:, None]
    k[dens <= 0.0, :] = 0.0
    return k


def aw_plan(pp: AWProcessParams, log_times, m: int, direction: str = "forward", n_lattice: int | None = None) -> JointLawPlan:
    """Joint-law plan on a common trapezoid grid.

    ``direction="forward"`` chains process times in increasing order
    starting from the marginal at the earliest time. ``"tangent"`` chains
    decreasing process times (increasing tangent times) starting from the
    marginal at the latest process time, using reversed kernels, and
    reports tangent locations.
    """
    times = [float(t) for t in log_times]
    if direction == "forward":
        coords = "aw"
        make = _aw_forward_kernel
    elif direction == "tangent":
        coords = "tangent"
        make = _aw_reversed_kernel
    else:
        raise ParameterError("direction must be 'forward' or 'tangent'")
    levels = tuple(aw_level(pp, t, m, coords, n_lattice) for t in times)
    kernels = tuple(make(pp, a, b) for a, b in zip(levels[:-1], levels[1:]))
    return JointLawPlan(tuple(times), levels, kernels, direction)


def converge_aw(
    pp: AWProcessParams,
    log_times,
    funcs,
    direction: str = "forward",
    n_lattice: int | None = None,
    tol: float = 1e-11,
    m0: int = 32,
    m_max: int = 2048,
) -> QuadResult:
    """Grid doubling until two successive expectations agree to ``tol`` (relative)."""
    prev = None
    m = m0
    n_evals = 0
    while m <= m_max:
        val = aw_plan(pp, log_times, m, direction, n_lattice).expectation(funcs)
        n_evals += m + 1
        if prev is not None:
            err = abs(val - prev)
            if err <= tol * max(1.0, abs(val)):
                return QuadResult(val, err, n_evals, True, "")
        prev = val
        m *= 2
    raise NumericalError(
        "joint-law grid did not converge",
        result=QuadResult(prev, math.inf, n_evals, False, "grid limit reached"),
    )


# ------------------------------------------------------- continuous dual Hahn


def cdh_level(pp: CDHProcessParams, t: float, h: float, z_max: float) -> Level:
    """Grid x = z^2 with z on a uniform mesh of step h over [0, z_max], plus atoms.

    The marginal is the unnormalised continuous dual Hahn marginal; its
    density in z is even and analytic, so the trapezoid rule converges
    spectrally in h.
    """
    n = max(2, int(math.ceil(z_max / h)))
    z = np.arange(n + 1) * h
    wq = np.full(n + 1, h)
    wq[0] = 0.5 * h
    x = z * z
    dens = np.zeros(n + 1)
    dens[1:] = cdh_marginal_density(x[1:], t, pp) * 2.0 * z[1:]
    marg = cdh_marginal(t, pp)
    atom_locs = np.array([loc for loc, _ in marg.atoms])
    atom_mass = np.array([mass for _, mass in marg.atoms])
    return Level(
        time=t,
        log_roots=np.concatenate([z, np.zeros(len(atom_locs))]).astype(complex),
        locations=np.concatenate([x, atom_locs]),
        density=np.concatenate([dens, atom_mass]),
        quad_weights=np.concatenate([wq, np.ones(len(atom_locs))]),
        n_grid=n + 1,
    )


def _cdh_kernel(pp: CDHProcessParams, src: Level, dst: Level) -> np.ndarray:
    s, t = src.time, dst.time
    ng = dst.n_grid
    z_dst = dst.log_roots[:ng].real
    x_dst = z_dst * z_dst
    out = np.zeros((src.n_nodes, dst.n_nodes))
    # continuous sources: CDH(u - t/2, b, conj b) with b = (t-s)/2 + i sqrt(x)/2
    zs = src.log_roots[: src.n_grid].real
    live = np.nonzero(zs > 0)[0]
    if len(live) and ng > 1:
        a = pp.u - 0.5 * t
        iy = 0.5j * z_dst[None, 1:]
        lg_a = log_gamma(a + iy)
        log_rest = -math.log(8.0 * math.pi) - np.log(z_dst[1:]) - 2.0 * np.real(log_gamma(2.0 * iy))
        scale = 2.0 * z_dst[None, 1:] * dst.quad_weights[None, 1:ng]
        cols = np.arange(1, ng)
        # row blocks keep the complex temporaries to a few million entries
        step = max(1, (1 << 21) // max(ng, 1))
        for lo in range(0, len(live), step):
            rows = live[lo : lo + step]
            b = 0.5 * (t - s) + 0.5j * zs[rows]
            num = 2.0 * np.real(lg_a + log_gamma(b[:, None] + iy) + log_gamma(np.conj(b)[:, None] + iy))
            den = log_gamma(a + b) + log_gamma(a + np.conj(b)) + log_gamma(2.0 * b.real + 0j)
            logv = num - den.real[:, None] + log_rest
            # density in z: dx = 2 z dz
            out[np.ix_(rows, cols)] = np.exp(logv) * np.cos(den.imag)[:, None] * scale
        if ng < dst.n_nodes:
            for i in live:
                p = transition_params(s, t, ("c", float(zs[i] ** 2)), pp)
                _cdh_atoms_into(out, i, cdh_measure(p), dst)
    # atomic sources
    for idx in range(src.n_grid, src.n_nodes):
        loc = src.locations[idx]
        state = _cdh_atom_state(pp, s, loc)
        meas = cdh_measure(transition_params(s, t, state, pp))
        out[idx, 1:ng] = meas.density(x_dst[1:]) * 2.0 * z_dst[1:] * dst.quad_weights[1:ng]
        _cdh_atoms_into(out, idx, meas, dst)
    return out


def _cdh_atom_state(pp: CDHProcessParams, t: float, loc: float):
    for j in pp.u_atoms(t):
        if abs(-4.0 * (pp.u + j - 0.5 * t) ** 2 - loc) <= 1e-12 * max(1.0, abs(loc)):
            return ("u", j)
    for j in pp.v_atoms(t):
        if abs(-4.0 * (pp.v + j + 0.5 * t) ** 2 - loc) <= 1e-12 * max(1.0, abs(loc)):
            return ("v", j)
    raise NumericalError("atom location does not match the marginal atoms")


def _cdh_atoms_into(out, i, meas, dst: Level):
    ng = dst.n_grid
    for loc, mass in meas.atoms:
        if mass == 0.0:
            continue
        hit = np.nonzero(np.abs(dst.locations[ng:] - loc) <= 1e-10 * max(1.0, abs(loc)))[0]
        if len(hit) == 0:
            raise NumericalError("a transition atom lies outside the marginal support")
        out[i, ng + hit[0]] = mass


def cdh_plan(pp: CDHProcessParams, times, h: float, z_max: float) -> JointLawPlan:
    """Forward-time plan anchored at the (unnormalised) marginal at times[0]."""
    times = [float(t) for t in times]
    levels = tuple(cdh_level(pp, t, h, z_max) for t in times)
    kernels = tuple(_cdh_kernel(pp, a, b) for a, b in zip(levels[:-1], levels[1:]))
    return JointLawPlan(tuple(times), levels, kernels, "forward")


def converge_cdh(
    pp: CDHProcessParams,
    times,
    funcs,
    h0: float,
    z0: float,
    tol: float = 1e-11,
    max_rounds: int = 6,
    max_nodes: int = 6000,
) -> QuadResult:
    """Refine the step and extend the cutoff until both changes are below ``tol``.

    Kernels are dense, so a grid needing more than ``max_nodes`` points per
    level raises NumericalError instead of exhausting memory. Closely spaced
    times need a step comparable to their gap.
    """

    def plan(step, cut):
        if cut / step > max_nodes:
            raise NumericalError(
                f"continuous dual Hahn grid needs more than {max_nodes} nodes per level",
                result=QuadResult(base, err, 0, False, "node limit reached"),
            )
        return cdh_plan(pp, times, step, cut).expectation(funcs)

    h, z_max = h0, z0
    base, err = math.nan, math.inf
    base = plan(h, z_max)
    for _ in range(max_rounds):
        finer = plan(0.5 * h, z_max)
        longer = plan(h, 1.5 * z_max)
        err = max(abs(finer - base), abs(longer - base))
        scale = tol * max(1.0, abs(base))
        if err <= scale:
            return QuadResult(base, err, 0, True, "")
        if abs(finer - base) > scale:
            h *= 0.5
        if abs(longer - base) > scale:
            z_max *= 1.5
        base = plan(h, z_max)
    raise NumericalError(
        "continuous dual Hahn grid did not converge",
        result=QuadResult(base, err, 0, False, "refinement limit reached"),
    )
