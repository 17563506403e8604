"""Askey-Wilson measures, the Askey-Wilson process and its tangent rescaling.

All parameters are carried as complex logarithms so that values extremely
close to 1 (q = exp(-2/sqrt(N)) with N up to 1e6) keep full relative
precision. A zero parameter is encoded by a log with real part ``-inf``.

The continuous part is handled in the angle variable x = cos(theta); the
weight in theta,

    w(theta) = K / (2 pi) * |(e^{2i theta}; q)_inf|^2 / prod_chi |(chi e^{i theta}; q)_inf|^2,

with K = (q, ab, ac, ad, bc, bd, cd; q)_inf / (abcd; q)_inf, is smooth, even
and 2 pi-periodic, so trapezoid grids in theta are spectrally accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateParameterError, ParameterError, SupportError
from .numerics import QuadSpec, theta_quad
from .qseries import ZERO_TOL, QParam, log_abs2_qpoch, log_qpoch_inf

__all__ = [
    "AWParams",
    "AWAtom",
    "AWMeasure",
    "aw_measure",
    "aw_density",
    "aw_atoms",
    "AWProcessParams",
    "aw_process_marginal",
    "aw_process_transition",
    "log_theta_weight",
    "TangentProcess",
    "TangentAtom",
    "TangentQuery",
    "tangent_marginal_density",
    "tangent_marginal_atoms",
    "tangent_transition",
]

NAMES = ("a", "b", "c", "d")
NEG_INF = complex(-np.inf, 0.0)
LOG_2PI = math.log(2.0 * math.pi)


def to_log(value) -> complex:
    value = complex(value)
    if value == 0:
        return NEG_INF
    return complex(np.log(value))


def from_log(logv: complex) -> complex:
    if np.isneginf(logv.real):
        return 0j
    return complex(np.exp(logv))


def _wrap(phase):
    return (np.asarray(phase) + np.pi) % (2.0 * np.pi) - np.pi


def _log_sum(*logs):
    """log of a product given logs, treating -inf as an exact zero factor."""
    total = 0j
    for lv in logs:
        if np.isneginf(lv.real):
            return NEG_INF
        total += lv
    return total


def _log1m(logx: complex) -> complex:
    """log(1 - x) for x = exp(logx), with exact zeros reported as -inf."""
    if np.isneginf(logx.real):
        return 0j
    f = -np.expm1(logx)
    if abs(f) < ZERO_TOL:
        return NEG_INF
    return complex(np.log(f))


def _log_diff(log_b: complex, log_c: complex) -> complex:
    """log(b - c) for b = exp(log_b), c = exp(log_c) nonzero."""
    if np.isneginf(log_b.real):
        return log_c + 1j * np.pi
    f = np.expm1(log_b - log_c)
    if abs(f) < ZERO_TOL:
        return NEG_INF
    return log_c + complex(np.log(f))


def _log_qpoch_finite(logx: complex, kappa: float, k: int) -> complex:
    return _log_sum(*[_log1m(logx - i * kappa) for i in range(k)]) if k else 0j


def _lq(logx, kappa):
    if np.isneginf(np.real(logx)):
        return 0j
    return complex(log_qpoch_inf(logx, kappa))


@dataclass(frozen=True)
class AWParams:
    """Askey-Wilson parameters (a, b, c, d) and q, stored as complex logs.

    The multiset {a, b, c, d} must be closed under complex conjugation.
    """

    logs: tuple
    kappa: float

    def __post_init__(self):
        logs = tuple(complex(z) for z in self.logs)
        if len(logs) != 4:
            raise ParameterError("Askey-Wilson measures take four parameters")
        if not self.kappa > 0:
            raise ParameterError("q must lie in (0, 1)")
        for z in logs:
            if np.isnan(z.real) or np.isnan(z.imag) or (np.isinf(z.real) and z.real > 0):
                raise ParameterError("parameters must be finite")
        logs = tuple(NEG_INF if np.isneginf(z.real) else complex(z.real, float(_wrap(z.imag))) for z in logs)
        object.__setattr__(self, "logs", logs)
        vals = [from_log(z) for z in logs]
        pool = list(vals)
        for z in vals:
            match = [i for i, p in enumerate(pool) if abs(p - z.conjugate()) <= 1e-12 * max(1.0, abs(z))]
            if not match:
                raise ParameterError("parameters must be closed under complex conjugation")
            pool.pop(match[0])

    @classmethod
    def from_values(cls, a, b, c, d, q: float) -> "AWParams":
        return cls(tuple(to_log(x) for x in (a, b, c, d)), QParam.from_q(q).kappa)

    @property
    def q(self) -> float:
        return math.exp(-self.kappa)

    @property
    def values(self) -> tuple:
        return tuple(from_log(z) for z in self.logs)


@dataclass(frozen=True)
class AWAtom:
    """A point mass at 0.5 (root + 1/root) with root = chi q^j, |root| > 1."""

    owner: str
    j: int
    location: float
    mass: float
    log_root: complex


def log_theta_weight(logs, theta, kappa: float):
    """Log of the continuous Askey-Wilson weight in the angle variable.

    Parameters
    ----------
    logs : sequence of four complex arrays
        Logs of (a, b, c, d); each broadcasts against ``theta``. Every slice
        must describe a conjugation-closed parameter set.
    theta : array_like
        Angles in [0, pi].
    kappa : float

    Returns
    -------
    log_abs, sign : ndarray
        w(theta) = sign * exp(log_abs).

    Raises
    ------
    DegenerateParameterError
        If (abcd; q)_inf vanishes.
    """
    theta = np.asarray(theta, dtype=float)
    raw = [np.asarray(z, dtype=complex) for z in logs]
    pshape = np.broadcast_shapes(*[z.shape for z in raw])
    logs = [np.broadcast_to(z, pshape) for z in raw]
    shape = np.broadcast_shapes(theta.shape, pshape)

    def lq(z):
        z = np.asarray(z, dtype=complex)
        live = ~np.isneginf(z.real)
        out = np.zeros(z.shape, dtype=complex)
        if live.any():
            out[live] = log_qpoch_inf(z[live], kappa)
        return out

    # the prefactor depends on the parameters only
    pref = lq(np.full(pshape, -kappa + 0j))
    for i in range(4):
        for k in range(i + 1, 4):
            pref = pref + lq(logs[i] + logs[k])
    denom = lq(logs[0] + logs[1] + logs[2] + logs[3])
    if np.any(np.isneginf(denom.real)):
        raise DegenerateParameterError("(abcd; q)_inf vanishes")
    pref = pref - denom
    log_abs = np.broadcast_to(pref.real, shape) - LOG_2PI + log_abs2_qpoch(0.0, 2.0 * theta, kappa)
    for z in raw:
        # evaluate on the smallest shape this parameter needs
        sub = np.broadcast_shapes(z.shape, theta.shape)
        z = np.broadcast_to(z, sub)
        th = np.broadcast_to(theta, sub)
        live = ~np.isneginf(z.real)
        if live.any():
            part = np.zeros(sub)
            part[live] = log_abs2_qpoch(z.real[live], z.imag[live] + th[live], kappa)
            log_abs = log_abs - part
    sign = np.where(np.isneginf(pref.real), 1.0, np.sign(np.cos(pref.imag)))
    return log_abs, np.broadcast_to(sign, shape)


def _theta_weight(logs, theta, kappa):
    log_abs, sign = log_theta_weight(logs, theta, kappa)
    with np.errstate(over="ignore"):
        return sign * np.exp(log_abs)


def _atom_log_masses(logs, owner: int, kappa: float):
    """Logs of the atom masses generated by parameter ``owner``."""
    la = logs[owner]
    rest = [logs[i] for i in range(4) if i != owner]
    if abs(la.imag) > 1e-12 and abs(abs(la.imag) - math.pi) > 1e-12:
        raise ParameterError("atoms require a real parameter of modulus > 1")
    n_atoms = 0
    while la.real - n_atoms * kappa > 1e-12:
        n_atoms += 1
    num = _log_sum(
        _lq(-2.0 * la, kappa),
        _lq(rest[0] + rest[1], kappa),
        _lq(rest[0] + rest[2], kappa),
        _lq(rest[1] + rest[2], kappa),
    )
    den_terms = [_lq(z - la, kappa) for z in rest] + [_lq(la + sum(rest), kappa)]
    if any(np.isneginf(z.real) for z in den_terms):
        raise DegenerateParameterError("an atom-mass denominator vanishes")
    log_m0 = num - sum(den_terms) if not np.isneginf(num.real) else NEG_INF
    out = []
    log_1ma2 = _log1m(2.0 * la)
    for j in range(n_atoms):
        if j == 0:
            out.append(log_m0)
            continue
        top = _log_sum(
            log_m0,
            _log_qpoch_finite(2.0 * la, kappa, j),
            *[_log_qpoch_finite(la + z, kappa, j) for z in rest],
            _log1m(2.0 * la - 2 * j * kappa),
        )
        bottom = _log_qpoch_finite(-kappa + 0j, kappa, j) + log_1ma2 + j * la
        for z in rest:
            for i in range(j):
                term = _log_diff(z, la - (i + 1) * kappa)
                if np.isneginf(term.real):
                    raise DegenerateParameterError("an atom-mass denominator vanishes")
                bottom += term
        out.append(NEG_INF if np.isneginf(top.real) else top - j * kappa - bottom)
    return out


def _location(log_root: complex) -> float:
    return float(np.real(0.5 * (np.exp(log_root) + np.exp(-log_root))))


def _mass_from_log(lm: complex) -> float:
    if np.isneginf(lm.real):
        return 0.0
    return float(np.exp(lm.real) * np.cos(lm.imag))


@dataclass(frozen=True)
class AWMeasure:
    """An Askey-Wilson probability measure: theta-weight on (-1, 1) plus atoms."""

    params: AWParams
    atoms: tuple = field(default_factory=tuple)

    @property
    def kappa(self) -> float:
        return self.params.kappa

    def theta_density(self, theta):
        """Continuous weight with respect to d(theta), x = cos(theta)."""
        out = _theta_weight(self.params.logs, theta, self.kappa)
        return out[()] if np.ndim(out) == 0 else out

    def density(self, x):
        """Continuous density with respect to dx; zero outside (-1, 1)."""
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) < 1.0
        theta = np.arccos(np.clip(x, -1.0, 1.0))
        out = np.zeros(x.shape)
        if inside.any():
            out[inside] = self.theta_density(theta[inside]) / np.sin(theta[inside])
        return out[()] if out.ndim == 0 else out

    def continuous_mass(self, spec: QuadSpec | None = None):
        return theta_quad(self.theta_density, spec)

    def total_mass(self, spec: QuadSpec | None = None) -> float:
        return self.continuous_mass(spec).value + sum(a.mass for a in self.atoms)

    def expect(self, f, spec: QuadSpec | None = None) -> float:
        """Integral of a vectorised ``f`` against the measure."""
        cont = theta_quad(lambda th: f(np.cos(th)) * self.theta_density(th), spec).value
        return cont + sum(a.mass * float(f(np.array(a.location))) for a in self.atoms)

    def atom_by_root(self, log_root: complex, tol: float = 1e-6):
        for atom in self.atoms:
            if abs(atom.log_root.real - log_root.real) <= tol * max(self.kappa, 1e-300) and abs(
                _wrap(atom.log_root.imag - log_root.imag)
            ) < 1e-6:
                return atom
        return None


def aw_measure(p: AWParams, allow_multiple: bool = False) -> AWMeasure:
    """Build the measure; atoms come from every parameter of modulus > 1.

    Two atom-generating parameters are rejected unless ``allow_multiple``;
    they only occur in transitions out of atoms, where a vanishing
    parameter product removes all but one family.
    """
    owners = [i for i, z in enumerate(p.logs) if z.real > 1e-12]
    if len(owners) > 1 and not allow_multiple:
        raise ParameterError("at most one parameter may exceed 1 in modulus")
    atoms = []
    for i in owners:
        for j, lm in enumerate(_atom_log_masses(p.logs, i, p.kappa)):
            root = p.logs[i] - j * p.kappa
            atoms.append(AWAtom(NAMES[i], j, _location(root), _mass_from_log(lm), root))
    return AWMeasure(p, tuple(atoms))


def aw_density(x, p: AWParams):
    """Continuous Askey-Wilson density at x (zero outside (-1, 1))."""
    return aw_measure(p).density(x)


def aw_atoms(p: AWParams) -> list:
    """Atoms of the Askey-Wilson measure; empty when every |parameter| <= 1."""
    return list(aw_measure(p).atoms)


# ------------------------------------------------------------------ process


@dataclass(frozen=True)
class AWProcessParams:
    """Process parameters (A, B, C, D) and q, stored as complex logs.

    ``from_exponents`` sets A = q^v, B = -q^w, C = q^u, D = -q^r.
    """

    logs: tuple
    kappa: float
    exponents: tuple | None = None

    @classmethod
    def from_values(cls, A, B, C, D, q: float) -> "AWProcessParams":
        if not A * C < 1:
            raise ParameterError("the process requires AC < 1")
        return cls(tuple(to_log(x) for x in (A, B, C, D)), QParam.from_q(q).kappa)

    @classmethod
    def from_exponents(cls, u: float, v: float, w: float, r: float, qp) -> "AWProcessParams":
        qp = qp if isinstance(qp, QParam) else QParam.from_q(float(qp))
        if not u + v > 0:
            raise ParameterError("u + v must be positive")
        k = qp.kappa
        logs = (complex(-k * v), complex(-k * w, np.pi), complex(-k * u), complex(-k * r, np.pi))
        return cls(logs, k, (u, v, w, r))

    @property
    def q(self) -> float:
        return math.exp(-self.kappa)


def marginal_params(pp: AWProcessParams, log_t: float) -> AWParams:
    h = 0.5 * log_t
    la, lb, lc, ld = pp.logs
    return AWParams((la + h, lb + h, lc - h, ld - h), pp.kappa)


def transition_logs(pp: AWProcessParams, log_s: float, log_t: float, log_z):
    """Unvalidated parameter logs of the transition; ``log_z`` may be an array."""
    h = 0.5 * log_t
    g = 0.5 * (log_s - log_t)
    la, lb = pp.logs[:2]
    log_z = np.asarray(log_z, dtype=complex)
    return [np.full(log_z.shape, la + h), np.full(log_z.shape, lb + h), g + log_z, g - log_z]


def transition_params(pp: AWProcessParams, log_s: float, log_t: float, log_z: complex) -> AWParams:
    """Parameters of the transition from state 0.5 (z + 1/z) at time s to time t."""
    return AWParams(tuple(complex(z) for z in transition_logs(pp, log_s, log_t, log_z)), pp.kappa)


def aw_process_marginal(t: float, pp: AWProcessParams) -> AWMeasure:
    """Marginal law at time t: AW(A sqrt t, B sqrt t, C / sqrt t, D / sqrt t)."""
    if not t > 0:
        raise ParameterError("time must be positive")
    return aw_measure(marginal_params(pp, math.log(t)))


def _state_log_root(x: float, marginal: AWMeasure) -> complex:
    if abs(x) <= 1.0:
        return complex(0.0, math.acos(x))
    for atom in marginal.atoms:
        if abs(atom.location - x) <= 1e-12 * max(1.0, abs(x)):
            return atom.log_root
    raise SupportError(f"x = {x} is not in the support of the time-s marginal")


def aw_process_transition(s: float, t: float, x: float, pp: AWProcessParams) -> AWMeasure:
    """Transition law from state x at time s to time t > s."""
    if not 0 < s < t:
        raise ParameterError("transitions require 0 < s < t")
    log_s, log_t = math.log(s), math.log(t)
    root = _state_log_root(x, aw_measure(marginal_params(pp, log_s)))
    return aw_measure(transition_params(pp, log_s, log_t, root), allow_multiple=abs(x) > 1.0)


# ------------------------------------------------------------------ tangent


@dataclass(frozen=True)
class TangentAtom:
    family: str
    j: int
    location: float
    mass: float
    log_root: complex


@dataclass(frozen=True)
class TangentProcess:
    """Time-reversed, rescaled process 2N (1 - Y_{q^s}) with q = exp(-2/sqrt(N)).

    Tangent time s corresponds to process time q^s. States are either
    ``("c", y)`` with y in (0, 4N) or ``("v", j)`` / ``("u", j)`` for atoms.
    """

    u: float
    v: float
    w: float
    r: float
    n: int

    def __post_init__(self):
        if not self.u + self.v > 0:
            raise ParameterError("u + v must be positive")
        if not (self.w > 0 and self.r > 0):
            raise ParameterError("w and r must be positive")
        if self.n < 1:
            raise ParameterError("N must be a positive integer")

    @property
    def qparam(self) -> QParam:
        return QParam.from_n(self.n)

    @property
    def kappa(self) -> float:
        return 2.0 / math.sqrt(self.n)

    @property
    def process(self) -> AWProcessParams:
        return AWProcessParams.from_exponents(self.u, self.v, self.w, self.r, self.qparam)

    def check_time(self, t: float) -> None:
        if not -2.0 * self.w < t < 2.0 * self.r:
            raise ParameterError("t must lie in (-2w, 2r)")

    def theta_of(self, y):
        """Angle with cos(theta) = 1 - y/2N, accurate for small y."""
        return 2.0 * np.arcsin(np.sqrt(np.asarray(y, dtype=float) / (4.0 * self.n)))

    def sin_theta_of(self, y):
        y = np.asarray(y, dtype=float)
        return np.sqrt((y / self.n) * (1.0 - y / (4.0 * self.n)))

    def y_of_root(self, log_root: complex) -> float:
        return float(np.real(-self.n * np.expm1(log_root) ** 2 / np.exp(log_root)))

    def marginal_measure(self, t: float) -> AWMeasure:
        self.check_time(t)
        return aw_measure(marginal_params(self.process, -self.kappa * t))

    def marginal_density(self, t: float, y):
        """(1/2N) times the process-time q^t density at 1 - y/2N; zero off (0, 4N)."""
        self.check_time(t)
        y = np.asarray(y, dtype=float)
        inside = (y > 0) & (y < 4.0 * self.n)
        out = np.zeros(y.shape)
        if inside.any():
            logs = marginal_params(self.process, -self.kappa * t).logs
            yi = y[inside]
            w = _theta_weight(logs, self.theta_of(yi), self.kappa)
            out[inside] = w / self.sin_theta_of(yi) / (2.0 * self.n)
        return out[()] if out.ndim == 0 else out

    def marginal_atoms(self, t: float) -> list:
        meas = self.marginal_measure(t)
        fam = {"a": "v", "c": "u"}
        out = []
        for atom in meas.atoms:
            if atom.owner not in fam:
                raise ParameterError("t must lie in (-2w, 2r)")
            out.append(TangentAtom(fam[atom.owner], atom.j, self.y_of_root(atom.log_root), atom.mass, atom.log_root))
        return out

    def _atom(self, t: float, family: str, j: int):
        for atom in self.marginal_atoms(t):
            if atom.family == family and atom.j == j:
                return atom
        return None

    def transition(self, s: float, t: float, src, dst) -> float:
        """Tangent transition weight from ``src`` at time s to ``dst`` at time t > s.

        Continuous destinations return a density in y; atomic destinations a
        mass. States outside the respective supports give 0.
        """
        self.check_time(s)
        self.check_time(t)
        if not s < t:
            raise ParameterError("transitions require s < t")
        pp = self.process
        log_s_aw, log_t_aw = -self.kappa * s, -self.kappa * t
        n = self.n

        # destination state at tangent time t = source of the forward AW step
        if dst[0] == "c":
            y = float(dst[1])
            if not 0.0 < y < 4.0 * n:
                return 0.0
            th_y = float(self.theta_of(y))
            dst_root = complex(0.0, th_y)
            dst_weight = float(self.marginal_density(t, y)) * 2.0 * n
            jac = 1.0 / (2.0 * n)
        else:
            atom = self._atom(t, dst[0], int(dst[1]))
            if atom is None:
                return 0.0
            dst_root, dst_weight, jac = atom.log_root, atom.mass, 1.0

        if src[0] == "c":
            x = float(src[1])
            if not 0.0 < x < 4.0 * n:
                return 0.0
            src_weight = float(self.marginal_density(s, x)) * 2.0 * n
        else:
            src_atom = self._atom(s, src[0], int(src[1]))
            if src_atom is None:
                return 0.0
            src_weight = src_atom.mass
        if src_weight <= 0.0:
            return 0.0

        fwd = transition_params(pp, log_t_aw, log_s_aw, dst_root)
        if src[0] == "c":
            th_x = self.theta_of(x)
            fwd_val = float(_theta_weight(fwd.logs, th_x, self.kappa)) / float(self.sin_theta_of(x))
        else:
            meas = aw_measure(fwd, allow_multiple=True)
            hit = meas.atom_by_root(src_atom.log_root)
            fwd_val = hit.mass if hit is not None else 0.0
        return jac * fwd_val * dst_weight / src_weight

    def transition_measure_mass(self, s: float, t: float, src, spec: QuadSpec | None = None) -> float:
        """Total mass of the tangent transition from ``src``: integral over y plus atoms."""
        self.check_time(s)
        self.check_time(t)
        pp = self.process
        log_s_aw, log_t_aw = -self.kappa * s, -self.kappa * t
        n = self.n
        marg_t = marginal_params(pp, log_t_aw)
        if src[0] == "c":
            x = float(src[1])
            th_x = float(self.theta_of(x))
            sin_x = float(self.sin_theta_of(x))
            src_weight = float(self.marginal_density(s, x)) * 2.0 * n

            def g(th):
                fwd_logs = transition_logs(pp, log_t_aw, log_s_aw, 1j * np.asarray(th))
                k = _theta_weight(fwd_logs, th_x, self.kappa)
                return k / sin_x * _theta_weight(marg_t.logs, th, self.kappa) / src_weight

        else:
            src_atom = self._atom(s, src[0], int(src[1]))
            if src_atom is None:
                raise SupportError("source atom is not in the support")
            src_weight = src_atom.mass

            def g(th):
                th = np.atleast_1d(th)
                vals = np.empty(th.shape)
                for i, angle in enumerate(th):
                    meas = aw_measure(transition_params(pp, log_t_aw, log_s_aw, complex(0.0, angle)), True)
                    hit = meas.atom_by_root(src_atom.log_root)
                    vals[i] = hit.mass if hit is not None else 0.0
                return vals * _theta_weight(marg_t.logs, th, self.kappa) / src_weight

        cont = theta_quad(g, spec).value
        atoms = sum(
            self.transition(s, t, src, (a.family, a.j)) for a in self.marginal_atoms(t)
        )
        return cont + atoms


@dataclass(frozen=True)
class TangentQuery:
    """A tangent-process evaluation point.

    ``y`` is a continuous location or ``None``; ``s`` is the earlier time
    for transition queries.
    """

    n: int
    u: float
    v: float
    w: float
    r: float
    t: float
    y: float | None = None
    s: float | None = None

    @property
    def process(self) -> TangentProcess:
        return TangentProcess(self.u, self.v, self.w, self.r, self.n)


def tangent_marginal_density(qry: TangentQuery) -> float:
    proc = qry.process
    if qry.y is None or not 0.0 < qry.y < 4.0 * qry.n:
        raise SupportError("y must lie in (0, 4N)")
    return float(proc.marginal_density(qry.t, qry.y))


def tangent_marginal_atoms(qry: TangentQuery) -> list:
    return [(a.location, a.mass) for a in qry.process.marginal_atoms(qry.t)]


def tangent_transition(qry: TangentQuery, src, dst) -> float:
    if qry.s is None:
        raise ParameterError("transition queries need an earlier time s")
    return qry.process.transition(qry.s, qry.t, src, dst)
