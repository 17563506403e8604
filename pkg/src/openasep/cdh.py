"""Continuous dual Hahn measures and the continuous dual Hahn process.

The measure CDH(a, b, c) has density

    |G(a + iy) G(b + iy) G(c + iy)|^2 / (8 pi G(a+b) G(a+c) G(b+c) sqrt(x) |G(2iy)|^2),

y = sqrt(x)/2, on x > 0, plus atoms at -4 (a + j)^2 when a < 0. All Gamma
products are evaluated in log space; a complex log-Gamma carries the sign
of real negative arguments in its imaginary part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ParameterError, SupportError
from .numerics import QuadSpec, log_gamma, quad_semi_infinite

__all__ = [
    "CDHParams",
    "CDHMeasure",
    "CDHProcessParams",
    "cdh_density",
    "cdh_atom_mass",
    "cdh_measure",
    "cdh_marginal",
    "cdh_marginal_density",
    "cdh_marginal_atom_mass",
    "cdh_transition",
    "window_constant",
    "atom_location_u",
    "atom_location_v",
]

_INT_TOL = 1e-12
LOG_8PI = math.log(8.0 * math.pi)


def _signed_exp(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.exp(z.real) * np.cos(z.imag)


def _poch(x: complex, j: int) -> complex:
    out = 1.0 + 0j
    for i in range(j):
        out *= x + i
    return out


@dataclass(frozen=True)
class CDHParams:
    """Parameters (a, b, c) of a continuous dual Hahn measure.

    ``case`` is 1 for a >= 0 (purely continuous), 2 for a < 0 with a
    continuous part and floor(-a)+1 atoms, and 3 for the purely atomic
    case a + b = -k. ``atom_set`` defaults to the points -4 (a + j)^2.
    """

    a: float
    b: complex
    c: complex
    atom_set: tuple | None = None
    case: int = field(init=False, default=0)

    def __post_init__(self):
        a, b, c = float(self.a), complex(self.b), complex(self.c)
        pair = abs(b.imag) > 0 or abs(c.imag) > 0
        if pair:
            if abs(b - c.conjugate()) > 1e-12 * max(1.0, abs(b)) or not b.real > 0:
                raise ParameterError("complex b, c must be a conjugate pair with positive real part")
        if not pair and abs(a + c.real - round(a + c.real)) < _INT_TOL and a + c.real <= 0 < a + b.real:
            b, c = c, b
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        if a >= 0:
            if not pair and not (b.real > 0 and c.real > 0):
                raise ParameterError("for a >= 0, b and c must be positive or a conjugate pair")
            case = 1
        elif pair or (a + b.real > 0 and a + c.real > 0):
            case = 2
        else:
            k = -(a + b.real)
            if not (k > -_INT_TOL and abs(k - round(k)) < _INT_TOL):
                raise ParameterError("inadmissible continuous dual Hahn parameters")
            if not (b.real > 0 and b.real + c.real > 0 and c.real - a > 0):
                raise ParameterError("purely atomic case needs b, b + c, c - a > 0")
            case = 3
        object.__setattr__(self, "case", case)
        if self.atom_set is not None:
            want = 0 if case == 1 else math.floor(-a) + 1
            if len(self.atom_set) != want:
                raise ParameterError(f"atom set must have {want} elements")

    @property
    def n_atoms(self) -> int:
        """Number of indices j carrying (possibly zero) mass."""
        if self.case == 1:
            return 0
        if self.case == 3:
            return int(round(-(self.a + self.b.real))) + 1
        return math.floor(-self.a) + 1

    def location(self, j: int) -> float:
        if self.atom_set is not None:
            return float(sorted(self.atom_set)[j])
        return -4.0 * (self.a + j) ** 2


def _log_norm(p: CDHParams) -> complex:
    return log_gamma(p.a + p.b) + log_gamma(p.a + p.c) + log_gamma(p.b + p.c)


def cdh_density(x, p: CDHParams):
    """Continuous CDH density; zero for x <= 0 and in the purely atomic case."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    pos = x > 0
    if p.case == 3 or not pos.any():
        return out[()] if out.ndim == 0 else out
    xs = x[pos]
    iy = 0.5j * np.sqrt(xs)
    num = sum(2.0 * np.real(log_gamma(z + iy)) for z in (p.a, p.b, p.c))
    den = _log_norm(p)
    logv = num - den.real - LOG_8PI - 0.5 * np.log(xs) - 2.0 * np.real(log_gamma(2.0 * iy))
    out[pos] = np.exp(logv) * np.cos(den.imag)
    return out[()] if out.ndim == 0 else out


def cdh_atom_mass(j: int, p: CDHParams) -> float:
    """Mass of the j-th atom, computed in log-Gamma space with sign tracking."""
    if p.case == 1 or not 0 <= j < p.n_atoms:
        raise ParameterError(f"atom index {j} out of range")
    a, b, c = p.a, p.b, p.c
    top = _poch(2 * a, j) * _poch(a + b, j) * _poch(a + c, j) * (a + j) * (-1) ** j
    bottom = _poch(1.0, j) * _poch(a - b + 1, j) * _poch(a - c + 1, j) * a
    if top == 0:
        return 0.0
    lg = log_gamma(b - a) + log_gamma(c - a) - log_gamma(-2.0 * a) - log_gamma(b + c)
    val = (top / bottom) * np.exp(lg)
    return float(val.real)


@dataclass(frozen=True)
class CDHMeasure:
    """Density on x > 0 (``None`` when absent) plus atoms ``(location, mass)``.

    ``normalized`` is False for the infinite-mass process marginals.
    """

    density: Callable | None
    atoms: tuple
    normalized: bool = True
    params: CDHParams | None = None

    def continuous_mass(self, spec: QuadSpec | None = None) -> float:
        if self.density is None:
            return 0.0
        if not self.normalized:
            raise ParameterError("the marginal has infinite mass")
        return quad_semi_infinite(self.density, spec).value

    def total_mass(self, spec: QuadSpec | None = None) -> float:
        return self.continuous_mass(spec) + sum(m for _, m in self.atoms)


def cdh_measure(p: CDHParams) -> CDHMeasure:
    atoms = tuple((p.location(j), cdh_atom_mass(j, p)) for j in range(p.n_atoms))
    dens = None if p.case == 3 else (lambda x, _p=p: cdh_density(x, _p))
    return CDHMeasure(dens, atoms, True, p)


# ------------------------------------------------------------------ process


def window_constant(u: float, r: float, convention: str = "laplace") -> float:
    """Upper end of the admissible time window.

    ``"laplace"`` uses 2 when u, r <= 0, 2r when u <= 0 < r and
    min(2u, 2r) when u, r > 0. ``"process"`` uses 2r when u <= 0 or
    u >= 1 and min(2u, 2r) for u in (0, 1).
    """
    if convention == "laplace":
        if u <= 0 and r <= 0:
            return 2.0
        if u <= 0:
            return 2.0 * r
        if r <= 0:
            raise ParameterError("no window is defined for u > 0 >= r")
        return min(2.0 * u, 2.0 * r)
    if convention == "process":
        if u <= 0 or u >= 1:
            return 2.0 * r
        return min(2.0 * u, 2.0 * r)
    raise ParameterError(f"unknown window convention {convention!r}")


def atom_location_u(u: float, t: float, j: int) -> float:
    return -4.0 * (u + j - 0.5 * t) ** 2


def atom_location_v(v: float, t: float, j: int) -> float:
    return -4.0 * (v + j + 0.5 * t) ** 2


@dataclass(frozen=True)
class CDHProcessParams:
    """Process exponents (u, v) with u + v > 0 and a time horizon.

    Times must lie in [0, horizon). The default horizon is unbounded; use
    :func:`window_constant` to impose one of the documented windows.
    """

    u: float
    v: float
    horizon: float = math.inf

    def __post_init__(self):
        if not self.u + self.v > 0:
            raise ParameterError("u + v must be positive")
        if not self.horizon > 0:
            raise ParameterError("the horizon must be positive")

    def check_time(self, t: float) -> None:
        if not 0.0 <= t < self.horizon:
            raise ParameterError(f"t must lie in [0, {self.horizon:g})")

    def u_atoms(self, t: float) -> list:
        a = self.u - 0.5 * t
        return list(range(math.floor(-a) + 1)) if a < 0 else []

    def v_atoms(self, t: float) -> list:
        a = self.v + 0.5 * t
        return list(range(math.floor(-a) + 1)) if a < 0 else []


def cdh_marginal_density(x, t: float, pp: CDHProcessParams):
    """Continuous part of the (infinite-mass) marginal at time t."""
    pp.check_time(t)
    u, v = pp.u, pp.v
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    pos = x > 0
    if pos.any():
        xs = x[pos]
        iy = 0.5j * np.sqrt(xs)
        logv = (
            2.0 * np.real(log_gamma(v + 0.5 * t + iy) + log_gamma(u - 0.5 * t + iy))
            - 0.5 * np.log(xs)
            - 2.0 * np.real(log_gamma(2.0 * iy))
        )
        out[pos] = (u + v + 1.0) * (u + v) / (8.0 * math.pi) * np.exp(logv)
    return out[()] if out.ndim == 0 else out


def cdh_marginal_atom_mass(family: str, j: int, t: float, pp: CDHProcessParams) -> float:
    """Mass of a marginal atom; ``family`` is ``"u"`` or ``"v"``.

    With (own, other) = (u - t/2, v + t/2) for u-atoms and
    (v + t/2, u - t/2) for v-atoms the mass is

        G(other - own) G(u + v + 2) / G(-2 own) * (own + j) [2 own, u + v]_j
        / (own [1, 1 + own - other]_j).
    """
    pp.check_time(t)
    u, v = pp.u, pp.v
    if family == "u":
        own, other, idx = u - 0.5 * t, v + 0.5 * t, pp.u_atoms(t)
    elif family == "v":
        own, other, idx = v + 0.5 * t, u - 0.5 * t, pp.v_atoms(t)
    else:
        raise ParameterError("family must be 'u' or 'v'")
    if j not in idx:
        raise SupportError(f"no {family}-atom with index {j} at time {t}")
    lg = log_gamma(other - own) + log_gamma(u + v + 2.0) - log_gamma(-2.0 * own)
    ratio = (own + j) * _poch(2 * own, j) * _poch(u + v, j) / (own * _poch(1.0, j) * _poch(1.0 + own - other, j))
    return float((ratio * np.exp(lg)).real)


def cdh_marginal(t: float, pp: CDHProcessParams) -> CDHMeasure:
    """Marginal at time t, flagged as unnormalised.

    Atoms are keyed by location; u-atoms appear iff u - t/2 < 0 and v-atoms
    iff v + t/2 < 0.
    """
    pp.check_time(t)
    atoms = [(atom_location_u(pp.u, t, j), cdh_marginal_atom_mass("u", j, t, pp)) for j in pp.u_atoms(t)]
    atoms += [(atom_location_v(pp.v, t, j), cdh_marginal_atom_mass("v", j, t, pp)) for j in pp.v_atoms(t)]
    return CDHMeasure(lambda x: cdh_marginal_density(x, t, pp), tuple(atoms), False, None)


def transition_params(s: float, t: float, src, pp: CDHProcessParams) -> CDHParams:
    """CDH parameters of the transition from ``src`` at time s to time t.

    ``src`` is ``("c", x)``, ``("u", j)`` or ``("v", j)``.
    """
    pp.check_time(s)
    pp.check_time(t)
    if not s < t:
        raise ParameterError("transitions require s < t")
    u, v = pp.u, pp.v
    kind, val = src
    if kind == "c":
        x = float(val)
        if not x > 0:
            raise SupportError("continuous states must be positive")
        b = complex(0.5 * (t - s), 0.5 * math.sqrt(x))
        return CDHParams(u - 0.5 * t, b, b.conjugate())
    j = int(val)
    if kind == "u":
        if j not in pp.u_atoms(s):
            raise SupportError(f"no u-atom with index {j} at time {s}")
        return CDHParams(u - 0.5 * t, -u + 0.5 * t - j, u + 0.5 * t - s + j)
    if kind == "v":
        if j not in pp.v_atoms(s):
            raise SupportError(f"no v-atom with index {j} at time {s}")
        return CDHParams(v + j + 0.5 * t, 0.5 * t - s - v - j, u - 0.5 * t)
    raise SupportError(f"unknown state kind {kind!r}")


def cdh_transition(s: float, t: float, src, pp: CDHProcessParams) -> CDHMeasure:
    """Transition law from ``src`` at time s to time t, a probability measure.

    Atoms of transitions from continuous states and u-atoms sit at the
    u-atoms of time t; those of transitions from v-atom j sit at the
    v-atoms j, j+1, ... of time t.
    """
    return cdh_measure(transition_params(s, t, src, pp))
