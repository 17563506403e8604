"""Special functions and quadrature shared by the rest of the package.

Everything here is vectorised over numpy arrays and free of shared state.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .errors import NumericalError, ParameterError, PoleError

__all__ = [
    "log_gamma",
    "abs_gamma_sq",
    "log_abs_gamma_real",
    "bernoulli_number",
    "bernoulli_poly",
    "QuadSpec",
    "QuadResult",
    "quad_finite",
    "quad_semi_infinite",
    "trapezoid_theta",
    "theta_quad",
]

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# Stirling shift threshold and number of Bernoulli terms; with |z| >= 15 the
# first omitted term is below 1e-20.
_STIRLING_MIN = 15.0
_STIRLING_TERMS = 8


@lru_cache(maxsize=None)
def _bernoulli_fraction(n: int) -> Fraction:
    if n == 0:
        return Fraction(1)
    # sum_{k=0}^{n} C(n+1, k) B_k = 0
    acc = Fraction(0)
    for k in range(n):
        acc += comb(n + 1, k) * _bernoulli_fraction(k)
    return -acc / (n + 1)


def bernoulli_number(n: int) -> float:
    """Bernoulli number B_n with the convention B_1 = -1/2."""
    if n < 0:
        raise ParameterError("n must be nonnegative")
    return float(_bernoulli_fraction(n))


def bernoulli_poly(n: int, z):
    """Bernoulli polynomial B_n(z) = sum_k C(n, k) B_k z^(n-k).

    Parameters
    ----------
    n : int
        Degree, n >= 0.
    z : float, complex or array_like
        Evaluation point(s).

    Returns
    -------
    Same shape and kind as ``z``. ``bernoulli_poly(n, 0)`` is B_n.
    """
    if n < 0:
        raise ParameterError("n must be nonnegative")
    z = np.asarray(z)
    # Horner over the coefficients of z^n, z^(n-1), ..., z^0
    coeffs = [comb(n, k) * float(_bernoulli_fraction(k)) for k in range(n + 1)]
    out = np.zeros_like(z, dtype=np.result_type(z, float))
    for c in coeffs:
        out = out * z + c
    return out[()] if out.ndim == 0 else out


_STIRLING_COEFFS = np.array(
    [
        float(_bernoulli_fraction(2 * k)) / (2 * k * (2 * k - 1))
        for k in range(1, _STIRLING_TERMS + 1)
    ]
)


def _check_poles(z: np.ndarray) -> None:
    bad = (z.imag == 0) & (z.real <= 0) & (z.real == np.floor(z.real))
    if np.any(bad):
        raise PoleError(f"Gamma has a pole at {z[bad].ravel()[0].real:g}")


def log_gamma(z):
    """Log-Gamma on the complex plane.

    Uses the Stirling series after shifting the argument to Re z >= 15.
    The real part is exact to roughly machine precision; the imaginary
    part agrees with the principal branch modulo 2*pi.

    Parameters
    ----------
    z : complex or array_like
        Must avoid the nonpositive integers.

    Returns
    -------
    complex or ndarray of complex

    Raises
    ------
    PoleError
        If any entry of ``z`` is a nonpositive integer.
    """
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ParameterError("log_gamma requires finite arguments")
    _check_poles(z)
    shift = np.maximum(0, np.ceil(_STIRLING_MIN - z.real)).astype(np.int64)
    nmax = int(shift.max()) if shift.size else 0
    w = z + shift
    acc = np.zeros_like(z)
    for k in range(nmax):
        mask = k < shift
        acc = acc + np.where(mask, np.log(np.where(mask, z + k, 1.0)), 0.0)
    inv = 1.0 / w
    inv2 = inv * inv
    series = np.zeros_like(w)
    for c in _STIRLING_COEFFS[::-1]:
        series = series * inv2 + c
    out = (w - 0.5) * np.log(w) - w + LOG_SQRT_2PI + series * inv - acc
    return out[()] if out.ndim == 0 else out


def abs_gamma_sq(z):
    """|Gamma(z)|^2 computed as exp(2 Re log Gamma(z))."""
    out = np.exp(2.0 * np.real(log_gamma(z)))
    return out[()] if np.ndim(out) == 0 else out


def log_abs_gamma_real(x):
    """Return ``(sign, log|Gamma(x)|)`` for real, non-pole ``x``."""
    x = np.asarray(x, dtype=float)
    lg = np.real(log_gamma(x))
    sign = np.where(x > 0, 1.0, np.where(np.floor(-x) % 2 == 0, -1.0, 1.0))
    if np.ndim(lg) == 0:
        return float(sign), float(lg)
    return sign, lg


# ---------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class QuadSpec:
    """Tolerances for the adaptive integrators."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000
    tail_cutoff_tol: float = 1e-12

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.tail_cutoff_tol > 0):
            raise ParameterError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ParameterError("max_subdivisions must be at least 1")

    def target(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error: float
    n_evals: int
    converged: bool
    message: str = ""

    def __float__(self):
        return float(self.value)


# Gauss-Kronrod 7/15 nodes on [-1, 1] (nonnegative half).
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[[1, 3, 5]] = _WG[:3]
_GWEIGHTS[7] = _WG[3]
_GWEIGHTS[[9, 11, 13]] = _WG[2::-1]


def _call(f, x):
    # fall back to pointwise calls for integrands that are not vectorised
    try:
        y = np.asarray(f(x), dtype=float)
    except (TypeError, ValueError):
        y = None
    if y is None or y.shape != x.shape:
        y = np.array([float(f(xi)) for xi in x.ravel()]).reshape(x.shape)
    return y


def _gk_batch(g, lo, hi):
    """Apply the 15-point Kronrod rule and its embedded Gauss rule to many intervals."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    y = _call(g, x)
    if not np.all(np.isfinite(y)):
        raise NumericalError("integrand returned a non-finite value")
    k = half * (y @ _KWEIGHTS)
    gs = half * (y @ _GWEIGHTS)
    return k, np.abs(k - gs)


def _adaptive(g, lo: float, hi: float, spec: QuadSpec) -> QuadResult:
    los = np.array([lo], dtype=float)
    his = np.array([hi], dtype=float)
    vals, errs = _gk_batch(g, los, his)
    n_evals = 15
    done_val = 0.0
    done_err = 0.0
    while True:
        total = done_val + vals.sum()
        err = done_err + errs.sum()
        tol = spec.target(total)
        if err <= tol:
            return QuadResult(float(total), float(err), n_evals, True)
        if n_evals // 15 > spec.max_subdivisions or len(los) == 0:
            msg = f"no convergence after {n_evals // 15} interval evaluations"
            return QuadResult(float(total), float(err), n_evals, False, msg)
        # Intervals whose error is small relative to their share are retired.
        share = max(tol - done_err, 0.0) / len(los)
        split = errs > 0.5 * share
        if not split.any():
            split[:] = True
        done_val += vals[~split].sum()
        done_err += errs[~split].sum()
        los, his = los[split], his[split]
        mids = 0.5 * (los + his)
        los, his = np.concatenate([los, mids]), np.concatenate([mids, his])
        vals, errs = _gk_batch(g, los, his)
        n_evals += 15 * len(los)


def quad_finite(f, a: float, b: float, spec: QuadSpec | None = None) -> QuadResult:
    """Adaptive integral of ``f`` over (a, b).

    The substitution x = a + (b - a)(1 - cos phi)/2 absorbs inverse square
    root endpoint singularities before adaptive Gauss-Kronrod in phi.

    Parameters
    ----------
    f : callable
        Vectorised integrand ``f(x_array) -> array``; scalar callables also work.
    a, b : float
        Finite limits with a < b.
    spec : QuadSpec, optional

    Returns
    -------
    QuadResult
        ``converged`` is False when ``max_subdivisions`` ran out; the partial
        value and error estimate are still reported.
    """
    spec = spec or QuadSpec()
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise ParameterError("quad_finite requires finite a < b")
    half = 0.5 * (b - a)

    def g(phi):
        x = a + half * (1.0 - np.cos(phi))
        x = np.clip(x, np.nextafter(a, b), np.nextafter(b, a))
        return _call(f, x) * half * np.sin(phi)

    return _adaptive(g, 0.0, np.pi, spec)


def quad_semi_infinite(f, spec: QuadSpec | None = None, first: float = 1.0) -> QuadResult:
    """Integral of ``f`` over (0, inf) by progressive truncation.

    Integrates over [0, first], then over doubling panels, stopping once two
    consecutive panels each contribute less than ``spec.tail_cutoff_tol``.
    """
    spec = spec or QuadSpec()
    res = quad_finite(f, 0.0, first, spec)
    total, err, n_evals, ok = res.value, res.abs_error, res.n_evals, res.converged
    lo, small = first, 0
    for _ in range(80):
        hi = 2.0 * lo
        panel = quad_finite(f, lo, hi, spec)
        total += panel.value
        err += panel.abs_error
        n_evals += panel.n_evals
        ok = ok and panel.converged
        small = small + 1 if abs(panel.value) < spec.tail_cutoff_tol else 0
        lo = hi
        if small >= 2:
            msg = "" if ok else "a panel did not reach its tolerance"
            return QuadResult(total, err + spec.tail_cutoff_tol, n_evals, ok, msg)
    raise NumericalError("integrand tail does not decay", QuadResult(total, err, n_evals, False))


def trapezoid_theta(m: int):
    """Nodes and weights of the trapezoid rule with m panels on [0, pi].

    For integrands that are even and 2*pi-periodic in theta this rule is
    spectrally accurate, and grids with m and 2m panels are nested.
    """
    if m < 1:
        raise ParameterError("m must be positive")
    theta = np.linspace(0.0, np.pi, m + 1)
    w = np.full(m + 1, np.pi / m)
    w[0] = w[-1] = 0.5 * np.pi / m
    return theta, w


def theta_quad(g, spec: QuadSpec | None = None, m0: int = 32, m_max: int = 1 << 20) -> QuadResult:
    """Integrate an even, 2*pi-periodic ``g`` over [0, pi] by grid doubling.

    The error estimate is the difference between successive nested grids.
    """
    spec = spec or QuadSpec()
    m = m0
    theta, w = trapezoid_theta(m)
    vals = _call(g, theta)
    prev = float(vals @ w)
    n_evals = m + 1
    while 2 * m <= m_max:
        new_theta = (np.arange(m) + 0.5) * (np.pi / m)
        new_vals = _call(g, new_theta)
        n_evals += m
        merged = np.empty(2 * m + 1)
        merged[0::2] = vals
        merged[1::2] = new_vals
        vals, m = merged, 2 * m
        _, w = trapezoid_theta(m)
        cur = float(vals @ w)
        err = abs(cur - prev)
        if err <= spec.target(cur):
            return QuadResult(cur, err, n_evals, True)
        prev = cur
    return QuadResult(prev, err, n_evals, False, f"grid reached {m} panels")
