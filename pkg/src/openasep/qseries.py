"""q-Pochhammer symbols: finite products, infinite products and small-kappa asymptotics.

Infinite products are computed as sums of logarithms, which stays accurate
for q close to 1 where tens of thousands of factors contribute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .numerics import bernoulli_number, bernoulli_poly, log_gamma

__all__ = [
    "QParam",
    "qpoch_finite",
    "qpoch_infinite",
    "log_qpoch_inf",
    "log_abs2_qpoch",
    "truncation_index",
    "a_plus",
    "a_minus",
    "log_qpoch_expansion",
    "ZERO_TOL",
]

# |1 - a q^j| below this is treated as an exact zero of the product.
ZERO_TOL = 1e-14
DEFAULT_TOL = 1e-16


@dataclass(frozen=True)
class QParam:
    """The base q = exp(-kappa), optionally tied to a lattice size by kappa = 2/sqrt(N)."""

    q: float
    kappa: float
    n_lattice: int | None = None

    def __post_init__(self):
        if not (0.0 < self.q < 1.0) or not self.kappa > 0:
            raise ParameterError("q must lie in (0, 1)")
        if abs(math.exp(-self.kappa) - self.q) > 1e-14 * max(1.0, self.q):
            raise ParameterError("q and kappa are inconsistent")
        if self.n_lattice is not None and abs(self.kappa - 2.0 / math.sqrt(self.n_lattice)) > 1e-14:
            raise ParameterError("kappa must equal 2/sqrt(N)")

    @classmethod
    def from_q(cls, q: float) -> "QParam":
        if not 0.0 < q < 1.0:
            raise ParameterError("q must lie in (0, 1)")
        return cls(q, -math.log(q))

    @classmethod
    def from_kappa(cls, kappa: float) -> "QParam":
        if not kappa > 0:
            raise ParameterError("kappa must be positive")
        return cls(math.exp(-kappa), kappa)

    @classmethod
    def from_n(cls, n: int) -> "QParam":
        if n < 1:
            raise ParameterError("N must be a positive integer")
        kappa = 2.0 / math.sqrt(n)
        return cls(math.exp(-kappa), kappa, int(n))


def _as_qparam(qp) -> QParam:
    return qp if isinstance(qp, QParam) else QParam.from_q(float(qp))


def qpoch_finite(a, qp, k: int):
    """(a; q)_k = prod_{j<k} (1 - a q^j); equals 1 for k = 0."""
    if k < 0:
        raise ParameterError("k must be nonnegative")
    qp = _as_qparam(qp)
    a = np.asarray(a)
    powers = qp.q ** np.arange(k)
    out = np.prod(1.0 - a[..., None] * powers, axis=-1)
    return out[()] if out.ndim == 0 else out


def truncation_index(abs_a: float, kappa: float, tol: float = DEFAULT_TOL) -> int:
    """Smallest J with sum_{j>=J} |a| q^j / (1 - |a| q^j) < tol.

    That sum bounds the modulus of the neglected logarithmic tail.
    """
    if abs_a == 0.0:
        return 0
    q = math.exp(-kappa)
    one_minus_q = -math.expm1(-kappa)
    # Need x = |a| q^J <= 1/2 and x / ((1 - q)(1 - x)) < tol; x <= tol(1-q)/2 suffices.
    target = min(0.5, 0.5 * tol * one_minus_q)
    j = math.ceil((math.log(abs_a) - math.log(target)) / kappa)
    j = max(j, 0)
    while abs_a * q**j / (one_minus_q * (1.0 - abs_a * q**j)) >= tol:
        j += 1
    return j


def _block_rows(n_rows: int, n_cols: int, budget: int = 1 << 22) -> int:
    return max(1, budget // max(n_cols, 1))


def log_qpoch_inf(loga, kappa: float, tol: float = DEFAULT_TOL):
    """log (a; q)_inf for a = exp(loga), q = exp(-kappa).

    Parameters
    ----------
    loga : complex or array_like
        Complex logarithm of ``a``; ``-inf`` encodes a = 0.
    kappa : float
        -log q.
    tol : float
        Bound on the neglected tail of the log-sum.

    Returns
    -------
    complex or ndarray
        The real part is log|(a; q)_inf|, the imaginary part an argument
        (mod 2 pi). Exact zeros (|1 - a q^j| < ZERO_TOL) give ``-inf``.
    """
    loga = np.asarray(loga, dtype=complex)
    flat = loga.ravel()
    out = np.zeros(flat.shape, dtype=complex)
    live = np.isfinite(flat.real)
    if live.any():
        abs_max = float(np.exp(flat.real[live].max()))
        n_terms = truncation_index(abs_max, kappa, tol)
        idx = np.nonzero(live)[0]
        jk = np.arange(n_terms) * kappa
        step = _block_rows(len(idx), n_terms)
        for s in range(0, len(idx), step):
            sel = idx[s : s + step]
            factors = -np.expm1(flat[sel, None] - jk[None, :])
            mod = np.abs(factors)
            zero = (mod < ZERO_TOL).any(axis=1)
            with np.errstate(divide="ignore"):
                logs = np.log(factors)
            if len(sel) == 1 and not zero[0]:
                row = logs[0]
                out[sel[0]] = complex(math.fsum(row.real), math.fsum(row.imag))
            else:
                out[sel] = logs.sum(axis=1)
            out[sel[zero]] = -np.inf
    out = out.reshape(loga.shape)
    return out[()] if out.ndim == 0 else out


def log_abs2_qpoch(log_mod, phase, kappa: float, tol: float = DEFAULT_TOL):
    """log |(a; q)_inf|^2 for a = exp(log_mod + i phase).

    Each factor is |1 - a q^j|^2 = expm1(l_j)^2 + 4 exp(l_j) sin^2(phase/2)
    with l_j = log_mod - j kappa, which stays accurate when a q^j is close to 1.
    Arrays broadcast against each other.
    """
    log_mod, phase = np.broadcast_arrays(
        np.asarray(log_mod, dtype=float), np.asarray(phase, dtype=float)
    )
    shape = log_mod.shape
    lm, ph = log_mod.ravel(), phase.ravel()
    out = np.zeros(lm.shape)
    live = np.isfinite(lm)
    if live.any():
        n_terms = truncation_index(float(np.exp(lm[live].max())), kappa, tol)
        jk = np.arange(n_terms) * kappa
        idx = np.nonzero(live)[0]
        step = _block_rows(len(idx), n_terms)
        for s in range(0, len(idx), step):
            sel = idx[s : s + step]
            ell = lm[sel, None] - jk[None, :]
            sin2 = np.sin(0.5 * ph[sel])[:, None] ** 2
            terms = np.expm1(ell) ** 2 + 4.0 * np.exp(ell) * sin2
            with np.errstate(divide="ignore"):
                logs = np.log(terms)
            out[sel] = logs.sum(axis=1)
            zero = (terms < ZERO_TOL**2).any(axis=1)
            out[sel[zero]] = -np.inf
    out = out.reshape(shape)
    return out[()] if out.ndim == 0 else out


def qpoch_infinite(a, qp, tol: float = DEFAULT_TOL):
    """(a; q)_inf, truncated so that the log-tail bound is below ``tol``.

    Real input gives a real result. Products with a factor within
    ZERO_TOL of zero are returned as exact zeros.
    """
    qp = _as_qparam(qp)
    a_arr = np.asarray(a)
    real_input = not np.iscomplexobj(a_arr)
    ac = a_arr.astype(complex)
    with np.errstate(divide="ignore"):
        loga = np.where(ac == 0, -np.inf + 0j, np.log(np.where(ac == 0, 1.0, ac)))
    logs = log_qpoch_inf(loga, qp.kappa, tol)
    out = np.exp(logs)
    if real_input:
        out = out.real
    return out[()] if np.ndim(out) == 0 else out


def a_plus(kappa: float, z):
    """-pi^2/(6 kappa) - (z - 1/2) log kappa - log(Gamma(z)/sqrt(2 pi))."""
    z = np.asarray(z, dtype=complex)
    out = (
        -np.pi**2 / (6.0 * kappa)
        - (z - 0.5) * np.log(kappa)
        - (log_gamma(z) - 0.5 * np.log(2.0 * np.pi))
    )
    return out[()] if np.ndim(out) == 0 else out


def a_minus(kappa: float, z):
    """pi^2/(12 kappa) - (z - 1/2) log 2."""
    z = np.asarray(z, dtype=complex)
    out = np.pi**2 / (12.0 * kappa) - (z - 0.5) * np.log(2.0)
    return out[()] if np.ndim(out) == 0 else out


def log_qpoch_expansion(sign: str, kappa: float, z, m: int = 3):
    """Small-kappa expansion of log(q^z; q)_inf (sign '+') or log(-q^z; q)_inf (sign '-').

    Returns
    -------
    value : complex
        Leading term plus the first m-1 Bernoulli corrections.
    error_shape : float
        kappa (1+|z|)^2 + kappa^b (1+|z|)^(1+2b+eps) with b = m - 1/2 and
        eps = 1/4, the functional form of the remainder bound (unit constant).
    """
    if m < 1:
        raise ParameterError("m must be at least 1")
    if sign not in ("+", "-"):
        raise ParameterError("sign must be '+' or '-'")
    z = np.asarray(z, dtype=complex)
    value = a_plus(kappa, z) if sign == "+" else a_minus(kappa, z)
    for n in range(1, m):
        coef = bernoulli_number(n) / (n * math.factorial(n + 1))
        if sign == "-":
            coef *= 2.0**n - 1.0
        value = value - coef * bernoulli_poly(n + 1, z) * kappa**n
    b, eps = m - 0.5, 0.25
    size = 1.0 + np.abs(z)
    shape = kappa * size**2 + kappa**b * size ** (1.0 + 2.0 * b + eps)
    if np.ndim(value) == 0:
        return complex(value), float(shape)
    return value, shape
