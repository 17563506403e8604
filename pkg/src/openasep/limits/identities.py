"""Exact finite-N identities between open ASEP and Askey-Wilson integrals."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from ..askey_wilson import AWProcessParams
from ..asep import ASEPModel, LaplaceSpec, ScalingInput, laplace_exact, pgf_exact, rates_to_abcd, stationary_exact
from ..errors import ParameterError
from ..numerics import QuadSpec
from .joint import converge_aw, merge_equal_times

__all__ = ["IdentityCheck", "aw_process_of", "bw_identity_check", "laplace_identity_check", "aw_laplace_rhs"]


class IdentityCheck(NamedTuple):
    lhs: float
    rhs: float
    gap: float


def _model_of(si) -> ASEPModel:
    if isinstance(si, ScalingInput):
        return si.model()
    if isinstance(si, ASEPModel):
        return si
    raise ParameterError("expected a ScalingInput or an ASEPModel")


def aw_process_of(model: ASEPModel) -> AWProcessParams:
    """Askey-Wilson process parameters (A, B, C, D, q) of an ASEP model."""
    A, B, C, D = rates_to_abcd(model)
    return AWProcessParams.from_values(A, B, C, D, model.q)


def _denominator(pp: AWProcessParams, n: int, tol: float) -> float:
    return converge_aw(pp, [0.0], [lambda y: (1.0 + y) ** n], tol=tol).value


def bw_identity_check(si, t_vector, quad: QuadSpec | None = None, dist=None) -> IdentityCheck:
    """Compare the exact generating function with its Askey-Wilson representation.

    The right side is E[prod_j (1 + t_j + 2 sqrt(t_j) Y_{t_j})] / (2^N E[(1 + Y_1)^N]),
    integrated over the joint law of the process at the sorted times t_j.
    """
    quad = quad or QuadSpec()
    model = _model_of(si)
    t = np.asarray(t_vector, dtype=float)
    n = model.n_sites
    if t.shape != (n,):
        raise ParameterError("t_vector must have length N")
    if np.any(t <= 0):
        raise ParameterError("t_j must be positive")
    if np.any(np.diff(t) < 0):
        raise ParameterError("t_j must be sorted ascending")
    lhs = pgf_exact(model, t, dist)
    pp = aw_process_of(model)
    funcs = [lambda y, tj=tj: 1.0 + tj + 2.0 * math.sqrt(tj) * y for tj in t]
    times, funcs = merge_equal_times([math.log(tj) for tj in t], funcs)
    num = converge_aw(pp, times, funcs, tol=quad.rel_tol).value
    rhs = num / (2.0**n * _denominator(pp, n, quad.rel_tol))
    return IdentityCheck(lhs, rhs, abs(lhs - rhs))


def aw_laplace_rhs(model: ASEPModel, spec: LaplaceSpec, quad: QuadSpec | None = None) -> float:
    """Askey-Wilson side of the Laplace identity at finite N.

    E[prod_k (cosh(s_k / sqrt N) + Y_{q^{s_k}})^{n_k - n_{k-1}}] / E[(1 + Y_1)^N]
    with the process times q^{s_1} <= ... <= q^{s_{d+1}} = 1.
    """
    quad = quad or QuadSpec()
    n = model.n_sites
    pp = aw_process_of(model)
    npts = spec.n_points(n)
    expo = [npts[k] - npts[k - 1] for k in range(1, spec.d + 2)]
    root_n = math.sqrt(n)
    funcs = [lambda y, c=math.cosh(s / root_n), e=e: (c + y) ** e for s, e in zip(spec.s, expo)]
    times, funcs = merge_equal_times([-pp.kappa * s for s in spec.s], funcs)
    num = converge_aw(pp, times, funcs, tol=quad.rel_tol).value
    return num / _denominator(pp, n, quad.rel_tol)


def laplace_identity_check(si, spec: LaplaceSpec, quad: QuadSpec | None = None, dist=None) -> IdentityCheck:
    """Compare laplace_exact with the Askey-Wilson integral at the same N.

    The process base must satisfy q = exp(-2/sqrt(N)).
    """
    model = _model_of(si)
    n = model.n_sites
    if abs(model.q - math.exp(-2.0 / math.sqrt(n))) > 1e-12:
        raise ParameterError("the Laplace identity needs q = exp(-2/sqrt(N))")
    lhs = laplace_exact(model, spec, dist or stationary_exact(model))
    rhs = aw_laplace_rhs(model, spec, quad)
    return IdentityCheck(lhs, rhs, abs(lhs - rhs))
