import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from openasep.errors import ParameterError
from openasep.qseries import (
    QParam,
    a_minus,
    a_plus,
    log_abs2_qpoch,
    log_qpoch_expansion,
    log_qpoch_inf,
    qpoch_finite,
    qpoch_infinite,
)


def _wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


def test_qparam_constructors():
    qp = QParam.from_n(100)
    assert qp.kappa == pytest.approx(0.2)
    assert QParam.from_kappa(0.2).q == pytest.approx(qp.q, abs=1e-16)
    with pytest.raises(ParameterError):
        QParam.from_q(1.0)
    with pytest.raises(ParameterError):
        QParam(0.5, 0.3)


def test_qpoch_finite_examples():
    assert qpoch_finite(0.3, 0.5, 0) == 1
    assert qpoch_finite(0.3, 0.5, 1) == pytest.approx(0.7)
    assert qpoch_finite(0.5, 0.5, 3) == pytest.approx(0.328125, abs=1e-15)
    with pytest.raises(ParameterError):
        qpoch_finite(0.3, 0.5, -1)


def test_euler_function_at_half():
    assert qpoch_infinite(0.0, 0.5) == 1.0
    assert qpoch_infinite(0.5, 0.5) == pytest.approx(0.28878809508660247, abs=1e-14)


def test_qpoch_infinite_tol_self_consistent():
    a = qpoch_infinite(-1.0, 0.9, tol=1e-12)
    b = qpoch_infinite(-1.0, 0.9, tol=5e-13)
    assert abs(a / b - 1) < 1e-11


@given(
    st.floats(0.05, 0.95),
    st.floats(0.0, 3.0),
    st.floats(-math.pi, math.pi),
)
def test_qpoch_infinite_matches_mpmath(q, mod, arg):
    a = cmath.rect(mod, arg)
    got = qpoch_infinite(a, q)
    ref = complex(mpmath.qp(mpmath.mpc(a), mpmath.mpf(q)))
    assert abs(got - ref) <= 1e-11 * max(1.0, abs(ref))


def test_qpoch_infinite_near_one_matches_mpmath():
    # many factors contribute when q is close to 1
    q = math.exp(-2 / math.sqrt(1e4))
    for a in (0.3, -0.8, q**0.7):
        got = qpoch_infinite(a, q)
        with mpmath.workdps(30):
            ref = float(mpmath.qp(a, q))
        assert abs(got / ref - 1) < 1e-10


def test_qpoch_exact_zero():
    # a = q^{-2} kills the third factor
    assert qpoch_infinite(4.0, 0.5) == 0.0
    assert np.isneginf(log_qpoch_inf(math.log(4.0), math.log(2.0)).real)


@given(st.floats(-2.0, 1.5), st.floats(-math.pi, math.pi), st.floats(0.05, 1.5))
def test_log_abs2_matches_modulus(log_mod, phase, kappa):
    direct = 2 * log_qpoch_inf(complex(log_mod, phase), kappa).real
    got = log_abs2_qpoch(log_mod, phase, kappa)
    if np.isneginf(direct):
        assert got < -50
        return
    assert abs(got - direct) < 1e-9 * max(1.0, abs(direct))


def test_log_abs2_broadcasts():
    out = log_abs2_qpoch(np.array([[-0.1], [-0.5]]), np.array([0.3, 1.0, 2.0]), 0.1)
    assert out.shape == (2, 3)


def test_a_minus_at_half():
    for kappa in (0.3, 0.02):
        assert a_minus(kappa, 0.5) == pytest.approx(math.pi**2 / (12 * kappa))


def test_a_plus_at_unit_kappa():
    val = a_plus(1.0, 1.0)
    assert val.real == pytest.approx(-math.pi**2 / 6 - math.log(1 / math.sqrt(2 * math.pi)), abs=1e-14)


@pytest.mark.parametrize("sign", ["+", "-"])
def test_expansion_m1_is_leading_term(sign):
    val, _ = log_qpoch_expansion(sign, 0.05, 1.3, m=1)
    lead = a_plus(0.05, 1.3) if sign == "+" else a_minus(0.05, 1.3)
    assert val == lead


def test_a_plus_within_first_order_bound():
    kappa, z = 0.02, 1.3
    direct = log_qpoch_inf(complex(-kappa * z), kappa)
    val, shape = log_qpoch_expansion("+", kappa, z, m=1)
    assert abs(val - direct) < shape


@pytest.mark.parametrize("sign,z", [("+", 1.0), ("-", 0.5)])
def test_expansion_m3_examples(sign, z):
    kappa = 0.002
    la = complex(-kappa * z, 0.0 if sign == "+" else math.pi)
    direct = log_qpoch_inf(la, kappa)
    val, _ = log_qpoch_expansion(sign, kappa, z, m=3)
    err = val - direct
    assert abs(err.real) < 1e-6
    assert abs(_wrap(err.imag)) < 1e-6


def test_expansion_rejects_bad_arguments():
    with pytest.raises(ParameterError):
        log_qpoch_expansion("*", 0.1, 1.0)
    with pytest.raises(ParameterError):
        log_qpoch_expansion("+", 0.1, 1.0, m=0)


@given(st.floats(0.1, 3.0), st.sampled_from(["+", "-"]))
def test_expansion_error_shrinks_with_kappa(z, sign):
    errs = []
    for kappa in (0.2, 0.02):
        la = complex(-kappa * z, 0.0 if sign == "+" else math.pi)
        val, _ = log_qpoch_expansion(sign, kappa, z, m=3)
        e = val - log_qpoch_inf(la, kappa)
        errs.append(abs(complex(e.real, _wrap(e.imag))))
    assert errs[1] < errs[0] or errs[1] < 1e-11
