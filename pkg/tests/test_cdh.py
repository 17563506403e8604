import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from openasep.cdh import (
    CDHParams,
    CDHProcessParams,
    atom_location_u,
    atom_location_v,
    cdh_atom_mass,
    cdh_density,
    cdh_marginal,
    cdh_marginal_atom_mass,
    cdh_marginal_density,
    cdh_measure,
    cdh_transition,
    window_constant,
)
from openasep.errors import ParameterError, SupportError
from openasep.numerics import quad_finite, quad_semi_infinite


def _oracle_density(x, a, b, c):
    iy = 0.5j * mpmath.sqrt(x)
    g = mpmath.gamma
    num = abs(g(a + iy) * g(b + iy) * g(c + iy)) ** 2
    den = 8 * mpmath.pi * g(a + b) * g(a + c) * g(b + c) * mpmath.sqrt(x) * abs(g(2 * iy)) ** 2
    return float(mpmath.re(num / den))


@pytest.mark.parametrize("x", [0.1, 1.0, 10.0])
def test_density_conjugate_pair(x):
    b = 0.3 + 0.4j
    p = CDHParams(0.5, b, b.conjugate())
    val = cdh_density(x, p)
    assert val > 0
    assert val == pytest.approx(_oracle_density(x, 0.5, b, b.conjugate()), rel=1e-12)


@pytest.mark.parametrize("x", [0.05, 2.0, 40.0])
def test_density_real_params_and_exchange(x):
    p, q = CDHParams(0.4, 0.9, 1.7), CDHParams(0.4, 1.7, 0.9)
    assert cdh_density(x, p) == pytest.approx(_oracle_density(x, 0.4, 0.9, 1.7), rel=1e-12)
    assert cdh_density(x, p) == pytest.approx(cdh_density(x, q), rel=1e-14)


@given(st.floats(0.01, 2.0), st.floats(0.05, 2.0), st.floats(0.05, 2.0), st.floats(1e-3, 1e3))
def test_exchange_symmetry_property(a, b, c, x):
    v1 = cdh_density(x, CDHParams(a, b, c))
    v2 = cdh_density(x, CDHParams(a, c, b))
    assert v1 >= 0
    assert v1 == pytest.approx(v2, rel=1e-12, abs=1e-300)


def test_density_zero_off_support():
    p = CDHParams(0.5, 1.0, 1.0)
    assert cdh_density(-1.0, p) == 0.0
    out = cdh_density(np.array([0.0, 1.0]), p)
    assert out[0] == 0.0 and out[1] > 0


@pytest.mark.parametrize("abc", [(0.5, 1.0, 1.0), (0.2, 0.3 + 1.1j, 0.3 - 1.1j), (1.5, 0.4, 2.2)])
def test_continuous_case_normalised(abc):
    assert cdh_measure(CDHParams(*abc)).total_mass() == pytest.approx(1.0, abs=1e-8)


def test_atom_j0_formula():
    a, b, c = -0.3, 0.9, 1.1
    p = CDHParams(a, b, c)
    g = math.gamma
    assert cdh_atom_mass(0, p) == pytest.approx(g(b - a) * g(c - a) / (g(-2 * a) * g(b + c)), rel=1e-13)
    assert p.location(0) == pytest.approx(-0.36)


@pytest.mark.parametrize("abc", [(-0.3, 0.9, 1.1), (-1.4, 1.9, 2.5), (-0.6, 0.7 + 0.5j, 0.7 - 0.5j)])
def test_one_or_more_atoms_normalised(abc):
    m = cdh_measure(CDHParams(*abc))
    assert len(m.atoms) == math.floor(-abc[0]) + 1
    assert m.total_mass() == pytest.approx(1.0, abs=1e-8)


def test_purely_atomic_case():
    p = CDHParams(-1.2, 0.2, 2.0)
    assert p.case == 3
    m = cdh_measure(p)
    assert m.density is None
    masses = [mass for _, mass in m.atoms]
    assert len(masses) == 2
    assert sum(masses) == pytest.approx(1.0, abs=1e-12)
    # this parameter choice is admissible yet gives a negative second mass
    assert masses[0] == pytest.approx(1.57143, abs=1e-5)
    assert masses[1] < 0


def test_atom_index_checked():
    with pytest.raises(ParameterError):
        cdh_atom_mass(3, CDHParams(-0.3, 0.9, 1.1))
    with pytest.raises(ParameterError):
        cdh_atom_mass(0, CDHParams(0.3, 0.9, 1.1))


def test_inadmissible_parameters():
    with pytest.raises(ParameterError):
        CDHParams(0.3, -0.5, 1.0)
    with pytest.raises(ParameterError):
        CDHParams(-0.5, 0.2, 1.0)
    with pytest.raises(ParameterError):
        CDHParams(0.3, 0.2 + 1j, 0.4 - 1j)
    with pytest.raises(ParameterError):
        CDHParams(-0.3, 0.9, 1.1, atom_set=(1.0, 2.0))


# process


def test_window_constants():
    assert window_constant(0.8, 0.6) == pytest.approx(1.2)
    assert window_constant(-0.2, 0.6) == pytest.approx(1.2)
    assert window_constant(-0.2, -0.1) == 2.0
    assert window_constant(0.3, 5.0) == pytest.approx(0.6)
    assert window_constant(0.3, 5.0, "process") == pytest.approx(0.6)
    assert window_constant(1.5, 0.7, "process") == pytest.approx(1.4)
    with pytest.raises(ParameterError):
        window_constant(0.5, 0.6, "other")


def test_atom_locations():
    assert atom_location_v(-0.3, 0.0, 0) == pytest.approx(-0.36)
    assert atom_location_u(-0.2, 0.1, 0) == pytest.approx(-0.25)
    assert atom_location_u(-1.5, 0.0, 1) == pytest.approx(-1.0)


def test_marginal_without_atoms():
    m = cdh_marginal(0.1, CDHProcessParams(0.8, 0.7))
    assert m.atoms == ()
    assert not m.normalized
    with pytest.raises(ParameterError):
        m.total_mass()


def test_marginal_v_atom():
    u, v = 0.8, -0.3
    m = cdh_marginal(0.0, CDHProcessParams(u, v))
    assert len(m.atoms) == 1
    loc, mass = m.atoms[0]
    assert loc == pytest.approx(-0.36)
    g = math.gamma
    assert mass == pytest.approx(g(u - v) * g(u + v + 2) / g(-2 * v), rel=1e-13)
    assert mass == pytest.approx(0.84923, abs=1e-5)


def test_marginal_u_atom_requires_window():
    pp = CDHProcessParams(-0.2, 0.9)
    assert pp.u_atoms(0.1) == [0]
    assert pp.u_atoms(-0.0) == [0]
    with pytest.raises(SupportError):
        cdh_marginal_atom_mass("v", 0, 0.1, pp)
    with pytest.raises(ParameterError):
        cdh_marginal_atom_mass("w", 0, 0.1, pp)


def test_marginal_density_positive_on_log_grid():
    x = np.logspace(-3, 3, 61)
    assert np.all(cdh_marginal_density(x, 0.3, CDHProcessParams(0.8, 0.7)) > 0)


def test_marginal_has_infinite_mass():
    pp = CDHProcessParams(0.8, 0.7)
    f = lambda x: cdh_marginal_density(x, 0.3, pp)
    masses = [quad_finite(f, 0.0, X).value for X in (10.0, 100.0, 1000.0)]
    assert masses[0] < masses[1] < masses[2]
    assert masses[2] > 10


def test_marginal_density_matches_oracle():
    u, v, t, x = 0.8, 0.7, 0.3, 2.5
    iy = 0.5j * mpmath.sqrt(x)
    g = mpmath.gamma
    ref = (u + v + 1) * (u + v) / (8 * mpmath.pi) * abs(g(v + t / 2 + iy) * g(u - t / 2 + iy)) ** 2
    ref = ref / (mpmath.sqrt(x) * abs(g(2 * iy)) ** 2)
    assert cdh_marginal_density(x, t, CDHProcessParams(u, v)) == pytest.approx(float(ref), rel=1e-12)


@pytest.mark.parametrize(
    "uv,s,t,src",
    [
        ((0.8, 0.7), 0.1, 0.4, ("c", 1.3)),
        ((0.8, 0.7), 0.0, 1.0, ("c", 20.0)),
        ((-0.2, 0.9), 0.1, 0.3, ("c", 0.7)),
        ((0.8, -0.3), 0.0, 0.4, ("v", 0)),
        ((1.6, -1.3), 0.0, 0.2, ("v", 1)),
        ((-1.2, 1.9), 0.1, 0.3, ("u", 1)),
        ((-1.2, 1.9), 0.1, 0.3, ("u", 0)),
    ],
)
def test_transition_normalised(uv, s, t, src):
    meas = cdh_transition(s, t, src, CDHProcessParams(*uv))
    assert meas.total_mass() == pytest.approx(1.0, abs=1e-6)


def test_transition_from_u_atom_is_atomic():
    pp = CDHProcessParams(-1.2, 1.9)
    meas = cdh_transition(0.1, 0.3, ("u", 1), pp)
    assert meas.density is None
    locs = sorted(x for x, _ in meas.atoms)
    want = sorted(atom_location_u(-1.2, 0.3, k) for k in (0, 1))
    assert np.allclose(locs, want)
    assert all(m >= 0 for _, m in meas.atoms)


def test_transition_from_v_atom_params():
    pp = CDHProcessParams(0.8, -0.3)
    meas = cdh_transition(0.0, 0.4, ("v", 0), pp)
    p = meas.params
    assert (p.a, p.b.real, p.c.real) == pytest.approx((-0.1, 0.5, 0.6))


def test_transition_errors():
    pp = CDHProcessParams(0.8, 0.7)
    with pytest.raises(ParameterError):
        cdh_transition(0.4, 0.1, ("c", 1.0), pp)
    with pytest.raises(SupportError):
        cdh_transition(0.1, 0.4, ("v", 0), pp)
    with pytest.raises(SupportError):
        cdh_transition(0.1, 0.4, ("c", -1.0), pp)
    with pytest.raises(ParameterError):
        cdh_transition(0.1, 0.4, ("c", 1.0), CDHProcessParams(0.8, 0.7, horizon=0.3))


@pytest.mark.parametrize("y", [0.5, 2.0, 6.0])
def test_marginal_flow_consistency(y):
    pp = CDHProcessParams(0.8, 0.7)
    s, t = 0.1, 0.4
    f = np.vectorize(
        lambda x: float(cdh_marginal_density(x, s, pp)) * float(cdh_transition(s, t, ("c", float(x)), pp).density(y))
        if x > 0 else 0.0
    )
    lhs = quad_semi_infinite(f).value
    assert lhs == pytest.approx(float(cdh_marginal_density(y, t, pp)), rel=1e-4)
