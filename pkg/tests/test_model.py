import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bzmild.model import (ROOT_TOL, KineticRoots, ModelParams, RootError, SingularityError, SteadyStates,
                          bisect, count_roots, cubic_g, find_kappa_bar, find_root_G_m, find_root_G_star,
                          find_u_bar, find_u_tilde, preset_params, quad_g_tilde, reaction_u, reaction_v,
                          rhs_G_m, u_tilde_closed_form)

# 40-digit polynomial roots (mpmath.polyroots), frozen
U_BAR = 0.9999936025185767
U_TILDE = 0.9680132202284916
Q1_M1 = 0.00020254745142708118
Q1_M2 = 0.00020126159839172731


def test_preset_values():
    p = preset_params(1.0)
    assert (p.epsilon, p.q, p.d, p.h) == (0.032, 2e-4, 0.6, 1.0)


def test_unknown_preset():
    with pytest.raises(KeyError):
        preset_params(1.0, "nope")


@pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(h=-1.0), dict(q=1.0), dict(q=0.0), dict(d=math.nan)])
def test_param_validation(kw):
    base = dict(epsilon=0.032, h=1.0, q=2e-4, d=0.6)
    with pytest.raises(ValueError):
        ModelParams(**{**base, **kw})


def test_reaction_values(p):
    assert reaction_u(0.0, 0.0, p) == 0.0
    assert reaction_u(p.q, 5.0, p) == pytest.approx(p.q * (1 - p.q) / p.epsilon, rel=1e-15)
    assert reaction_v(0.3, 0.1) == pytest.approx(0.2)


def test_pole_guard(p):
    with pytest.raises(SingularityError):
        reaction_u(-p.q, 1.0, p)
    with pytest.raises(SingularityError):
        rhs_G_m(np.array([0.1, -p.q]), 1.0, p)


def test_roots_match_oracle(p):
    assert find_u_bar(p) == pytest.approx(U_BAR, abs=1e-11)
    assert find_u_tilde(p) == pytest.approx(U_TILDE, abs=1e-12)
    assert u_tilde_closed_form(p) == pytest.approx(U_TILDE, abs=1e-15)
    assert find_root_G_m(1.0, p) == pytest.approx(Q1_M1, rel=1e-8)
    assert find_root_G_m(2.0, p) == pytest.approx(Q1_M2, rel=1e-8)


def test_residuals(p):
    r = KineticRoots.compute(p)
    assert r.residual_g <= ROOT_TOL and r.residual_g_tilde <= ROOT_TOL
    assert p.q < r.u_tilde < r.u_bar < 1
    assert r.n_roots_g == 1


def test_q1_is_smallest_root(p):
    # the cubic for v = m has three roots in (q, 1); the comparison limit is the first
    assert count_roots(1.0, p) == 3
    assert find_root_G_m(1.0, p) < 0.001


def test_kappa_ordering(p):
    q1 = find_root_G_m(1.0, p)
    kb = find_kappa_bar(q1, p)
    ks = find_root_G_star((p.q + q1) / 2, p)
    assert p.q < kb < ks < find_u_bar(p)


def test_steady_states(p):
    s = SteadyStates.compute(p)
    assert s.trivial == (0.0, 0.0)
    u, v = s.nontrivial
    assert abs(reaction_u(u, v, p)) <= 10 * ROOT_TOL and reaction_v(u, v) == 0.0


def test_bisect():
    b = bisect(lambda x: x * x - 2, 0.0, 2.0, 1e-14, 1e-12)
    assert b.root == pytest.approx(math.sqrt(2), abs=1e-13)
    assert isinstance(b.root, float)
    with pytest.raises(RootError):
        bisect(lambda x: x * x + 1, 0.0, 2.0, 1e-14, 1e-12)


@settings(max_examples=40, deadline=None)
@given(h=st.floats(0.1, 10.0), eps=st.floats(0.005, 0.2), q=st.floats(1e-5, 1e-2))
def test_root_structure_property(h, eps, q):
    p = ModelParams(eps, h, q, 0.6)
    r = KineticRoots.compute(p)
    assert abs(cubic_g(r.u_bar, p)) <= ROOT_TOL
    assert abs(quad_g_tilde(r.u_tilde, p)) <= ROOT_TOL
    assert abs(r.u_tilde - u_tilde_closed_form(p)) <= 1e-9
    assert q < r.u_tilde < r.u_bar < 1
