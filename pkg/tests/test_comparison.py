import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bzmild.comparison import (ChainError, HitTimeError, Margins, logistic_hit_time, logistic_solution,
                               natural_region, ode_hit_time, relaxation_hit_time, trap_chain)
from bzmild.model import find_u_bar, preset_params

# 40-digit oracle (mpmath roots and quadrature of dt = dy / rhs(y)), c* = q/2, midpoint margins
CHAIN_M1 = dict(q1=0.00020254745142708118, q3=0.0002006368628567703, kappa_star=0.99999358214685454,
                T1=0.0221839102579929, T2=0.0224669960479425, T3=5.09149494470245,
                T4=5.29776421391495, T_sharp=11.7420151889608)
CHAIN_M2 = dict(T2=0.0223239777540655, T3=5.78769722283441, T4=6.37688329396383, T_sharp=25.4818698904122)


def test_logistic_spot_value(p):
    assert logistic_hit_time(1e-5, p.q, p) == pytest.approx(0.09586951339221305, abs=1e-12)


def test_logistic_rk4_matches_closed_form(p):
    rhs = lambda y: y * (1 - y) / p.epsilon  # noqa: E731
    for c in (1e-5, p.q / 2):
        t = ode_hit_time(rhs, c, p.q, p.epsilon / 100)
        assert t == pytest.approx(logistic_hit_time(c, p.q, p), abs=1e-8)


def test_logistic_solution_hits_target(p):
    t = logistic_hit_time(1e-4, 0.5, p)
    assert logistic_solution(1e-4, t, p) == pytest.approx(0.5, rel=1e-12)


def test_logistic_errors(p):
    with pytest.raises(ValueError):
        logistic_hit_time(0.0, p.q, p)
    with pytest.raises(ValueError):
        logistic_hit_time(0.5, 0.1, p)


def test_relaxation():
    assert relaxation_hit_time(0.2, 1.0, 0.6) == pytest.approx(math.log(2.0))
    assert relaxation_hit_time(0.3, 1.0, 0.3) == 0.0
    with pytest.raises(ValueError):
        relaxation_hit_time(0.2, 1.0, 1.0)
    with pytest.raises(ValueError):
        relaxation_hit_time(0.2, 1.0, 0.1)


def test_ode_hit_time_exact_linear():
    t = ode_hit_time(lambda y: 1.0 - y, 0.0, 0.5, 0.01)
    assert t == pytest.approx(math.log(2.0), abs=1e-9)


def test_ode_hit_time_unreachable():
    with pytest.raises(HitTimeError):
        ode_hit_time(lambda y: 1.0 - y, 0.0, 2.0, 0.01, max_T=5.0)
    with pytest.raises(HitTimeError):
        ode_hit_time(lambda y: y - 1.0, 0.0, 0.5, 0.01)


def test_trap_chain_m1(p):
    c = trap_chain(p.q / 2, 1.0, p)
    assert c.q < c.q3 < c.q2 < c.q1 < 1
    assert c.T1 <= c.T2 <= c.T3 <= c.T4 <= c.T_sharp
    assert c.q1 == pytest.approx(CHAIN_M1["q1"], rel=1e-8)
    assert c.q3 == pytest.approx(CHAIN_M1["q3"], rel=1e-8)
    assert c.kappa_star == pytest.approx(CHAIN_M1["kappa_star"], abs=1e-11)
    assert c.T1 == pytest.approx(CHAIN_M1["T1"], abs=1e-12)
    assert c.T2 == pytest.approx(CHAIN_M1["T2"], abs=1e-8)
    # root tolerances enter through logs of gaps of size ~1e-7 and ~1e-8
    for k in ("T3", "T4"):
        assert getattr(c, k) == pytest.approx(CHAIN_M1[k], rel=1e-6)
    assert c.T_sharp == pytest.approx(CHAIN_M1["T_sharp"], rel=1e-5)


def test_trap_chain_m2(p):
    c = trap_chain(p.q / 2, 2.0, p)
    for k, v in CHAIN_M2.items():
        assert getattr(c, k) == pytest.approx(v, rel=1e-5)


def test_trap_chain_row(p):
    row = trap_chain(1e-4, 1.0, p).as_row()
    assert row["margin_u"] == 0.5 and "margins" not in row
    assert all(isinstance(v, float) for v in row.values())


def test_trap_chain_errors(p):
    with pytest.raises(ValueError):
        trap_chain(p.q, 1.0, p)
    with pytest.raises(ValueError):
        trap_chain(1e-4, 0.5, p)
    with pytest.raises(ValueError):
        Margins(q2=1.0)


@settings(max_examples=15, deadline=None)
@given(c=st.floats(1e-7, 1.9e-4), m=st.floats(1.0, 4.0), a=st.floats(0.1, 0.9), b=st.floats(0.1, 0.9))
def test_trap_chain_ordering_property(c, m, a, b):
    p = preset_params(1.0)
    ch = trap_chain(c, m, p, Margins(q2=a, q3=b, u=0.5))
    ch.check()
    assert ch.kappa_star < ch.u_star < ch.u_bar


def test_trap_times_decrease_with_c_star(p):
    ts = [trap_chain(c, 1.0, p).T_sharp for c in (1e-6, 1e-5, 1e-4)]
    assert ts[0] > ts[1] > ts[2]


def test_natural_region(p):
    ub = find_u_bar(p)
    nat = natural_region(1.0, p, p.q, ub)
    assert nat.kappa_bar < nat.kappa_star < nat.u_nat
    assert nat.q_nat < nat.q3 < nat.q2 < nat.q1
    assert np.isfinite(nat.T_nat) and nat.T_nat > 0
    with pytest.raises(ChainError):
        natural_region(1.0, p, p.q, nat.kappa_bar * 0.999999)
