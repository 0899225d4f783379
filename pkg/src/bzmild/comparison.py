"""Scalar comparison ODEs and the trap times after which every solution with
data bounded below by c* > 0 sits inside S = (q, ū)².

Legs, in order:
    ρ' = ρ(1-ρ)/ε              from c*  up to q        -> T1
    σ' = G_m(σ)                from q   up to q2       -> T2
    ν' = -ν + q2               from c*  up to q3       -> T3
    κ' = G_*(κ)                from m   down to u*     -> T4
    μ' = -μ + u*               from m   down below ū   -> T_sharp
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from bzmild.model import (ModelParams, find_kappa_bar, find_root_G_m, find_root_G_star,
                          find_u_bar, rhs_G_m, rhs_G_star)

HIT_TOL = 1e-10
EDGE_EPS = 1e-6


class ChainError(ValueError):
    pass


class HitTimeError(RuntimeError):
    pass


def logistic_hit_time(c_star: float, target: float, p: ModelParams) -> float:
    """Time for ρ' = ρ(1-ρ)/ε to climb from c_star to target (closed form)."""
    if not (0.0 < c_star <= target < 1.0):
        raise ValueError(f"need 0 < c_star <= target < 1, got c_star={c_star}, target={target}")
    return p.epsilon * math.log((1.0 - c_star) * target / (c_star * (1.0 - target)))


def logistic_solution(c0: float, t, p: ModelParams):
    e = np.exp(np.asarray(t) / p.epsilon)
    return c0 * e / (1.0 - c0 + c0 * e)


def relaxation_hit_time(y0: float, source: float, target: float) -> float:
    """Time for y' = -y + source, y(0) = y0, to reach target."""
    if y0 == target:
        return 0.0
    if target == source:
        raise ValueError(f"target {target} equals the asymptote and is never attained")
    if (target - y0) * (source - target) <= 0:
        raise ValueError(f"target {target} is not between y0 = {y0} and source = {source}")
    return math.log((source - y0) / (source - target))


def _rk4(rhs, y, h):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def ode_hit_time(rhs: Callable[[float], float], y0: float, target: float, step: float,
                 max_T: float = 1e4, hit_tol: float = HIT_TOL) -> float:
    """First time the fixed-step RK4 solution of y' = rhs(y) crosses ``target``.

    The crossing step is located by marching, then refined by bisection on the
    sub-step length until the time bracket is below ``hit_tol``. Raises
    HitTimeError if the solution is not monotone toward the target or if
    ``max_T`` elapses first.
    """
    if y0 == target:
        return 0.0
    direction = 1.0 if target > y0 else -1.0
    if direction * rhs(y0) <= 0:
        raise HitTimeError(f"rhs at y0 = {y0} does not push toward target {target}")
    t, y = 0.0, y0
    while t < max_T:
        y_next = _rk4(rhs, y, step)
        if direction * (y_next - y) <= 0:
            raise HitTimeError(f"solution stopped moving toward {target} at t = {t}, y = {y}")
        if direction * (y_next - target) >= 0:
            lo, hi = 0.0, step
            while hi - lo > hit_tol:
                mid = 0.5 * (lo + hi)
                if direction * (_rk4(rhs, y, mid) - target) >= 0:
                    hi = mid
                else:
                    lo = mid
            return t + 0.5 * (lo + hi)
        t, y = t + step, y_next
    raise HitTimeError(f"target {target} not reached by T = {max_T}; last value {y}")


def kinetic_step(p: ModelParams, rhs, lo: float, hi: float, samples: int = 257) -> float:
    """RK4 step: min(ε, 1)/100, further capped at 0.05/|rhs'| sampled on [lo, hi]."""
    base = min(p.epsilon, 1.0) / 100.0
    ys = np.linspace(lo, hi, samples)
    dy = 1e-7 * max(abs(hi), 1e-3)
    lip = max(abs((rhs(y + dy) - rhs(y - dy)) / (2 * dy)) for y in ys)
    return min(base, 0.05 / lip) if lip > 0 else base


@dataclass(frozen=True)
class Margins:
    q2: float = 0.5
    q3: float = 0.5
    u: float = 0.5

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not 0.0 < v < 1.0:
                raise ValueError(f"margin {k} must lie in (0, 1), got {v}")


@dataclass(frozen=True)
class TrapChainResult:
    c_star: float
    m: float
    q: float
    u_bar: float
    q1: float
    q2: float
    q3: float
    kappa_star: float
    u_star: float
    T1: float
    T2: float
    T3: float
    T4: float
    T_sharp: float
    margins: Margins

    def as_row(self) -> dict:
        row = asdict(self)
        m = row.pop("margins")
        row.update({f"margin_{k}": v for k, v in m.items()})
        return row

    def check(self) -> None:
        if not (self.q < self.q3 < self.q2 < self.q1 < 1.0):
            raise ChainError(f"threshold ordering broken: q={self.q}, q3={self.q3}, q2={self.q2}, q1={self.q1}")
        if not (self.q < self.kappa_star < self.u_star < self.u_bar):
            raise ChainError(f"upper thresholds broken: κ*={self.kappa_star}, u*={self.u_star}, ū={self.u_bar}")
        ts = [self.T1, self.T2, self.T3, self.T4, self.T_sharp]
        if any(b < a for a, b in zip(ts, ts[1:])) or ts[0] < 0:
            raise ChainError(f"trap times not ordered: {ts}")


def _interior(lo, hi, frac, name):
    if not lo < hi:
        raise ChainError(f"interval for {name} is empty: ({lo}, {hi})")
    val = lo + frac * (hi - lo)
    if not lo < val < hi:
        raise ChainError(f"interval for {name} collapsed in floating point: ({lo}, {hi})")
    return val


def trap_chain(c_star: float, m: float, p: ModelParams, margins: Margins | None = None) -> TrapChainResult:
    """Thresholds and hitting times, as offsets from the time at which u, v >= c_star."""
    margins = margins or Margins()
    if not 0.0 < c_star < p.q:
        raise ValueError(f"need 0 < c_star < q = {p.q}, got {c_star}")
    if m < 1.0:
        raise ValueError(f"need m >= 1, got {m}")
    u_bar = find_u_bar(p)

    T1 = logistic_hit_time(c_star, p.q, p)

    q1 = find_root_G_m(m, p)
    q2 = _interior(p.q, q1, margins.q2, "q2 in (q, q1)")
    g_m = lambda s: rhs_G_m(s, m, p)  # noqa: E731
    T2 = T1 + ode_hit_time(g_m, p.q, q2, kinetic_step(p, g_m, p.q, q2))

    q3 = _interior(p.q, q2, margins.q3, "q3 in (q, q2)")
    T3 = T2 + relaxation_hit_time(c_star, q2, q3)

    kappa_star = find_root_G_star(q3, p)
    u_star = _interior(kappa_star, u_bar, margins.u, "u* in (kappa*, u_bar)")
    g_s = lambda s: rhs_G_star(s, q3, p)  # noqa: E731
    T4 = T3 + ode_hit_time(g_s, m, u_star, kinetic_step(p, g_s, u_star, m))

    target = u_bar - EDGE_EPS * (u_bar - u_star)
    T_sharp = T4 + relaxation_hit_time(m, u_star, target)

    vals = [float(x) for x in (c_star, m, p.q, u_bar, q1, q2, q3, kappa_star, u_star, T1, T2, T3, T4, T_sharp)]
    out = TrapChainResult(*vals, margins)
    out.check()
    return out


@dataclass(frozen=True)
class NaturalRegion:
    q_nat: float
    u_nat: float
    q1: float
    kappa_bar: float
    q2: float
    q3: float
    kappa_star: float
    u_star: float
    T_nat: float


def natural_region(m: float, p: ModelParams, q_nat: float, u_nat: float, c_star: float | None = None,
                   max_tighten: int = 200) -> NaturalRegion:
    """Validate S_nat = (q_nat, u_nat)² and compute an entry time T_nat for it.

    q3 is pushed toward q1 until the upper comparison limit κ*(q3) falls below
    u_nat, which is possible exactly when u_nat > κ̄.
    """
    if m < 1.0:
        raise ValueError(f"need m >= 1, got {m}")
    u_bar = find_u_bar(p)
    q1 = find_root_G_m(m, p)
    kappa_bar = find_kappa_bar(q1, p)
    if not p.q <= q_nat < q1:
        raise ChainError(f"q_nat = {q_nat} must lie in [q, q1) = [{p.q}, {q1})")
    if not kappa_bar < u_nat <= u_bar:
        raise ChainError(f"u_nat = {u_nat} must lie in (kappa_bar, u_bar] = ({kappa_bar}, {u_bar}]")
    c_star = p.q / 2 if c_star is None else c_star
    if not 0.0 < c_star < p.q:
        raise ValueError(f"need 0 < c_star < q, got {c_star}")

    frac = 0.5
    for _ in range(max_tighten):
        q3 = _interior(q_nat, q1, frac, "q3 in (q_nat, q1)")
        kappa_star = find_root_G_star(q3, p)
        if kappa_star < u_nat:
            break
        frac = 0.5 * (1.0 + frac)
    else:
        raise ChainError(f"could not bring kappa* below u_nat = {u_nat}")
    q2 = _interior(q3, q1, 0.5, "q2 in (q3, q1)")
    u_star = _interior(kappa_star, u_nat, 0.5, "u* in (kappa*, u_nat)")

    T = logistic_hit_time(c_star, p.q, p)
    g_m = lambda s: rhs_G_m(s, m, p)  # noqa: E731
    T += ode_hit_time(g_m, p.q, q2, kinetic_step(p, g_m, p.q, q2))
    T += relaxation_hit_time(c_star, q2, q3)
    g_s = lambda s: rhs_G_star(s, q3, p)  # noqa: E731
    T += ode_hit_time(g_s, m, u_star, kinetic_step(p, g_s, u_star, m))
    T += relaxation_hit_time(m, u_star, u_nat - EDGE_EPS * (u_nat - u_star))
    return NaturalRegion(*(float(x) for x in (q_nat, u_nat, q1, kappa_bar, q2, q3, kappa_star, u_star, T)))
