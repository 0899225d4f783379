"""Parameters, reaction kinetics and the root structure of the Keener-Tyson system.

    u_t = Δu + u(1-u)/ε - h v (u-q)/(u+q)
    v_t = dΔv - v + u
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

ROOT_TOL = 1e-10
BRACKET_TOL = 1e-12
DENOM_GUARD = 1e-12
_SCAN_POINTS = 4096


class SingularityError(ValueError):
    """Raised when u approaches the pole of the kinetic term at u = -q."""


class RootError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    h: float
    q: float
    d: float

    def __post_init__(self):
        for name in ("epsilon", "h", "d"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive and finite, got {val!r}")
        if not (0.0 < self.q < 1.0):
            raise ValueError(f"q must lie in (0, 1), got {self.q!r}")


PRESETS = {"standard": dict(epsilon=0.032, q=2.0e-4, d=0.6)}


def preset_params(h: float, name: str = "standard") -> ModelParams:
    """Named constant set; the excitability h is always user supplied."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    return ModelParams(h=h, **PRESETS[name])


def _guard(u, q):
    bad = np.asarray(u) <= -q + DENOM_GUARD
    if np.any(bad):
        worst = float(np.min(np.asarray(u)))
        raise SingularityError(f"u = {worst!r} is within {DENOM_GUARD} of the pole u = -q = {-q!r}")


def reaction_u(u, v, p: ModelParams):
    """Kinetic rate of u. Accepts scalars or arrays."""
    _guard(u, p.q)
    return u * (1.0 - u) / p.epsilon - p.h * v * (u - p.q) / (u + p.q)


def reaction_v(u, v):
    return u - v


def cubic_g(u, p: ModelParams):
    return u * (1.0 - u) * (u + p.q) - p.epsilon * p.h * p.q * (u - p.q)


def quad_g_tilde(u, p: ModelParams):
    return (1.0 - u) * (u + p.q) - p.epsilon * p.h * (u - p.q)


def rhs_G_m(s, m: float, p: ModelParams):
    """Lower comparison kinetics: u-rate with v frozen at its upper bound m."""
    _guard(s, p.q)
    return s * (1.0 - s) / p.epsilon - p.h * m * (s - p.q) / (s + p.q)


def rhs_G_star(s, q3: float, p: ModelParams):
    """Upper comparison kinetics: u-rate with v frozen at its lower bound q3."""
    return rhs_G_m(s, q3, p)


def _cubic_with_offset(coupling: float, p: ModelParams) -> Callable[[float], float]:
    # κ(1-κ)(κ+q) - εh·coupling·(κ-q); its zeros in (q,1) are those of G with v = coupling
    return lambda s: s * (1.0 - s) * (s + p.q) - p.epsilon * p.h * coupling * (s - p.q)


@dataclass(frozen=True)
class Bisection:
    root: float
    lo: float
    hi: float
    residual: float

    @property
    def width(self) -> float:
        return self.hi - self.lo


def bisect(fn: Callable[[float], float], lo: float, hi: float,
           bracket_tol: float = BRACKET_TOL, root_tol: float = ROOT_TOL,
           max_iter: int = 200) -> Bisection:
    """Plain bisection on a sign-changing bracket [lo, hi]."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return Bisection(float(lo), float(lo), float(lo), 0.0)
    if fhi == 0.0:
        return Bisection(float(hi), float(hi), float(hi), 0.0)
    if np.sign(flo) == np.sign(fhi):
        raise RootError(f"no sign change on [{lo}, {hi}]: f = {flo}, {fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0:
            return Bisection(float(mid), float(mid), float(mid), 0.0)
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
        if hi - lo <= bracket_tol:
            break
    root = 0.5 * (lo + hi)
    res = abs(fn(root))
    if res > root_tol:
        raise RootError(f"bisection stalled at {root} with residual {res:.3e}")
    return Bisection(float(root), float(lo), float(hi), float(res))


def _sign_changes(fn, lo: float, hi: float, n: int = _SCAN_POINTS):
    xs = np.linspace(lo, hi, n + 1)
    fs = np.asarray(fn(xs), dtype=float)
    idx = np.nonzero(np.sign(fs[:-1]) * np.sign(fs[1:]) <= 0)[0]
    return [(xs[i], xs[i + 1]) for i in idx]


def _root_in(fn, lo, hi, which, bracket_tol, root_tol, what):
    brackets = _sign_changes(fn, lo, hi)
    if not brackets:
        raise RootError(f"internal error: no sign change of {what} on ({lo}, {hi})")
    a, b = brackets[-1] if which == "largest" else brackets[0]
    return bisect(fn, a, b, bracket_tol, root_tol)


def count_roots(coupling: float, p: ModelParams, lo: float | None = None, hi: float = 1.0) -> int:
    """Number of real roots of the offset cubic strictly inside (lo, hi)."""
    lo = p.q if lo is None else lo
    c = p.epsilon * p.h * coupling
    roots = np.roots([-1.0, 1.0 - p.q, p.q - c, c * p.q])
    real = roots[np.abs(roots.imag) < 1e-12].real
    return int(np.sum((real > lo) & (real < hi)))


def find_u_bar(p: ModelParams, bracket_tol=BRACKET_TOL, root_tol=ROOT_TOL) -> float:
    """Largest root of g in (q, 1); upper edge of the invariant square S."""
    return _root_in(lambda s: cubic_g(s, p), p.q, 1.0, "largest", bracket_tol, root_tol, "g").root


def find_u_tilde(p: ModelParams, bracket_tol=BRACKET_TOL, root_tol=ROOT_TOL) -> float:
    r = _root_in(lambda s: quad_g_tilde(s, p), p.q, 1.0, "largest", bracket_tol, root_tol, "g~").root
    closed = u_tilde_closed_form(p)
    if abs(r - closed) > 1e3 * bracket_tol:
        raise RootError(f"bisection root {r} disagrees with closed form {closed}")
    return r


def u_tilde_closed_form(p: ModelParams) -> float:
    # u^2 - B u - C = 0 with B = 1 - q - εh, C = q(1 + εh); positive root
    B = 1.0 - p.q - p.epsilon * p.h
    C = p.q * (1.0 + p.epsilon * p.h)
    disc = math.sqrt(B * B + 4.0 * C)
    return (B + disc) / 2.0 if B >= 0 else 2.0 * C / (disc - B)


def find_root_G_m(m: float, p: ModelParams, bracket_tol=BRACKET_TOL, root_tol=ROOT_TOL) -> float:
    """q1: first zero of G_m above q, i.e. the limit of σ' = G_m(σ), σ(0) = q."""
    fn = _cubic_with_offset(m, p)
    return _root_in(fn, p.q, 1.0, "smallest", bracket_tol, root_tol, "G_m").root


def find_root_G_star(q3: float, p: ModelParams, bracket_tol=BRACKET_TOL, root_tol=ROOT_TOL) -> float:
    """κ*: largest zero of G_* in (q, ū), the limit of κ decreasing from m >= 1."""
    u_bar = find_u_bar(p)
    fn = _cubic_with_offset(q3, p)
    return _root_in(fn, p.q, u_bar, "largest", bracket_tol, root_tol, "G_*").root


def find_kappa_bar(q1: float, p: ModelParams, bracket_tol=BRACKET_TOL, root_tol=ROOT_TOL) -> float:
    u_bar = find_u_bar(p)
    fn = _cubic_with_offset(q1, p)
    return _root_in(fn, p.q, u_bar, "largest", bracket_tol, root_tol, "kappa-bar cubic").root


@dataclass(frozen=True)
class KineticRoots:
    u_bar: float
    u_tilde: float
    residual_g: float
    residual_g_tilde: float
    n_roots_g: int = 1

    @classmethod
    def compute(cls, p: ModelParams) -> "KineticRoots":
        u_bar = find_u_bar(p)
        u_tilde = find_u_tilde(p)
        out = cls(u_bar, u_tilde, float(abs(cubic_g(u_bar, p))), float(abs(quad_g_tilde(u_tilde, p))),
                  count_roots(p.q, p))
        if not (p.q < out.u_tilde < out.u_bar < 1.0):
            raise RootError(
                f"ordering q < u~ < u_bar < 1 violated: q={p.q}, u~={u_tilde}, u_bar={u_bar}")
        return out


@dataclass(frozen=True)
class SteadyStates:
    trivial: tuple[float, float]
    nontrivial: tuple[float, float]

    @classmethod
    def compute(cls, p: ModelParams) -> "SteadyStates":
        ut = find_u_tilde(p)
        out = cls((0.0, 0.0), (ut, ut))
        for u, v in (out.trivial, out.nontrivial):
            if abs(reaction_u(u, v, p)) > 10 * ROOT_TOL or abs(reaction_v(u, v)) > 10 * ROOT_TOL:
                raise RootError(f"({u}, {v}) is not a kinetic equilibrium")
        return out
