"""Local solutions by successive approximation of the integral equations.

Starting from u_1(t) = e^{tΔ}u_0, v_1(t) = e^{dtΔ}v_0 the iterates are

    u_{l+1}(t) = U_l(t,0) u_0 + ∫_0^t U_l(t,s) ζ_l(s) ds
    v_{l+1}(t) = e^{tL} v_0   + ∫_0^t e^{(t-s)L} u_l(s) ds

with η_l = h v_l/(u_l+q), ζ_l = u_l(1-u_l)/ε + hq v_l/(u_l+q) and U_l the
evolution family of Δ - η_l. Time integrals use the composite trapezoid rule
on a fine node set; because the discrete propagators compose exactly, the rule
is evaluated by the recursion X_{n+1} = S_n(X_n + w_n f_n).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from bzmild.grid import Field, grad_magnitude
from bzmild.model import ModelParams
from bzmild.semigroup import KERNEL, damped_array, heat_array, strang_substep
from bzmild.trajectory import Trajectory

log = logging.getLogger(__name__)

HORIZON_DEFAULT = 1.0


class ConvergenceError(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


class BoundViolation(RuntimeError):
    """A bound that the iteration provably satisfies was broken numerically."""


@dataclass(frozen=True)
class SolverBounds:
    m: float
    a: float
    b: float
    T_star: float
    T_dagger: float
    T0: float
    quad_substeps: int = 4


def solver_bounds(u0: Field, v0: Field, p: ModelParams, quad_substeps: int = 4) -> SolverBounds:
    """Constants a = 2hm/q, b = 2m(1+2m)/ε + 2hm and T0 = min(1/(4a), m/(2b))."""
    if np.min(u0.values) < 0 or np.min(v0.values) < 0:
        raise ValueError("initial data must be nonnegative")
    m = float(max(np.max(np.abs(u0.values)), np.max(np.abs(v0.values))))
    return bounds_for_m(m, p, quad_substeps)


def bounds_for_m(m: float, p: ModelParams, quad_substeps: int = 4) -> SolverBounds:
    if m == 0.0:
        return SolverBounds(0.0, 0.0, 0.0, math.inf, math.inf, HORIZON_DEFAULT, quad_substeps)
    a = 2.0 * p.h * m / p.q
    b = 2.0 * m * (1.0 + 2.0 * m) / p.epsilon + 2.0 * p.h * m
    t_star, t_dagger = 1.0 / (4.0 * a), m / (2.0 * b)
    return SolverBounds(m, a, b, t_star, t_dagger, min(t_star, t_dagger), quad_substeps)


@dataclass(frozen=True)
class PicardConfig:
    samples: int = 64
    quad_substeps: int = 4
    tol: float = 1e-8
    max_iter: int = 20
    mode: str = KERNEL
    start: str = "heat"  # "heat": u_1 = e^{tΔ}u_0; "frozen": u_1 = u_0
    diag_rel_tol: float = 1e-6
    positivity_tol: float = 1e-9
    check_bounds: bool = True

    def __post_init__(self):
        if self.samples < 1 or self.quad_substeps < 1:
            raise ValueError("samples and quad_substeps must be >= 1")
        if self.start not in ("heat", "frozen"):
            raise ValueError(f"unknown start {self.start!r}")


@dataclass
class IterationDiagnostics:
    m: float
    K: list = field(default_factory=list)  # per iterate: (K1, K2, K3, K4)
    min_u: list = field(default_factory=list)
    min_v: list = field(default_factory=list)
    deltas: list = field(default_factory=list)  # deltas[i] = sup_t |u_{i+2}-u_{i+1}| + |v_{i+2}-v_{i+1}|

    @property
    def iterations(self) -> int:
        return len(self.K)

    def decay_ratios(self, floor: float = 0.0) -> list:
        d = self.deltas
        return [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > floor]


def _k_values(us, vs, times, grid):
    ax = tuple(range(1, us.ndim))
    root_t = np.sqrt(times)
    k3 = np.max(root_t * grad_magnitude(us, grid.spacing, grid.dim).max(axis=ax))
    k4 = np.max(root_t * grad_magnitude(vs, grid.spacing, grid.dim).max(axis=ax))
    return (float(np.abs(us).max()), float(np.abs(vs).max()), float(k3), float(k4))


def trapezoid_duhamel(x0: np.ndarray, nodes: np.ndarray, source: Callable[[int], np.ndarray],
                      step: Callable[[np.ndarray, int], np.ndarray], keep: Callable[[int], bool]) -> dict:
    """Composite-trapezoid Duhamel sum  P(τ_N)x0 + Σ_i w_i P(τ_N, τ_i) f_i.

    ``step(x, i)`` propagates from node i to node i+1, ``source(i)`` is f at
    node i. Returns {i: value at node i} for every i with ``keep(i)``.
    """
    out = {0: np.array(x0, dtype=float)} if keep(0) else {}
    x = np.asarray(x0, dtype=float)
    prev = 0.0
    f_i = source(0)
    for i in range(len(nodes) - 1):
        d = nodes[i + 1] - nodes[i]
        x = step(x + 0.5 * (prev + d) * f_i, i)
        prev = d
        f_i = source(i + 1)
        if keep(i + 1):
            out[i + 1] = x + 0.5 * d * f_i
    return out


def _eta_zeta(u, v, p: ModelParams):
    denom = u + p.q
    eta = p.h * v / denom
    zeta = u * (1.0 - u) / p.epsilon + p.h * p.q * v / denom
    return eta, zeta


def _interp_samples(arr: np.ndarray, pos: float) -> np.ndarray:
    """Linear interpolation of sample array at fractional sample index ``pos``."""
    k = min(int(math.floor(pos)), len(arr) - 2)
    w = pos - k
    if w == 0.0:
        return arr[k]
    return (1.0 - w) * arr[k] + w * arr[k + 1]


def _next_iterate(u0, v0, us, vs, p, grid, cfg, T):
    M, Q = cfg.samples, cfg.quad_substeps
    nodes = np.linspace(0.0, T, M * Q + 1)
    dt = T / (M * Q)
    keep = lambda i: i % Q == 0  # noqa: E731

    def coeffs(pos):
        return _eta_zeta(_interp_samples(us, pos), _interp_samples(vs, pos), p)

    zeta_cache = {}

    def zeta_at(i):
        if i not in zeta_cache:
            zeta_cache.clear()
            zeta_cache[i] = coeffs(i / Q)[1]
        return zeta_cache[i]

    def u_step(x, i):
        eta_mid, _ = coeffs((i + 0.5) / Q)
        return strang_substep(x, eta_mid, dt, grid, cfg.mode)

    new_u = trapezoid_duhamel(u0, nodes, zeta_at, u_step, keep)
    new_v = trapezoid_duhamel(v0, nodes, lambda i: _interp_samples(us, i / Q),
                              lambda x, i: damped_array(x, dt, p, grid, cfg.mode), keep)
    U = np.stack([new_u[k * Q] for k in range(M + 1)])
    V = np.stack([new_v[k * Q] for k in range(M + 1)])
    return U, V


def picard_solve(u0: Field, v0: Field, p: ModelParams, tol: float | None = None,
                 max_iter: int | None = None, cfg: PicardConfig | None = None,
                 horizon: float | None = None) -> tuple[Trajectory, IterationDiagnostics]:
    """Run the successive approximation on [0, horizon] (default T0).

    Raises ConvergenceError if ``tol`` is not reached in ``max_iter`` iterates
    and BoundViolation if an iterate breaks 0 <= u_l, v_l or K_{j,l} <= 2m.
    """
    cfg = cfg or PicardConfig()
    if tol is not None or max_iter is not None:
        cfg = replace(cfg, tol=cfg.tol if tol is None else tol,
                      max_iter=cfg.max_iter if max_iter is None else max_iter)
    grid = u0.grid
    bounds = solver_bounds(u0, v0, p, cfg.quad_substeps)
    T = bounds.T0 if horizon is None else float(horizon)
    if T <= 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if bounds.m > 0 and T > bounds.T0 * (1 + 1e-12):
        raise ValueError(f"horizon {T} exceeds the local existence time T0 = {bounds.T0}")
    M = cfg.samples
    times = np.linspace(0.0, T, M + 1)
    diag = IterationDiagnostics(bounds.m)
    meta = {"solver": "picard", "T0": bounds.T0, "samples": M, "quad_substeps": cfg.quad_substeps,
            "mode": cfg.mode, "params": p.__dict__.copy()}

    if bounds.m == 0.0:
        z = np.zeros((M + 1,) + grid.shape)
        diag.K.append((0.0, 0.0, 0.0, 0.0))
        diag.min_u.append(0.0)
        diag.min_v.append(0.0)
        return Trajectory(grid, times, z, z.copy(), "picard", meta), diag

    if cfg.start == "heat":
        us = np.stack([heat_array(u0.values, t, 1.0, grid, cfg.mode) for t in times])
        vs = np.stack([heat_array(v0.values, t, p.d, grid, cfg.mode) for t in times])
    else:
        us = np.broadcast_to(u0.values, (M + 1,) + grid.shape).copy()
        vs = np.broadcast_to(v0.values, (M + 1,) + grid.shape).copy()
    _record(diag, us, vs, times, grid, cfg, first=True)

    for _ in range(cfg.max_iter):
        nu, nv = _next_iterate(u0.values, v0.values, us, vs, p, grid, cfg, T)
        delta = float(np.max(np.abs(nu - us).reshape(M + 1, -1).max(axis=1)
                             + np.abs(nv - vs).reshape(M + 1, -1).max(axis=1)))
        diag.deltas.append(delta)
        us, vs = nu, nv
        _record(diag, us, vs, times, grid, cfg, first=False)
        log.debug("picard iterate %d: delta = %.3e", diag.iterations, delta)
        if delta < cfg.tol:
            return Trajectory(grid, times, us, vs, "picard", meta), diag
    raise ConvergenceError(f"no convergence to {cfg.tol} within {cfg.max_iter} iterations; "
                           f"deltas = {diag.deltas}", diag.deltas)


def _record(diag, us, vs, times, grid, cfg, first):
    K = _k_values(us, vs, times, grid)
    diag.K.append(K)
    diag.min_u.append(float(us.min()))
    diag.min_v.append(float(vs.min()))
    if not cfg.check_bounds:
        return
    m = diag.m
    cap = (1.0 if first else 2.0) * m + cfg.diag_rel_tol * m
    for j, kj in enumerate(K, start=1):
        if kj > cap:
            raise BoundViolation(f"K_{j},{diag.iterations} = {kj:.6g} exceeds {cap:.6g}")
    floor = -cfg.positivity_tol * max(m, 1.0)
    if diag.min_u[-1] < floor or diag.min_v[-1] < floor:
        raise BoundViolation(f"iterate {diag.iterations} lost nonnegativity: "
                             f"min u = {diag.min_u[-1]:.3e}, min v = {diag.min_v[-1]:.3e}")


def duhamel_v(v0: Field, u_traj: Trajectory, t: float, p: ModelParams,
              quad_substeps: int = 4, mode: str = KERNEL) -> Field:
    """v(t) = e^{tL}v0 + ∫_0^t e^{(t-s)L} u(s) ds with u linearly interpolated
    between the trajectory samples."""
    t0, t1 = u_traj.span
    if t0 != 0.0:
        raise ValueError("trajectory must start at t = 0")
    if not (0.0 <= t <= t1 * (1 + 1e-12)):
        raise ValueError(f"t = {t} outside trajectory span [0, {t1}]")
    t = min(t, t1)
    knots = u_traj.times[u_traj.times < t]
    pieces = [np.linspace(a, b, quad_substeps + 1)[:-1] for a, b in zip(knots, np.append(knots[1:], t))]
    nodes = np.append(np.concatenate(pieces) if pieces else np.zeros(0), t)
    grid = v0.grid
    if len(nodes) == 1:
        return v0
    out = trapezoid_duhamel(v0.values, nodes, lambda i: u_traj.u_at(nodes[i]),
                            lambda x, i: damped_array(x, nodes[i + 1] - nodes[i], p, grid, mode),
                            lambda i: i == len(nodes) - 1)
    return Field(grid, out[len(nodes) - 1])


def uniqueness_residual(u0: Field, v0: Field, p: ModelParams, refine: int = 1,
                        alternate_start: bool = False, cfg: PicardConfig | None = None) -> float:
    """Sup-in-time gap between two Picard runs on the same data.

    The second run uses ``refine`` times more quadrature nodes and, with
    ``alternate_start``, starts the iteration from frozen data instead of the
    heat flow. Identical settings give exactly zero.
    """
    cfg = cfg or PicardConfig()
    a, _ = picard_solve(u0, v0, p, cfg=cfg)
    other = replace(cfg, quad_substeps=cfg.quad_substeps * refine,
                    start="frozen" if alternate_start else cfg.start)
    b, _ = picard_solve(u0, v0, p, cfg=other)
    gap = np.abs(a.u - b.u).reshape(len(a), -1).max(axis=1) + np.abs(a.v - b.v).reshape(len(a), -1).max(axis=1)
    return float(gap.max())


def picard_extend(u0: Field, v0: Field, p: ModelParams, T: float, cfg: PicardConfig | None = None,
                  max_windows: int = 10_000_000) -> Trajectory:
    """Global continuation by restarting the local scheme on successive windows,
    each of length T0 computed from the current data."""
    cfg = cfg or PicardConfig()
    grid = u0.grid
    times, us, vs = [0.0], [u0.values], [v0.values]
    t, u, v = 0.0, u0, v0
    windows = 0
    while t < T * (1 - 1e-14):
        bounds = solver_bounds(u, v, p)
        if bounds.m == 0.0:
            us.append(np.zeros(grid.shape))
            vs.append(np.zeros(grid.shape))
            times.append(T)
            break
        span = min(bounds.T0, T - t)
        traj, _ = picard_solve(u, v, p, cfg=cfg, horizon=span)
        times.extend(t + traj.times[1:])
        us.extend(traj.u[1:])
        vs.extend(traj.v[1:])
        t += span
        u, v = Field(grid, traj.u[-1]), Field(grid, traj.v[-1])
        windows += 1
        if windows >= max_windows:
            raise RuntimeError(f"picard_extend exceeded {max_windows} windows")
    meta = {"solver": "picard-extend", "windows": windows, "samples": cfg.samples,
            "quad_substeps": cfg.quad_substeps, "mode": cfg.mode}
    return Trajectory(grid, np.array(times), np.stack(us), np.stack(vs), "picard-extend", meta)


def linear_duhamel(x0: np.ndarray, eta: Callable[[float], np.ndarray], source: Callable[[float], np.ndarray],
                   nodes: np.ndarray, grid, mode: str = KERNEL) -> dict:
    """θ(τ_i) = U(τ_i,0)x0 + ∫_0^{τ_i} U(τ_i,s) source(s) ds for Δ - η, at every node."""
    nodes = np.asarray(nodes, dtype=float)

    def step(x, i):
        d = nodes[i + 1] - nodes[i]
        return strang_substep(x, eta(0.5 * (nodes[i] + nodes[i + 1])), d, grid, mode)

    return trapezoid_duhamel(x0, nodes, lambda i: source(nodes[i]), step, lambda i: True)
