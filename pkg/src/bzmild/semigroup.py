"""Heat semigroup, damped semigroup e^{tL} (L = dΔ - 1) and the evolution family
U(t, s) generated by Δ - η(x, t), on the periodic grid.

Two realisations of the heat semigroup are provided:

* ``spectral``: Fourier multiplier exp(-D|k|²t). Exact semigroup law, but only
  positivity preserving up to round-off/Gibbs level on rough data.
* ``kernel``: circular convolution with the lattice heat kernel
  exp(tDΔ_h), whose 1-D weights are e^{-2s} I_n(2s) with s = Dt/h². The
  weights are nonnegative and sum to one, so minima and maxima are preserved
  exactly (outputs are clamped to the input range to absorb summation
  round-off, which is a few ulp at most).
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy import special

from bzmild.grid import Field, GridSpec
from bzmild.model import ModelParams

SPECTRAL = "spectral"
KERNEL = "kernel"
_MODES = (SPECTRAL, KERNEL)
_TAIL_MASS = 1e-17

# fault-injection hook: scales every heat propagator (verify must then fail)
_HEAT_SKEW = 1.0


@contextlib.contextmanager
def skewed_heat(factor: float):
    global _HEAT_SKEW
    old, _HEAT_SKEW = _HEAT_SKEW, float(factor)
    try:
        yield
    finally:
        _HEAT_SKEW = old


@dataclass(frozen=True)
class PropagatorConfig:
    mode: str = KERNEL
    substeps_per_unit: int = 1_000_000
    positivity_tol: float | None = None

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.substeps_per_unit < 1:
            raise ValueError("substeps_per_unit must be >= 1")

    def tolerance(self, scale: float) -> float:
        """Admissible sign/overshoot error for a field of sup-norm ``scale``."""
        if self.positivity_tol is not None:
            return self.positivity_tol
        return 0.0 if self.mode == KERNEL else 1e-9 * scale


# ---------------------------------------------------------------------------
# spectral multipliers

@lru_cache(maxsize=64)
def _wavenumber_sq(grid: GridSpec) -> np.ndarray:
    n, dx = grid.points, grid.spacing
    kf = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    kr = 2.0 * np.pi * np.fft.rfftfreq(n, d=dx)
    if grid.dim == 1:
        k2 = kr ** 2
    else:
        k2 = kf[:, None] ** 2 + kr[None, :] ** 2
    k2.setflags(write=False)
    return k2


def _spectral_heat(values: np.ndarray, t: float, D: float, grid: GridSpec) -> np.ndarray:
    axes = tuple(range(-grid.dim, 0))
    mult = np.exp(-D * t * _wavenumber_sq(grid)) * _HEAT_SKEW
    return np.fft.irfftn(np.fft.rfftn(values, axes=axes) * mult, s=grid.shape, axes=axes)


# ---------------------------------------------------------------------------
# lattice kernel

@lru_cache(maxsize=256)
def lattice_kernel(points: int, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of exp(sΔ_1) on a ring of ``points`` sites, Δ_1 the
    unit-spacing second difference. Returns (offsets, weights), weights > 0."""
    if s == 0.0:
        return np.array([0]), np.array([1.0])
    sigma = math.sqrt(2.0 * s)
    nmax = int(math.ceil(12.0 * sigma + 40))
    n = np.arange(nmax + 1)
    w = special.ive(n, 2.0 * s)
    tail = np.cumsum(w[::-1])[::-1]  # tail[j] = sum_{n>=j} w_n
    keep = int(np.searchsorted(-tail, -_TAIL_MASS * w[0]))  # first j with tail < threshold
    keep = max(keep, 1)
    w = w[:keep]
    folded = np.zeros(points)
    np.add.at(folded, np.arange(keep) % points, w)
    np.add.at(folded, (-np.arange(1, keep)) % points, w[1:])
    nz = np.nonzero(folded > 0)[0]
    weights = folded[nz] / folded.sum()
    offsets = np.where(nz > points // 2, nz - points, nz)
    order = np.argsort(np.abs(offsets), kind="stable")
    return offsets[order], weights[order]


def _convolve_last(values: np.ndarray, offsets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    n = values.shape[-1]
    r = int(np.max(np.abs(offsets)))
    if r == 0:
        return values * weights[0]
    reps = -(-r // n)  # wrap as many times as needed
    padded = np.concatenate([values] * (2 * reps + 1), axis=-1)
    base = reps * n
    out = weights[0] * padded[..., base + offsets[0]: base + offsets[0] + n]
    for o, w in zip(offsets[1:], weights[1:]):
        out = out + w * padded[..., base + o: base + o + n]
    return out


def _kernel_heat(values: np.ndarray, t: float, D: float, grid: GridSpec) -> np.ndarray:
    s = D * t / grid.spacing ** 2
    offsets, weights = lattice_kernel(grid.points, float(s))
    weights = weights * _HEAT_SKEW
    spatial = tuple(range(values.ndim - grid.dim, values.ndim))
    lo = values.min(axis=spatial, keepdims=True)
    hi = values.max(axis=spatial, keepdims=True)
    out = _convolve_last(values, offsets, weights)
    if grid.dim == 2:
        out = np.swapaxes(_convolve_last(np.swapaxes(out, -1, -2), offsets, weights), -1, -2)
    if _HEAT_SKEW != 1.0:
        return out
    return np.clip(out, lo, hi)


def heat_array(values: np.ndarray, t: float, D: float, grid: GridSpec, mode: str = KERNEL) -> np.ndarray:
    """e^{tDΔ} applied along the trailing grid axes; leading axes are a batch."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if t == 0:
        return np.array(values, dtype=float, copy=True)
    if mode == SPECTRAL:
        return _spectral_heat(values, t, D, grid)
    if mode == KERNEL:
        return _kernel_heat(values, t, D, grid)
    raise ValueError(f"unknown mode {mode!r}")


def damped_array(values, t: float, p: ModelParams, grid: GridSpec, mode: str = KERNEL) -> np.ndarray:
    return math.exp(-t) * heat_array(values, t, p.d, grid, mode)


# ---------------------------------------------------------------------------
# Field-level API

def heat(f: Field, t: float, diffusivity: float = 1.0, mode: str = KERNEL) -> Field:
    return f.with_values(heat_array(f.values, t, diffusivity, f.grid, mode))


def damped(f: Field, t: float, p: ModelParams, mode: str = KERNEL) -> Field:
    """e^{tL} f = e^{-t} e^{dtΔ} f."""
    return f.with_values(damped_array(f.values, t, p, f.grid, mode))


EtaSource = Callable[[float], Union[Field, np.ndarray, float]]


def _eta_values(eta: EtaSource, t: float):
    val = eta(t)
    return val.values if isinstance(val, Field) else val


def strang_substep(values: np.ndarray, eta_mid, dt: float, grid: GridSpec, mode: str) -> np.ndarray:
    """One step of exp(-η dt/2) ∘ e^{dtΔ} ∘ exp(-η dt/2)."""
    half = np.exp(-0.5 * dt * eta_mid)
    return half * heat_array(half * values, dt, 1.0, grid, mode)


def evolve_array(values: np.ndarray, eta: EtaSource, s: float, t: float, grid: GridSpec,
                 cfg: PropagatorConfig) -> np.ndarray:
    if t < s:
        raise ValueError(f"evolve needs t >= s, got s={s}, t={t}")
    n = int(math.ceil((t - s) * cfg.substeps_per_unit - 1e-9))
    if n == 0:
        return np.array(values, dtype=float, copy=True)
    dt = (t - s) / n
    out = np.asarray(values, dtype=float)
    for i in range(n):
        out = strang_substep(out, _eta_values(eta, s + (i + 0.5) * dt), dt, grid, cfg.mode)
    return out


def evolve(f: Field, eta: EtaSource, s: float, t: float, cfg: PropagatorConfig | None = None) -> Field:
    """U(t, s) f for the operator Δ - η(x, t), by midpoint-sampled Strang splitting."""
    cfg = cfg or PropagatorConfig()
    return f.with_values(evolve_array(f.values, eta, s, t, f.grid, cfg))
