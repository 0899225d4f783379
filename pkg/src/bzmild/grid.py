"""Periodic torus grids, scalar fields and the sup-type norms used throughout."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    dim: int
    extent: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not self.extent > 0:
            raise ValueError(f"extent must be positive, got {self.extent}")
        if self.points < 8 or self.points % 2:
            raise ValueError(f"points must be even and >= 8, got {self.points}")

    @property
    def spacing(self) -> float:
        return self.extent / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis, on [0, L)."""
        x = np.arange(self.points) * self.spacing
        if self.dim == 1:
            return [x]
        return [x[:, None], x[None, :]]


@dataclass(frozen=True, eq=False)
class Field:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("field contains NaN or Inf")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class StatePair:
    u: Field
    v: Field
    time: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v live on different grids")
        if self.time < 0:
            raise ValueError(f"time must be non-negative, got {self.time}")

    @property
    def grid(self) -> GridSpec:
        return self.u.grid


def sup_norm(f) -> float:
    return float(np.max(np.abs(np.asarray(f))))


def min_value(f) -> float:
    return float(np.min(np.asarray(f)))


def max_value(f) -> float:
    return float(np.max(np.asarray(f)))


def centered_gradient(values: np.ndarray, spacing: float, dim: int) -> list[np.ndarray]:
    """Periodic centered differences along the trailing ``dim`` axes."""
    axes = range(values.ndim - dim, values.ndim)
    return [(np.roll(values, -1, axis=ax) - np.roll(values, 1, axis=ax)) / (2.0 * spacing) for ax in axes]


def grad_magnitude(values: np.ndarray, spacing: float, dim: int) -> np.ndarray:
    parts = centered_gradient(values, spacing, dim)
    if dim == 1:
        return np.abs(parts[0])
    return np.sqrt(parts[0] ** 2 + parts[1] ** 2)


def grad_sup_norm(f: Field) -> float:
    g = f.grid
    return float(np.max(grad_magnitude(f.values, g.spacing, g.dim)))


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def constant(grid: GridSpec, c: float) -> Field:
    return Field(grid, np.full(grid.shape, float(c)))


def random_uniform(grid: GridSpec, lo: float, hi: float, seed=None) -> Field:
    return Field(grid, _rng(seed).uniform(lo, hi, size=grid.shape))


def gaussian_bump(grid: GridSpec, center, width: float, amplitude: float, baseline: float = 0.0) -> Field:
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    L = grid.extent
    r2 = 0.0
    for x, c in zip(grid.coords(), center):
        dx = (x - c + L / 2) % L - L / 2  # periodic distance
        r2 = r2 + dx ** 2
    return Field(grid, baseline + amplitude * np.exp(-r2 / (2.0 * width ** 2)))


def single_mode(grid: GridSpec, k, amplitude: float, baseline: float = 0.0, phase: str = "cos") -> Field:
    """baseline + amplitude * cos(2π k·x / L) (or sin)."""
    k = np.broadcast_to(np.asarray(k, dtype=float), (grid.dim,))
    arg = 0.0
    for x, kk in zip(grid.coords(), k):
        arg = arg + 2.0 * np.pi * kk * x / grid.extent
    wave = np.cos(arg) if phase == "cos" else np.sin(arg)
    return Field(grid, baseline + amplitude * wave * np.ones(grid.shape))


def band_limited(grid: GridSpec, lo: float, hi: float, seed=None, kmax: int = 6) -> Field:
    """Smooth random field mapped affinely onto [lo, hi] (both attained)."""
    vals = band_limited_array(grid, lo, hi, _rng(seed), kmax=kmax)
    return Field(grid, vals)


def band_limited_array(grid: GridSpec, lo: float, hi: float, rng, kmax: int = 6, batch: tuple = ()) -> np.ndarray:
    shape = batch + grid.shape
    spec_shape = batch + grid.shape[:-1] + (grid.points // 2 + 1,)
    coef = rng.standard_normal(spec_shape) + 1j * rng.standard_normal(spec_shape)
    kx = np.fft.fftfreq(grid.points, 1.0 / grid.points)
    kr = np.arange(grid.points // 2 + 1)
    if grid.dim == 1:
        mask = (kr <= kmax) & (kr > 0)
    else:
        mask = (np.abs(kx)[:, None] <= kmax) & (kr[None, :] <= kmax)
        mask[0, 0] = False
    coef = coef * mask
    raw = np.fft.irfftn(coef, s=grid.shape, axes=tuple(range(-grid.dim, 0)))
    axes = tuple(range(len(batch), len(shape)))
    rmin = raw.min(axis=axes, keepdims=True)
    rmax = raw.max(axis=axes, keepdims=True)
    out = lo + (hi - lo) * (raw - rmin) / (rmax - rmin)
    return np.clip(out, lo, hi)


def make_field(grid: GridSpec, kind: str, seed=None, **kw) -> Field:
    builders = {
        "constant": lambda: constant(grid, kw["c"]),
        "random_uniform": lambda: random_uniform(grid, kw["lo"], kw["hi"], seed),
        "gaussian_bump": lambda: gaussian_bump(grid, kw.get("center", grid.extent / 2), kw["width"],
                                               kw["amplitude"], kw.get("baseline", 0.0)),
        "single_mode": lambda: single_mode(grid, kw["k"], kw["amplitude"], kw.get("baseline", 0.0)),
        "band_limited": lambda: band_limited(grid, kw["lo"], kw["hi"], seed, kw.get("kmax", 6)),
    }
    if kind not in builders:
        raise ValueError(f"unknown field kind {kind!r}; choose from {sorted(builders)}")
    return builders[kind]()
