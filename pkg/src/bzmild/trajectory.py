from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bzmild.grid import Field, GridSpec, StatePair, grad_magnitude


@dataclass(eq=False)
class Trajectory:
    """Sampled (u, v) on a grid; ``u`` and ``v`` have shape (samples, *grid.shape)."""

    grid: GridSpec
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    provenance: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        n = len(self.times)
        if self.u.shape != (n,) + self.grid.shape or self.v.shape != self.u.shape:
            raise ValueError(f"expected fields of shape {(n,) + self.grid.shape}, got {self.u.shape}, {self.v.shape}")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise FloatingPointError("trajectory contains NaN or Inf")

    def __len__(self):
        return len(self.times)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def state(self, i: int) -> StatePair:
        return StatePair(Field(self.grid, self.u[i]), Field(self.grid, self.v[i]), float(self.times[i]))

    @property
    def states(self) -> list[StatePair]:
        return [self.state(i) for i in range(len(self))]

    def _interp(self, arr: np.ndarray, t: float) -> np.ndarray:
        t0, t1 = self.span
        if not (t0 - 1e-12 * max(1.0, abs(t1)) <= t <= t1 + 1e-12 * max(1.0, abs(t1))):
            raise ValueError(f"t = {t} outside trajectory span [{t0}, {t1}]")
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self) - 2)) if len(self) > 1 else 0
        if len(self) == 1:
            return arr[0]
        ta, tb = self.times[k], self.times[k + 1]
        w = min(max((t - ta) / (tb - ta), 0.0), 1.0)
        if w == 0.0:
            return arr[k]
        if w == 1.0:
            return arr[k + 1]
        return (1.0 - w) * arr[k] + w * arr[k + 1]

    def u_at(self, t: float) -> np.ndarray:
        """Linear interpolation in time between stored samples."""
        return self._interp(self.u, t)

    def v_at(self, t: float) -> np.ndarray:
        return self._interp(self.v, t)

    def envelope(self) -> np.ndarray:
        """Per-sample rows (t, min u, max u, min v, max v, |∇u|∞, |∇v|∞)."""
        ax = tuple(range(1, self.u.ndim))
        g = self.grid
        gu = grad_magnitude(self.u, g.spacing, g.dim).max(axis=ax)
        gv = grad_magnitude(self.v, g.spacing, g.dim).max(axis=ax)
        return np.column_stack([self.times, self.u.min(axis=ax), self.u.max(axis=ax),
                                self.v.min(axis=ax), self.v.max(axis=ax), gu, gv])

    @classmethod
    def from_states(cls, states: list[StatePair], provenance: str = "", meta: dict | None = None) -> "Trajectory":
        grid = states[0].grid
        return cls(grid, [s.time for s in states], np.stack([s.u.values for s in states]),
                   np.stack([s.v.values for s in states]), provenance, dict(meta or {}))
