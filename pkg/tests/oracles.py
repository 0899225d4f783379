"""Independent reference solutions shared by the tests."""

import numpy as np
from scipy.integrate import solve_ivp

from bzmild.model import reaction_u


def uniform_ode(u0, v0, times, p):
    """Adaptive Radau solve of the kinetics (spatially uniform data)."""
    sol = solve_ivp(lambda _, y: [reaction_u(y[0], y[1], p), y[0] - y[1]], (0.0, float(times[-1])),
                    [u0, v0], method="Radau", rtol=1e-12, atol=1e-15, t_eval=times)
    assert sol.success
    return sol.y
