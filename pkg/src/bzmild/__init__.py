"""Keener-Tyson BZ reaction-diffusion: mild-solution construction and verification."""

from bzmild.model import ModelParams, KineticRoots, SteadyStates, preset_params

__version__ = "0.1.0"

__all__ = ["ModelParams", "KineticRoots", "SteadyStates", "preset_params", "__version__"]
