"""Pilot-wave dynamics on 1D and 2D grids.

Spectral split-operator propagation, guidance-equation trajectories and
scenario runs for packet crossing, recorders and protective measurement.
"""

__version__ = "0.1.0"

from .errors import BohmLabError  # noqa: E402
from .wavecore import GaussianPacketSpec, Grid, WaveFunction, build_state, current, density, make_grid  # noqa: E402

__all__ = ["BohmLabError", "GaussianPacketSpec", "Grid", "WaveFunction", "build_state", "current", "density",
           "make_grid", "__version__"]
