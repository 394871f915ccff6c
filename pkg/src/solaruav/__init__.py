"""Joint UAV positioning, power, and subcarrier allocation for a
solar-powered multicarrier downlink, with an independent grid/water-filling
verifier and a Monte Carlo campaign harness."""

from .channel import Instance, SystemParams, make_instance, path_gain_constant
from .sca import SolverOptions, Solution, sca_solve
from .solar import AltitudeBranch, SolarParams, solar_power, transmittance

__all__ = [
    "AltitudeBranch",
    "Instance",
    "SolarParams",
    "SolverOptions",
    "Solution",
    "SystemParams",
    "make_instance",
    "path_gain_constant",
    "sca_solve",
    "solar_power",
    "transmittance",
]

__version__ = "0.1.0"
