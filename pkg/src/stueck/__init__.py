"""Stueckelberg wave-field evolution with trajectory diagnostics, and the
neutrino mass to cloud-size chain built on the pRQM oscillation phase."""

__version__ = "0.1.0"

from .constants import ModelConstants
from .cosmology import CloudResult, cloud_diameter, degenerate_radius, lss_compare, self_consistent_cloud
from .evolution import EvolveConfig, Potential, evolve, ground_state, step
from .fieldgrid import GridSpec, MetricSignature, WaveField, gaussian_packet, plane_wave
from .massmodel import InfeasibleDataError, OscillationData, SeeSawMassEstimator, solve_masses
from .oscillation import MixingScenario, Model, survival_probability

__all__ = [
    "CloudResult", "EvolveConfig", "GridSpec", "InfeasibleDataError", "MetricSignature",
    "MixingScenario", "Model", "ModelConstants", "OscillationData", "Potential",
    "SeeSawMassEstimator", "WaveField", "cloud_diameter", "degenerate_radius", "evolve",
    "gaussian_packet", "ground_state", "lss_compare", "plane_wave", "self_consistent_cloud",
    "solve_masses", "step", "survival_probability",
]
