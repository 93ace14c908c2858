"""Physical constants and model-unit constants.

All SI values come from :mod:`scipy.constants` (CODATA 2018). Derived
conversion factors are computed here, never typed in by hand.
"""
from __future__ import annotations

from dataclasses import dataclass

import scipy.constants as _sc

from ._validation import check_positive

HBAR = _sc.hbar  # J s
C_LIGHT = _sc.c  # m / s
G_NEWTON = _sc.G  # m^3 kg^-1 s^-2
ELEMENTARY_CHARGE = _sc.e  # J / eV
NEUTRON_MASS = _sc.m_n  # kg

EV_TO_KG = ELEMENTARY_CHARGE / C_LIGHT**2
MPC_TO_M = _sc.parsec * 1e6
# IAU 2015 nominal solar mass parameter divided by CODATA G
SOLAR_MASS = 1.3271244e20 / G_NEWTON

HBARC_EV_M = HBAR * C_LIGHT / ELEMENTARY_CHARGE  # eV m
HBARC_MEV_FM = HBARC_EV_M * 1e9  # MeV fm

# eV^2 * km / GeV -> radians, for the phase dm2 c^4 L / (4 hbar c E)
OSCILLATION_PHASE_CONSTANT = 1e3 / (4.0 * HBARC_EV_M * 1e9)

# rounded eV -> kg factor printed with the Muraki cloud-mass formula
PRINTED_EV_TO_KG = 1.7e-36


@dataclass(frozen=True)
class ModelConstants:
    """Action scale and particle mass in model units (k = 1/hbar)."""

    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hbar", check_positive(self.hbar, "hbar"))
        object.__setattr__(self, "mass", check_positive(self.mass, "mass"))

    @property
    def k(self) -> float:
        return 1.0 / self.hbar
