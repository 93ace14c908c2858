"""Degenerate fermion clouds: neutron-star radius, neutrino cloud size, LSS comparison.

The degenerate radius of a self-gravitating fermion ball is

    r = 1.2 (hbar^2 / G) M^(-1/3) m^(-8/3)

For a cloud of uniform number density n the mass is M = (4/3) pi r^3 n f m,
with f the factor for matter besides the neutrinos themselves. Substituting
gives r^2 = 1.2 (hbar^2/G) (4 pi n f m / 3)^(-1/3) m^(-8/3), so r ~ m^(-3/2).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from ._validation import check_positive
from .constants import EV_TO_KG, G_NEWTON, HBAR, MPC_TO_M

RADIUS_COEFFICIENT = 1.2
CLOUD_DIAMETER_COEFFICIENT = 7.1  # Mpc eV^(3/2)
DEFAULT_NUMBER_DENSITY = 110e6  # per m^3
DEFAULT_MASS_MULTIPLIER = 19.0
DEFAULT_LSS_SCALE = 90.0  # Mpc
CONSISTENCY_BAND = (0.8, 1.25)


@dataclass(frozen=True)
class CloudResult:
    m_nu: float  # eV
    radius: float  # Mpc
    diameter: float  # Mpc
    cloud_mass: float  # kg
    lss_scale: float  # Mpc
    ratio: float
    coefficient: float  # diameter * m_nu^(3/2), Mpc eV^(3/2)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LssComparison:
    diameter: float
    lss_scale: float
    ratio: float
    verdict: str
    band: tuple[float, float]

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"


def degenerate_radius(fermion_mass: float, total_mass: float,
                      coefficient: float = RADIUS_COEFFICIENT) -> float:
    """Equilibrium radius in meters; both masses in kg."""
    m = check_positive(fermion_mass, "fermion_mass")
    M = check_positive(total_mass, "total_mass")
    return coefficient * HBAR**2 / G_NEWTON * M ** (-1.0 / 3.0) * m ** (-8.0 / 3.0)


def cloud_diameter(m_nu: float, coefficient: float = CLOUD_DIAMETER_COEFFICIENT) -> float:
    """Neutrino cloud diameter in Mpc for a neutrino mass in eV."""
    m_nu = check_positive(m_nu, "m_nu")
    return coefficient * m_nu ** -1.5


def cloud_mass(radius_m: float, m_nu: float, number_density: float = DEFAULT_NUMBER_DENSITY,
               mass_multiplier: float = DEFAULT_MASS_MULTIPLIER) -> float:
    """Mass (kg) of a uniform sphere of radius ``radius_m`` meters."""
    rho = number_density * mass_multiplier * m_nu * EV_TO_KG
    return 4.0 / 3.0 * math.pi * radius_m**3 * rho


def self_consistent_cloud(m_nu: float, number_density: float = DEFAULT_NUMBER_DENSITY,
                          mass_multiplier: float = DEFAULT_MASS_MULTIPLIER,
                          lss_scale: float = DEFAULT_LSS_SCALE,
                          coefficient: float = RADIUS_COEFFICIENT) -> CloudResult:
    """Cloud whose mass and degenerate radius agree.

    ``mass_multiplier`` scales the neutrino mass density to the total
    gravitating density (19 turns 110 m_nu per cm^3 into 2090 m_nu).
    """
    check_positive(m_nu, "m_nu")
    check_positive(number_density, "number_density")
    check_positive(mass_multiplier, "mass_multiplier")
    check_positive(lss_scale, "lss_scale")
    m_kg = m_nu * EV_TO_KG
    rho = number_density * mass_multiplier * m_kg
    r2 = coefficient * HBAR**2 / G_NEWTON * (4.0 / 3.0 * math.pi * rho) ** (-1.0 / 3.0) * m_kg ** (-8.0 / 3.0)
    r_m = math.sqrt(r2)
    radius = r_m / MPC_TO_M
    diameter = 2.0 * radius
    return CloudResult(
        m_nu=m_nu,
        radius=radius,
        diameter=diameter,
        cloud_mass=cloud_mass(r_m, m_nu, number_density, mass_multiplier),
        lss_scale=lss_scale,
        ratio=diameter / lss_scale,
        coefficient=diameter * m_nu**1.5,
    )


def lss_compare(diameter: float, lss_scale: float = DEFAULT_LSS_SCALE,
                band: tuple[float, float] = CONSISTENCY_BAND) -> LssComparison:
    check_positive(diameter, "diameter")
    check_positive(lss_scale, "lss_scale")
    lo, hi = band
    if not 0 < lo <= hi:
        raise ValueError(f"band must satisfy 0 < lo <= hi, got {band!r}")
    ratio = diameter / lss_scale
    verdict = "consistent" if lo <= ratio <= hi else "inconsistent"
    return LssComparison(diameter, lss_scale, ratio, verdict, (lo, hi))
