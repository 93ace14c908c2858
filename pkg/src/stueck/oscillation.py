"""Two-flavor vacuum oscillations under the standard and pRQM evolution models.

Units: masses in eV, baseline in km, energy in GeV; in eigenvalue_T
momenta and energies are in eV (natural units, c = 1).

The two models differ only in the dynamical phase alpha:

    standard:  alpha = dm2 c^4 L / (4 hbar c E)
    pRQM:      alpha = dm2 c^4 L / (4 hbar c E) * m1 / (m1 + m2) / beta
             = (m2 - m1) c^2 L sqrt(1 - beta^2) / (4 hbar c beta)   (E = m1 c^2 / sqrt(1 - beta^2))
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from ._validation import check_in_interval, check_non_negative, check_positive
from .constants import HBARC_EV_M, OSCILLATION_PHASE_CONSTANT


class Model(str, enum.Enum):
    STANDARD = "standard"
    PRQM = "prqm"

    @classmethod
    def parse(cls, value) -> "Model":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"model must be 'standard' or 'prqm', got {value!r}") from None


@dataclass(frozen=True)
class MixingScenario:
    m1: float
    m2: float
    theta: float
    L: float
    E_nu: float
    beta: float = 1.0
    model: Model = Model.STANDARD

    def __post_init__(self):
        check_non_negative(self.m1, "m1")
        check_non_negative(self.m2, "m2")
        check_in_interval(self.theta, "theta", 0.0, math.pi / 2)
        check_positive(self.L, "L")
        check_positive(self.E_nu, "E_nu")
        check_in_interval(self.beta, "beta", 0.0, 1.0, closed_hi=True)
        object.__setattr__(self, "model", Model.parse(self.model))

    @property
    def dm2(self) -> float:
        return self.m2**2 - self.m1**2

    @property
    def sin2_2theta(self) -> float:
        return math.sin(2.0 * self.theta) ** 2


@dataclass(frozen=True)
class PhaseFactor:
    alpha: float
    model: Model


def eigenvalue_T(model, m_j: float, p: float = 0.0, omega: float | None = None) -> float:
    """Temporal-evolution eigenvalue for a free mass state (eV).

    standard: E = sqrt(p^2 + m^2).
    pRQM:     K = (omega^2 - p^2) / (2 m), with omega the energy component of
              the four-momentum; omega defaults to the on-shell value.
    """
    model = Model.parse(model)
    check_non_negative(m_j, "m_j")
    if model is Model.STANDARD:
        return math.hypot(p, m_j)
    if m_j == 0.0:
        raise ValueError("pRQM eigenvalue divides by the mass; m_j = 0 is not allowed")
    if omega is None:
        omega = math.hypot(p, m_j)
    return (omega - p) * (omega + p) / (2.0 * m_j)


def oscillation_constant() -> float:
    """Phase per eV^2 km / GeV, i.e. 1e3 / (4 hbar c [eV m] 1e9) ~ 1.26693."""
    return OSCILLATION_PHASE_CONSTANT


def alpha_standard(scenario: MixingScenario, dm2: float | None = None) -> PhaseFactor:
    dm2 = scenario.dm2 if dm2 is None else dm2
    return PhaseFactor(OSCILLATION_PHASE_CONSTANT * dm2 * scenario.L / scenario.E_nu, Model.STANDARD)


def alpha_prqm(scenario: MixingScenario, dm2: float | None = None, form: str = "mass-ratio") -> PhaseFactor:
    """pRQM phase.

    form="mass-ratio" (default) scales the standard kernel by m1/(m1+m2)/beta
    and stays well conditioned as beta -> 1. form="velocity" evaluates
    (m2 - m1) L sqrt(1 - beta^2) / (4 hbar c beta) directly, which ignores
    ``dm2`` and ``E_nu``; at beta = 1 it falls back to the mass-ratio form.
    """
    if scenario.m1 + scenario.m2 <= 0:
        raise ValueError("pRQM phase needs m1 + m2 > 0")
    if form == "velocity":
        if scenario.beta >= 1.0:
            warnings.warn("velocity form degenerates at beta = 1; using the mass-ratio form",
                          RuntimeWarning, stacklevel=2)
        else:
            gamma_inv = math.sqrt((1.0 - scenario.beta) * (1.0 + scenario.beta))
            L_m = scenario.L * 1e3
            alpha = (scenario.m2 - scenario.m1) * L_m * gamma_inv / (4.0 * HBARC_EV_M * scenario.beta)
            return PhaseFactor(alpha, Model.PRQM)
    elif form != "mass-ratio":
        raise ValueError(f"form must be 'mass-ratio' or 'velocity', got {form!r}")
    kernel = alpha_standard(scenario, dm2).alpha
    ratio = scenario.m1 / (scenario.m1 + scenario.m2)
    return PhaseFactor(kernel * ratio / scenario.beta, Model.PRQM)


def alpha(scenario: MixingScenario, dm2: float | None = None) -> PhaseFactor:
    if scenario.model is Model.PRQM:
        return alpha_prqm(scenario, dm2)
    return alpha_standard(scenario, dm2)


def survival_from_phase(sin2_2theta, phase):
    return 1.0 - np.asarray(sin2_2theta) * np.sin(phase) ** 2


def survival_probability(scenario: MixingScenario) -> float:
    """P(nu_e -> nu_e) = 1 - sin^2(2 theta) sin^2(alpha) for the scenario's model."""
    return float(survival_from_phase(scenario.sin2_2theta, alpha(scenario).alpha))


def transition_probability(scenario: MixingScenario) -> float:
    return float(scenario.sin2_2theta * math.sin(alpha(scenario).alpha) ** 2)


def dm2_equivalent(dm2_standard: float) -> float:
    """pRQM splitting that reproduces the standard phase: 2 * dm2."""
    check_non_negative(dm2_standard, "dm2_standard")
    return 2.0 * dm2_standard


def survival_sweep(scenario: MixingScenario, axis: str, values) -> np.ndarray:
    """Rows (x, survival_standard, survival_prqm) sweeping L [km] or E [GeV]."""
    if axis not in ("L", "E"):
        raise ValueError(f"sweep axis must be 'L' or 'E', got {axis!r}")
    xs = np.asarray(values, dtype=float)
    rows = []
    for x in xs:
        kw = {"L": x} if axis == "L" else {"E_nu": x}
        sc = replace(scenario, **kw)
        rows.append((x,
                     survival_from_phase(sc.sin2_2theta, alpha_standard(sc).alpha),
                     survival_from_phase(sc.sin2_2theta, alpha_prqm(sc).alpha)))
    return np.array(rows, dtype=float).reshape(-1, 3)

