"""Polar decomposition and hydrodynamic diagnostics of a wave field.

Everything that needs a phase gradient is computed from ``Im(d psi / psi)``
rather than by differentiating the wrapped phase, so no unwrapping is ever
required. Nodes whose amplitude falls below a floor are masked: quantities
that divide by the amplitude are set to NaN there and excluded from
integrals and norms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._validation import check_finite_array, check_matching_grids, check_uniform_spacing
from .constants import ModelConstants
from .evolution import Potential
from .fieldgrid import GridSpec, MetricSignature, WaveField, derivative

DEFAULT_RELATIVE_FLOOR = 1e-8
# The density form of the Bohm term divides by P = A^2, amplifying FFT
# roundoff by ~1/P; below A ~ 1e-3 max(A) that roundoff exceeds 1e-8.
DENSITY_FORM_RELATIVE_FLOOR = 1e-3


@dataclass(frozen=True, eq=False)
class PolarField:
    """psi = A exp(i S / hbar) with A >= 0; S is wrapped per node."""

    grid: GridSpec
    metric: MetricSignature
    A: np.ndarray
    S: np.ndarray
    mask: np.ndarray  # True where A < amplitude_floor
    amplitude_floor: float
    hbar: float = 1.0
    s: float = 0.0

    def reconstruct(self) -> np.ndarray:
        return self.A * np.exp(1j * self.S / self.hbar)

    def as_field(self) -> WaveField:
        return WaveField(self.grid, self.metric, self.reconstruct(), self.s)

    @property
    def density(self) -> np.ndarray:
        return self.A**2


@dataclass(frozen=True, eq=False)
class StabilityFields:
    Lambda: np.ndarray
    epsilon: np.ndarray

    @property
    def max_abs_lambda(self) -> float:
        vals = self.Lambda[np.isfinite(self.Lambda)]
        return float(np.max(np.abs(vals))) if vals.size else float("nan")


@dataclass(frozen=True, eq=False)
class ResidualReport:
    """Residual fields at the interior snapshots and their L2 norms."""

    s: np.ndarray
    fields: np.ndarray
    l2_per_snapshot: np.ndarray
    identity_max_error: float = float("nan")

    @property
    def l2(self) -> float:
        return float(np.max(self.l2_per_snapshot))


@dataclass(frozen=True)
class ChetaevAction:
    value: float
    integration_by_parts: float
    masked_mass: float
    low_confidence: bool


def _floor(A: np.ndarray, amplitude_floor: float | None) -> float:
    if amplitude_floor is None:
        return DEFAULT_RELATIVE_FLOOR * float(np.max(A))
    if amplitude_floor < 0:
        raise ValueError("amplitude_floor must be >= 0")
    return float(amplitude_floor)


def decompose(field: WaveField, amplitude_floor: float | None = None,
              constants: ModelConstants | None = None) -> PolarField:
    """Split into amplitude A = |psi| and action S = hbar arg(psi).

    ``amplitude_floor`` is absolute; the default is 1e-8 max(A).
    """
    constants = constants or ModelConstants()
    psi = check_finite_array(field.values, "field", field.grid.node_coords)
    A = np.abs(psi)
    if not np.any(A > 0):
        raise ValueError("cannot decompose an all-zero field")
    floor = _floor(A, amplitude_floor)
    S = constants.hbar * np.angle(psi)
    return PolarField(field.grid, field.metric, A, S, A < floor, floor, constants.hbar, field.s)


def _masked(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=float, copy=True)
    out[mask] = np.nan
    return out


def _safe_div(num, den, mask):
    den = np.where(mask, 1.0, den)
    return num / den


def signed_laplacian_array(values, grid, metric, backend="spectral"):
    return sum(sign * derivative(values, grid, a, 2, backend) for a, sign in enumerate(metric.signs))


def quantum_potential(polar: PolarField, constants: ModelConstants | None = None,
                      backend: str = "spectral") -> np.ndarray:
    """Q = -(hbar^2 / 2m) (d_i d^i A) / A; NaN on masked nodes."""
    constants = constants or ModelConstants()
    lap = signed_laplacian_array(polar.A, polar.grid, polar.metric, backend)
    q = -(constants.hbar**2 / (2.0 * constants.mass)) * _safe_div(lap, polar.A, polar.mask)
    return _masked(q, polar.mask)


def bohm_term_from_density(P: np.ndarray, grid: GridSpec, metric: MetricSignature, mask: np.ndarray,
                           constants: ModelConstants | None = None,
                           backend: str = "spectral") -> np.ndarray:
    """-(hbar^2/4m) [d_i d^i P / P - (1/2) d_i P d^i P / P^2], from the density alone."""
    constants = constants or ModelConstants()
    return -(constants.hbar**2 / (4.0 * constants.mass)) * _density_bracket(P, grid, metric, mask, backend)


def _density_bracket(P, grid, metric, mask, backend="spectral"):
    lap = signed_laplacian_array(P, grid, metric, backend)
    grad_sq = sum(sign * derivative(P, grid, a, 1, backend) ** 2 for a, sign in enumerate(metric.signs))
    Ps = np.where(mask, 1.0, P)
    return _masked(lap / Ps - 0.5 * grad_sq / Ps**2, mask)


def bohm_identity_error(polar: PolarField, backend: str = "spectral") -> float:
    """max |d^2P/P - (1/2)(dP)^2/P^2 - 2 d^2A/A| over unmasked nodes, with P = A^2."""
    bracket = _density_bracket(polar.density, polar.grid, polar.metric, polar.mask, backend)
    lap_a = signed_laplacian_array(polar.A, polar.grid, polar.metric, backend)
    rhs = 2.0 * _safe_div(lap_a, polar.A, polar.mask)
    off = ~polar.mask
    return float(np.max(np.abs(bracket[off] - rhs[off])))


def _log_derivatives(psi, grid, mask, backend):
    """d_a psi / psi and d_a^2 psi / psi per axis (zeros on masked nodes)."""
    den = np.where(mask, 1.0, psi)
    d1 = [derivative(psi, grid, a, 1, backend) / den for a in range(grid.ndim)]
    d2 = [derivative(psi, grid, a, 2, backend) / den for a in range(grid.ndim)]
    return d1, d2


def velocity_field(field: WaveField, constants: ModelConstants | None = None,
                   amplitude_floor: float | None = None, backend: str = "spectral") -> np.ndarray:
    """v^a = (hbar/m) sign_a Im(d_a psi / psi), stacked (D, *shape); NaN on masked nodes."""
    constants = constants or ModelConstants()
    psi = check_finite_array(field.values, "field", field.grid.node_coords).astype(complex)
    A = np.abs(psi)
    mask = A < _floor(A, amplitude_floor)
    den = np.where(mask, 1.0, psi)
    scale = constants.hbar / constants.mass
    comps = []
    for a, sign in enumerate(field.metric.signs):
        v = sign * scale * np.imag(derivative(psi, field.grid, a, 1, backend) / den)
        comps.append(_masked(v, mask))
    return np.stack(comps)


def stability_functional(polar: PolarField, constants: ModelConstants | None = None,
                         backend: str = "spectral") -> StabilityFields:
    """Lambda = (1/m) d_i d^i S as the divergence of the velocity field.

    d_a v^a = (hbar/m) sign_a Im(d_a^2 psi/psi - (d_a psi/psi)^2), evaluated
    node-wise so the wrapped phase is never differentiated. Also returns the
    kinetic-energy variation epsilon = Lambda / (2k).
    """
    constants = constants or ModelConstants()
    psi = polar.reconstruct()
    d1, d2 = _log_derivatives(psi, polar.grid, polar.mask, backend)
    lam = sum(sign * np.imag(d2[a] - d1[a] ** 2) for a, sign in enumerate(polar.metric.signs))
    lam = _masked(constants.hbar / constants.mass * lam, polar.mask)
    return StabilityFields(lam, lam / (2.0 * constants.k))


def probability_current(field: WaveField, constants: ModelConstants | None = None,
                        backend: str = "spectral") -> np.ndarray:
    """J^a = P v^a = (hbar/m) sign_a Im(conj(psi) d_a psi); smooth, needs no mask."""
    constants = constants or ModelConstants()
    psi = field.values.astype(complex)
    scale = constants.hbar / constants.mass
    return np.stack([sign * scale * np.imag(np.conj(psi) * derivative(psi, field.grid, a, 1, backend))
                     for a, sign in enumerate(field.metric.signs)])


def _snapshot_checks(snapshots: Sequence[WaveField]) -> float:
    if len(snapshots) < 3:
        raise ValueError("need at least 3 consecutive snapshots")
    check_matching_grids(snapshots)
    return check_uniform_spacing([f.s for f in snapshots])


def _l2(r: np.ndarray, dv: float) -> float:
    vals = r[np.isfinite(r)]
    return float(np.sqrt(np.sum(vals**2) * dv))


def continuity_residual(snapshots: Sequence[WaveField], constants: ModelConstants | None = None,
                        backend: str = "spectral") -> ResidualReport:
    """dP/ds + d_a J^a at each interior snapshot (central difference in s)."""
    constants = constants or ModelConstants()
    ds = _snapshot_checks(snapshots)
    grid = snapshots[0].grid
    fields, l2s = [], []
    for k in range(1, len(snapshots) - 1):
        dP = (snapshots[k + 1].density() - snapshots[k - 1].density()) / (2.0 * ds)
        J = probability_current(snapshots[k], constants, backend)
        div = sum(derivative(J[a], grid, a, 1, backend) for a in range(grid.ndim))
        r = dP + div
        fields.append(r)
        l2s.append(_l2(r, grid.cell_volume))
    s = np.array([f.s for f in snapshots[1:-1]])
    return ResidualReport(s, np.array(fields), np.array(l2s))


def hamilton_jacobi_residual(snapshots: Sequence[WaveField], U: Potential | None = None,
                             constants: ModelConstants | None = None,
                             amplitude_floor: float | None = None,
                             backend: str = "spectral") -> ResidualReport:
    """d_s S + d_i S d^i S / 2m + U + Bohm term (from P) at interior snapshots.

    d_s S comes from the phase of psi(s+ds) conj(psi(s-ds)), so wrapping
    never enters. ``identity_max_error`` is the worst node-wise mismatch of
    the density bracket against 2 d^2A/A over all interior snapshots.
    The default floor is DENSITY_FORM_RELATIVE_FLOOR * max(A) per snapshot.
    """
    constants = constants or ModelConstants()
    U = U or Potential.zero()
    ds = _snapshot_checks(snapshots)
    grid, metric = snapshots[0].grid, snapshots[0].metric
    hbar, m = constants.hbar, constants.mass
    fields, l2s, ident = [], [], 0.0
    for k in range(1, len(snapshots) - 1):
        snap = snapshots[k]
        floor = amplitude_floor
        if floor is None:
            floor = DENSITY_FORM_RELATIVE_FLOOR * float(np.max(np.abs(snap.values)))
        polar = decompose(snap, floor, constants)
        mask = polar.mask | (np.abs(snapshots[k - 1].values) < polar.amplitude_floor) \
            | (np.abs(snapshots[k + 1].values) < polar.amplitude_floor)
        dS = hbar * np.angle(snapshots[k + 1].values * np.conj(snapshots[k - 1].values)) / (2.0 * ds)
        psi = snap.values.astype(complex)
        d1, _ = _log_derivatives(psi, grid, mask, backend)
        grad_sq = sum(sign * (hbar * np.imag(d1[a])) ** 2 for a, sign in enumerate(metric.signs))
        u = U.evaluate(grid, snap.s, constants, step_index=k)
        bohm = bohm_term_from_density(polar.density, grid, metric, mask, constants, backend)
        r = _masked(dS + grad_sq / (2.0 * m) + u + bohm, mask)
        fields.append(r)
        l2s.append(_l2(r, grid.cell_volume))
        ident = max(ident, bohm_identity_error(polar, backend))
    s = np.array([f.s for f in snapshots[1:-1]])
    return ResidualReport(s, np.array(fields), np.array(l2s), ident)


def chetaev_action(field: WaveField, polar: PolarField | None = None,
                   constants: ModelConstants | None = None, backend: str = "spectral",
                   masked_mass_limit: float = 0.01) -> ChetaevAction:
    """Integral of Q psi psi* over unmasked nodes, plus the integrated-by-parts form.

    Q A^2 = -(hbar^2/2m) A d_i d^i A, so the direct form never divides by A.
    The second form is (hbar^2/2m) sum_a sign_a integral (d_a A)^2.
    """
    constants = constants or ModelConstants()
    polar = polar or decompose(field, constants=constants)
    grid, metric = polar.grid, polar.metric
    dv = grid.cell_volume
    coef = constants.hbar**2 / (2.0 * constants.mass)
    lap = signed_laplacian_array(polar.A, grid, metric, backend)
    off = ~polar.mask
    direct = float(-coef * np.sum((polar.A * lap)[off]) * dv)
    ibp = float(coef * sum(sign * np.sum(derivative(polar.A, grid, a, 1, backend) ** 2)
                           for a, sign in enumerate(metric.signs)) * dv)
    total = float(np.sum(polar.density) * dv)
    masked_mass = float(np.sum(polar.density[polar.mask]) * dv) / total
    return ChetaevAction(direct, ibp, masked_mass, masked_mass > masked_mass_limit)
