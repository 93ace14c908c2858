"""Propagation of a wave field in the evolution parameter s.

Solves ``i hbar d psi/ds = -(hbar^2 / 2m) d_i d^i psi + U psi`` on a periodic
grid. The default integrator is Strang split-step with exact spectral
kinetic factors; Crank-Nicolson is provided as a matrix-free alternative
sharing the same spectral Hamiltonian.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres

from ._validation import check_finite_array, check_positive
from .constants import ModelConstants
from .fieldgrid import GridSpec, MetricSignature, WaveField, fft_workers, signed_k2

log = logging.getLogger(__name__)

POTENTIAL_KINDS = ("zero", "harmonic", "tabulated", "expression")
SCHEMES = ("split-step", "crank-nicolson")

_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "cosh",
                 "sinh", "arctan", "pi", "where", "minimum", "maximum")
}


class AliasingWarning(RuntimeWarning):
    """Kinetic phase per step exceeds pi on the highest resolved mode."""


@dataclass(frozen=True, eq=False)
class Potential:
    """Real potential U(q), optionally s-dependent.

    kind:
      zero        U = 0
      harmonic    U = m/2 sum_a omega_a^2 q_a^2
      tabulated   ``values`` of grid shape, or (n_steps, *grid shape) per step
      expression  numpy expression in q0..q3 (or q) and s
    """

    kind: str = "zero"
    omega: tuple[float, ...] | float | None = None
    values: np.ndarray | None = None
    expression: str | None = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"potential kind must be one of {POTENTIAL_KINDS}, got {self.kind!r}")
        if self.kind == "harmonic" and self.omega is None:
            raise ValueError("harmonic potential needs omega")
        if self.kind == "tabulated" and self.values is None:
            raise ValueError("tabulated potential needs values")
        if self.kind == "expression" and not self.expression:
            raise ValueError("expression potential needs an expression string")

    @classmethod
    def zero(cls) -> "Potential":
        return cls("zero")

    @classmethod
    def harmonic(cls, omega) -> "Potential":
        return cls("harmonic", omega=omega)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def evaluate(self, grid: GridSpec, s: float = 0.0, constants: ModelConstants | None = None,
                 step_index: int = 0) -> np.ndarray:
        constants = constants or ModelConstants()
        if self.kind == "zero":
            out = np.zeros(grid.shape)
        elif self.kind == "harmonic":
            omega = np.broadcast_to(np.asarray(self.omega, dtype=float), (grid.ndim,))
            out = sum(0.5 * constants.mass * omega[a] ** 2 * q**2
                      for a, q in enumerate(grid.mesh()))
        elif self.kind == "tabulated":
            table = np.asarray(self.values, dtype=float)
            if table.shape == grid.shape:
                out = table
            elif table.ndim == grid.ndim + 1 and table.shape[1:] == grid.shape:
                out = table[min(step_index, table.shape[0] - 1)]
            else:
                raise ValueError(f"tabulated potential shape {table.shape} does not fit grid {grid.shape}")
        else:
            mesh = grid.mesh()
            names = dict(_EXPR_NAMESPACE)
            names.update({f"q{a}": q for a, q in enumerate(mesh)})
            names["q"] = mesh[0]
            names["s"] = s
            out = eval(self.expression, {"__builtins__": {}}, names)  # noqa: S307
            out = np.broadcast_to(np.asarray(out, dtype=float), grid.shape)
        if np.iscomplexobj(out):
            raise ValueError("potential must be real-valued")
        return check_finite_array(np.asarray(out, dtype=float), "potential", grid.node_coords)


def _expr_names(expr: str) -> set[str]:
    return set(compile(expr, "<potential>", "eval").co_names)


@dataclass(frozen=True)
class EvolveConfig:
    ds: float
    n_steps: int
    scheme: str = "split-step"
    snapshot_stride: int = 1

    def __post_init__(self):
        check_positive(self.ds, "ds")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be an integer >= 1, got {self.n_steps!r}")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ValueError(f"snapshot_stride must be an integer >= 1, got {self.snapshot_stride!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


def kinetic_symbol(grid: GridSpec, metric: MetricSignature, constants: ModelConstants) -> np.ndarray:
    """Eigenvalues of K = -(hbar^2/2m) d_i d^i on the FFT wavenumber mesh."""
    return constants.hbar**2 / (2.0 * constants.mass) * signed_k2(grid, metric)


def _check_aliasing(kin: np.ndarray, ds: float, hbar: float) -> None:
    worst = ds * float(np.max(np.abs(kin))) / hbar
    if worst > np.pi:
        warnings.warn(
            f"ds * max|K| / hbar = {worst:.3g} exceeds pi; kinetic phase aliases on the finest modes",
            AliasingWarning, stacklevel=3)


def _is_table_per_step(U: Potential, grid: GridSpec) -> bool:
    return U.kind == "tabulated" and np.asarray(U.values).shape != grid.shape


def _s_dependent(U: Potential, grid: GridSpec) -> bool:
    if U.kind == "expression":
        return "s" in _expr_names(U.expression)
    return _is_table_per_step(U, grid)


class _SplitStepper:
    """Cached phase factors for repeated Strang steps at fixed ds."""

    def __init__(self, grid, metric, U, constants, ds, imaginary=False):
        self.grid, self.U, self.constants, self.ds = grid, U, constants, ds
        hbar = constants.hbar
        kin = kinetic_symbol(grid, metric, constants)
        if imaginary:
            self.kin_factor = np.exp(-kin * ds / hbar)
        else:
            _check_aliasing(kin, ds, hbar)
            self.kin_factor = np.exp(-1j * kin * ds / hbar)
        self.imaginary = imaginary
        self.static = not _s_dependent(U, grid)
        self._half = None
        if self.static and not U.is_zero:
            self._half = self._half_factor(U.evaluate(grid, 0.0, constants))
        self.workers = fft_workers()

    def _half_factor(self, u):
        hbar = self.constants.hbar
        if self.imaginary:
            return np.exp(-u * self.ds / (2.0 * hbar))
        return np.exp(-1j * u * self.ds / (2.0 * hbar))

    def half(self, s, step_index):
        if self.U.is_zero:
            return None
        if self.static:
            return self._half
        return self._half_factor(self.U.evaluate(self.grid, s, self.constants, step_index))

    def kinetic(self, psi):
        w = self.workers
        return sfft.ifftn(sfft.fftn(psi, workers=w) * self.kin_factor, workers=w)

    def step(self, psi, s, step_index):
        h1 = self.half(s, step_index)
        if h1 is not None:
            psi = psi * h1
        psi = self.kinetic(psi)
        h2 = self.half(s + self.ds, step_index + 1) if not self.static else h1
        if h2 is not None:
            psi = psi * h2
        return psi


class _CrankNicolson:
    """(1 + i ds H / 2hbar) psi' = (1 - i ds H / 2hbar) psi, solved by GMRES.

    H is applied spectrally; the kinetic-only Cayley inverse (diagonal in
    transform space) preconditions the solve.
    """

    def __init__(self, grid, metric, U, constants, ds, rtol=1e-14):
        self.grid, self.U, self.constants, self.ds, self.rtol = grid, U, constants, ds, rtol
        self.kin = kinetic_symbol(grid, metric, constants)
        self.a = 0.5j * ds / constants.hbar
        self.static = not _s_dependent(U, grid)
        self._u = U.evaluate(grid, 0.0, constants) if self.static else None
        self.workers = fft_workers()

    def _apply_h(self, psi, u):
        w = self.workers
        out = sfft.ifftn(sfft.fftn(psi, workers=w) * self.kin, workers=w)
        if u is not None:
            out = out + u * psi
        return out

    def step(self, psi, s, step_index):
        shape = psi.shape
        u_now = self._u if self.static else self.U.evaluate(self.grid, s, self.constants, step_index)
        u_next = self._u if self.static else self.U.evaluate(
            self.grid, s + self.ds, self.constants, step_index + 1)
        if self.U.is_zero:
            u_now = u_next = None
        rhs = psi - self.a * self._apply_h(psi, u_now)
        cayley = 1.0 / (1.0 + self.a * self.kin)
        w = self.workers

        def precond(v):
            v = v.reshape(shape)
            return sfft.ifftn(sfft.fftn(v, workers=w) * cayley, workers=w).ravel()

        if u_next is None:
            return precond(rhs.ravel()).reshape(shape)

        def matvec(v):
            v = v.reshape(shape)
            return (v + self.a * self._apply_h(v, u_next)).ravel()

        n = psi.size
        A = LinearOperator((n, n), matvec=matvec, dtype=complex)
        M = LinearOperator((n, n), matvec=precond, dtype=complex)
        x0 = precond(rhs.ravel())
        sol, info = gmres(A, rhs.ravel(), x0=x0, M=M, rtol=self.rtol, atol=0.0,
                          restart=50, maxiter=200)
        if info != 0:
            raise FloatingPointError(f"Crank-Nicolson GMRES did not converge (info={info})")
        return sol.reshape(shape)


def _stepper(field, U, cfg, constants):
    if cfg.scheme == "split-step":
        return _SplitStepper(field.grid, field.metric, U, constants, cfg.ds)
    return _CrankNicolson(field.grid, field.metric, U, constants, cfg.ds)


def step(field: WaveField, U: Potential, cfg: EvolveConfig,
         constants: ModelConstants | None = None, step_index: int = 0) -> WaveField:
    """Advance ``field`` by one step ``cfg.ds``."""
    constants = constants or ModelConstants()
    psi = check_finite_array(field.values, "field", field.grid.node_coords).astype(complex)
    stepper = _stepper(field, U, cfg, constants)
    return field.with_values(stepper.step(psi, field.s, step_index), s=field.s + cfg.ds)


def evolve(field: WaveField, U: Potential, cfg: EvolveConfig,
           constants: ModelConstants | None = None,
           callback: Callable[[WaveField], None] | None = None,
           keep_snapshots: bool = True) -> list[WaveField]:
    """Run ``cfg.n_steps`` steps; return snapshots every ``snapshot_stride`` steps.

    The initial field is the first snapshot and the final field is always
    included. Every snapshot is passed to ``callback``; with
    ``keep_snapshots=False`` only the last one is retained in the result.

    With U = 0 under split-step, consecutive kinetic factors are
    applied in transform space and the field is only transformed back at
    snapshots; the result is the same product of per-step factors.
    """
    constants = constants or ModelConstants()
    psi = check_finite_array(field.values, "field", field.grid.node_coords).astype(complex)
    stepper = _stepper(field, U, cfg, constants)
    s0, ds = field.s, cfg.ds
    snaps = [field.with_values(psi.copy(), s=s0)]
    if callback:
        callback(snaps[0])

    def emit(values, j):
        snap = field.with_values(values, s=s0 + j * ds)
        if not keep_snapshots:
            snaps.clear()
        snaps.append(snap)
        if callback:
            callback(snap)

    stride = cfg.snapshot_stride
    if cfg.scheme == "split-step" and U.is_zero:
        w = stepper.workers
        spec = sfft.fftn(psi, workers=w)
        kf = stepper.kin_factor
        for j in range(1, cfg.n_steps + 1):
            spec *= kf
            if j % stride == 0 or j == cfg.n_steps:
                emit(sfft.ifftn(spec, workers=w), j)
        return snaps

    for j in range(1, cfg.n_steps + 1):
        psi = stepper.step(psi, s0 + (j - 1) * ds, j - 1)
        if not np.all(np.isfinite(psi)):
            raise FloatingPointError(f"non-finite field after step {j}")
        if j % stride == 0 or j == cfg.n_steps:
            emit(psi.copy(), j)
    return snaps


def expectation_K(field: WaveField, constants: ModelConstants | None = None,
                  imag_tol: float = 1e-10) -> float:
    """<psi|K|psi> with K = -(hbar^2/2m) d_i d^i, for a normalized field.

    Evaluated in transform space via Parseval. The imaginary part of the
    position-space form is logged and, if above ``imag_tol``, warned about.
    """
    constants = constants or ModelConstants()
    psi = check_finite_array(field.values, "field", field.grid.node_coords)
    kin = kinetic_symbol(field.grid, field.metric, constants)
    w = fft_workers()
    spec = sfft.fftn(psi, workers=w)
    # Parseval: sum |psi|^2 dV = dV/N sum |spec|^2
    dv_over_n = field.grid.cell_volume / field.grid.size
    value = float(np.sum(kin * np.abs(spec) ** 2) * dv_over_n)
    kpsi = sfft.ifftn(spec * kin, workers=w)
    residual = float(np.imag(np.sum(np.conj(psi) * kpsi) * field.grid.cell_volume))
    log.debug("expectation_K imaginary residual %.3e", residual)
    if abs(residual) > imag_tol * max(1.0, abs(value)):
        warnings.warn(f"<K> has imaginary residual {residual:.3e}", RuntimeWarning, stacklevel=2)
    return value


def expectation_U(field: WaveField, U: Potential, constants: ModelConstants | None = None) -> float:
    u = U.evaluate(field.grid, field.s, constants)
    return float(np.sum(u * field.density()) * field.grid.cell_volume)


def expectation_energy(field: WaveField, U: Potential, constants: ModelConstants | None = None) -> float:
    """<K + U>."""
    return expectation_K(field, constants) + expectation_U(field, U, constants)


def ground_state(grid: GridSpec, metric: MetricSignature, U: Potential,
                 constants: ModelConstants | None = None, dtau: float = 1e-3,
                 tol: float = 1e-13, max_steps: int = 200_000,
                 initial: WaveField | None = None) -> WaveField:
    """Lowest eigenstate by imaginary-time relaxation (renormalized split-step).

    Needs a Euclidean signature: under an indefinite kinetic form the
    spectrum is unbounded below and relaxation has no fixed point.
    """
    if not metric.is_euclidean:
        raise ValueError("imaginary-time relaxation needs a Euclidean signature")
    if _s_dependent(U, grid):
        raise ValueError("imaginary-time relaxation needs an s-independent potential")
    constants = constants or ModelConstants()
    if initial is None:
        from .fieldgrid import gaussian_packet
        initial = gaussian_packet(grid, metric, sigma=1.0)
    stepper = _SplitStepper(grid, metric, U, constants, dtau, imaginary=True)
    dv = grid.cell_volume
    psi = initial.values.astype(complex)
    energy = np.inf
    for j in range(max_steps):
        psi = stepper.step(psi, 0.0, 0)
        psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * dv)
        if j % 50 == 49:
            e_new = expectation_energy(initial.with_values(psi), U, constants)
            if abs(e_new - energy) < tol * max(1.0, abs(e_new)):
                break
            energy = e_new
    # relaxation from a real start keeps psi real up to rounding
    psi = psi.real if np.max(np.abs(psi.imag)) < 1e-12 * np.max(np.abs(psi)) else psi
    return WaveField(grid, metric, psi.astype(complex), 0.0).normalized()


def free_gaussian_width(s, sigma0: float = 1.0, constants: ModelConstants | None = None):
    """Std of |psi|^2 for a free Gaussian: sigma0 sqrt(1 + (hbar s / 2 m sigma0^2)^2)."""
    constants = constants or ModelConstants()
    tau = constants.hbar * np.asarray(s) / (2.0 * constants.mass * sigma0**2)
    return sigma0 * np.sqrt(1.0 + tau**2)


def packet_width(field: WaveField, axis: int = 0) -> float:
    """Standard deviation of |psi|^2 along ``axis``."""
    p = field.density()
    p = p / p.sum()
    q = field.grid.mesh()[axis]
    mean = float(np.sum(q * p))
    return float(np.sqrt(np.sum((q - mean) ** 2 * p)))
