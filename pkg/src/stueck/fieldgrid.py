"""Periodic configuration-space grids, metric signatures and field operators.

Derivatives are spectral by default. A second-order central-difference
backend is available for cross-checks; both honour the metric signature
when raising an index (``d^a = sign_a * d_a``).
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from ._validation import check_finite_array, check_finite_scalar
from .constants import ModelConstants  # noqa: F401  (re-exported)

SCHEMA_VERSION = 1
BACKENDS = ("spectral", "fd")
ALLOWED_DIMS = (1, 2, 4)


def fft_workers() -> int:
    """Thread cap for FFTs, read from ``STUECK_THREADS`` (default 1)."""
    raw = os.environ.get("STUECK_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"STUECK_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


@dataclass(frozen=True)
class MetricSignature:
    signs: tuple[int, ...]

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError(f"metric signs must be +1 or -1, got {self.signs!r}")
        if len(signs) not in ALLOWED_DIMS:
            raise ValueError(f"metric dimension must be one of {ALLOWED_DIMS}, got {len(signs)}")
        object.__setattr__(self, "signs", signs)

    @classmethod
    def euclidean(cls, ndim: int) -> "MetricSignature":
        return cls((1,) * ndim)

    @classmethod
    def minkowski(cls, ndim: int = 4) -> "MetricSignature":
        return cls((1,) + (-1,) * (ndim - 1))

    @property
    def ndim(self) -> int:
        return len(self.signs)

    @property
    def is_euclidean(self) -> bool:
        return all(s == 1 for s in self.signs)


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        lo = check_finite_scalar(self.lo, "axis lo")
        hi = check_finite_scalar(self.hi, "axis hi")
        if hi <= lo:
            raise ValueError(f"axis extent must satisfy hi > lo, got [{lo}, {hi}]")
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"axis point count must be an integer >= 8, got {self.n!r}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", int(self.n))

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / self.n

    def coords(self) -> np.ndarray:
        return self.lo + self.spacing * np.arange(self.n)

    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)


@dataclass(frozen=True)
class GridSpec:
    """Rectangular periodic grid; node j sits at lo + j*h, h = (hi-lo)/n."""

    axes: tuple[Axis, ...]

    def __post_init__(self):
        axes = tuple(a if isinstance(a, Axis) else Axis(*a) for a in self.axes)
        if len(axes) not in ALLOWED_DIMS:
            raise ValueError(f"grid dimension must be one of {ALLOWED_DIMS}, got {len(axes)}")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int, ndim: int = 1) -> "GridSpec":
        return cls(tuple(Axis(lo, hi, n) for _ in range(ndim)))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(a.spacing for a in self.axes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def coords(self) -> list[np.ndarray]:
        return [a.coords() for a in self.axes]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.coords(), indexing="ij")

    def wavenumber_mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[a.wavenumbers() for a in self.axes], indexing="ij", sparse=True)

    def node_coords(self, idx) -> tuple[float, ...]:
        return tuple(a.lo + a.spacing * int(i) for a, i in zip(self.axes, idx))

    def wrap(self, q: np.ndarray) -> np.ndarray:
        """Map positions (..., D) back into the periodic cell."""
        q = np.array(q, dtype=float, copy=True)
        for a, ax in enumerate(self.axes):
            q[..., a] = ax.lo + np.mod(q[..., a] - ax.lo, ax.length)
        return q


@dataclass(frozen=True, eq=False)
class WaveField:
    """Field values on a grid at evolution parameter ``s``.

    ``values`` may be complex (a wave function) or real (amplitude, phase,
    density); the derivative operators accept either.
    """

    grid: GridSpec
    metric: MetricSignature
    values: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        if self.metric.ndim != self.grid.ndim:
            raise ValueError(
                f"metric has {self.metric.ndim} axes but grid has {self.grid.ndim}")
        values = np.asarray(self.values)
        if values.size != self.grid.size:
            raise ValueError(
                f"value array has {values.size} entries, grid needs {self.grid.size}")
        values = values.reshape(self.grid.shape)
        if not np.iscomplexobj(values):
            values = values.astype(float, copy=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "s", float(self.s))

    def with_values(self, values: np.ndarray, s: float | None = None) -> "WaveField":
        return replace(self, values=values, s=self.s if s is None else s)

    def norm(self) -> float:
        """sum |psi|^2 dV."""
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume)

    def normalized(self) -> "WaveField":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize an all-zero field")
        return self.with_values(self.values / np.sqrt(nrm))

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2


def _as_values(field: WaveField) -> np.ndarray:
    return check_finite_array(field.values, "field", field.grid.node_coords)


def _check_backend(backend: str) -> None:
    if backend not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {backend!r}")


def _fft_axis(values, axis, inverse=False):
    f = sfft.ifft if inverse else sfft.fft
    return f(values, axis=axis, workers=fft_workers())


def spectral_derivative(values: np.ndarray, grid: GridSpec, axis: int, order: int) -> np.ndarray:
    """Plain (unsigned) spectral derivative of ``order`` 1 or 2 along ``axis``."""
    k = grid.axes[axis].wavenumbers()
    n = grid.axes[axis].n
    if order == 1:
        mult = 1j * k
        if n % 2 == 0:
            mult[n // 2] = 0.0  # Nyquist mode has no odd-derivative partner
    elif order == 2:
        mult = -(k**2)
    else:
        raise ValueError("order must be 1 or 2")
    shape = [1] * grid.ndim
    shape[axis] = n
    out = _fft_axis(_fft_axis(values, axis) * mult.reshape(shape), axis, inverse=True)
    if not np.iscomplexobj(values):
        out = out.real
    return out


def fd_derivative(values: np.ndarray, grid: GridSpec, axis: int, order: int) -> np.ndarray:
    """Second-order periodic central difference along ``axis``."""
    h = grid.axes[axis].spacing
    fwd = np.roll(values, -1, axis=axis)
    bwd = np.roll(values, 1, axis=axis)
    if order == 1:
        return (fwd - bwd) / (2.0 * h)
    if order == 2:
        return (fwd - 2.0 * values + bwd) / h**2
    raise ValueError("order must be 1 or 2")


def derivative(values, grid, axis, order, backend="spectral"):
    _check_backend(backend)
    fn = spectral_derivative if backend == "spectral" else fd_derivative
    return fn(values, grid, axis, order)


def signed_laplacian(field: WaveField, backend: str = "spectral") -> np.ndarray:
    """sum_a sign_a d^2/dq_a^2 of the field (the operator d_i d^i)."""
    _check_backend(backend)
    values = _as_values(field)
    if backend == "spectral":
        # single forward/inverse pair over all axes
        kk = signed_k2(field.grid, field.metric)
        out = sfft.ifftn(sfft.fftn(values, workers=fft_workers()) * (-kk), workers=fft_workers())
        return out if np.iscomplexobj(values) else out.real
    out = np.zeros_like(values)
    for a, sign in enumerate(field.metric.signs):
        out = out + sign * fd_derivative(values, field.grid, a, 2)
    return out


def signed_gradient(field: WaveField, backend: str = "spectral") -> np.ndarray:
    """Components d^a f = sign_a d_a f, stacked on a leading axis of length D."""
    _check_backend(backend)
    values = _as_values(field)
    return np.stack([sign * derivative(values, field.grid, a, 1, backend)
                     for a, sign in enumerate(field.metric.signs)])


def gradient(field: WaveField, backend: str = "spectral") -> np.ndarray:
    """Lower-index components d_a f (no metric signs)."""
    _check_backend(backend)
    values = _as_values(field)
    return np.stack([derivative(values, field.grid, a, 1, backend)
                     for a in range(field.grid.ndim)])


def divergence(components: np.ndarray, grid: GridSpec, backend: str = "spectral") -> np.ndarray:
    """sum_a d_a F^a for a stacked vector field."""
    _check_backend(backend)
    return sum(derivative(components[a], grid, a, 1, backend) for a in range(grid.ndim))


def signed_k2(grid: GridSpec, metric: MetricSignature) -> np.ndarray:
    """sum_a sign_a k_a^2 on the FFT-ordered wavenumber mesh."""
    total = np.zeros(grid.shape)
    for sign, k in zip(metric.signs, grid.wavenumber_mesh()):
        total = total + sign * k**2
    return total


def gaussian_packet(grid: GridSpec, metric: MetricSignature, sigma=1.0, center=0.0,
                    wavenumber=0.0, s: float = 0.0) -> WaveField:
    """Normalized product Gaussian, |psi|^2 having std ``sigma`` per axis."""
    sig = np.broadcast_to(np.asarray(sigma, dtype=float), (grid.ndim,))
    q0 = np.broadcast_to(np.asarray(center, dtype=float), (grid.ndim,))
    k0 = np.broadcast_to(np.asarray(wavenumber, dtype=float), (grid.ndim,))
    psi = np.ones(grid.shape, dtype=complex)
    for a, q in enumerate(grid.mesh()):
        psi = psi * np.exp(-((q - q0[a]) ** 2) / (4.0 * sig[a] ** 2) + 1j * k0[a] * q)
    return WaveField(grid, metric, psi, s).normalized()


def plane_wave(grid: GridSpec, metric: MetricSignature, wavenumber=1.0, s: float = 0.0) -> WaveField:
    """Normalized plane wave exp(i k.q); k must be commensurate with the box."""
    k0 = np.broadcast_to(np.asarray(wavenumber, dtype=float), (grid.ndim,))
    phase = sum(k0[a] * q for a, q in enumerate(grid.mesh()))
    return WaveField(grid, metric, np.exp(1j * phase), s).normalized()


def field_to_csv(field: WaveField) -> str:
    """Serialize as rows (q_0..q_{D-1}, re, im), row-major, 17 significant digits."""
    buf = io.StringIO()
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
    buf.write(f"# s: {field.s:.17g}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"q_{a}" for a in range(field.grid.ndim)] + ["re", "im"])
    q = [m.ravel() for m in field.grid.mesh()]
    vals = np.asarray(field.values, dtype=complex).ravel()
    for j in range(vals.size):
        writer.writerow([f"{qa[j]:.17g}" for qa in q]
                        + [f"{vals[j].real:.17g}", f"{vals[j].imag:.17g}"])
    return buf.getvalue()


def field_from_csv(text: str, grid: GridSpec, metric: MetricSignature) -> WaveField:
    """Inverse of :func:`field_to_csv`; the grid is supplied by the caller."""
    s = 0.0
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            if key.strip() == "s":
                s = float(val)
            continue
        rows.append(line)
    reader = csv.reader(rows)
    header = next(reader)
    expected = [f"q_{a}" for a in range(grid.ndim)] + ["re", "im"]
    if header != expected:
        raise ValueError(f"unexpected CSV header {header!r}, expected {expected!r}")
    data = np.array([[float(x) for x in r] for r in reader])
    if data.shape[0] != grid.size:
        raise ValueError(f"CSV has {data.shape[0]} rows, grid needs {grid.size}")
    values = data[:, -2] + 1j * data[:, -1]
    return WaveField(grid, metric, values.reshape(grid.shape), s)


def as_grid(lo: Sequence[float], hi: Sequence[float], n: Sequence[int]) -> GridSpec:
    if not (len(lo) == len(hi) == len(n)):
        raise ValueError("lo, hi and n must have the same length")
    return GridSpec(tuple(Axis(a, b, c) for a, b, c in zip(lo, hi, n)))
